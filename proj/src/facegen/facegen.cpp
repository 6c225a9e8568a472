#include "facegen/facegen.hpp"

#include <algorithm>
#include <cmath>

#include "core/rng.hpp"

namespace dasfft {

std::vector<ComponentBox> component_boxes() {
    return {
        {0, 0.00, 0.00, 1.00, 1.00},  // whole face
        {1, 0.20, 0.30, 0.45, 0.50},  // left eye
        {2, 0.55, 0.30, 0.80, 0.50},  // right eye
        {3, 0.38, 0.45, 0.62, 0.70},  // nose
        {4, 0.30, 0.68, 0.70, 0.88},  // mouth
    };
}

namespace {

struct Rgb {
    double r, g, b;
};

bool in_ellipse(double x, double y, double cx, double cy, double ax, double ay) {
    double dx = (x - cx) / ax, dy = (y - cy) / ay;
    return dx * dx + dy * dy <= 1.0;
}

// barycentric point-in-triangle
bool in_triangle(double px, double py, double x1, double y1, double x2, double y2, double x3,
                 double y3) {
    double d = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3);
    double a = ((y2 - y3) * (px - x3) + (x3 - x2) * (py - y3)) / d;
    double b = ((y3 - y1) * (px - x3) + (x1 - x3) * (py - y3)) / d;
    double c = 1.0 - a - b;
    return a >= 0.0 && b >= 0.0 && c >= 0.0;
}

}  // namespace

FaceSample generate_face(std::uint64_t seed, int resolution) {
    require(resolution >= 32 && resolution % 4 == 0,
            "generate_face: resolution must be >= 32 and a multiple of 4");
    const int r = resolution;
    Rng root(seed);

    Rng pal = root.sub("palette");
    Rgb skin{pal.uniform(0.72, 0.90), 0, 0};
    skin.g = skin.r * pal.uniform(0.72, 0.85);
    skin.b = skin.g * pal.uniform(0.70, 0.85);
    Rgb background{pal.uniform(0.25, 0.45), pal.uniform(0.30, 0.50), pal.uniform(0.40, 0.62)};
    Rgb eye{pal.uniform(0.05, 0.22), pal.uniform(0.08, 0.25), pal.uniform(0.10, 0.30)};
    double nose_shade = pal.uniform(0.82, 0.93);
    Rgb nose{skin.r * nose_shade, skin.g * nose_shade, skin.b * nose_shade};
    Rgb mouth{pal.uniform(0.58, 0.80), pal.uniform(0.12, 0.28), pal.uniform(0.18, 0.34)};

    Rng noise = root.sub("texture");
    const double noise_amp = 0.03;  // well under the 0.05 cap
    Rng geo = root.sub("depth");
    double bg_depth = geo.uniform(2.5, 3.5);
    double face_relief = geo.uniform(1.2, 1.8);

    // face geometry in fractional coordinates
    const double fcx = 0.50, fcy = 0.52, fax = 0.36, fay = 0.44;

    FaceSample s;
    s.seed = seed;
    s.resolution = r;
    s.image = Tensor({3, r, r});
    s.depth = Tensor({1, r, r});
    s.parsing.assign(static_cast<std::size_t>(r) * r, kBackground);

    for (int y = 0; y < r; ++y) {
        double fy = (y + 0.5) / r;
        for (int x = 0; x < r; ++x) {
            double fx = (x + 0.5) / r;
            int label = kBackground;
            Rgb col = background;
            bool on_face = in_ellipse(fx, fy, fcx, fcy, fax, fay);
            if (on_face) col = skin;
            if (in_ellipse(fx, fy, 0.325, 0.40, 0.085, 0.055)) {
                label = kLeftEye;
                col = eye;
            } else if (in_ellipse(fx, fy, 0.675, 0.40, 0.085, 0.055)) {
                label = kRightEye;
                col = eye;
            } else if (in_triangle(fx, fy, 0.50, 0.47, 0.42, 0.67, 0.58, 0.67)) {
                label = kNose;
                col = nose;
            } else if (in_ellipse(fx, fy, 0.50, 0.78, 0.16, 0.075)) {
                label = kMouth;
                col = mouth;
            }
            s.parsing[static_cast<std::size_t>(y) * r + x] = label;
            double n0 = noise.uniform(-noise_amp, noise_amp);
            s.image.at3(0, y, x) = std::clamp(col.r + n0, 0.0, 1.0);
            s.image.at3(1, y, x) = std::clamp(col.g + noise.uniform(-noise_amp, noise_amp), 0.0, 1.0);
            s.image.at3(2, y, x) = std::clamp(col.b + noise.uniform(-noise_amp, noise_amp), 0.0, 1.0);

            double dome = 0.0;
            double dx = (fx - fcx) / fax, dy = (fy - fcy) / fay;
            double q = dx * dx + dy * dy;
            if (q < 1.0) dome = std::sqrt(1.0 - q);
            s.depth.at3(0, y, x) = bg_depth - face_relief * dome;
        }
    }
    return s;
}

}  // namespace dasfft
