#include "degrade/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "core/ops.hpp"
#include "core/rng.hpp"

namespace dasfft {

Tensor gaussian_kernel(double sigma) {
    require(sigma >= 0.0, "gaussian_kernel: sigma must be nonnegative");
    int half = sigma > 0.0 ? static_cast<int>(std::ceil(3.0 * sigma)) : 0;
    int k = 2 * half + 1;
    Tensor ker({k, k});
    if (half == 0) {
        ker.data[0] = 1.0;
        return ker;
    }
    double inv = 1.0 / (2.0 * sigma * sigma);
    double total = 0.0;
    for (int y = -half; y <= half; ++y)
        for (int x = -half; x <= half; ++x) {
            double v = std::exp(-(x * x + y * y) * inv);
            ker.at2(y + half, x + half) = v;
            total += v;
        }
    for (double& v : ker.data) v /= total;
    return ker;
}

Tensor motion_kernel(int length, double angle_deg) {
    require(length >= 1, "motion_kernel: length must be >= 1");
    Tensor ker({length, length});
    if (length == 1) {
        ker.data[0] = 1.0;
        return ker;
    }
    double rad = angle_deg * 3.14159265358979323846 / 180.0;
    double dx = std::cos(rad), dy = std::sin(rad);
    if (std::abs(dx) < 1e-12) dx = 0.0;
    if (std::abs(dy) < 1e-12) dy = 0.0;
    double center = (length - 1) / 2.0;
    double half_span = (length - 1) / 2.0;
    int steps = length * 16;
    for (int i = 0; i <= steps; ++i) {
        double t = -half_span + (2.0 * half_span) * i / steps;
        double x = center + t * dx;
        double y = center + t * dy;
        int x0 = static_cast<int>(std::floor(x));
        int y0 = static_cast<int>(std::floor(y));
        double fx = x - x0, fy = y - y0;
        for (int oy = 0; oy <= 1; ++oy)
            for (int ox = 0; ox <= 1; ++ox) {
                int xi = x0 + ox, yi = y0 + oy;
                if (xi < 0 || xi >= length || yi < 0 || yi >= length) continue;
                double w = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
                ker.at2(yi, xi) += w;
            }
    }
    double total = 0.0;
    for (double v : ker.data) total += v;
    for (double& v : ker.data) v /= total;
    return ker;
}

namespace {

// depthwise same-padded convolution of a [C,H,W] image with a [k,k] kernel
Tensor blur_same(const Tensor& img, const Tensor& ker2d) {
    int k = ker2d.dim(0);
    if (k == 1 && ker2d.data[0] == 1.0) return img;
    Tensor k4({1, 1, k, k});
    k4.data = ker2d.data;
    Tensor out(img.shape);
    for (int c = 0; c < img.dim(0); ++c) {
        Tensor ch({1, img.dim(1), img.dim(2)});
        std::copy(img.data.begin() + static_cast<std::ptrdiff_t>(c) * img.dim(1) * img.dim(2),
                  img.data.begin() + static_cast<std::ptrdiff_t>(c + 1) * img.dim(1) * img.dim(2),
                  ch.data.begin());
        Tensor r = conv2d_fwd(ch, k4, nullptr, Padding::Same);
        std::copy(r.data.begin(), r.data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(c) * img.dim(1) * img.dim(2));
    }
    return out;
}

}  // namespace

Tensor make_rain_layer(int h, int w, const RainLayerParams& p) {
    Rng rng(p.layer_seed);
    Rng noise_rng = rng.sub("noise");
    Tensor layer({1, h, w});
    for (double& v : layer.data) v = std::clamp(noise_rng.normal(p.noise_mean, p.noise_std), 0.0, 1.0);
    Tensor mk = motion_kernel(p.motion_length, p.motion_angle);
    return blur_same(layer, mk);
}

Tensor transmission_map(const Tensor& depth, double beta) {
    require(depth.ndim() == 3 && depth.dim(0) == 1, "transmission_map: depth must be [1,H,W]");
    require(beta > 0.0, "transmission_map: beta must be positive");
    Tensor r(depth.shape);
    double rmin = 1e300, rmax = -1e300;
    for (std::size_t i = 0; i < depth.data.size(); ++i) {
        require(std::isfinite(depth.data[i]) && depth.data[i] >= 0.0,
                "transmission_map: depth must be finite and nonnegative");
        r.data[i] = 1.0 / (depth.data[i] + 0.1);
        rmin = std::min(rmin, r.data[i]);
        rmax = std::max(rmax, r.data[i]);
    }
    double span = rmax - rmin + 1e-6;
    Tensor t(depth.shape);
    for (std::size_t i = 0; i < depth.data.size(); ++i)
        t.data[i] = std::exp(-beta * (r.data[i] - rmin) / span);
    return t;
}

DegradationParams sample_params(std::uint64_t master_seed, int m_min, int m_max) {
    require(m_min >= 0 && m_max >= m_min, "sample_params: bad rain-layer range");
    Rng root(master_seed);
    DegradationParams p;
    p.master_seed = master_seed;
    p.blur_sigma = root.sub("blur").uniform(0.0, 2.5);
    p.down_target = static_cast<int>(root.sub("scale").uniform_int(32, 256));
    p.beta = root.sub("haze").uniform(2.6, 4.6);
    Rng atmo = root.sub("atmo");
    for (double& a : p.atmospheric) a = atmo.uniform(0.1, 0.8);
    int m = static_cast<int>(root.sub("rain-count").uniform_int(m_min, m_max));
    for (int i = 0; i < m; ++i) {
        Rng lr = root.sub("rain-" + std::to_string(i));
        RainLayerParams rp;
        rp.noise_mean = lr.uniform(-1.0, -0.8);
        rp.noise_std = lr.uniform(0.7, 1.0);
        rp.motion_length = 45;
        rp.motion_angle = kRainAngles[lr.uniform_int(0, 4)];
        rp.layer_seed = lr.sub("layer-seed").next_u64();
        p.rain_layers.push_back(rp);
    }
    return p;
}

Tensor degrade(const Tensor& hq, const Tensor& depth, const DegradationParams& p,
               const Tensor* t_override) {
    require(hq.ndim() == 3 && hq.dim(0) == 3, "degrade: image must be [3,H,W]");
    require(depth.ndim() == 3 && depth.dim(0) == 1 && depth.dim(1) == hq.dim(1) &&
                depth.dim(2) == hq.dim(2),
            "degrade: depth extent " + shape_str(depth.shape) + " does not match image " +
                shape_str(hq.shape));
    int h = hq.dim(1), w = hq.dim(2);

    Tensor x = blur_same(hq, gaussian_kernel(p.blur_sigma));

    // Downsample so the shorter side hits the target, then resize back so the
    // rain/haze additions stay shape-consistent.
    int short_side = std::min(h, w);
    if (p.down_target != short_side) {
        double f = static_cast<double>(p.down_target) / short_side;
        int h2 = std::max(1, static_cast<int>(std::lround(h * f)));
        int w2 = std::max(1, static_cast<int>(std::lround(w * f)));
        x = resize_bilinear_fwd(resize_bilinear_fwd(x, h2, w2), h, w);
    }

    for (const RainLayerParams& rp : p.rain_layers) {
        Tensor s = make_rain_layer(h, w, rp);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < h * w; ++i)
                x.data[static_cast<std::size_t>(c) * h * w + i] += s.data[static_cast<std::size_t>(i)];
    }

    Tensor t = t_override ? *t_override : transmission_map(depth, p.beta);
    require(t.shape == depth.shape, "degrade: transmission extent mismatch");
    Tensor out(hq.shape);
    for (int c = 0; c < 3; ++c) {
        double a = p.atmospheric[c];
        for (int i = 0; i < h * w; ++i) {
            double tv = t.data[static_cast<std::size_t>(i)];
            double v = tv * x.data[static_cast<std::size_t>(c) * h * w + i] + (1.0 - tv) * a;
            out.data[static_cast<std::size_t>(c) * h * w + i] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

std::string params_to_text(const DegradationParams& p) {
    std::ostringstream os;
    os.precision(17);
    os << "master_seed=" << p.master_seed << "\n";
    os << "blur_sigma=" << p.blur_sigma << "\n";
    os << "down_target=" << p.down_target << "\n";
    os << "beta=" << p.beta << "\n";
    os << "atmo_r=" << p.atmospheric[0] << "\n";
    os << "atmo_g=" << p.atmospheric[1] << "\n";
    os << "atmo_b=" << p.atmospheric[2] << "\n";
    os << "rain_count=" << p.rain_layers.size() << "\n";
    for (std::size_t i = 0; i < p.rain_layers.size(); ++i) {
        const RainLayerParams& r = p.rain_layers[i];
        os << "rain" << i << ".mu=" << r.noise_mean << "\n";
        os << "rain" << i << ".sigma=" << r.noise_std << "\n";
        os << "rain" << i << ".length=" << r.motion_length << "\n";
        os << "rain" << i << ".angle=" << r.motion_angle << "\n";
        os << "rain" << i << ".seed=" << r.layer_seed << "\n";
    }
    return os.str();
}

DegradationParams params_from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        require(it != kv.end(), "degradation params text: missing key '" + k + "'");
        return it->second;
    };
    DegradationParams p;
    p.master_seed = std::stoull(get("master_seed"));
    p.blur_sigma = std::stod(get("blur_sigma"));
    p.down_target = std::stoi(get("down_target"));
    p.beta = std::stod(get("beta"));
    p.atmospheric[0] = std::stod(get("atmo_r"));
    p.atmospheric[1] = std::stod(get("atmo_g"));
    p.atmospheric[2] = std::stod(get("atmo_b"));
    int m = std::stoi(get("rain_count"));
    for (int i = 0; i < m; ++i) {
        std::string pre = "rain" + std::to_string(i) + ".";
        RainLayerParams r;
        r.noise_mean = std::stod(get(pre + "mu"));
        r.noise_std = std::stod(get(pre + "sigma"));
        r.motion_length = std::stoi(get(pre + "length"));
        r.motion_angle = std::stod(get(pre + "angle"));
        r.layer_seed = std::stoull(get(pre + "seed"));
        p.rain_layers.push_back(r);
    }
    return p;
}

}  // namespace dasfft
