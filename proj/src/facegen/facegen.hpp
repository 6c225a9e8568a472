#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace dasfft {

// Parsing labels.
enum FaceLabel { kBackground = 0, kLeftEye = 1, kRightEye = 2, kNose = 3, kMouth = 4 };
inline constexpr int kNumComponents = 5;

struct FaceSample {
    Tensor image;               // [3,R,R] in [0,1]
    std::vector<int> parsing;   // R*R labels in {0..4}
    Tensor depth;               // [1,R,R] >= 0
    std::uint64_t seed = 0;
    int resolution = 0;
};

// Fractional bounding box of one facial component; component 0 is the whole face.
struct ComponentBox {
    int component;
    double x0, y0, x1, y1;
};

// Fixed fractional boxes for {face, left eye, right eye, nose, mouth}.
std::vector<ComponentBox> component_boxes();

// Seeded procedural face: skin ellipse, eye ellipses, nose triangle, mouth
// ellipse, each with its own seeded color range plus low-amplitude texture
// noise, a matching parsing map, and a smooth synthetic depth map.
FaceSample generate_face(std::uint64_t seed, int resolution);

}  // namespace dasfft
