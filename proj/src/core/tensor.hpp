#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dasfft {

// Dense row-major tensor of 64-bit floats. The single value carrier for the
// whole pipeline; shape is explicit and checked at op boundaries.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, double fill = 0.0);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s), 0.0); }
    static Tensor full(std::vector<int> s, double v) { return Tensor(std::move(s), v); }
    static Tensor scalar(double v);
    static Tensor from_vector(std::vector<double> v);

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    // [C,H,W] accessors; no bounds checks in release builds.
    double& at3(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    const double& at3(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    double& at2(int y, int x) { return data[static_cast<std::size_t>(y) * shape[1] + x]; }
    double at2(int y, int x) const { return data[static_cast<std::size_t>(y) * shape[1] + x]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    double item() const;  // value of a 1-element tensor
};

std::string shape_str(const std::vector<int>& s);
std::int64_t shape_numel(const std::vector<int>& s);

void require(bool cond, const std::string& msg);
void require_same_shape(const Tensor& a, const Tensor& b, const char* where);

// TENS v1 text-header + raw little-endian doubles.
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);
void write_tensor(const Tensor& t, std::ostream& os);
Tensor read_tensor(std::istream& is);

}  // namespace dasfft
