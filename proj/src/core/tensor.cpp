#include "core/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dasfft {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    for (int d : shape) require(d > 0, "tensor extents must be positive, got " + shape_str(shape));
    data.assign(static_cast<std::size_t>(shape_numel(shape)), fill);
}

Tensor Tensor::scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
}

Tensor Tensor::from_vector(std::vector<double> v) {
    Tensor t;
    t.shape = {static_cast<int>(v.size())};
    t.data = std::move(v);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::item() const {
    require(data.size() == 1, "item() on tensor of shape " + shape_str(shape));
    return data[0];
}

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

std::int64_t shape_numel(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(where) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

static void write_le_doubles(std::ostream& os, const std::vector<double>& v) {
    // Host is little-endian on every supported target.
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void write_tensor(const Tensor& t, std::ostream& os) {
    os << "TENS v1 " << t.ndim();
    for (int d : t.shape) os << " " << d;
    os << "\n";
    write_le_doubles(os, t.data);
}

Tensor read_tensor(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("TENS: missing header");
    std::istringstream hs(line);
    std::string magic, version;
    int nd = 0;
    hs >> magic >> version >> nd;
    if (magic != "TENS" || version != "v1" || nd < 1)
        throw std::runtime_error("TENS: bad header '" + line + "'");
    std::vector<int> shape(static_cast<std::size_t>(nd));
    for (int& d : shape) {
        hs >> d;
        if (!hs || d <= 0) throw std::runtime_error("TENS: bad extent in '" + line + "'");
    }
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("TENS: truncated payload");
    return t;
}

void save_tensor(const Tensor& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    write_tensor(t, os);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for read: " + path);
    return read_tensor(is);
}

}  // namespace dasfft
