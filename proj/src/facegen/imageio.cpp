#include "facegen/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dasfft {

namespace {

int read_pnm_header(std::istream& is, const std::string& magic, int& h, int& w) {
    std::string m;
    is >> m;
    if (m != magic) throw std::runtime_error("expected " + magic + " file, got '" + m + "'");
    int vals[3], got = 0;
    while (got < 3) {
        int c = is.peek();
        if (c == '#') {
            std::string junk;
            std::getline(is, junk);
            continue;
        }
        if (!(is >> vals[got])) throw std::runtime_error(magic + ": bad header");
        ++got;
    }
    is.get();  // single whitespace after maxval
    w = vals[0];
    h = vals[1];
    return vals[2];
}

}  // namespace

void save_ppm(const Tensor& img, const std::string& path) {
    require(img.ndim() == 3 && img.dim(0) == 3, "save_ppm: image must be [3,H,W]");
    int h = img.dim(1), w = img.dim(2);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(img.at3(c, y, x), 0.0, 1.0);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

Tensor load_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for read: " + path);
    int h = 0, w = 0;
    int maxval = read_pnm_header(is, "P6", h, w);
    require(maxval == 255, "load_ppm: only 8-bit PPM supported");
    Tensor img({3, h, w});
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!is) throw std::runtime_error("load_ppm: truncated file " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at3(c, y, x) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0;
    }
    return img;
}

void save_pgm(const std::vector<int>& labels, int h, int w, const std::string& path) {
    require(static_cast<int>(labels.size()) == h * w, "save_pgm: label count != h*w");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> buf(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) buf[i] = static_cast<unsigned char>(labels[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<int> load_pgm(const std::string& path, int& h, int& w) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for read: " + path);
    int maxval = read_pnm_header(is, "P5", h, w);
    require(maxval == 255, "load_pgm: only 8-bit PGM supported");
    std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("load_pgm: truncated file " + path);
    std::vector<int> out(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i];
    return out;
}

}  // namespace dasfft
