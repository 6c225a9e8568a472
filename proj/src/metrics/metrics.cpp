#include "metrics/metrics.hpp"

#include <cmath>
#include <fstream>

namespace dasfft {

double psnr(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "psnr");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    double mse = acc / static_cast<double>(a.data.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

constexpr int kWin = 11;

const std::vector<double>& ssim_window() {
    static const std::vector<double> w = [] {
        std::vector<double> win(kWin * kWin);
        double sigma = 1.5, total = 0.0;
        for (int y = 0; y < kWin; ++y)
            for (int x = 0; x < kWin; ++x) {
                double dy = y - 5, dx = x - 5;
                double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                win[static_cast<std::size_t>(y) * kWin + x] = v;
                total += v;
            }
        for (double& v : win) v /= total;
        return win;
    }();
    return w;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "ssim");
    require(a.ndim() == 3, "ssim: expected [C,H,W]");
    int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    require(h >= kWin && w >= kWin, "ssim: image too small, min side is 11");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const std::vector<double>& win = ssim_window();

    double total = 0.0;
    long count = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y + kWin <= h; ++y) {
            for (int x = 0; x + kWin <= w; ++x) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int i = 0; i < kWin; ++i)
                    for (int j = 0; j < kWin; ++j) {
                        double wv = win[static_cast<std::size_t>(i) * kWin + j];
                        double va = a.at3(ch, y + i, x + j);
                        double vb = b.at3(ch, y + i, x + j);
                        mx += wv * va;
                        my += wv * vb;
                        sxx += wv * va * va;
                        syy += wv * vb * vb;
                        sxy += wv * va * vb;
                    }
                double vx = sxx - mx * mx;
                double vy = syy - my * my;
                double cov = sxy - mx * my;
                double val = ((2 * mx * my + c1) * (2 * cov + c2)) /
                             ((mx * mx + my * my + c1) * (vx + vy + c2));
                total += val;
                ++count;
            }
        }
    }
    return total / count;
}

double MetricReport::mean_psnr() const {
    double s = 0.0;
    for (const MetricRow& r : rows) s += r.psnr_db;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double MetricReport::mean_ssim() const {
    double s = 0.0;
    for (const MetricRow& r : rows) s += r.ssim;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

void write_metric_csv(const MetricReport& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "sample, psnr_db, ssim, lpips, fid\n";
    os.precision(10);
    for (const MetricRow& r : report.rows)
        os << r.sample << ", " << r.psnr_db << ", " << r.ssim << ", n/a, n/a\n";
    os << "mean, " << report.mean_psnr() << ", " << report.mean_ssim() << ", n/a, n/a\n";
}

}  // namespace dasfft
