#include "core/fdgrad.hpp"

#include <cmath>
#include <stdexcept>

namespace dasfft {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
    Tensor probe = x;
    Tensor grad(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        double orig = probe.data[i];
        probe.data[i] = orig + h;
        double fp = f(probe);
        probe.data[i] = orig - h;
        double fm = f(probe);
        probe.data[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_grad: non-finite function value near x");
        grad.data[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

double grad_rel_err(const Tensor& analytic, const Tensor& numeric) {
    require_same_shape(analytic, numeric, "grad_rel_err");
    double max_diff = 0.0, max_mag = 1e-8;
    for (std::size_t i = 0; i < analytic.data.size(); ++i) {
        max_diff = std::max(max_diff, std::abs(analytic.data[i] - numeric.data[i]));
        max_mag = std::max({max_mag, std::abs(analytic.data[i]), std::abs(numeric.data[i])});
    }
    return max_diff / max_mag;
}

}  // namespace dasfft
