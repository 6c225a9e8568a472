#include "core/optim.hpp"

#include <cmath>

namespace dasfft {

void adam_step(AdamState& st, const AdamHyper& hp, Tensor& param, const Tensor& grad) {
    require_same_shape(param, grad, "adam_step");
    st.ensure_shape(param);
    st.step += 1;
    double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step));
    double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        double g = grad.data[i];
        st.m.data[i] = hp.beta1 * st.m.data[i] + (1.0 - hp.beta1) * g;
        st.v.data[i] = hp.beta2 * st.v.data[i] + (1.0 - hp.beta2) * g * g;
        double mhat = st.m.data[i] / bc1;
        double vhat = st.v.data[i] / bc2;
        param.data[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
}

}  // namespace dasfft
