#include "fnbench/adam.hpp"

#include "fnbench/errors.hpp"

#include <cmath>
#include <string>

namespace fnbench {

AdamState AdamState::init(const std::vector<const Matrix*>& params, AdamConfig cfg) {
    AdamState st;
    st.cfg = cfg;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const Matrix* p : params) {
        st.m.emplace_back(p->rows, p->cols);
        st.v.emplace_back(p->rows, p->cols);
    }
    return st;
}

void adam_step(const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw shape_error("adam_step: parameter/gradient/state count mismatch");

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, t);

    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        const Matrix& g = *grads[k];
        Matrix& m = state.m[k];
        Matrix& v = state.v[k];
        if (!p.same_shape(g) || !p.same_shape(m))
            throw shape_error("adam_step: shape mismatch at parameter " +
                              std::to_string(k) + ", param " + p.shape_str() +
                              " vs grad " + g.shape_str());
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double gi = g.data[i];
            m.data[i] = state.cfg.beta1 * m.data[i] + (1.0 - state.cfg.beta1) * gi;
            v.data[i] = state.cfg.beta2 * v.data[i] + (1.0 - state.cfg.beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.epsilon);
        }
    }
}

} // namespace fnbench
