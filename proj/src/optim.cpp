#include "stereotrace/optim.hpp"

#include <cmath>

namespace stereotrace {

void AdamConfig::validate() const {
    require(lr > 0.0, "learning rate must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
            "adam betas must lie in [0,1)");
    require(eps > 0.0, "adam epsilon must be positive");
}

OptimizerState::OptimizerState(const Weights& w) {
    for (const auto& [name, p] : w.entries())
        moments_[name] = {Tensor(p.value.shape), Tensor(p.value.shape)};
}

void adam_step(Weights& w, OptimizerState& st, const AdamConfig& cfg) {
    cfg.validate();
    require(!st.moments_.empty(), "optimizer state not initialized");
    st.step_ += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(st.step_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(st.step_));
    for (auto& [name, param] : w.entries_mutable()) {
        auto it = st.moments_.find(name);
        require(it != st.moments_.end(), "optimizer state missing: " + name);
        Tensor& m = it->second.first;
        Tensor& v = it->second.second;
        for (size_t i = 0; i < param.value.data.size(); ++i) {
            const double g = param.grad.data[i];
            require(std::isfinite(g), "diverged: non-finite gradient in " + name);
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            param.value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace stereotrace
