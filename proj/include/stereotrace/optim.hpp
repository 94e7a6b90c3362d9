#pragma once

#include <map>
#include <string>

#include "stereotrace/net.hpp"

namespace stereotrace {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

class OptimizerState {
public:
    OptimizerState() = default;
    explicit OptimizerState(const Weights& w);

    int64_t step_count() const { return step_; }

    friend void adam_step(Weights& w, OptimizerState& st, const AdamConfig& cfg);

private:
    std::map<std::string, std::pair<Tensor, Tensor>> moments_;  // (m, v) per param
    int64_t step_ = 0;
};

// One bias-corrected Adam update from the gradients stored in w. Errors on
// non-finite gradients. Does not quantize; the training loop does that so the
// optimizer itself stays exact for unit-level verification.
void adam_step(Weights& w, OptimizerState& st, const AdamConfig& cfg);

}  // namespace stereotrace
