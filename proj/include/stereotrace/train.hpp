#pragma once

#include <vector>

#include "stereotrace/augment.hpp"
#include "stereotrace/losses.hpp"
#include "stereotrace/matcher.hpp"
#include "stereotrace/optim.hpp"

namespace stereotrace {

struct TrainConfig {
    int det_epochs = 50;      // detection-head pretraining epochs
    int epochs = 200;         // matcher epochs
    double det_lr = 1e-3;
    double matcher_lr = 1e-4;
    LossWeights loss_weights;
    AugmentConfig augment;
    bool augment_enabled = true;
    uint64_t seed = 1;
    int val_interval = 1;     // epochs between validation passes
    double early_stop_epe = 0.0;  // stop once val EPE drops below; 0 disables

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double l_disp = 0.0;
    double l_var = 0.0;
    double l_warp = 0.0;
    double total = 0.0;
    double epe_val = 0.0;
};

struct TrainResult {
    Weights weights;
    std::vector<EpochStats> history;
};

// Mean |pred - gt| over the ground-truth mask of each sample, averaged over
// samples; prediction is a plain forward pass without augmentation.
double validation_epe(const std::vector<StereoSample>& samples, const MatcherConfig& cfg,
                      const Weights& w);

// Two phases: detection-head pretraining with BCE on both views, then
// composite-loss matcher training. Weights are f32-quantized after every
// update so the weights file round-trips losslessly.
TrainResult train(const std::vector<StereoSample>& train_set,
                  const std::vector<StereoSample>& val_set, const MatcherConfig& mcfg,
                  const TrainConfig& tcfg, const Weights* w0 = nullptr);

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace stereotrace
