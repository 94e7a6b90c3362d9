#include "stereotrace/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace stereotrace {

void TrainConfig::validate() const {
    require(det_epochs >= 0 && epochs >= 0, "negative epoch count");
    require(det_lr > 0.0 && matcher_lr > 0.0, "learning rates must be positive");
    require(val_interval >= 1, "val_interval must be >= 1");
    loss_weights.validate();
    augment.validate();
    require(loss_weights.gamma_disp + loss_weights.gamma_var + loss_weights.gamma_warp > 0.0,
            "all loss weights zero");
}

double validation_epe(const std::vector<StereoSample>& samples, const MatcherConfig& cfg,
                      const Weights& w) {
    require(!samples.empty(), "empty validation set");
    double sum = 0.0;
    size_t count = 0;
    for (const StereoSample& s : samples) {
        const MatcherRun run = matcher_forward(s.left, s.right, cfg, w);
        for (int v = 0; v < s.gt.height; ++v)
            for (int u = 0; u < s.gt.width; ++u) {
                if (!s.gt.valid(u, v)) continue;
                const double pred = run.dhat[size_t(v) * s.gt.width + u] - cfg.disparity_origin;
                sum += std::abs(pred - s.gt.d(u, v));
                ++count;
            }
    }
    require(count > 0, "validation set has no annotated pixels");
    return sum / double(count);
}

TrainResult train(const std::vector<StereoSample>& train_set,
                  const std::vector<StereoSample>& val_set, const MatcherConfig& mcfg,
                  const TrainConfig& tcfg, const Weights* w0) {
    mcfg.validate();
    tcfg.validate();
    require(!train_set.empty(), "empty training set");
    const bool warp_only = tcfg.loss_weights.gamma_disp == 0.0 &&
                           tcfg.loss_weights.gamma_var == 0.0;
    for (const StereoSample& s : train_set)
        require(warp_only || s.gt.valid_count() > 0, "training sample without annotations");

    Rng root(tcfg.seed);
    TrainResult res;
    if (w0) {
        res.weights = *w0;
    } else {
        Rng init_rng = root.fork(0x696e6974);
        res.weights = init_weights(mcfg, init_rng);
    }
    const std::vector<StereoSample>& val = val_set.empty() ? train_set : val_set;

    // phase 1: detection head, BCE on both views, rotations allowed
    if (tcfg.det_epochs > 0) {
        OptimizerState st(res.weights);
        AdamConfig acfg;
        acfg.lr = tcfg.det_lr;
        for (int epoch = 0; epoch < tcfg.det_epochs; ++epoch) {
            for (size_t i = 0; i < train_set.size(); ++i) {
                StereoSample s = train_set[i];
                s.detection_only = true;
                if (tcfg.augment_enabled) {
                    Rng r = root.fork(0x64650000 + uint64_t(epoch) * 131071 + i);
                    s = augment(s, tcfg.augment, r);
                }
                res.weights.zero_grads();
                double loss = 0.0;
                const std::pair<const ImageGrid*, const DetectionMap*> sides[2] = {
                    {&s.left, &s.det_left_gt}, {&s.right, &s.det_right_gt}};
                for (const auto& [img, target] : sides) {
                    FeatureTrace t = feature_forward(*img, mcfg, res.weights);
                    Tensor gdet;
                    loss += 0.5 * bce_loss_grad(t.det, *target, gdet);
                    for (double& g : gdet.data) g *= 0.5;
                    feature_backward(t, mcfg, res.weights, Tensor(), gdet);
                }
                require(std::isfinite(loss),
                        "diverged at detection epoch " + std::to_string(epoch));
                adam_step(res.weights, st, acfg);
                res.weights.quantize_f32();
                require(res.weights.all_finite(),
                        "diverged at detection epoch " + std::to_string(epoch) +
                            ": non-finite weights");
            }
        }
    }

    // phase 2: matcher with the composite loss
    OptimizerState st(res.weights);
    AdamConfig acfg;
    acfg.lr = tcfg.matcher_lr;
    double last_epe = std::numeric_limits<double>::quiet_NaN();
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        EpochStats stats;
        stats.epoch = epoch;
        for (size_t i = 0; i < train_set.size(); ++i) {
            StereoSample s = train_set[i];
            if (tcfg.augment_enabled) {
                Rng r = root.fork(0x6d610000 + uint64_t(epoch) * 131071 + i);
                s = augment(s, tcfg.augment, r);
            }
            const MatcherRun run = matcher_forward(s.left, s.right, mcfg, res.weights);
            const LossBreakdown lb =
                composite_loss_grads(run, mcfg, s.gt, s.det_left_gt, tcfg.loss_weights);
            require(std::isfinite(lb.total), "diverged at epoch " + std::to_string(epoch));
            res.weights.zero_grads();
            matcher_backward(run, mcfg, res.weights, lb.grad_cost, Tensor(),
                             lb.grad_det_right);
            adam_step(res.weights, st, acfg);
            res.weights.quantize_f32();
            require(res.weights.all_finite(),
                    "diverged at epoch " + std::to_string(epoch) + ": non-finite weights");
            stats.l_disp += lb.l_disp;
            stats.l_var += lb.l_var;
            stats.l_warp += lb.l_warp;
            stats.total += lb.total;
        }
        const double inv = 1.0 / double(train_set.size());
        stats.l_disp *= inv;
        stats.l_var *= inv;
        stats.l_warp *= inv;
        stats.total *= inv;
        if (epoch % tcfg.val_interval == 0 || epoch == tcfg.epochs - 1)
            last_epe = validation_epe(val, mcfg, res.weights);
        stats.epe_val = last_epe;
        res.history.push_back(stats);
        if (tcfg.early_stop_epe > 0.0 && last_epe <= tcfg.early_stop_epe) break;
    }
    return res;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
    std::ofstream f(path);
    require(bool(f), "cannot write: " + path);
    f << "epoch,L_disp,L_var,L_warp,total,epe_val\n";
    char buf[256];
    for (const EpochStats& e : history) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                      e.l_disp, e.l_var, e.l_warp, e.total, e.epe_val);
        f << buf;
    }
    require(bool(f), "write failed: " + path);
}

}  // namespace stereotrace
