#pragma once

#include "stereotrace/image.hpp"
#include "stereotrace/matcher.hpp"
#include "stereotrace/volume.hpp"

namespace stereotrace {

struct LossWeights {
    double gamma_disp = 1.0;
    double gamma_var = 1.0;
    double gamma_warp = 1.0;

    void validate() const;
};

// 0.5 e^2 below 1, e - 0.5 above; e is the absolute error.
double smooth_l1(double e);
// derivative w.r.t. the signed error
double smooth_l1_grad(double signed_e);

// Mean smooth-L1 disparity error over the ground-truth mask.
double disparity_loss(const DisparityMap& pred, const DisparityMap& gt);

// Mean expected squared deviation around ground truth over the mask.
double variance_loss(const CostVolume& vc, const DisparityMap& gt);

// out(u,v) = hr(u + disp(u,v), v), linear interpolation along u, 0 outside.
DetectionMap warp_map(const DetectionMap& hr, const DisparityMap& disp);

// Mean binary cross-entropy with predictions clamped to [1e-7, 1-1e-7].
double bce_loss(const DetectionMap& pred, const DetectionMap& target);
// Same value; also writes d(loss)/d(pred probability) per pixel into grad {H,W}.
double bce_loss_grad(const DetectionMap& pred, const DetectionMap& target, Tensor& grad);

double warp_loss(const DetectionMap& hr, const DisparityMap& disp,
                 const DetectionMap& hl_gt);

double composite_loss(double l_disp, double l_var, double l_warp, const LossWeights& w);

// --- training-side assembly -------------------------------------------------

struct LossBreakdown {
    double l_disp = 0.0;
    double l_var = 0.0;
    double l_warp = 0.0;
    double total = 0.0;
    Tensor grad_cost;       // {H,W,D} d(total)/d(cost entry)
    Tensor grad_det_right;  // {H,W} d(total)/d(right detection probability)
};

// Losses of a recorded stereo pass against ground truth, with gradients
// w.r.t. the cost volume and the right detection map. gt supplies the
// annotated mask; hl_gt is the left ground-truth detection map for the warp
// term. Disparity-origin handling: index-space ground truth = gt + d0.
LossBreakdown composite_loss_grads(const MatcherRun& run, const MatcherConfig& cfg,
                                   const DisparityMap& gt, const DetectionMap& hl_gt,
                                   const LossWeights& lw);

}  // namespace stereotrace
