#include "stereotrace/losses.hpp"

#include <cmath>

#include "stereotrace/core_ops.hpp"

namespace stereotrace {

namespace {
constexpr double kBceEps = 1e-7;
}

void LossWeights::validate() const {
    require(gamma_disp >= 0.0 && gamma_var >= 0.0 && gamma_warp >= 0.0,
            "loss weights must be nonnegative");
}

double smooth_l1(double e) { return e < 1.0 ? 0.5 * e * e : e - 0.5; }

double smooth_l1_grad(double signed_e) {
    const double e = std::abs(signed_e);
    if (e < 1.0) return signed_e;
    return signed_e > 0.0 ? 1.0 : -1.0;
}

double disparity_loss(const DisparityMap& pred, const DisparityMap& gt) {
    require(pred.width == gt.width && pred.height == gt.height,
            "disparity map shape mismatch");
    double sum = 0.0;
    size_t n = 0;
    for (int v = 0; v < gt.height; ++v)
        for (int u = 0; u < gt.width; ++u) {
            if (!gt.valid(u, v)) continue;
            sum += smooth_l1(std::abs(pred.d(u, v) - gt.d(u, v)));
            ++n;
        }
    require(n > 0, "no annotated pixels");
    return sum / double(n);
}

double variance_loss(const CostVolume& vc, const DisparityMap& gt) {
    require(gt.valid_count() > 0, "no annotated pixels");
    const std::vector<double> vm = variance_map(vc, gt);
    double sum = 0.0;
    size_t n = 0;
    for (int v = 0; v < gt.height; ++v)
        for (int u = 0; u < gt.width; ++u) {
            if (!gt.valid(u, v)) continue;
            sum += vm[size_t(v) * gt.width + u];
            ++n;
        }
    return sum / double(n);
}

DetectionMap warp_map(const DetectionMap& hr, const DisparityMap& disp) {
    require(hr.width == disp.width && hr.height == disp.height,
            "warp shape mismatch");
    DetectionMap out(hr.width, hr.height);
    for (int v = 0; v < hr.height; ++v)
        for (int u = 0; u < hr.width; ++u) {
            const double x = u + disp.d(u, v);
            const int i0 = int(std::floor(x));
            const double f = x - i0;
            const double a = (i0 >= 0 && i0 < hr.width) ? hr.at(i0, v) : 0.0;
            const double b = (i0 + 1 >= 0 && i0 + 1 < hr.width) ? hr.at(i0 + 1, v) : 0.0;
            out.at(u, v) = (1.0 - f) * a + f * b;
        }
    return out;
}

namespace {

double bce_term(double p, double t) {
    const double pc = std::clamp(p, kBceEps, 1.0 - kBceEps);
    return -(t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc));
}

}  // namespace

double bce_loss(const DetectionMap& pred, const DetectionMap& target) {
    require(pred.width == target.width && pred.height == target.height,
            "detection map shape mismatch");
    require(!pred.probs.empty(), "empty detection map");
    double sum = 0.0;
    for (size_t i = 0; i < pred.probs.size(); ++i)
        sum += bce_term(pred.probs[i], target.probs[i]);
    return sum / double(pred.probs.size());
}

double bce_loss_grad(const DetectionMap& pred, const DetectionMap& target, Tensor& grad) {
    require(pred.width == target.width && pred.height == target.height,
            "detection map shape mismatch");
    require(!pred.probs.empty(), "empty detection map");
    grad = Tensor({pred.height, pred.width});
    const double inv_n = 1.0 / double(pred.probs.size());
    double sum = 0.0;
    for (size_t i = 0; i < pred.probs.size(); ++i) {
        const double p = pred.probs[i], t = target.probs[i];
        sum += bce_term(p, t);
        if (p > kBceEps && p < 1.0 - kBceEps)
            grad.data[i] = (p - t) / (p * (1.0 - p)) * inv_n;
    }
    return sum * inv_n;
}

double warp_loss(const DetectionMap& hr, const DisparityMap& disp,
                 const DetectionMap& hl_gt) {
    return bce_loss(warp_map(hr, disp), hl_gt);
}

double composite_loss(double l_disp, double l_var, double l_warp, const LossWeights& w) {
    w.validate();
    require(std::isfinite(l_disp) && std::isfinite(l_var) && std::isfinite(l_warp),
            "non-finite loss term");
    return w.gamma_disp * l_disp + w.gamma_var * l_var + w.gamma_warp * l_warp;
}

LossBreakdown composite_loss_grads(const MatcherRun& run, const MatcherConfig& cfg,
                                   const DisparityMap& gt, const DetectionMap& hl_gt,
                                   const LossWeights& lw) {
    lw.validate();
    const int H = gt.height, W = gt.width, D = cfg.dmax;
    require(run.left.in.shape[1] == H && run.left.in.shape[2] == W,
            "ground truth shape mismatch");
    const double d0 = cfg.disparity_origin;
    const size_t n_mask = gt.valid_count();
    const bool need_gt = lw.gamma_disp > 0.0 || lw.gamma_var > 0.0;
    require(!need_gt || n_mask > 0, "no annotated pixels");

    LossBreakdown out;
    out.grad_cost = Tensor({H, W, D});
    out.grad_det_right = Tensor({H, W});

    // disparity + variance terms over the annotated mask; values are
    // reported even when their weights are zero (history monitoring)
    if (n_mask > 0) {
        for (int v = 0; v < H; ++v) {
            for (int u = 0; u < W; ++u) {
                if (!gt.valid(u, v)) continue;
                const size_t px = size_t(v) * W + u;
                const double* probs = &run.probs.data[px * D];
                double* gslice = &out.grad_cost.data[px * D];
                const double dhat = run.dhat[px];
                const double gidx = gt.d(u, v) + d0;  // index-space ground truth
                const double e = dhat - gidx;
                out.l_disp += smooth_l1(std::abs(e));
                if (lw.gamma_disp > 0.0)
                    soft_argmin_backward(probs, D, dhat,
                                         lw.gamma_disp * smooth_l1_grad(e) / double(n_mask),
                                         gslice);
                double var = 0.0;
                for (int d = 0; d < D; ++d) {
                    const double dev = d - gidx;
                    var += dev * dev * probs[d];
                }
                out.l_var += var;
                if (lw.gamma_var > 0.0)
                    variance_backward(probs, D, gidx, var, lw.gamma_var / double(n_mask),
                                      gslice);
            }
        }
        out.l_disp /= double(n_mask);
        out.l_var /= double(n_mask);
    }

    // warp term over all pixels; gradients flow into both the cost volume
    // (through soft-argmin) and the right detection map (through sampling)
    {
        const DetectionMap& hr = run.right.det;
        const double inv_n = 1.0 / double(size_t(H) * W);
        for (int v = 0; v < H; ++v) {
            for (int u = 0; u < W; ++u) {
                const size_t px = size_t(v) * W + u;
                const double x = u + run.dhat[px] - d0;
                const int i0 = int(std::floor(x));
                const double f = x - i0;
                const bool a_in = i0 >= 0 && i0 < W;
                const bool b_in = i0 + 1 >= 0 && i0 + 1 < W;
                const double a = a_in ? hr.at(i0, v) : 0.0;
                const double b = b_in ? hr.at(i0 + 1, v) : 0.0;
                const double p = (1.0 - f) * a + f * b;
                const double t = hl_gt.at(u, v);
                out.l_warp += bce_term(p, t);
                if (lw.gamma_warp <= 0.0) continue;
                if (p <= kBceEps || p >= 1.0 - kBceEps) continue;
                const double gp = lw.gamma_warp * (p - t) / (p * (1.0 - p)) * inv_n;
                // through the sample positions
                if (a_in) out.grad_det_right.data[size_t(v) * W + i0] += gp * (1.0 - f);
                if (b_in) out.grad_det_right.data[size_t(v) * W + i0 + 1] += gp * f;
                // through the predicted disparity
                const double dp_dd = b - a;
                soft_argmin_backward(&run.probs.data[px * D], D, run.dhat[px], gp * dp_dd,
                                     &out.grad_cost.data[px * D]);
            }
        }
        out.l_warp *= inv_n;
    }

    out.total = composite_loss(out.l_disp, out.l_var, out.l_warp, lw);
    return out;
}

}  // namespace stereotrace
