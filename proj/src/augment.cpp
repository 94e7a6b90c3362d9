#include "stereotrace/augment.hpp"

#include <cmath>

namespace stereotrace {

void AugmentConfig::validate() const {
    require(scale_lo <= scale_hi && scale_lo > 0.0, "bad scale range");
    require(rot_lo_deg <= rot_hi_deg, "bad rotation range");
    require(bright_lo <= bright_hi && bright_lo > 0.0, "bad brightness range");
}

namespace {

double det_bilinear(const DetectionMap& m, double x, double y) {
    const int u0 = int(std::floor(x)), v0 = int(std::floor(y));
    const double fx = x - u0, fy = y - v0;
    auto at = [&](int u, int v) {
        return (u >= 0 && u < m.width && v >= 0 && v < m.height) ? m.at(u, v) : 0.0;
    };
    return (1 - fx) * (1 - fy) * at(u0, v0) + fx * (1 - fy) * at(u0 + 1, v0) +
           (1 - fx) * fy * at(u0, v0 + 1) + fx * fy * at(u0 + 1, v0 + 1);
}

}  // namespace

StereoSample augment(const StereoSample& s, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    const double scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    const double rot = s.detection_only ? deg2rad(rng.uniform(cfg.rot_lo_deg, cfg.rot_hi_deg))
                                        : 0.0;
    const double bright = rng.uniform(cfg.bright_lo, cfg.bright_hi);
    const int W = s.left.width, H = s.left.height;
    const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
    const double c = std::cos(rot), sn = std::sin(rot);
    // inverse map: output pixel -> source position
    auto src = [&](int u, int v, double& x, double& y) {
        const double dx = (u - cx) / scale, dy = (v - cy) / scale;
        x = cx + c * dx + sn * dy;
        y = cy - sn * dx + c * dy;
    };
    StereoSample out;
    out.detection_only = s.detection_only;
    out.left = ImageGrid(W, H);
    out.right = ImageGrid(W, H);
    out.det_left_gt = DetectionMap(W, H);
    out.det_right_gt = DetectionMap(W, H);
    out.gt = DisparityMap(W, H);
    const double fill_l = s.left.median_intensity();
    const double fill_r = s.right.median_intensity();
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            double x, y;
            src(u, v, x, y);
            out.left.at(u, v) = std::clamp(bright * s.left.sample(x, y, fill_l), 0.0, 1.0);
            out.right.at(u, v) = std::clamp(bright * s.right.sample(x, y, fill_r), 0.0, 1.0);
            out.det_left_gt.at(u, v) = det_bilinear(s.det_left_gt, x, y);
            out.det_right_gt.at(u, v) = det_bilinear(s.det_right_gt, x, y);
            const int un = int(std::lround(x)), vn = int(std::lround(y));
            if (un >= 0 && un < W && vn >= 0 && vn < H && s.gt.valid(un, vn)) {
                out.gt.d(u, v) = s.gt.d(un, vn) * scale;
                out.gt.valid(u, v) = 1;
            }
        }
    }
    return out;
}

}  // namespace stereotrace
