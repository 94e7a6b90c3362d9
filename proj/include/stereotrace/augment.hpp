#pragma once

#include "stereotrace/common.hpp"
#include "stereotrace/image.hpp"

namespace stereotrace {

// One training sample: a rectified pair with ground truth. detection_only
// marks detection-pretraining samples, the only ones that may be rotated
// (rotation breaks the horizontal epipolar geometry the matcher relies on).
struct StereoSample {
    ImageGrid left;
    ImageGrid right;
    DetectionMap det_left_gt;
    DetectionMap det_right_gt;
    DisparityMap gt;  // left-frame disparity
    bool detection_only = false;
};

struct AugmentConfig {
    double scale_lo = 0.7, scale_hi = 1.2;
    double rot_lo_deg = -60.0, rot_hi_deg = 60.0;
    double bright_lo = 0.8, bright_hi = 1.2;

    void validate() const;
};

// Same similarity transform on both views and all ground truth; disparity
// values multiply by the drawn scale. Brightness multiplies intensities and
// clamps to [0,1]. Rotation is drawn only for detection_only samples.
StereoSample augment(const StereoSample& s, const AugmentConfig& cfg, Rng& rng);

}  // namespace stereotrace
