#pragma once

#include <vector>

#include "stereotrace/image.hpp"

namespace stereotrace {

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double score = 0.0;
};

// Displacement convention: (left - right) of the matched sub-pixel positions.
struct Correspondence {
    Keypoint left;
    Keypoint right;
    double similarity = 0.0;

    double dx() const { return left.x - right.x; }
    double dy() const { return left.y - right.y; }
};

struct RansacConfig {
    int iterations = 200;
    double inlier_threshold = 1.0;  // px, perpendicular to the displacement line
    int min_inliers = 8;
    uint64_t seed = 0;

    void validate() const;
};

struct TranslationEstimate {
    double tx = 0.0;
    double ty = 0.0;
    std::vector<int> inliers;  // indices into the canonically sorted input
};

struct RectifyResult {
    ImageGrid left;
    ImageGrid right;
    TiltGeometry geo;
    int inlier_count = 0;
};

// Harris corners with sub-pixel refinement, strongest first, at most max_n.
std::vector<Keypoint> detect_keypoints(const ImageGrid& img, int max_n);

// Mutual-best ZNCC matching of square patches; matches below 0.8 discarded.
std::vector<Correspondence> match_keypoints(const ImageGrid& left, const ImageGrid& right,
                                            const std::vector<Keypoint>& kl,
                                            const std::vector<Keypoint>& kr, int patch);

// RANSAC: displacements minus a candidate translation must be collinear
// through the origin (the per-point disparity direction). The component of t
// along that direction is fixed by the median-displacement convention, so the
// reported disparity origin is the inlier median.
TranslationEstimate estimate_translation(const std::vector<Correspondence>& cs,
                                         const RansacConfig& cfg);

// Median over inliers of atan(ry/rx) of post-translation residuals; residuals
// shorter than 0.5 px carry no direction and are skipped.
double estimate_tilt_angle(const std::vector<Correspondence>& cs, double tx, double ty);

// Content moves by +t: out(x) = in(x - t), bilinear, median fill.
ImageGrid translate_image(const ImageGrid& img, double tx, double ty);

// Content rotates by -theta about the image center: out(x) = in(c + R(theta)(x-c)).
ImageGrid derotate(const ImageGrid& img, double theta_deg);

// Full alignment: estimate (t, theta) from sparse correspondences, translate
// the right image, derotate both. After this, inlier displacements are
// horizontal (pure disparity relative to the median-disparity origin).
RectifyResult rectify_pair(const ImageGrid& left, const ImageGrid& right,
                           const RansacConfig& cfg);

}  // namespace stereotrace
