#pragma once

#include "stereotrace/image.hpp"
#include "stereotrace/net.hpp"
#include "stereotrace/volume.hpp"

namespace stereotrace {

struct MatcherConfig {
    int feature_channels = 8;   // channels of the contour feature map
    int feature_width = 8;      // hidden width of the 2D encoder
    int cost_channels = 8;      // width of the 3D cost network
    int hourglasses = 2;        // stacked encoder-decoder blocks
    int dmax = 48;              // disparity levels in the volume
    double detection_threshold = 0.5;
    double disparity_origin = 0.0;  // d0: reported disparity = index - d0

    void validate() const;
};

struct FeatureMap {
    Tensor values;  // {F,H,W}
    int channels() const { return values.shape[0]; }
    int height() const { return values.shape[1]; }
    int width() const { return values.shape[2]; }
};

Weights init_weights(const MatcherConfig& cfg, Rng& rng);

// --- stateless forward ops -------------------------------------------------

FeatureMap extract_features(const ImageGrid& img, const MatcherConfig& cfg,
                            const Weights& w, DetectionMap* detections = nullptr);

// V_f(:,u,v,d) = concat(fl(:,u,v), fr(:,u+d,v)); out-of-range right samples are 0.
FeatureVolume build_feature_volume(const FeatureMap& fl, const FeatureMap& fr, int dmax,
                                   int disparity_origin = 0);

CostVolume cost_network(const FeatureVolume& vf, const MatcherConfig& cfg, const Weights& w);

// disp = soft_argmin - disparity_origin; mask = detections >= threshold.
DisparityMap predict_disparity(const CostVolume& vc, const DetectionMap& detections,
                               double threshold, double disparity_origin = 0.0);

// --- training forward/backward --------------------------------------------
//
// One fully recorded pass over a stereo pair. The backward entry point takes
// gradients w.r.t. the cost volume and the two detection maps (probabilities)
// and accumulates parameter gradients.

struct FeatureTrace {
    Tensor in;            // {1,H,W}
    Tensor z1, a1, z2, a2, feat;
    Tensor det_z;         // {1,H,W} head logits
    DetectionMap det;     // sigmoid of det_z
};

struct HourglassTrace {
    Tensor x;             // block input
    Tensor zd, ad, zm, am, us, s, zp, y;
};

struct CostTrace {
    Tensor a_in_z, a_in;  // stem conv + relu
    std::vector<HourglassTrace> blocks;
    Tensor out_z;         // {1,H,W,D}
};

struct MatcherRun {
    FeatureTrace left, right;
    Tensor vf;            // {2F,H,W,D}
    CostTrace cost;
    CostVolume vc;        // {H,W,D} view of cost.out_z
    Tensor probs;         // {H,W,D} softmax of -cost per pixel
    std::vector<double> dhat;  // H*W soft-argmin at every pixel
};

MatcherRun matcher_forward(const ImageGrid& left, const ImageGrid& right,
                           const MatcherConfig& cfg, const Weights& w);

// grad_cost is {H,W,D} d(loss)/d(cost entry); grad_det_* are per-pixel
// d(loss)/d(probability), empty tensors to skip a path.
void matcher_backward(const MatcherRun& run, const MatcherConfig& cfg, Weights& w,
                      const Tensor& grad_cost, const Tensor& grad_det_left,
                      const Tensor& grad_det_right);

// Forward the feature net only (detection pretraining).
FeatureTrace feature_forward(const ImageGrid& img, const MatcherConfig& cfg,
                             const Weights& w);
void feature_backward(const FeatureTrace& t, const MatcherConfig& cfg, Weights& w,
                      const Tensor& grad_feat, const Tensor& grad_det);

}  // namespace stereotrace
