#pragma once

#include <string>
#include <vector>

#include "stereotrace/image.hpp"
#include "stereotrace/reconstruct.hpp"
#include "stereotrace/synth.hpp"

namespace stereotrace {

struct MetricsReport {
    double epe = 0.0;
    double pct_gt_1 = 0.0;
    double pct_gt_3 = 0.0;
    double pct_gt_5 = 0.0;
    double depth_error = std::numeric_limits<double>::quiet_NaN();  // NaN: not computed
    long n_pixels = 0;

    void validate() const;
};

// Mean |pred - gt| over jointly valid pixels; empty joint mask is an error.
double epe(const DisparityMap& pred, const DisparityMap& gt);

// Percentage of jointly valid pixels with |pred - gt| > tau.
double threshold_pct(const DisparityMap& pred, const DisparityMap& gt, double tau);

// Mean |z error| of reconstructed points against the nearest scene curve point
// sharing (x, y) within 1 px; points with no such neighbor are skipped.
double depth_error(const Reconstruction& rec, const Scene3D& scene);

struct SnrContrast {
    double snr_struct_db = 0.0;
    double snr_background_db = 0.0;
    double contrast = 0.0;  // grayscale units (x255)
};

// Region SnR = 20 log10(mean/std), capped at +/-120 dB; contrast = mean
// background intensity near the structures minus mean structure intensity.
SnrContrast snr_contrast(const ImageGrid& img, const DetectionMap& gt_mask);

// Symmetric mean nearest-neighbor distance between two 3D point sets.
double curve_distance(const std::vector<std::array<double, 3>>& a,
                      const std::vector<std::array<double, 3>>& b);

MetricsReport compute_metrics(const DisparityMap& pred, const DisparityMap& gt);

void write_metrics_json(const MetricsReport& report, const std::string& path);

}  // namespace stereotrace
