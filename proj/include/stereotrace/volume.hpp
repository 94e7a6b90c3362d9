#pragma once

#include <string>

#include "stereotrace/tensor.hpp"

namespace stereotrace {

// Per-pixel matching costs over a disparity range. Layout (v, u, d) with the
// disparity axis fastest-varying; file dumps are bit-reproducible.
struct CostVolume {
    int width = 0;
    int height = 0;
    int dmax = 0;  // number of disparity levels D
    Tensor cost;   // shape {H, W, D}

    CostVolume() = default;
    CostVolume(int w, int h, int d) : width(w), height(h), dmax(d), cost({h, w, d}) {
        require(w > 0 && h > 0 && d > 0, "cost volume dimensions must be positive");
    }

    double& at(int u, int v, int d) { return cost.at(v, u, d); }
    double at(int u, int v, int d) const { return cost.at(v, u, d); }
    const double* slice(int u, int v) const { return cost.ptr() + (size_t(v) * width + u) * dmax; }
    double* slice(int u, int v) { return cost.ptr() + (size_t(v) * width + u) * dmax; }
    bool in_bounds(int u, int v) const {
        return u >= 0 && u < width && v >= 0 && v < height;
    }
};

// Concatenated left/right features replicated over disparities.
// Shape {2F, H, W, D}, disparity fastest-varying.
struct FeatureVolume {
    int channels = 0;  // 2F
    int width = 0;
    int height = 0;
    int dmax = 0;
    Tensor values;  // shape {2F, H, W, D}

    FeatureVolume() = default;
    FeatureVolume(int c, int w, int h, int d)
        : channels(c), width(w), height(h), dmax(d), values({c, h, w, d}) {}

    double& at(int c, int u, int v, int d) { return values.at(c, v, u, d); }
    double at(int c, int u, int v, int d) const { return values.at(c, v, u, d); }
};

// Binary volume dump: 16-byte header (magic "CSTV", u32 H, u32 W, u32 D,
// little-endian) followed by f32 data, disparity fastest-varying.
void write_volume(const CostVolume& vc, const std::string& path);
CostVolume read_volume(const std::string& path);

}  // namespace stereotrace
