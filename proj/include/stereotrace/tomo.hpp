#pragma once

#include <array>
#include <string>
#include <vector>

#include "stereotrace/image.hpp"
#include "stereotrace/matcher.hpp"
#include "stereotrace/synth.hpp"
#include "stereotrace/tensor.hpp"

namespace stereotrace {

// Reconstruction volumes are {H, W, NZ} tensors; the tilt axis is vertical, so
// each image row is an independent 1D parallel-beam problem over (x, z) with
// voxel z value = k - (nz-1)/2 and detector u = (x-cx) cos a + z sin a + cx.

std::vector<ImageGrid> forward_project(const Tensor& volume,
                                       const std::vector<double>& angles_deg);

// Ramp-filtered (spatial-domain Ram-Lak) backprojection.
Tensor wbp_reconstruct(const std::vector<ImageGrid>& projections,
                       const std::vector<double>& angles_deg, int nz);

// v <- v + relaxation * C^-1 At R^-1 (p - A v); starts from `init` or zeros.
Tensor sirt_reconstruct(const std::vector<ImageGrid>& projections,
                        const std::vector<double>& angles_deg, int nz, int iterations,
                        double relaxation, const Tensor* init = nullptr);

// Root-sum-square of p - A v over all views.
double projection_residual(const Tensor& volume,
                           const std::vector<ImageGrid>& projections,
                           const std::vector<double>& angles_deg);

double otsu_threshold(const Tensor& volume);

// Threshold then thin each row slice (Zhang-Suen) to a 0/1 volume.
Tensor skeletonize_rows(const Tensor& volume, double threshold);

// World-frame (x, y, z) centers of the set voxels of a binary volume.
std::vector<std::array<double, 3>> volume_points(const Tensor& binary);

struct SweepRow {
    int n_views = 0;
    double stereo_err = 0.0;
    double wbp_err = 0.0;
    double sirt_err = 0.0;
};

struct SweepConfig {
    double phi_deg = 8.0;        // stereo pair tilt separation
    double angle_span_deg = 48.0;  // tomography views cover +/- this
    int nz = 0;                  // 0: derived from the scene slab
    int sirt_iterations = 60;
    double sirt_relaxation = 1.0;
};

// Curve-distance error of the 2-view stereo pipeline vs WBP/SIRT from n
// regularly spaced views, per requested view count.
std::vector<SweepRow> views_sweep(const Scene3D& scene, const RenderConfig& rcfg,
                                  const std::vector<int>& view_counts,
                                  const MatcherConfig& mcfg, const Weights& weights,
                                  const SweepConfig& scfg);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace stereotrace
