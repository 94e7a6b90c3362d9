#pragma once

#include <array>
#include <vector>

#include "stereotrace/common.hpp"
#include "stereotrace/image.hpp"

namespace stereotrace {

struct Curve3D {
    std::vector<std::array<double, 3>> control;  // (x, y, z), >= 2 points
    double thickness = 1.0;   // Gaussian line-profile sigma, px
    double intensity = 1.0;   // darkness relative to RenderConfig contrast
};

// Curvilinear structures in a slab [0,W] x [0,H] x [-z_extent, z_extent].
struct Scene3D {
    int width = 0;
    int height = 0;
    double z_extent = 0.0;
    std::vector<Curve3D> curves;

    void validate() const;
};

struct RenderConfig {
    double line_sigma = 1.0;   // default profile sigma multiplier base, px
    double background = 0.85;  // intensity in [0,1]
    double contrast = 0.5;     // darkness gap below background
    double noise_sigma = 0.02;
    uint64_t seed = 0;

    void validate() const;
};

// Smooth bounded-curvature random curves through the slab; reproducible.
Scene3D generate_scene(Rng& rng, int n_curves, int width, int height, double z_extent,
                       double max_curvature = 0.05);

// Orthographic view after rotating the scene by alpha about the vertical axis
// through the image center: u = (x-cx) cos a + z sin a + cx, v = y. Curves are
// dark Gaussian line profiles on the background; the ground-truth detection
// map marks pixels within one profile sigma of a projected curve.
std::pair<ImageGrid, DetectionMap> render_view(const Scene3D& scene, double alpha_deg,
                                               const RenderConfig& cfg);

// Left-view-frame ground truth: for each detected pixel the disparity
// u_right - u_left = 2 z sin(phi/2) of the nearest generating curve point.
// Pixels where overlapping curves disagree by > 0.5 px are invalidated.
DisparityMap gt_disparity(const Scene3D& scene, double phi_deg,
                          const RenderConfig& cfg);

// Dense (x,y,z) samples along every curve, spaced ~0.25 px; the ground-truth
// point set used by the geometric error metrics.
std::vector<std::array<double, 3>> sample_scene_points(const Scene3D& scene);

void write_scene_json(const Scene3D& scene, const std::string& path);
Scene3D read_scene_json(const std::string& path);

}  // namespace stereotrace
