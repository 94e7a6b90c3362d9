#pragma once

#include <array>
#include <string>
#include <vector>

#include "stereotrace/augment.hpp"
#include "stereotrace/image.hpp"
#include "stereotrace/rectify.hpp"
#include "stereotrace/synth.hpp"

namespace testsupport {

// Fresh scratch directory under the system temp root, unique per call.
std::string scratch_dir(const std::string& tag);

std::string slurp(const std::string& path);
bool same_bytes(const std::string& path_a, const std::string& path_b);

// Runs the CLI named by STEREOTRACE_BIN; returns the exit code and captures
// combined stdout/stderr into `output` when given.
int run_cli(const std::string& args, std::string* output = nullptr);

// Stereo pair of uniquely textured blob markers. The right view places each
// marker at q = p + d * (cos theta, sin theta) - t with the d set symmetric
// around zero, so an alignment estimator should recover exactly (t, theta).
struct MarkerPair {
    stereotrace::ImageGrid left, right;
    double theta_deg = 0.0, tx = 0.0, ty = 0.0;
    int markers = 0;
};

MarkerPair make_marker_pair(int width, int height, double theta_deg, double tx,
                            double ty, uint64_t seed);

// Exact point correspondences from the same displacement model, no imaging.
struct MarkerField {
    std::vector<stereotrace::Correspondence> cs;
    double median_d = 0.0;
};

MarkerField make_correspondences(int n, double theta_deg, double tx, double ty,
                                 double d_lo, double d_hi, uint64_t seed);

// Three fixed smooth curves with sub-pixel thickness crossing the slab; pair
// with a small RenderConfig::line_sigma when a test needs tight localization.
stereotrace::Scene3D thin_scene(int width, int height, double z_extent);

// Renders n random scenes into training samples at the given pair separation.
// Ground truth outside the representable disparity window [-d0, dmax-1-d0]
// is masked out.
std::vector<stereotrace::StereoSample> render_dataset(int n, int width, int height,
                                                      double z_extent, int curves,
                                                      double phi_deg, int dmax, int d0,
                                                      uint64_t seed);

}  // namespace testsupport
