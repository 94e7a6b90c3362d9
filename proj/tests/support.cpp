#include "support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stereotrace/common.hpp"

namespace testsupport {

namespace fs = std::filesystem;
namespace st = stereotrace;

std::string scratch_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    fs::path p = fs::temp_directory_path() /
                 ("stereotrace_" + tag + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter.fetch_add(1)));
    fs::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    st::require(in.good(), "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_bytes(const std::string& path_a, const std::string& path_b) {
    return slurp(path_a) == slurp(path_b);
}

int run_cli(const std::string& args, std::string* output) {
    const char* bin = std::getenv("STEREOTRACE_BIN");
    st::require(bin != nullptr, "STEREOTRACE_BIN is not set");
    static const std::string log_dir = scratch_dir("cli_log");
    static std::atomic<int> run_id{0};
    const std::string log = log_dir + "/run_" + std::to_string(run_id.fetch_add(1)) + ".txt";
    const std::string cmd = std::string(bin) + " " + args + " > " + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    if (output) *output = slurp(log);
    if (rc != -1 && WIFEXITED(rc)) return WEXITSTATUS(rc);
    return -1;
}

namespace {

// A marker is a Gaussian-windowed sum of a few random plane waves; smooth in
// the continuum, so a shifted copy is bilinear-consistent to high accuracy,
// and distinct per marker so patch matching is unambiguous.
struct MarkerTexture {
    static constexpr int kComponents = 5;
    double amp[kComponents];
    double kx[kComponents];
    double ky[kComponents];
    double phase[kComponents];
    double norm = 1.0;

    explicit MarkerTexture(st::Rng rng) {
        double total = 0.0;
        for (int j = 0; j < kComponents; ++j) {
            amp[j] = rng.uniform(0.5, 1.0);
            const double mag = rng.uniform(0.5, 1.4);
            const double dir = rng.uniform(0.0, 2.0 * M_PI);
            kx[j] = mag * std::cos(dir);
            ky[j] = mag * std::sin(dir);
            phase[j] = rng.uniform(0.0, 2.0 * M_PI);
            total += amp[j];
        }
        norm = 1.0 / total;
    }

    double value(double rx, double ry) const {
        const double r2 = rx * rx + ry * ry;
        if (r2 > 100.0) return 0.0;
        double s = 0.0;
        for (int j = 0; j < kComponents; ++j)
            s += amp[j] * std::cos(kx[j] * rx + ky[j] * ry + phase[j]);
        return 0.3 * s * norm * std::exp(-r2 / 18.0);
    }
};

void paint_marker(st::ImageGrid& img, const MarkerTexture& tex, double cx, double cy) {
    const int x0 = std::max(0, int(std::floor(cx)) - 10);
    const int x1 = std::min(img.width - 1, int(std::ceil(cx)) + 10);
    const int y0 = std::max(0, int(std::floor(cy)) - 10);
    const int y1 = std::min(img.height - 1, int(std::ceil(cy)) + 10);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            img.at(x, y) += tex.value(x - cx, y - cy);
}

}  // namespace

MarkerPair make_marker_pair(int width, int height, double theta_deg, double tx,
                            double ty, uint64_t seed) {
    const double th = theta_deg * M_PI / 180.0;
    const double ux = std::cos(th), uy = std::sin(th);
    MarkerPair mp;
    mp.left = st::ImageGrid(width, height, 0.5);
    mp.right = st::ImageGrid(width, height, 0.5);
    mp.theta_deg = theta_deg;
    mp.tx = tx;
    mp.ty = ty;

    st::Rng root(seed);
    const double pad = 13.0;
    const double step = 22.0;
    // Column-major order pairs each site with its vertical neighbour below, so
    // the +/- horizontal shifts of a pair can never drive its two markers into
    // each other in the right image.
    std::vector<std::array<double, 2>> sites;
    for (double gx = pad + 2.0; gx < width - pad - 2.0; gx += step)
        for (double gy = pad + 2.0; gy < height - pad - 2.0; gy += step)
            sites.push_back({gx + root.uniform(-4.0, 4.0), gy + root.uniform(-4.0, 4.0)});

    // Assign displacement magnitudes in +/- pairs and drop a pair whenever a
    // shifted copy would leave the frame, keeping the d multiset symmetric so
    // its median stays exactly zero.  Markers with several corners contribute
    // several correspondences each, so the matched multiset can lose the exact
    // count balance; the anchor component below packs magnitudes tightly under
    // the 0.5 px measurability cutoff, where they pin the displacement median
    // without touching the tilt-angle median, while the strong component gives
    // tilt estimation long, clean residuals.
    auto inside = [&](double x, double y) {
        return x >= pad && x <= width - 1 - pad && y >= pad && y <= height - 1 - pad;
    };
    uint64_t tex_id = 0;
    for (size_t i = 0; i + 1 < sites.size(); i += 2) {
        const double u0 = root.uniform();
        const double m = (root.uniform() < 0.55) ? root.uniform(10.0, 22.0)
                                                 : 0.5 * u0 * u0;
        const double d[2] = {m, -m};
        const std::array<double, 2> p[2] = {sites[i], sites[i + 1]};
        bool ok = true;
        std::array<double, 2> q[2];
        for (int k = 0; k < 2; ++k) {
            q[k] = {p[k][0] + d[k] * ux - tx, p[k][1] + d[k] * uy - ty};
            ok = ok && inside(p[k][0], p[k][1]) && inside(q[k][0], q[k][1]);
        }
        if (!ok) continue;
        for (int k = 0; k < 2; ++k) {
            MarkerTexture tex(root.fork(0x74657800 + tex_id++));
            paint_marker(mp.left, tex, p[k][0], p[k][1]);
            paint_marker(mp.right, tex, q[k][0], q[k][1]);
            ++mp.markers;
        }
    }
    for (double& v : mp.left.values) v = std::clamp(v, 0.0, 1.0);
    for (double& v : mp.right.values) v = std::clamp(v, 0.0, 1.0);
    return mp;
}

MarkerField make_correspondences(int n, double theta_deg, double tx, double ty,
                                 double d_lo, double d_hi, uint64_t seed) {
    const double th = theta_deg * M_PI / 180.0;
    const double ux = std::cos(th), uy = std::sin(th);
    st::Rng rng(seed);
    MarkerField mf;
    std::vector<double> ds;
    for (int i = 0; i < n; ++i) {
        const double d = rng.uniform(d_lo, d_hi);
        const double px = rng.uniform(50.0, 450.0), py = rng.uniform(50.0, 450.0);
        st::Correspondence c;
        c.left = {px, py, 1.0};
        c.right = {px + d * ux - tx, py + d * uy - ty, 1.0};
        c.similarity = 1.0;
        mf.cs.push_back(c);
        ds.push_back(d);
    }
    mf.median_d = st::median(ds);
    return mf;
}

st::Scene3D thin_scene(int width, int height, double z_extent) {
    st::Scene3D scene;
    scene.width = width;
    scene.height = height;
    scene.z_extent = z_extent;
    const auto add = [&](std::vector<std::array<double, 3>> control) {
        st::Curve3D c;
        c.control = std::move(control);
        c.thickness = 0.8;
        scene.curves.push_back(c);
    };
    const double w = width, h = height, z = z_extent;
    const double west = 6.0, east = w - 7.0;
    add({{west, h * 0.25, -z * 0.4},
         {w * 0.4, h * 0.32, -z * 0.1},
         {w * 0.7, h * 0.22, z * 0.2},
         {east, h * 0.3, z * 0.45}});
    add({{west, h * 0.7, z * 0.3},
         {w * 0.35, h * 0.62, z * 0.05},
         {w * 0.6, h * 0.75, -z * 0.25},
         {east, h * 0.68, -z * 0.4}});
    add({{w * 0.45, h * 0.15, 0.0},
         {w * 0.5, h * 0.45, z * 0.1},
         {w * 0.48, h * 0.7, -z * 0.15},
         {w * 0.55, h * 0.9, 0.0}});
    return scene;
}

std::vector<st::StereoSample> render_dataset(int n, int width, int height,
                                             double z_extent, int curves,
                                             double phi_deg, int dmax, int d0,
                                             uint64_t seed) {
    std::vector<st::StereoSample> out;
    st::Rng root(seed);
    for (int i = 0; i < n; ++i) {
        st::Rng sr = root.fork(uint64_t(i));
        const st::Scene3D scene =
            st::generate_scene(sr, curves, width, height, z_extent);
        st::RenderConfig rc;
        rc.seed = seed ^ (0x9e3779b9u + uint64_t(i));
        auto [li, dl] = st::render_view(scene, -phi_deg / 2.0, rc);
        auto [ri, dr] = st::render_view(scene, phi_deg / 2.0, rc);
        st::DisparityMap gt = st::gt_disparity(scene, phi_deg, rc);
        for (int v = 0; v < gt.height; ++v)
            for (int u = 0; u < gt.width; ++u)
                if (gt.valid(u, v) &&
                    (gt.d(u, v) < -d0 || gt.d(u, v) > dmax - 1 - d0))
                    gt.valid(u, v) = 0;
        out.push_back({li, ri, dl, dr, gt, false});
    }
    return out;
}

}  // namespace testsupport
