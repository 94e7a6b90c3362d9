#include "stereotrace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace stereotrace {

void MetricsReport::validate() const {
    for (double p : {pct_gt_1, pct_gt_3, pct_gt_5})
        require(p >= 0.0 && p <= 100.0, "percentage outside [0,100]");
    require(pct_gt_1 >= pct_gt_3 && pct_gt_3 >= pct_gt_5,
            "threshold percentages not monotone");
    require(n_pixels >= 0, "negative pixel count");
    require(std::isfinite(epe) && epe >= 0.0, "bad epe");
}

namespace {

void check_joint(const DisparityMap& pred, const DisparityMap& gt) {
    pred.validate();
    gt.validate();
    require(pred.width == gt.width && pred.height == gt.height,
            "disparity map shape mismatch");
}

template <typename Fn>
long for_joint(const DisparityMap& pred, const DisparityMap& gt, Fn&& fn) {
    long n = 0;
    for (int v = 0; v < gt.height; ++v)
        for (int u = 0; u < gt.width; ++u)
            if (pred.valid(u, v) && gt.valid(u, v)) {
                fn(pred.d(u, v), gt.d(u, v));
                ++n;
            }
    return n;
}

}  // namespace

double epe(const DisparityMap& pred, const DisparityMap& gt) {
    check_joint(pred, gt);
    double sum = 0.0;
    const long n = for_joint(pred, gt, [&](double p, double g) { sum += std::abs(p - g); });
    require(n > 0, "empty joint disparity mask");
    return sum / double(n);
}

double threshold_pct(const DisparityMap& pred, const DisparityMap& gt, double tau) {
    check_joint(pred, gt);
    require(tau >= 0.0, "negative threshold");
    long over = 0;
    const long n = for_joint(pred, gt, [&](double p, double g) {
        if (std::abs(p - g) > tau) ++over;
    });
    require(n > 0, "empty joint disparity mask");
    return 100.0 * double(over) / double(n);
}

double depth_error(const Reconstruction& rec, const Scene3D& scene) {
    rec.validate();
    require(!rec.points.empty(), "empty reconstruction");
    const auto samples = sample_scene_points(scene);
    require(!samples.empty(), "scene has no curves");
    // bucket ground-truth samples by integer y for the (x,y) radius query
    const int rows = scene.height + 2;
    std::vector<std::vector<const std::array<double, 3>*>> by_row(
        static_cast<size_t>(rows));
    for (const auto& s : samples) {
        const int r = std::clamp(int(std::lround(s[1])), 0, rows - 1);
        by_row[size_t(r)].push_back(&s);
    }
    std::vector<double> err(rec.points.size(),
                            std::numeric_limits<double>::quiet_NaN());
    parallel_for(rec.points.size(), [&](size_t i) {
        const Point3D& p = rec.points[i];
        double best = std::numeric_limits<double>::infinity();
        const int r0 = std::clamp(int(std::floor(p.y - 1.0)), 0, rows - 1);
        const int r1 = std::clamp(int(std::ceil(p.y + 1.0)), 0, rows - 1);
        for (int r = r0; r <= r1; ++r)
            for (const auto* s : by_row[size_t(r)]) {
                const double dx = (*s)[0] - p.x, dy = (*s)[1] - p.y;
                if (dx * dx + dy * dy > 1.0) continue;
                best = std::min(best, std::abs((*s)[2] - p.z));
            }
        if (std::isfinite(best)) err[i] = best;
    });
    double sum = 0.0;
    long n = 0;
    for (double e : err)
        if (std::isfinite(e)) {
            sum += e;
            ++n;
        }
    require(n > 0, "no correspondable points");
    return sum / double(n);
}

namespace {

double region_snr_db(const std::vector<double>& vals) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= double(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / double(vals.size()));
    if (mean <= 0.0) return -120.0;
    if (sd <= mean * 1e-6) return 120.0;
    return std::clamp(20.0 * std::log10(mean / sd), -120.0, 120.0);
}

}  // namespace

SnrContrast snr_contrast(const ImageGrid& img, const DetectionMap& gt_mask) {
    img.validate();
    require(img.width == gt_mask.width && img.height == gt_mask.height,
            "image/mask shape mismatch");
    const int w = img.width, h = img.height;
    std::vector<double> structure, background;
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
            (gt_mask.at(u, v) >= 0.5 ? structure : background).push_back(img.at(u, v));
    require(!structure.empty() && !background.empty(),
            "mask needs both structure and background pixels");
    // vicinity: background within 6 px (chessboard) of the structure set
    std::vector<int> dist(size_t(w) * h, -1);
    std::vector<size_t> frontier;
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
            if (gt_mask.at(u, v) >= 0.5) {
                dist[size_t(v) * w + u] = 0;
                frontier.push_back(size_t(v) * w + u);
            }
    for (int layer = 1; layer <= 6; ++layer) {
        std::vector<size_t> next;
        for (size_t idx : frontier) {
            const int u = int(idx % size_t(w)), v = int(idx / size_t(w));
            for (int dv = -1; dv <= 1; ++dv)
                for (int du = -1; du <= 1; ++du) {
                    const int nu = u + du, nv = v + dv;
                    if (nu < 0 || nu >= w || nv < 0 || nv >= h) continue;
                    if (dist[size_t(nv) * w + nu] >= 0) continue;
                    dist[size_t(nv) * w + nu] = layer;
                    next.push_back(size_t(nv) * w + nu);
                }
        }
        frontier = std::move(next);
    }
    double vic_sum = 0.0;
    long vic_n = 0;
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
            if (dist[size_t(v) * w + u] > 0) {
                vic_sum += img.at(u, v);
                ++vic_n;
            }
    if (vic_n == 0) {
        for (double b : background) vic_sum += b;
        vic_n = long(background.size());
    }
    double struct_mean = 0.0;
    for (double s : structure) struct_mean += s;
    struct_mean /= double(structure.size());
    SnrContrast out;
    out.snr_struct_db = region_snr_db(structure);
    out.snr_background_db = region_snr_db(background);
    out.contrast = (vic_sum / double(vic_n) - struct_mean) * 255.0;
    return out;
}

double curve_distance(const std::vector<std::array<double, 3>>& a,
                      const std::vector<std::array<double, 3>>& b) {
    require(!a.empty() && !b.empty(), "empty point set");
    auto mean_nn = [](const std::vector<std::array<double, 3>>& from,
                      const std::vector<std::array<double, 3>>& to) {
        std::vector<double> best(from.size());
        parallel_for(from.size(), [&](size_t i) {
            double d2 = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                const double dx = q[0] - from[i][0], dy = q[1] - from[i][1],
                             dz = q[2] - from[i][2];
                d2 = std::min(d2, dx * dx + dy * dy + dz * dz);
            }
            best[i] = std::sqrt(d2);
        });
        double sum = 0.0;
        for (double d : best) sum += d;
        return sum / double(from.size());
    };
    return 0.5 * (mean_nn(a, b) + mean_nn(b, a));
}

MetricsReport compute_metrics(const DisparityMap& pred, const DisparityMap& gt) {
    MetricsReport r;
    r.epe = epe(pred, gt);
    r.pct_gt_1 = threshold_pct(pred, gt, 1.0);
    r.pct_gt_3 = threshold_pct(pred, gt, 3.0);
    r.pct_gt_5 = threshold_pct(pred, gt, 5.0);
    long n = 0;
    for (int v = 0; v < gt.height; ++v)
        for (int u = 0; u < gt.width; ++u)
            if (pred.valid(u, v) && gt.valid(u, v)) ++n;
    r.n_pixels = n;
    r.validate();
    return r;
}

void write_metrics_json(const MetricsReport& report, const std::string& path) {
    report.validate();
    nlohmann::json j;
    j["epe"] = report.epe;
    j["pct_gt_1"] = report.pct_gt_1;
    j["pct_gt_3"] = report.pct_gt_3;
    j["pct_gt_5"] = report.pct_gt_5;
    if (std::isfinite(report.depth_error))
        j["depth_error"] = report.depth_error;
    else
        j["depth_error"] = nullptr;
    j["n_pixels"] = report.n_pixels;
    std::ofstream f(path);
    require(bool(f), "cannot write: " + path);
    f << j.dump(2) << "\n";
    require(bool(f), "write failed: " + path);
}

}  // namespace stereotrace
