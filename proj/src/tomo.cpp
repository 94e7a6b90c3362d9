#include "stereotrace/tomo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "stereotrace/metrics.hpp"
#include "stereotrace/reconstruct.hpp"

namespace stereotrace {

namespace {

void check_volume(const Tensor& volume) {
    require(volume.rank() == 3, "volume must be {H,W,NZ}");
    require(volume.shape[0] > 0 && volume.shape[1] > 0 && volume.shape[2] > 0,
            "empty volume");
}

void check_views(const std::vector<ImageGrid>& projections,
                 const std::vector<double>& angles_deg) {
    require(projections.size() == angles_deg.size(), "projection/angle count mismatch");
    require(!projections.empty(), "need at least one projection");
    for (const ImageGrid& p : projections) {
        // projection bins hold line integrals, not display intensities, so no
        // [0,1] range check here
        require(p.width > 0 && p.height > 0 &&
                    p.values.size() == size_t(p.width) * p.height,
                "projection buffer mismatch");
        for (double v : p.values) require(std::isfinite(v), "non-finite projection value");
        require(p.width == projections.front().width &&
                    p.height == projections.front().height,
                "projection shape mismatch");
    }
}

// Per-view splat geometry shared by A and At: voxel (x,k) spreads its value
// over detector bins i0, i0+1 with weights (1-fr, fr). Row-independent.
struct ViewWeights {
    std::vector<int> i0;      // W*NZ, -2 if fully outside
    std::vector<double> fr;   // W*NZ
    std::vector<double> row_sum;  // per detector bin u
};

ViewWeights view_weights(int w, int nz, double angle_deg) {
    const double a = deg2rad(angle_deg);
    const double ca = std::cos(a), sa = std::sin(a);
    const double cx = (w - 1) / 2.0;
    const double z0 = (nz - 1) / 2.0;
    ViewWeights vw;
    vw.i0.assign(size_t(w) * nz, -2);
    vw.fr.assign(size_t(w) * nz, 0.0);
    vw.row_sum.assign(size_t(w), 0.0);
    for (int x = 0; x < w; ++x)
        for (int k = 0; k < nz; ++k) {
            const double u = (x - cx) * ca + (k - z0) * sa + cx;
            const int i = int(std::floor(u));
            if (i < -1 || i >= w) continue;
            const double f = u - i;
            vw.i0[size_t(x) * nz + k] = i;
            vw.fr[size_t(x) * nz + k] = f;
            if (i >= 0) vw.row_sum[size_t(i)] += 1.0 - f;
            if (i + 1 < w) vw.row_sum[size_t(i) + 1] += f;
        }
    return vw;
}

}  // namespace

std::vector<ImageGrid> forward_project(const Tensor& volume,
                                       const std::vector<double>& angles_deg) {
    check_volume(volume);
    require(!angles_deg.empty(), "need at least one angle");
    const int h = volume.shape[0], w = volume.shape[1], nz = volume.shape[2];
    std::vector<ImageGrid> out;
    for (double angle : angles_deg) {
        const ViewWeights vw = view_weights(w, nz, angle);
        ImageGrid proj(w, h);
        parallel_for(size_t(h), [&](size_t row) {
            const double* slab = volume.ptr() + row * size_t(w) * nz;
            for (int x = 0; x < w; ++x)
                for (int k = 0; k < nz; ++k) {
                    const int i = vw.i0[size_t(x) * nz + k];
                    if (i == -2) continue;
                    const double f = vw.fr[size_t(x) * nz + k];
                    const double val = slab[size_t(x) * nz + k];
                    if (i >= 0) proj.at(i, int(row)) += val * (1.0 - f);
                    if (i + 1 < w) proj.at(i + 1, int(row)) += val * f;
                }
        });
        out.push_back(std::move(proj));
    }
    return out;
}

Tensor wbp_reconstruct(const std::vector<ImageGrid>& projections,
                       const std::vector<double>& angles_deg, int nz) {
    check_views(projections, angles_deg);
    require(nz > 0, "nz must be positive");
    const int w = projections.front().width, h = projections.front().height;
    const int n_views = int(projections.size());
    // spatial Ram-Lak kernel: h(0)=1/4, h(odd n)=-1/(pi^2 n^2), h(even)=0
    std::vector<double> kernel(size_t(w), 0.0);
    kernel[0] = 0.25;
    for (int n = 1; n < w; n += 2) kernel[size_t(n)] = -1.0 / (kPi * kPi * n * n);
    // filtered rows per view, then voxel-driven gather
    std::vector<ImageGrid> filtered;
    for (const ImageGrid& p : projections) {
        ImageGrid f(w, h);
        parallel_for(size_t(h), [&](size_t row) {
            for (int u = 0; u < w; ++u) {
                double acc = 0.0;
                for (int t = 0; t < w; ++t)
                    acc += p.at(t, int(row)) * kernel[size_t(std::abs(u - t))];
                f.at(u, int(row)) = acc;
            }
        });
        filtered.push_back(std::move(f));
    }
    Tensor vol({h, w, nz});
    const double cx = (w - 1) / 2.0;
    const double z0 = (nz - 1) / 2.0;
    const double scale = kPi / n_views;
    std::vector<double> ca(static_cast<size_t>(n_views));
    std::vector<double> sa(static_cast<size_t>(n_views));
    for (int i = 0; i < n_views; ++i) {
        ca[size_t(i)] = std::cos(deg2rad(angles_deg[size_t(i)]));
        sa[size_t(i)] = std::sin(deg2rad(angles_deg[size_t(i)]));
    }
    parallel_for(size_t(h), [&](size_t row) {
        double* slab = vol.ptr() + row * size_t(w) * nz;
        for (int view = 0; view < n_views; ++view) {
            const ImageGrid& f = filtered[size_t(view)];
            for (int x = 0; x < w; ++x)
                for (int k = 0; k < nz; ++k) {
                    const double u = (x - cx) * ca[size_t(view)] +
                                     (k - z0) * sa[size_t(view)] + cx;
                    const int i = int(std::floor(u));
                    if (i < -1 || i >= w) continue;
                    const double fr = u - i;
                    double val = 0.0;
                    if (i >= 0) val += f.at(i, int(row)) * (1.0 - fr);
                    if (i + 1 < w) val += f.at(i + 1, int(row)) * fr;
                    slab[size_t(x) * nz + k] += scale * val;
                }
        }
    });
    return vol;
}

Tensor sirt_reconstruct(const std::vector<ImageGrid>& projections,
                        const std::vector<double>& angles_deg, int nz, int iterations,
                        double relaxation, const Tensor* init) {
    check_views(projections, angles_deg);
    require(nz > 0, "nz must be positive");
    require(iterations >= 1, "iterations must be >= 1");
    require(relaxation > 0.0 && relaxation <= 1.0, "relaxation outside (0,1]");
    const int w = projections.front().width, h = projections.front().height;
    const int n_views = int(projections.size());
    std::vector<ViewWeights> vws;
    for (double angle : angles_deg) vws.push_back(view_weights(w, nz, angle));
    // column sums over all views
    std::vector<double> col(size_t(w) * nz, 0.0);
    for (const ViewWeights& vw : vws)
        for (size_t j = 0; j < col.size(); ++j) {
            if (vw.i0[j] == -2) continue;
            if (vw.i0[j] >= 0) col[j] += 1.0 - vw.fr[j];
            if (vw.i0[j] + 1 < w) col[j] += vw.fr[j];
        }
    Tensor vol({h, w, nz});
    if (init) {
        require(init->same_shape(vol), "init volume shape mismatch");
        vol = *init;
    }
    parallel_for(size_t(h), [&](size_t row) {
        double* slab = vol.ptr() + row * size_t(w) * nz;
        std::vector<double> av(static_cast<size_t>(w));
        std::vector<double> resid(static_cast<size_t>(w));
        std::vector<double> upd(size_t(w) * nz);
        for (int it = 0; it < iterations; ++it) {
            std::fill(upd.begin(), upd.end(), 0.0);
            for (int view = 0; view < n_views; ++view) {
                const ViewWeights& vw = vws[size_t(view)];
                std::fill(av.begin(), av.end(), 0.0);
                for (int x = 0; x < w; ++x)
                    for (int k = 0; k < nz; ++k) {
                        const size_t j = size_t(x) * nz + k;
                        if (vw.i0[j] == -2) continue;
                        const double val = slab[j];
                        if (vw.i0[j] >= 0) av[size_t(vw.i0[j])] += val * (1.0 - vw.fr[j]);
                        if (vw.i0[j] + 1 < w) av[size_t(vw.i0[j]) + 1] += val * vw.fr[j];
                    }
                for (int u = 0; u < w; ++u)
                    resid[size_t(u)] =
                        vw.row_sum[size_t(u)] > 1e-12
                            ? (projections[size_t(view)].at(u, int(row)) - av[size_t(u)]) /
                                  vw.row_sum[size_t(u)]
                            : 0.0;
                for (int x = 0; x < w; ++x)
                    for (int k = 0; k < nz; ++k) {
                        const size_t j = size_t(x) * nz + k;
                        if (vw.i0[j] == -2) continue;
                        double g = 0.0;
                        if (vw.i0[j] >= 0) g += resid[size_t(vw.i0[j])] * (1.0 - vw.fr[j]);
                        if (vw.i0[j] + 1 < w) g += resid[size_t(vw.i0[j]) + 1] * vw.fr[j];
                        upd[j] += g;
                    }
            }
            for (size_t j = 0; j < upd.size(); ++j)
                if (col[j] > 1e-12) slab[j] += relaxation * upd[j] / col[j];
        }
    });
    return vol;
}

double projection_residual(const Tensor& volume,
                           const std::vector<ImageGrid>& projections,
                           const std::vector<double>& angles_deg) {
    check_views(projections, angles_deg);
    const auto model = forward_project(volume, angles_deg);
    double ss = 0.0;
    for (size_t i = 0; i < model.size(); ++i)
        for (size_t j = 0; j < model[i].values.size(); ++j) {
            const double r = projections[i].values[j] - model[i].values[j];
            ss += r * r;
        }
    return std::sqrt(ss);
}

double otsu_threshold(const Tensor& volume) {
    check_volume(volume);
    const auto [mn_it, mx_it] = std::minmax_element(volume.data.begin(), volume.data.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx - mn < 1e-12) return mn;
    constexpr int kBins = 256;
    std::vector<long> hist(kBins, 0);
    for (double v : volume.data) {
        int b = int((v - mn) / (mx - mn) * kBins);
        hist[size_t(std::clamp(b, 0, kBins - 1))]++;
    }
    const double total = double(volume.data.size());
    double sum_all = 0.0;
    for (int b = 0; b < kBins; ++b) sum_all += b * double(hist[size_t(b)]);
    double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
    int best_bin = 0;
    for (int b = 0; b < kBins - 1; ++b) {
        w0 += double(hist[size_t(b)]);
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += b * double(hist[size_t(b)]);
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (var > best_var) {
            best_var = var;
            best_bin = b;
        }
    }
    return mn + (best_bin + 1) * (mx - mn) / kBins;
}

namespace {

// one Zhang-Suen pass over a w x nz binary slice; returns changed
bool thin_pass(std::vector<uint8_t>& img, int w, int nz, int phase) {
    auto at = [&](int x, int k) -> int {
        if (x < 0 || x >= w || k < 0 || k >= nz) return 0;
        return img[size_t(x) * nz + k];
    };
    std::vector<size_t> kill;
    for (int x = 0; x < w; ++x)
        for (int k = 0; k < nz; ++k) {
            if (!at(x, k)) continue;
            // neighbors clockwise from north (k-1)
            const int p2 = at(x, k - 1), p3 = at(x + 1, k - 1), p4 = at(x + 1, k);
            const int p5 = at(x + 1, k + 1), p6 = at(x, k + 1), p7 = at(x - 1, k + 1);
            const int p8 = at(x - 1, k), p9 = at(x - 1, k - 1);
            const int bsum = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
            if (bsum < 2 || bsum > 6) continue;
            const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
            int a = 0;
            for (int i = 0; i < 8; ++i)
                if (!seq[i] && seq[i + 1]) ++a;
            if (a != 1) continue;
            if (phase == 0) {
                if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
            } else {
                if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
            }
            kill.push_back(size_t(x) * nz + k);
        }
    for (size_t j : kill) img[j] = 0;
    return !kill.empty();
}

}  // namespace

Tensor skeletonize_rows(const Tensor& volume, double threshold) {
    check_volume(volume);
    const int h = volume.shape[0], w = volume.shape[1], nz = volume.shape[2];
    Tensor out({h, w, nz});
    parallel_for(size_t(h), [&](size_t row) {
        std::vector<uint8_t> img(size_t(w) * nz);
        const double* slab = volume.ptr() + row * size_t(w) * nz;
        for (size_t j = 0; j < img.size(); ++j) img[j] = slab[j] > threshold ? 1 : 0;
        bool changed = true;
        while (changed) {
            changed = thin_pass(img, w, nz, 0);
            changed = thin_pass(img, w, nz, 1) || changed;
        }
        double* oslab = out.ptr() + row * size_t(w) * nz;
        for (size_t j = 0; j < img.size(); ++j) oslab[j] = img[j];
    });
    return out;
}

std::vector<std::array<double, 3>> volume_points(const Tensor& binary) {
    check_volume(binary);
    const int h = binary.shape[0], w = binary.shape[1], nz = binary.shape[2];
    const double z0 = (nz - 1) / 2.0;
    std::vector<std::array<double, 3>> pts;
    for (int v = 0; v < h; ++v)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < nz; ++k)
                if (binary.at(v, x, k) > 0.5)
                    pts.push_back({double(x), double(v), k - z0});
    return pts;
}

namespace {

std::vector<std::array<double, 3>> stereo_points(const Scene3D& scene,
                                                 const RenderConfig& rcfg,
                                                 const MatcherConfig& mcfg,
                                                 const Weights& weights, double phi_deg) {
    auto [il, dl_unused] = render_view(scene, -phi_deg / 2.0, rcfg);
    auto [ir, dr_unused] = render_view(scene, phi_deg / 2.0, rcfg);
    (void)dl_unused;
    (void)dr_unused;
    DetectionMap det_l(0, 0), det_r(0, 0);
    const FeatureMap fl = extract_features(il, mcfg, weights, &det_l);
    const FeatureMap fr = extract_features(ir, mcfg, weights, &det_r);
    const FeatureVolume vf = build_feature_volume(fl, fr, mcfg.dmax, int(std::lround(mcfg.disparity_origin)));
    const CostVolume vc = cost_network(vf, mcfg, weights);
    const DisparityMap raw =
        predict_disparity(vc, det_l, mcfg.detection_threshold, mcfg.disparity_origin);
    const DisparityMap refined = refine_disparity(raw, det_l, det_r);
    TiltGeometry geo;
    geo.phi_deg = phi_deg;
    const Reconstruction rec = triangulate(refined, geo);
    std::vector<std::array<double, 3>> pts;
    pts.reserve(rec.points.size());
    for (const Point3D& p : rec.points) pts.push_back({p.x, p.y, p.z});
    return pts;
}

std::vector<double> regular_angles(int n, double span) {
    std::vector<double> a(static_cast<size_t>(n));
    if (n == 1) {
        a[0] = 0.0;
        return a;
    }
    for (int i = 0; i < n; ++i)
        a[size_t(i)] = -span + 2.0 * span * double(i) / double(n - 1);
    return a;
}

double tomo_error(const Tensor& vol, const std::vector<std::array<double, 3>>& gt) {
    const Tensor skel = skeletonize_rows(vol, otsu_threshold(vol));
    const auto pts = volume_points(skel);
    return curve_distance(pts, gt);
}

}  // namespace

std::vector<SweepRow> views_sweep(const Scene3D& scene, const RenderConfig& rcfg,
                                  const std::vector<int>& view_counts,
                                  const MatcherConfig& mcfg, const Weights& weights,
                                  const SweepConfig& scfg) {
    scene.validate();
    rcfg.validate();
    require(!view_counts.empty(), "empty view count list");
    for (int n : view_counts) require(n >= 1, "view count must be >= 1");
    require(scfg.angle_span_deg > 0.0 && scfg.angle_span_deg < 60.0,
            "angle span outside (0,60) degrees");
    const int nz = scfg.nz > 0 ? scfg.nz : 2 * (int(std::ceil(scene.z_extent)) + 4) + 1;
    const auto gt = sample_scene_points(scene);
    const double stereo_err =
        curve_distance(stereo_points(scene, rcfg, mcfg, weights, scfg.phi_deg), gt);
    std::vector<SweepRow> rows;
    for (int n : view_counts) {
        const auto angles = regular_angles(n, scfg.angle_span_deg);
        std::vector<ImageGrid> density;
        for (double a : angles) {
            auto [img, det_unused] = render_view(scene, a, rcfg);
            (void)det_unused;
            ImageGrid d(img.width, img.height);
            for (size_t j = 0; j < d.values.size(); ++j)
                d.values[j] = std::max(0.0, rcfg.background - img.values[j]);
            density.push_back(std::move(d));
        }
        SweepRow row;
        row.n_views = n;
        row.stereo_err = stereo_err;
        row.wbp_err = tomo_error(wbp_reconstruct(density, angles, nz), gt);
        row.sirt_err = tomo_error(
            sirt_reconstruct(density, angles, nz, scfg.sirt_iterations,
                             scfg.sirt_relaxation),
            gt);
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream f(path);
    require(bool(f), "cannot write: " + path);
    f << "n_views,stereo_err,wbp_err,sirt_err\n";
    char line[160];
    for (const SweepRow& r : rows) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", r.n_views,
                      r.stereo_err, r.wbp_err, r.sirt_err);
        f << line;
    }
    require(bool(f), "write failed: " + path);
}

}  // namespace stereotrace
