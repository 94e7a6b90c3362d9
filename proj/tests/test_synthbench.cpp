#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "stereotrace/common.hpp"
#include "stereotrace/metrics.hpp"
#include "stereotrace/reconstruct.hpp"
#include "stereotrace/synth.hpp"
#include "stereotrace/tomo.hpp"
#include "support.hpp"

using namespace stereotrace;

namespace {

Scene3D vertical_line_scene(int w, int h, double x, double z, double z_extent,
                            double thickness = 1.0) {
    Scene3D scene;
    scene.width = w;
    scene.height = h;
    scene.z_extent = z_extent;
    Curve3D c;
    c.control = {{x, 2.0, z}, {x, h - 3.0, z}};
    c.thickness = thickness;
    scene.curves.push_back(c);
    return scene;
}

std::vector<double> spread_angles(double span, int n) {
    std::vector<double> a(size_t(n), 0.0);
    for (int i = 0; i < n; ++i) a[size_t(i)] = -span + 2.0 * span * i / double(n - 1);
    return a;
}

// One-voxel impulse in a {rows, W, NZ} volume.
Tensor point_volume(int rows, int w, int nz, int row, int x, int k) {
    Tensor v({rows, w, nz});
    v.at(row, x, k) = 1.0;
    return v;
}

int64_t argmax_index(const Tensor& t) {
    return std::max_element(t.data.begin(), t.data.end()) - t.data.begin();
}

}  // namespace

TEST_CASE("an empty scene and a seeded scene behave reproducibly") {
    Rng rng(7);
    const Scene3D none = generate_scene(rng, 0, 32, 32, 8.0);
    CHECK(none.curves.empty());
    none.validate();

    Rng a(42), b(42);
    const Scene3D sa = generate_scene(a, 4, 64, 48, 10.0);
    const Scene3D sb = generate_scene(b, 4, 64, 48, 10.0);
    REQUIRE(sa.curves.size() == 4);
    REQUIRE(sb.curves.size() == 4);
    for (size_t i = 0; i < 4; ++i) {
        REQUIRE(sa.curves[i].control.size() == sb.curves[i].control.size());
        for (size_t j = 0; j < sa.curves[i].control.size(); ++j)
            for (int c = 0; c < 3; ++c)
                CHECK(sa.curves[i].control[j][c] == sb.curves[i].control[j][c]);
    }
}

TEST_CASE("sampled curve points stay inside the slab") {
    Rng rng(1234);
    const Scene3D scene = generate_scene(rng, 6, 96, 80, 14.0);
    const auto pts = sample_scene_points(scene);
    REQUIRE(pts.size() > 1000);
    for (const auto& p : pts) {
        CHECK(p[0] >= 0.0);
        CHECK(p[0] <= 96.0);
        CHECK(p[1] >= 0.0);
        CHECK(p[1] <= 80.0);
        CHECK(std::abs(p[2]) <= 14.0);
    }
}

TEST_CASE("an empty scene renders as background plus noise") {
    Scene3D scene;
    scene.width = 40;
    scene.height = 30;
    scene.z_extent = 5.0;

    RenderConfig quiet;
    quiet.noise_sigma = 0.0;
    const auto [img0, det0] = render_view(scene, 0.0, quiet);
    for (double v : img0.values) CHECK(v == quiet.background);
    for (double p : det0.probs) CHECK(p == 0.0);

    RenderConfig noisy;
    noisy.noise_sigma = 0.02;
    noisy.seed = 77;
    const auto [img1, det1] = render_view(scene, 5.0, noisy);
    double mean = std::accumulate(img1.values.begin(), img1.values.end(), 0.0) /
                  double(img1.values.size());
    double var = 0.0;
    for (double v : img1.values) var += (v - mean) * (v - mean);
    var /= double(img1.values.size());
    CHECK(std::abs(mean - noisy.background) < 0.005);
    CHECK(std::sqrt(var) == doctest::Approx(noisy.noise_sigma).epsilon(0.3));
}

TEST_CASE("zero-depth structures are view-invariant") {
    Scene3D scene;
    scene.width = 48;
    scene.height = 48;
    scene.z_extent = 6.0;
    Curve3D c;
    c.control = {{8.0, 10.0, 0.0}, {20.0, 30.0, 0.0}, {40.0, 38.0, 0.0}};
    scene.curves.push_back(c);

    RenderConfig rc;
    rc.noise_sigma = 0.0;
    const auto [left, dl] = render_view(scene, -4.0, rc);
    const auto [right, dr] = render_view(scene, 4.0, rc);
    REQUIRE(left.values.size() == right.values.size());
    for (size_t i = 0; i < left.values.size(); ++i) CHECK(left.values[i] == right.values[i]);
    for (size_t i = 0; i < dl.probs.size(); ++i) CHECK(dl.probs[i] == dr.probs[i]);
}

TEST_CASE("a line on the rotation axis renders identically at every angle") {
    const int W = 33, H = 24;
    const Scene3D scene = vertical_line_scene(W, H, (W - 1) / 2.0, 0.0, 5.0);
    RenderConfig rc;
    rc.noise_sigma = 0.0;
    const auto [base, det] = render_view(scene, 0.0, rc);
    for (double alpha : {-19.0, -4.0, 9.5, 31.0}) {
        const auto [img, d2] = render_view(scene, alpha, rc);
        for (size_t i = 0; i < base.values.size(); ++i) CHECK(img.values[i] == base.values[i]);
    }
}

TEST_CASE("a constant-depth line has the closed-form disparity") {
    const double z = 7.0, phi = 8.0;
    const Scene3D scene = vertical_line_scene(48, 32, 28.0, z, 10.0);
    RenderConfig rc;
    const DisparityMap gt = gt_disparity(scene, phi, rc);
    REQUIRE(gt.valid_count() > 20);
    const double expect = 2.0 * z * std::sin(deg2rad(phi / 2.0));
    for (int v = 0; v < gt.height; ++v)
        for (int u = 0; u < gt.width; ++u)
            if (gt.valid(u, v)) CHECK(std::abs(gt.d(u, v) - expect) < 1e-9);
}

TEST_CASE("zero depth means zero disparity") {
    Rng rng(9);
    Scene3D scene = generate_scene(rng, 3, 48, 48, 6.0);
    for (auto& c : scene.curves)
        for (auto& p : c.control) p[2] = 0.0;
    RenderConfig rc;
    const DisparityMap gt = gt_disparity(scene, 8.0, rc);
    REQUIRE(gt.valid_count() > 20);
    for (int v = 0; v < gt.height; ++v)
        for (int u = 0; u < gt.width; ++u)
            if (gt.valid(u, v)) CHECK(std::abs(gt.d(u, v)) < 1e-12);
}

TEST_CASE("conflicting overlaps are invalidated, agreeing ones kept") {
    const int W = 49, H = 24;
    const double cx = (W - 1) / 2.0, phi = 8.0;
    const double tanb = std::tan(deg2rad(phi / 2.0));

    // both lines land on the center column of the left view
    Scene3D far = vertical_line_scene(W, H, cx + 10.0 * tanb, 10.0, 12.0);
    far.curves.push_back(vertical_line_scene(W, H, cx - 10.0 * tanb, -10.0, 12.0).curves[0]);
    RenderConfig rc;
    const DisparityMap gfar = gt_disparity(far, phi, rc);
    for (int v = 0; v < gfar.height; ++v)
        for (int u = 0; u < gfar.width; ++u)
            if (gfar.valid(u, v)) CHECK(std::abs(u - cx) > 2.0);

    Scene3D near = vertical_line_scene(W, H, cx + 0.15 * tanb, 0.15, 12.0);
    near.curves.push_back(vertical_line_scene(W, H, cx - 0.15 * tanb, -0.15, 12.0).curves[0]);
    const DisparityMap gnear = gt_disparity(near, phi, rc);
    size_t center_hits = 0;
    for (int v = 0; v < gnear.height; ++v)
        for (int u = 0; u < gnear.width; ++u)
            if (gnear.valid(u, v) && std::abs(u - cx) <= 1.0) {
                ++center_hits;
                CHECK(std::abs(gnear.d(u, v)) < 0.05);
            }
    CHECK(center_hits > 10);
}

TEST_CASE("doubling the separation scales disparity by the sine ratio") {
    const double z = 6.0, phi = 6.0;
    const Scene3D scene = vertical_line_scene(48, 32, 26.0, z, 10.0);
    RenderConfig rc;
    const DisparityMap g1 = gt_disparity(scene, phi, rc);
    const DisparityMap g2 = gt_disparity(scene, 2.0 * phi, rc);
    REQUIRE(g1.valid_count() > 10);
    REQUIRE(g2.valid_count() > 10);
    const auto mean_d = [](const DisparityMap& g) {
        double s = 0.0;
        size_t n = 0;
        for (int v = 0; v < g.height; ++v)
            for (int u = 0; u < g.width; ++u)
                if (g.valid(u, v)) {
                    s += g.d(u, v);
                    ++n;
                }
        return s / double(n);
    };
    const double ratio = mean_d(g2) / mean_d(g1);
    CHECK(std::abs(ratio - std::sin(deg2rad(phi)) / std::sin(deg2rad(phi / 2.0))) < 1e-9);
}

TEST_CASE("disparity inverts back to depth across separations") {
    const double z = 9.0;
    for (double phi : {2.0, 4.0, 8.0, 12.0}) {
        const Scene3D scene = vertical_line_scene(64, 32, 35.0, z, 12.0);
        RenderConfig rc;
        const DisparityMap gt = gt_disparity(scene, phi, rc);
        REQUIRE(gt.valid_count() > 10);
        for (int v = 0; v < gt.height; ++v)
            for (int u = 0; u < gt.width; ++u)
                if (gt.valid(u, v))
                    CHECK(std::abs(depth_from_disparity(gt.d(u, v), phi) - z) < 1e-6);
    }
}

TEST_CASE("integer disparities bound depth error by the quantization step") {
    const Scene3D scene = testsupport::thin_scene(64, 64, 10.0);
    RenderConfig rc;
    rc.line_sigma = 0.75;
    const auto mean_quant_err = [&](double phi, double* max_err) {
        const DisparityMap gt = gt_disparity(scene, phi, rc);
        REQUIRE(gt.valid_count() > 30);
        double sum = 0.0;
        size_t n = 0;
        *max_err = 0.0;
        for (int v = 0; v < gt.height; ++v)
            for (int u = 0; u < gt.width; ++u)
                if (gt.valid(u, v)) {
                    const double d = gt.d(u, v);
                    const double err =
                        std::abs(depth_from_disparity(double(std::llround(d)), phi) -
                                 depth_from_disparity(d, phi));
                    sum += err;
                    *max_err = std::max(*max_err, err);
                    ++n;
                }
        return sum / double(n);
    };
    double max2 = 0.0, max8 = 0.0;
    const double mean2 = mean_quant_err(2.0, &max2);
    const double mean8 = mean_quant_err(8.0, &max8);
    CHECK(mean2 > mean8);  // coarser depth sampling at small separations
    CHECK(max2 <= 0.5 / (2.0 * std::sin(deg2rad(1.0))) * (1.0 + 1e-9));
    CHECK(max8 <= 0.5 / (2.0 * std::sin(deg2rad(4.0))) * (1.0 + 1e-9));
}

TEST_CASE("matching error statistics follow hand computation") {
    DisparityMap gt(8, 4), pred(8, 4);
    const std::vector<std::array<double, 2>> pairs = {
        {1.0, 1.5}, {2.0, 2.0}, {-1.0, 1.0}, {0.5, 0.25}, {3.0, 2.0}};
    for (size_t i = 0; i < pairs.size(); ++i) {
        const int u = int(i) % 8, v = int(i) / 8;
        gt.d(u, v) = pairs[i][0];
        gt.valid(u, v) = 1;
        pred.d(u, v) = pairs[i][1];
        pred.valid(u, v) = 1;
    }
    double hand = 0.0;
    for (const auto& p : pairs) hand += std::abs(p[0] - p[1]);
    hand /= double(pairs.size());
    CHECK(epe(pred, gt) == doctest::Approx(hand).epsilon(1e-12));
    CHECK(epe(gt, gt) == 0.0);

    DisparityMap shifted = gt;
    for (auto& d : shifted.disp) d += 1.0;
    CHECK(epe(shifted, gt) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(threshold_pct(gt, gt, 1.0) == 0.0);
    CHECK(threshold_pct(shifted, gt, 0.5) == 100.0);

    DisparityMap empty_a(8, 4), empty_b(8, 4);
    CHECK_THROWS_AS(epe(empty_a, empty_b), Error);
    CHECK_THROWS_AS(threshold_pct(empty_a, empty_b, 1.0), Error);
}

TEST_CASE("half the pixels off by two trips the one-pixel threshold") {
    DisparityMap gt(10, 1), pred(10, 1);
    for (int u = 0; u < 10; ++u) {
        gt.d(u, 0) = 4.0;
        gt.valid(u, 0) = 1;
        pred.d(u, 0) = (u < 5) ? 6.0 : 4.0;
        pred.valid(u, 0) = 1;
    }
    CHECK(threshold_pct(pred, gt, 1.0) == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(threshold_pct(pred, gt, 3.0) == 0.0);
}

TEST_CASE("threshold percentages are monotone and permutation-invariant") {
    Rng rng(21);
    DisparityMap gt(16, 16), pred(16, 16);
    for (int v = 0; v < 16; ++v)
        for (int u = 0; u < 16; ++u) {
            gt.d(u, v) = rng.uniform(-5.0, 5.0);
            gt.valid(u, v) = 1;
            pred.d(u, v) = gt.d(u, v) + rng.uniform(-6.0, 6.0);
            pred.valid(u, v) = 1;
        }
    const MetricsReport rep = compute_metrics(pred, gt);
    CHECK(rep.pct_gt_1 >= rep.pct_gt_3);
    CHECK(rep.pct_gt_3 >= rep.pct_gt_5);
    CHECK(rep.n_pixels == 256);
    CHECK(std::isnan(rep.depth_error));

    // scatter the same (pred, gt) pairs over different pixels
    std::vector<int> perm(256);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937(3));
    DisparityMap gt2(16, 16), pred2(16, 16);
    for (int i = 0; i < 256; ++i) {
        gt2.disp[size_t(perm[size_t(i)])] = gt.disp[size_t(i)];
        gt2.mask[size_t(perm[size_t(i)])] = 1;
        pred2.disp[size_t(perm[size_t(i)])] = pred.disp[size_t(i)];
        pred2.mask[size_t(perm[size_t(i)])] = 1;
    }
    CHECK(epe(pred2, gt2) == doctest::Approx(epe(pred, gt)).epsilon(1e-12));
    CHECK(threshold_pct(pred2, gt2, 1.0) == threshold_pct(pred, gt, 1.0));
}

TEST_CASE("ground-truth reconstructions have small depth error") {
    const Scene3D scene = testsupport::thin_scene(48, 48, 12.0);
    RenderConfig rc;
    rc.line_sigma = 0.75;
    const double phi = 8.0;
    const DisparityMap gt = gt_disparity(scene, phi, rc);
    REQUIRE(gt.valid_count() > 50);
    TiltGeometry geo;
    geo.phi_deg = phi;
    const Reconstruction rec = triangulate(gt, geo);
    CHECK(depth_error(rec, scene) < 0.5);

    DisparityMap off = gt;
    const double delta = 0.4;
    for (auto& d : off.disp) d += delta;
    const Reconstruction rec_off = triangulate(off, geo);
    const double expect = delta / (2.0 * std::sin(deg2rad(phi / 2.0)));
    CHECK(std::abs(depth_error(rec_off, scene) - expect) < 0.5);
}

TEST_CASE("an empty reconstruction has no depth error to report") {
    const Scene3D scene = testsupport::thin_scene(32, 32, 8.0);
    Reconstruction rec;
    rec.width = 32;
    rec.height = 32;
    CHECK_THROWS_AS(depth_error(rec, scene), Error);
}

TEST_CASE("flat regions give exact contrast and capped purity") {
    ImageGrid img(32, 16, 0.85);
    DetectionMap mask(32, 16);
    for (int u = 10; u < 14; ++u) {
        img.at(u, 8) = 0.35;
        mask.at(u, 8) = 1.0;
    }
    const SnrContrast sc = snr_contrast(img, mask);
    CHECK(sc.contrast == doctest::Approx(0.5 * 255.0).epsilon(1e-9));
    CHECK(sc.snr_struct_db == doctest::Approx(120.0));
    CHECK(sc.snr_background_db == doctest::Approx(120.0));

    DetectionMap none(32, 16);
    CHECK_THROWS_AS(snr_contrast(img, none), Error);
}

TEST_CASE("doubling the noise costs six decibels") {
    const int W = 80, H = 50;
    Rng rng(5);
    std::vector<double> noise(size_t(W) * H);
    for (auto& n : noise) n = rng.normal();
    ImageGrid a(W, H), b(W, H);
    DetectionMap mask(W, H);
    for (int v = 0; v < H; ++v)
        for (int u = 0; u < W; ++u) {
            const size_t i = size_t(v) * W + u;
            a.values[i] = 0.8 + 0.01 * noise[i];
            b.values[i] = 0.8 + 0.02 * noise[i];
            if (v == 25 && u >= 30 && u < 50) {
                a.values[i] = 0.3;
                b.values[i] = 0.3;
                mask.at(u, v) = 1.0;
            }
        }
    const SnrContrast sa = snr_contrast(a, mask);
    const SnrContrast sb = snr_contrast(b, mask);
    CHECK(std::abs((sa.snr_background_db - sb.snr_background_db) - 6.0206) < 0.5);
}

TEST_CASE("backprojecting zeros yields zeros") {
    std::vector<ImageGrid> proj(3, ImageGrid(16, 4));
    const Tensor vol = wbp_reconstruct(proj, {-10.0, 0.0, 10.0}, 9);
    REQUIRE(vol.shape == std::vector<int>({4, 16, 9}));
    for (double v : vol.data) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("a point object reconstructs at its own voxel") {
    const int rows = 3, W = 33, NZ = 33;
    const Tensor v0 = point_volume(rows, W, NZ, 1, 16, 21);
    const auto angles = spread_angles(48.0, 45);
    const auto proj = forward_project(v0, angles);
    REQUIRE(proj.size() == 45);

    const Tensor wbp = wbp_reconstruct(proj, angles, NZ);
    const int64_t wi = argmax_index(wbp);
    const int wr = int(wi / (W * NZ)), wx = int((wi / NZ) % W), wk = int(wi % NZ);
    CHECK(wr == 1);
    CHECK(std::abs(wx - 16) <= 1);
    CHECK(std::abs(wk - 21) <= 1);
    // rows are independent problems; empty rows stay empty
    for (int x = 0; x < W; ++x)
        for (int k = 0; k < NZ; ++k) {
            CHECK(std::abs(wbp.at(0, x, k)) <= 1e-12);
            CHECK(std::abs(wbp.at(2, x, k)) <= 1e-12);
        }

    const Tensor sirt = sirt_reconstruct(proj, angles, NZ, 50, 1.0);
    const int64_t si = argmax_index(sirt);
    CHECK(int(si / (W * NZ)) == 1);
    CHECK(std::abs(int((si / NZ) % W) - 16) <= 1);
    CHECK(std::abs(int(si % NZ) - 21) <= 1);
}

TEST_CASE("filtered backprojection is linear in its data") {
    const int rows = 2, W = 17, NZ = 17;
    const auto angles = spread_angles(40.0, 9);
    const auto pa = forward_project(point_volume(rows, W, NZ, 0, 5, 11), angles);
    const auto pb = forward_project(point_volume(rows, W, NZ, 1, 12, 4), angles);
    std::vector<ImageGrid> combo = pa;
    for (size_t i = 0; i < combo.size(); ++i)
        for (size_t j = 0; j < combo[i].values.size(); ++j)
            combo[i].values[j] = 2.0 * pa[i].values[j] - 0.7 * pb[i].values[j];
    const Tensor va = wbp_reconstruct(pa, angles, NZ);
    const Tensor vb = wbp_reconstruct(pb, angles, NZ);
    const Tensor vc = wbp_reconstruct(combo, angles, NZ);
    for (size_t i = 0; i < vc.data.size(); ++i)
        CHECK(vc.data[i] == doctest::Approx(2.0 * va.data[i] - 0.7 * vb.data[i]).epsilon(1e-9));
}

TEST_CASE("consistent data is a fixed point of the iteration") {
    const int rows = 2, W = 21, NZ = 15;
    Tensor v0({rows, W, NZ});
    Rng rng(31);
    for (auto& v : v0.data) v = rng.uniform();
    const auto angles = spread_angles(45.0, 13);
    const auto proj = forward_project(v0, angles);
    const Tensor out = sirt_reconstruct(proj, angles, NZ, 3, 1.0, &v0);
    CHECK(projection_residual(out, proj, angles) <= 1e-9);
    for (size_t i = 0; i < out.data.size(); ++i)
        CHECK(std::abs(out.data[i] - v0.data[i]) <= 1e-12);
}

TEST_CASE("iterating longer fits noisy data better") {
    const int rows = 1, W = 25, NZ = 19;
    Tensor v0 = point_volume(rows, W, NZ, 0, 12, 9);
    const auto angles = spread_angles(48.0, 21);
    auto proj = forward_project(v0, angles);
    Rng rng(8);
    for (auto& img : proj)
        for (auto& v : img.values) v += 0.01 * rng.normal();
    const Tensor one = sirt_reconstruct(proj, angles, NZ, 1, 1.0);
    const Tensor twenty = sirt_reconstruct(proj, angles, NZ, 20, 1.0);
    CHECK(projection_residual(twenty, proj, angles) < projection_residual(one, proj, angles));
}

TEST_CASE("iteration parameters are validated") {
    std::vector<ImageGrid> proj(3, ImageGrid(8, 2));
    const std::vector<double> angles = {-10.0, 0.0, 10.0};
    CHECK_THROWS_AS(sirt_reconstruct(proj, angles, 5, 0, 1.0), Error);
    CHECK_THROWS_AS(sirt_reconstruct(proj, angles, 5, 10, 0.0), Error);
    CHECK_THROWS_AS(sirt_reconstruct(proj, angles, 5, 10, 1.5), Error);
    CHECK_THROWS_AS(wbp_reconstruct(proj, {0.0, 5.0}, 5), Error);
}

TEST_CASE("the two baselines agree on dense noise-free data") {
    const int rows = 1, W = 49, NZ = 49;
    const Tensor v0 = point_volume(rows, W, NZ, 0, 24, 24);
    const auto angles = spread_angles(80.0, 160);
    const auto proj = forward_project(v0, angles);
    Tensor wbp = wbp_reconstruct(proj, angles, NZ);
    Tensor sirt = sirt_reconstruct(proj, angles, NZ, 150, 1.0);
    const double wpeak = *std::max_element(wbp.data.begin(), wbp.data.end());
    const double speak = *std::max_element(sirt.data.begin(), sirt.data.end());
    REQUIRE(wpeak > 0.0);
    REQUIRE(speak > 0.0);
    double diff2 = 0.0, ref2 = 0.0;
    for (size_t i = 0; i < wbp.data.size(); ++i) {
        const double wn = wbp.data[i] / wpeak, sn = sirt.data[i] / speak;
        diff2 += (wn - sn) * (wn - sn);
        ref2 += wn * wn;
    }
    CHECK(std::sqrt(diff2 / ref2) <= 0.10);
}

TEST_CASE("the full sweep is reproducible and tabulated") {
    Rng rng(61);
    const Scene3D scene = generate_scene(rng, 3, 32, 32, 6.0);
    RenderConfig rcfg;
    rcfg.seed = 99;

    MatcherConfig mcfg;
    mcfg.feature_channels = 2;
    mcfg.feature_width = 4;
    mcfg.cost_channels = 2;
    mcfg.hourglasses = 1;
    mcfg.dmax = 8;
    mcfg.disparity_origin = 4.0;
    Rng wr(17);
    Weights w = init_weights(mcfg, wr);
    // bias the detection head so the untrained matcher still emits points
    for (auto& v : w.at("det.head.b").value.data) v += 2.0;
    w.quantize_f32();

    SweepConfig scfg;
    scfg.sirt_iterations = 8;
    const std::vector<int> counts = {2, 3};
    const auto rows_a = views_sweep(scene, rcfg, counts, mcfg, w, scfg);
    const auto rows_b = views_sweep(scene, rcfg, counts, mcfg, w, scfg);
    REQUIRE(rows_a.size() == 2);
    REQUIRE(rows_b.size() == 2);
    for (size_t i = 0; i < rows_a.size(); ++i) {
        CHECK(rows_a[i].n_views == counts[i]);
        CHECK(rows_a[i].stereo_err == rows_b[i].stereo_err);
        CHECK(rows_a[i].wbp_err == rows_b[i].wbp_err);
        CHECK(rows_a[i].sirt_err == rows_b[i].sirt_err);
        CHECK(std::isfinite(rows_a[i].stereo_err));
        CHECK(std::isfinite(rows_a[i].wbp_err));
        CHECK(std::isfinite(rows_a[i].sirt_err));
    }

    const std::string dir = testsupport::scratch_dir("sweep");
    write_sweep_csv(rows_a, dir + "/sweep.csv");
    const std::string text = testsupport::slurp(dir + "/sweep.csv");
    CHECK(text.rfind("n_views,stereo_err,wbp_err,sirt_err\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
