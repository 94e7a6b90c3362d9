#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "stereotrace/image.hpp"
#include "stereotrace/matcher.hpp"
#include "stereotrace/net.hpp"
#include "support.hpp"

using namespace stereotrace;
using testsupport::run_cli;
using testsupport::same_bytes;
using testsupport::scratch_dir;
using testsupport::slurp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kTinyMatcher =
    "--feature-channels 2 --feature-width 4 --cost-channels 2 --hourglasses 1 "
    "--dmax 8 --disparity-origin 4";

// z coordinates of the vertices in an ASCII PLY file
std::vector<double> ply_z_values(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    int n_vertex = 0;
    while (std::getline(in, line)) {
        if (line.rfind("element vertex ", 0) == 0) n_vertex = std::stoi(line.substr(15));
        if (line == "end_header") break;
    }
    std::vector<double> zs;
    for (int i = 0; i < n_vertex; ++i) {
        double x = 0.0, y = 0.0, z = 0.0;
        in >> x >> y >> z;
        zs.push_back(z);
    }
    REQUIRE(bool(in));
    return zs;
}

}  // namespace

TEST_CASE("a synthetic pair lands on disk with its settings") {
    const std::string dir = scratch_dir("cli_synth");
    const int rc = run_cli("synth -o " + dir + "/a --width 32 --height 32 --curves 3 --seed 5");
    CHECK(rc == 0);
    for (const char* name :
         {"left.png", "right.png", "det_left.png", "det_right.png", "disparity.csv",
          "scene.json", "run_config.json"})
        CHECK(fs::exists(fs::path(dir) / "a" / name));

    const int rc2 = run_cli("synth -o " + dir + "/b --width 32 --height 32 --curves 3 --seed 5");
    CHECK(rc2 == 0);
    for (const char* name :
         {"left.png", "right.png", "det_left.png", "det_right.png", "disparity.csv",
          "scene.json"})
        CHECK(same_bytes(dir + "/a/" + name, dir + "/b/" + name));
}

TEST_CASE("thread count never changes the artifacts") {
    const std::string dir = scratch_dir("cli_threads");
    CHECK(run_cli("synth -o " + dir + "/t1 --width 40 --height 40 --seed 9 --threads 1") == 0);
    CHECK(run_cli("synth -o " + dir + "/t4 --width 40 --height 40 --seed 9 --threads 4") == 0);
    for (const char* name : {"left.png", "right.png", "disparity.csv"})
        CHECK(same_bytes(dir + "/t1/" + name, dir + "/t4/" + name));
}

TEST_CASE("missing required arguments are a usage error") {
    std::string out;
    CHECK(run_cli("synth --width 32", &out) == 2);
    CHECK(run_cli("frobnicate", &out) == 2);
    CHECK(run_cli("", &out) == 2);
}

TEST_CASE("unreadable inputs are an input error") {
    const std::string dir = scratch_dir("cli_io");
    std::ofstream(dir + "/garbage.csv") << "this is not a disparity table\n";
    std::string out;
    const int rc = run_cli("eval --pred " + dir + "/garbage.csv --gt " + dir +
                               "/garbage.csv -o " + dir + "/out",
                           &out);
    CHECK(rc == 1);
}

TEST_CASE("alignment recovers a known shift from images") {
    const std::string dir = scratch_dir("cli_rectify");
    const auto pair = testsupport::make_marker_pair(192, 192, 2.0, 5.0, -3.0, 11);
    write_png(pair.left, dir + "/left.png");
    write_png(pair.right, dir + "/right.png");
    std::string out;
    const int rc = run_cli("rectify --left " + dir + "/left.png --right " + dir +
                               "/right.png -o " + dir + "/out",
                           &out);
    CHECK(rc == 0);
    CHECK(fs::exists(dir + "/out/aligned_left.png"));
    CHECK(fs::exists(dir + "/out/aligned_right.png"));
    const json j = json::parse(slurp(dir + "/out/rectify.json"));
    CHECK(std::abs(j.at("t_x").get<double>() - 5.0) < 0.5);
    CHECK(std::abs(j.at("t_y").get<double>() - (-3.0)) < 0.5);
    CHECK(std::abs(j.at("theta_deg").get<double>() - 2.0) < 0.1);
}

TEST_CASE("alignment on featureless images reports degenerate data") {
    const std::string dir = scratch_dir("cli_flat");
    write_png(ImageGrid(64, 64, 0.5), dir + "/left.png");
    write_png(ImageGrid(64, 64, 0.5), dir + "/right.png");
    std::string out;
    const int rc = run_cli("rectify --left " + dir + "/left.png --right " + dir +
                               "/right.png -o " + dir + "/out",
                           &out);
    CHECK(rc == 3);
}

TEST_CASE("the commands chain into a full pipeline") {
    const std::string dir = scratch_dir("cli_pipe");
    CHECK(run_cli("synth -o " + dir + "/data/p0 --width 24 --height 24 --curves 2 "
                  "--z-extent 6 --seed 31") == 0);
    CHECK(run_cli("synth -o " + dir + "/data/p1 --width 24 --height 24 --curves 2 "
                  "--z-extent 6 --seed 32") == 0);

    std::string out;
    const int rc_train = run_cli("train --data " + dir + "/data -o " + dir + "/model " +
                                     kTinyMatcher +
                                     " --det-epochs 2 --epochs 2 --val 1 --seed 7",
                                 &out);
    INFO(out);
    CHECK(rc_train == 0);
    CHECK(fs::exists(dir + "/model/weights.cswt"));
    CHECK(fs::exists(dir + "/model/history.csv"));
    const std::string history = slurp(dir + "/model/history.csv");
    CHECK(history.rfind("epoch,L_disp,L_var,L_warp,total,epe_val\n", 0) == 0);

    const int rc_infer = run_cli("infer --left " + dir + "/data/p0/left.png --right " +
                                     dir + "/data/p0/right.png --weights " + dir +
                                     "/model/weights.cswt -o " + dir + "/pred " +
                                     kTinyMatcher + " --detection-threshold 0",
                                 &out);
    INFO(out);
    CHECK(rc_infer == 0);
    CHECK(fs::exists(dir + "/pred/disparity.csv"));
    CHECK(fs::exists(dir + "/pred/detection.png"));
    CHECK(fs::exists(dir + "/pred/detection_right.png"));

    const int rc_rec = run_cli("reconstruct --disparity " + dir +
                                   "/pred/disparity.csv --det-left " + dir +
                                   "/pred/detection.png --det-right " + dir +
                                   "/pred/detection_right.png -o " + dir + "/rec --phi 8",
                               &out);
    INFO(out);
    CHECK(rc_rec == 0);
    CHECK(fs::exists(dir + "/rec/points.ply"));

    const int rc_eval = run_cli("eval --pred " + dir + "/pred/disparity.csv --gt " + dir +
                                    "/data/p0/disparity.csv --scene " + dir +
                                    "/data/p0/scene.json --phi 8 -o " + dir + "/score",
                                &out);
    INFO(out);
    CHECK(rc_eval == 0);
    const json m = json::parse(slurp(dir + "/score/metrics.json"));
    CHECK(std::isfinite(m.at("epe").get<double>()));
    CHECK(m.at("n_pixels").get<long>() > 0);
}

TEST_CASE("scoring a prediction against itself is perfect") {
    const std::string dir = scratch_dir("cli_self");
    CHECK(run_cli("synth -o " + dir + "/d --width 24 --height 24 --curves 2 --seed 3") == 0);
    std::string out;
    CHECK(run_cli("eval --pred " + dir + "/d/disparity.csv --gt " + dir +
                      "/d/disparity.csv -o " + dir + "/score",
                  &out) == 0);
    const json m = json::parse(slurp(dir + "/score/metrics.json"));
    CHECK(m.at("epe").get<double>() == 0.0);
    CHECK(m.at("pct_gt_1").get<double>() == 0.0);
}

TEST_CASE("a constant disparity table becomes a constant-depth sheet") {
    const std::string dir = scratch_dir("cli_rec");
    DisparityMap dm(8, 4);
    for (int v = 1; v < 3; ++v)
        for (int u = 2; u < 6; ++u) {
            dm.d(u, v) = 2.0;
            dm.valid(u, v) = 1;
        }
    write_disparity_csv(dm, dir + "/disp.csv");
    std::string out;
    const int rc = run_cli("reconstruct --disparity " + dir + "/disp.csv -o " + dir +
                               "/out --phi 60 --no-refine",
                           &out);
    INFO(out);
    CHECK(rc == 0);
    const auto zs = ply_z_values(dir + "/out/points.ply");
    REQUIRE(zs.size() == 8);
    for (double z : zs) CHECK(z == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("the sweep command tabulates deterministically") {
    const std::string dir = scratch_dir("cli_tomo");
    CHECK(run_cli("synth -o " + dir + "/d --width 32 --height 32 --curves 3 "
                  "--z-extent 6 --seed 21") == 0);

    MatcherConfig cfg;
    cfg.feature_channels = 2;
    cfg.feature_width = 4;
    cfg.cost_channels = 2;
    cfg.hourglasses = 1;
    cfg.dmax = 8;
    cfg.disparity_origin = 4.0;
    Rng rng(17);
    Weights w = init_weights(cfg, rng);
    for (auto& v : w.at("det.head.b").value.data) v += 2.0;
    w.quantize_f32();
    write_weights(w, dir + "/w.cswt");

    const std::string args = "tomo --scene " + dir + "/d/scene.json --weights " + dir +
                             "/w.cswt --views 2,3 --sirt-iterations 5 " + kTinyMatcher;
    std::string out;
    CHECK(run_cli(args + " -o " + dir + "/s1", &out) == 0);
    CHECK(run_cli(args + " -o " + dir + "/s2", &out) == 0);
    const std::string csv = slurp(dir + "/s1/sweep.csv");
    CHECK(csv.rfind("n_views,stereo_err,wbp_err,sirt_err\n", 0) == 0);
    CHECK(same_bytes(dir + "/s1/sweep.csv", dir + "/s2/sweep.csv"));
}
