#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stereotrace/matcher.hpp"
#include "stereotrace/metrics.hpp"
#include "stereotrace/reconstruct.hpp"
#include "stereotrace/rectify.hpp"
#include "stereotrace/synth.hpp"
#include "stereotrace/tomo.hpp"
#include "stereotrace/train.hpp"

namespace fs = std::filesystem;
namespace st = stereotrace;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kIoError = 1;
constexpr int kUsageError = 2;
constexpr int kDegenerateData = 3;
constexpr int kDivergence = 4;

int classify(const std::exception& e) {
    const std::string m = e.what();
    if (m.find("degenerate") != std::string::npos) return kDegenerateData;
    if (m.find("diverged") != std::string::npos) return kDivergence;
    return kIoError;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    st::require(!ec && fs::is_directory(dir), "cannot create directory: " + dir);
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream f(path);
    st::require(bool(f), "cannot write: " + path);
    f << j.dump(2) << "\n";
    st::require(bool(f), "write failed: " + path);
}

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    st::require(bool(f), "cannot open: " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        st::fail("bad JSON in " + path + ": " + e.what());
    }
}

// Resolved-config sidecar; `threads` deliberately excluded so outputs do not
// depend on the execution environment.
void write_run_config(json j, const std::string& command, const std::string& out_dir) {
    j["schema"] = 1;
    j["command"] = command;
    write_json_file(j, (fs::path(out_dir) / "run_config.json").string());
}

st::DetectionMap binary_detection(const st::ImageGrid& img) {
    st::DetectionMap dm(img.width, img.height);
    for (size_t i = 0; i < img.values.size(); ++i)
        dm.probs[i] = img.values[i] >= 0.5 ? 1.0 : 0.0;
    return dm;
}

// --- matcher flags shared by train / infer / tomo --------------------------

struct MatcherFlags {
    st::MatcherConfig cfg;
    CLI::Option* o_fc = nullptr;
    CLI::Option* o_fw = nullptr;
    CLI::Option* o_cc = nullptr;
    CLI::Option* o_hg = nullptr;
    CLI::Option* o_dm = nullptr;
    CLI::Option* o_th = nullptr;
    CLI::Option* o_d0 = nullptr;

    void add(CLI::App* cmd) {
        o_fc = cmd->add_option("--feature-channels", cfg.feature_channels,
                               "contour feature channels");
        o_fw = cmd->add_option("--feature-width", cfg.feature_width,
                               "hidden width of the 2D encoder");
        o_cc = cmd->add_option("--cost-channels", cfg.cost_channels,
                               "width of the 3D cost network");
        o_hg = cmd->add_option("--hourglasses", cfg.hourglasses,
                               "stacked encoder-decoder blocks");
        o_dm = cmd->add_option("--dmax", cfg.dmax, "disparity levels");
        o_th = cmd->add_option("--detection-threshold", cfg.detection_threshold,
                               "probability cut for the disparity mask");
        o_d0 = cmd->add_option("--disparity-origin", cfg.disparity_origin,
                               "disparity of volume index 0");
    }

    // config-file values fill in only where no flag was given
    void apply_config(const json& root) {
        if (!root.contains("matcher")) return;
        const json& m = root.at("matcher");
        auto fill = [&](const CLI::Option* o, const char* key, auto& dst) {
            if (o->count() == 0 && m.contains(key))
                dst = m.at(key).get<std::decay_t<decltype(dst)>>();
        };
        fill(o_fc, "feature_channels", cfg.feature_channels);
        fill(o_fw, "feature_width", cfg.feature_width);
        fill(o_cc, "cost_channels", cfg.cost_channels);
        fill(o_hg, "hourglasses", cfg.hourglasses);
        fill(o_dm, "dmax", cfg.dmax);
        fill(o_th, "detection_threshold", cfg.detection_threshold);
        fill(o_d0, "disparity_origin", cfg.disparity_origin);
    }

    json to_json() const {
        return {{"feature_channels", cfg.feature_channels},
                {"feature_width", cfg.feature_width},
                {"cost_channels", cfg.cost_channels},
                {"hourglasses", cfg.hourglasses},
                {"dmax", cfg.dmax},
                {"detection_threshold", cfg.detection_threshold},
                {"disparity_origin", cfg.disparity_origin}};
    }
};

// --- synth -----------------------------------------------------------------

struct SynthOpts {
    std::string out;
    int curves = 6;
    int width = 64;
    int height = 64;
    double z_extent = 12.0;
    double phi = 8.0;
    double max_curvature = 0.05;
    uint64_t seed = 0;
    st::RenderConfig render;
};

int run_synth(const SynthOpts& o) {
    ensure_dir(o.out);
    st::Rng rng(o.seed);
    const st::Scene3D scene =
        st::generate_scene(rng, o.curves, o.width, o.height, o.z_extent, o.max_curvature);
    st::RenderConfig rc = o.render;
    rc.seed = o.seed;
    auto [left, det_left] = st::render_view(scene, -o.phi / 2.0, rc);
    auto [right, det_right] = st::render_view(scene, o.phi / 2.0, rc);
    const st::DisparityMap gt = st::gt_disparity(scene, o.phi, rc);
    const fs::path dir(o.out);
    st::write_png(left, (dir / "left.png").string());
    st::write_png(right, (dir / "right.png").string());
    st::write_png(st::to_image(det_left), (dir / "det_left.png").string());
    st::write_png(st::to_image(det_right), (dir / "det_right.png").string());
    st::write_disparity_csv(gt, (dir / "disparity.csv").string());
    st::write_scene_json(scene, (dir / "scene.json").string());
    write_run_config({{"curves", o.curves},
                      {"width", o.width},
                      {"height", o.height},
                      {"z_extent", o.z_extent},
                      {"phi", o.phi},
                      {"max_curvature", o.max_curvature},
                      {"seed", o.seed},
                      {"line_sigma", rc.line_sigma},
                      {"background", rc.background},
                      {"contrast", rc.contrast},
                      {"noise_sigma", rc.noise_sigma}},
                     "synth", o.out);
    std::cerr << "synth: " << o.curves << " curves, " << gt.valid_count()
              << " annotated pixels -> " << o.out << "\n";
    return kOk;
}

// --- rectify ---------------------------------------------------------------

struct RectifyOpts {
    std::string left, right, out;
    st::RansacConfig ransac;
};

int run_rectify(const RectifyOpts& o) {
    const st::ImageGrid left = st::read_image(o.left);
    const st::ImageGrid right = st::read_image(o.right);
    ensure_dir(o.out);
    const st::RectifyResult res = st::rectify_pair(left, right, o.ransac);
    const fs::path dir(o.out);
    st::write_png(res.left, (dir / "aligned_left.png").string());
    st::write_png(res.right, (dir / "aligned_right.png").string());
    write_json_file({{"t_x", res.geo.t_x},
                     {"t_y", res.geo.t_y},
                     {"theta_deg", res.geo.theta_deg},
                     {"inliers", res.inlier_count}},
                    (dir / "rectify.json").string());
    write_run_config({{"left", o.left},
                      {"right", o.right},
                      {"iterations", o.ransac.iterations},
                      {"inlier_threshold", o.ransac.inlier_threshold},
                      {"min_inliers", o.ransac.min_inliers},
                      {"seed", o.ransac.seed}},
                     "rectify", o.out);
    std::cerr << "rectify: t = (" << res.geo.t_x << ", " << res.geo.t_y
              << "), theta = " << res.geo.theta_deg << " deg, " << res.inlier_count
              << " inliers\n";
    return kOk;
}

// --- train -----------------------------------------------------------------

struct TrainOpts {
    std::string data, out, config;
    int val_count = 0;
    MatcherFlags matcher;
    st::TrainConfig tc;
    bool no_augment = false;
    CLI::Option* o_de = nullptr;
    CLI::Option* o_ep = nullptr;
    CLI::Option* o_dlr = nullptr;
    CLI::Option* o_lr = nullptr;
    CLI::Option* o_gd = nullptr;
    CLI::Option* o_gv = nullptr;
    CLI::Option* o_gw = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_vi = nullptr;
    CLI::Option* o_es = nullptr;
    CLI::Option* o_na = nullptr;
    CLI::Option* o_vc = nullptr;
};

std::vector<st::StereoSample> load_dataset(const std::string& dir) {
    st::require(fs::is_directory(dir), "not a directory: " + dir);
    std::vector<std::string> pair_dirs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && fs::exists(e.path() / "left.png"))
            pair_dirs.push_back(e.path().string());
    std::sort(pair_dirs.begin(), pair_dirs.end());
    st::require(!pair_dirs.empty(), "no pair directories with left.png under " + dir);
    std::vector<st::StereoSample> samples;
    for (const std::string& p : pair_dirs) {
        const fs::path d(p);
        st::StereoSample s;
        s.left = st::read_image((d / "left.png").string());
        s.right = st::read_image((d / "right.png").string());
        s.det_left_gt = binary_detection(st::read_image((d / "det_left.png").string()));
        s.det_right_gt = binary_detection(st::read_image((d / "det_right.png").string()));
        s.gt = st::read_disparity_csv((d / "disparity.csv").string());
        samples.push_back(std::move(s));
    }
    return samples;
}

int run_train(TrainOpts& o) {
    if (!o.config.empty()) {
        const json root = read_json_file(o.config);
        o.matcher.apply_config(root);
        if (root.contains("train")) {
            const json& t = root.at("train");
            auto fill = [&](const CLI::Option* opt, const char* key, auto& dst) {
                if (opt->count() == 0 && t.contains(key))
                    dst = t.at(key).get<std::decay_t<decltype(dst)>>();
            };
            fill(o.o_de, "det_epochs", o.tc.det_epochs);
            fill(o.o_ep, "epochs", o.tc.epochs);
            fill(o.o_dlr, "det_lr", o.tc.det_lr);
            fill(o.o_lr, "lr", o.tc.matcher_lr);
            fill(o.o_gd, "gamma_disp", o.tc.loss_weights.gamma_disp);
            fill(o.o_gv, "gamma_var", o.tc.loss_weights.gamma_var);
            fill(o.o_gw, "gamma_warp", o.tc.loss_weights.gamma_warp);
            fill(o.o_seed, "seed", o.tc.seed);
            fill(o.o_vi, "val_interval", o.tc.val_interval);
            fill(o.o_es, "early_stop_epe", o.tc.early_stop_epe);
            fill(o.o_vc, "val_count", o.val_count);
            if (o.o_na->count() == 0 && t.contains("augment"))
                o.no_augment = !t.at("augment").get<bool>();
        }
    }
    o.tc.augment_enabled = !o.no_augment;
    auto samples = load_dataset(o.data);
    st::require(o.val_count >= 0 && size_t(o.val_count) < samples.size(),
                "validation count must leave at least one training pair");
    std::vector<st::StereoSample> val_set(samples.end() - o.val_count, samples.end());
    samples.resize(samples.size() - size_t(o.val_count));
    ensure_dir(o.out);
    const st::TrainResult res = st::train(samples, val_set, o.matcher.cfg, o.tc);
    const fs::path dir(o.out);
    st::write_weights(res.weights, (dir / "weights.cswt").string());
    st::write_history_csv(res.history, (dir / "history.csv").string());
    write_run_config({{"data", o.data},
                      {"matcher", o.matcher.to_json()},
                      {"train",
                       {{"det_epochs", o.tc.det_epochs},
                        {"epochs", o.tc.epochs},
                        {"det_lr", o.tc.det_lr},
                        {"lr", o.tc.matcher_lr},
                        {"gamma_disp", o.tc.loss_weights.gamma_disp},
                        {"gamma_var", o.tc.loss_weights.gamma_var},
                        {"gamma_warp", o.tc.loss_weights.gamma_warp},
                        {"augment", o.tc.augment_enabled},
                        {"seed", o.tc.seed},
                        {"val_interval", o.tc.val_interval},
                        {"early_stop_epe", o.tc.early_stop_epe},
                        {"val_count", o.val_count}}}},
                     "train", o.out);
    if (!res.history.empty())
        std::cerr << "train: " << res.history.size() << " epochs, final val EPE "
                  << res.history.back().epe_val << "\n";
    return kOk;
}

// --- infer -----------------------------------------------------------------

struct InferOpts {
    std::string left, right, weights, out, config;
    MatcherFlags matcher;
};

int run_infer(InferOpts& o) {
    if (!o.config.empty()) o.matcher.apply_config(read_json_file(o.config));
    const st::ImageGrid left = st::read_image(o.left);
    const st::ImageGrid right = st::read_image(o.right);
    const st::Weights w = st::read_weights(o.weights);
    ensure_dir(o.out);
    st::DetectionMap det_left(0, 0), det_right(0, 0);
    const st::FeatureMap fl = st::extract_features(left, o.matcher.cfg, w, &det_left);
    const st::FeatureMap fr = st::extract_features(right, o.matcher.cfg, w, &det_right);
    const st::FeatureVolume vf = st::build_feature_volume(fl, fr, o.matcher.cfg.dmax,
                                 int(std::lround(o.matcher.cfg.disparity_origin)));
    const st::CostVolume vc = st::cost_network(vf, o.matcher.cfg, w);
    const st::DisparityMap disp = st::predict_disparity(
        vc, det_left, o.matcher.cfg.detection_threshold, o.matcher.cfg.disparity_origin);
    const fs::path dir(o.out);
    st::write_disparity_csv(disp, (dir / "disparity.csv").string());
    st::write_png(st::to_image(det_left), (dir / "detection.png").string());
    st::write_png(st::to_image(det_right), (dir / "detection_right.png").string());
    write_run_config({{"left", o.left},
                      {"right", o.right},
                      {"weights", o.weights},
                      {"matcher", o.matcher.to_json()}},
                     "infer", o.out);
    std::cerr << "infer: " << disp.valid_count() << " detected pixels\n";
    return kOk;
}

// --- reconstruct -----------------------------------------------------------

struct ReconstructOpts {
    std::string disparity, det_left, det_right, out;
    double phi = 8.0;
    bool refine = true;
    int radius = 3;
    double nm_per_px = 0.0;
};

int run_reconstruct(const ReconstructOpts& o) {
    if (o.refine && (o.det_left.empty() || o.det_right.empty())) {
        std::cerr << "reconstruct: --refine needs --det-left and --det-right "
                     "(or pass --no-refine)\n";
        return kUsageError;
    }
    st::DisparityMap disp = st::read_disparity_csv(o.disparity);
    if (o.refine) {
        const st::DetectionMap dl = binary_detection(st::read_image(o.det_left));
        const st::DetectionMap dr = st::to_detection(st::read_image(o.det_right));
        disp = st::refine_disparity(disp, dl, dr, o.radius);
    }
    st::TiltGeometry geo;
    geo.phi_deg = o.phi;
    st::Reconstruction rec = st::triangulate(disp, geo);
    if (o.nm_per_px > 0.0)
        for (st::Point3D& p : rec.points) {
            p.x *= o.nm_per_px;
            p.y *= o.nm_per_px;
            p.z *= o.nm_per_px;
        }
    ensure_dir(o.out);
    const fs::path dir(o.out);
    st::export_ply(rec, (dir / "points.ply").string());
    write_run_config({{"disparity", o.disparity},
                      {"phi", o.phi},
                      {"refine", o.refine},
                      {"radius", o.radius},
                      {"det_left", o.det_left},
                      {"det_right", o.det_right},
                      {"nm_per_px", o.nm_per_px}},
                     "reconstruct", o.out);
    std::cerr << "reconstruct: " << rec.points.size() << " points\n";
    return kOk;
}

// --- eval ------------------------------------------------------------------

struct EvalOpts {
    std::string pred, gt, scene, out;
    double phi = 8.0;
};

int run_eval(const EvalOpts& o) {
    const st::DisparityMap pred = st::read_disparity_csv(o.pred);
    const st::DisparityMap gt = st::read_disparity_csv(o.gt);
    st::MetricsReport report = st::compute_metrics(pred, gt);
    if (!o.scene.empty()) {
        const st::Scene3D scene = st::read_scene_json(o.scene);
        st::TiltGeometry geo;
        geo.phi_deg = o.phi;
        report.depth_error = st::depth_error(st::triangulate(pred, geo), scene);
    }
    ensure_dir(o.out);
    st::write_metrics_json(report, (fs::path(o.out) / "metrics.json").string());
    write_run_config(
        {{"pred", o.pred}, {"gt", o.gt}, {"scene", o.scene}, {"phi", o.phi}}, "eval",
        o.out);
    std::cerr << "eval: EPE " << report.epe << " px over " << report.n_pixels
              << " pixels\n";
    return kOk;
}

// --- tomo ------------------------------------------------------------------

struct TomoOpts {
    std::string scene, weights, out, config;
    std::vector<int> views{2, 5, 10, 30, 45};
    st::SweepConfig sweep;
    st::RenderConfig render;
    uint64_t seed = 0;
    MatcherFlags matcher;
};

int run_tomo(TomoOpts& o) {
    if (!o.config.empty()) o.matcher.apply_config(read_json_file(o.config));
    const st::Scene3D scene = st::read_scene_json(o.scene);
    const st::Weights w = st::read_weights(o.weights);
    st::RenderConfig rc = o.render;
    rc.seed = o.seed;
    ensure_dir(o.out);
    const auto rows = st::views_sweep(scene, rc, o.views, o.matcher.cfg, w, o.sweep);
    st::write_sweep_csv(rows, (fs::path(o.out) / "sweep.csv").string());
    write_run_config({{"scene", o.scene},
                      {"weights", o.weights},
                      {"views", o.views},
                      {"phi", o.sweep.phi_deg},
                      {"angle_span", o.sweep.angle_span_deg},
                      {"nz", o.sweep.nz},
                      {"sirt_iterations", o.sweep.sirt_iterations},
                      {"sirt_relaxation", o.sweep.sirt_relaxation},
                      {"seed", o.seed},
                      {"line_sigma", rc.line_sigma},
                      {"background", rc.background},
                      {"contrast", rc.contrast},
                      {"noise_sigma", rc.noise_sigma},
                      {"matcher", o.matcher.to_json()}},
                     "tomo", o.out);
    for (const st::SweepRow& r : rows)
        std::cerr << "tomo: n=" << r.n_views << " stereo=" << r.stereo_err
                  << " wbp=" << r.wbp_err << " sirt=" << r.sirt_err << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3D reconstruction of curvilinear structures from tilted image pairs"};
    app.require_subcommand(1);
    int threads = 0;

    SynthOpts so;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic stereo pair");
    synth->add_option("-o,--out", so.out, "output directory")->required();
    synth->add_option("--curves", so.curves, "number of curves");
    synth->add_option("--width", so.width, "image width");
    synth->add_option("--height", so.height, "image height");
    synth->add_option("--z-extent", so.z_extent, "slab half-depth, px");
    synth->add_option("--phi", so.phi, "tilt separation, degrees");
    synth->add_option("--max-curvature", so.max_curvature, "curve turn bound");
    synth->add_option("--seed", so.seed, "random seed");
    synth->add_option("--line-sigma", so.render.line_sigma, "profile sigma, px");
    synth->add_option("--background", so.render.background, "background level");
    synth->add_option("--contrast", so.render.contrast, "darkness gap");
    synth->add_option("--noise", so.render.noise_sigma, "additive noise sigma");
    synth->add_option("--threads", threads, "worker threads (0 = hardware)");

    RectifyOpts ro;
    CLI::App* rectify = app.add_subcommand("rectify", "align a tilt pair");
    rectify->add_option("--left", ro.left, "left image")->required()->check(CLI::ExistingFile);
    rectify->add_option("--right", ro.right, "right image")->required()->check(CLI::ExistingFile);
    rectify->add_option("-o,--out", ro.out, "output directory")->required();
    rectify->add_option("--iterations", ro.ransac.iterations, "RANSAC iterations");
    rectify->add_option("--inlier-threshold", ro.ransac.inlier_threshold,
                        "inlier distance, px");
    rectify->add_option("--min-inliers", ro.ransac.min_inliers, "minimum inliers");
    rectify->add_option("--seed", ro.ransac.seed, "random seed");
    rectify->add_option("--threads", threads, "worker threads (0 = hardware)");

    TrainOpts to;
    CLI::App* train = app.add_subcommand("train", "train the matcher");
    train->add_option("--data", to.data, "directory of pair subdirectories")
        ->required()
        ->check(CLI::ExistingDirectory);
    train->add_option("-o,--out", to.out, "output directory")->required();
    train->add_option("--config", to.config, "JSON config (flags override)")
        ->check(CLI::ExistingFile);
    to.o_vc = train->add_option("--val", to.val_count, "pairs held out for validation");
    to.matcher.add(train);
    to.o_de = train->add_option("--det-epochs", to.tc.det_epochs,
                                "detection pretraining epochs");
    to.o_ep = train->add_option("--epochs", to.tc.epochs, "matcher epochs");
    to.o_dlr = train->add_option("--det-lr", to.tc.det_lr, "detection learning rate");
    to.o_lr = train->add_option("--lr", to.tc.matcher_lr, "matcher learning rate");
    to.o_gd = train->add_option("--gamma-disp", to.tc.loss_weights.gamma_disp,
                                "disparity loss weight");
    to.o_gv = train->add_option("--gamma-var", to.tc.loss_weights.gamma_var,
                                "variance loss weight");
    to.o_gw = train->add_option("--gamma-warp", to.tc.loss_weights.gamma_warp,
                                "warp loss weight");
    to.o_seed = train->add_option("--seed", to.tc.seed, "random seed");
    to.o_vi = train->add_option("--val-interval", to.tc.val_interval,
                                "epochs between validations");
    to.o_es = train->add_option("--early-stop-epe", to.tc.early_stop_epe,
                                "stop once val EPE drops below (0 = off)");
    to.o_na = train->add_flag("--no-augment", to.no_augment, "disable augmentation");
    train->add_option("--threads", threads, "worker threads (0 = hardware)");

    InferOpts io;
    CLI::App* infer = app.add_subcommand("infer", "predict disparity for a pair");
    infer->add_option("--left", io.left, "left image")->required()->check(CLI::ExistingFile);
    infer->add_option("--right", io.right, "right image")->required()->check(CLI::ExistingFile);
    infer->add_option("--weights", io.weights, "weights file")
        ->required()
        ->check(CLI::ExistingFile);
    infer->add_option("-o,--out", io.out, "output directory")->required();
    infer->add_option("--config", io.config, "JSON config with a matcher section")
        ->check(CLI::ExistingFile);
    io.matcher.add(infer);
    infer->add_option("--threads", threads, "worker threads (0 = hardware)");

    ReconstructOpts co;
    CLI::App* reconstruct = app.add_subcommand("reconstruct", "triangulate a disparity map");
    reconstruct->add_option("--disparity", co.disparity, "disparity CSV")
        ->required()
        ->check(CLI::ExistingFile);
    reconstruct->add_option("-o,--out", co.out, "output directory")->required();
    reconstruct->add_option("--phi", co.phi, "tilt separation, degrees");
    reconstruct->add_flag("--refine,!--no-refine", co.refine,
                          "snap to right-view detections (default on)");
    reconstruct->add_option("--det-left", co.det_left, "left detection image")
        ->check(CLI::ExistingFile);
    reconstruct->add_option("--det-right", co.det_right, "right detection image")
        ->check(CLI::ExistingFile);
    reconstruct->add_option("--radius", co.radius, "refinement search radius, px");
    reconstruct->add_option("--nm-per-px", co.nm_per_px,
                            "scale output coordinates to nm (0 = keep px)");
    reconstruct->add_option("--threads", threads, "worker threads (0 = hardware)");

    EvalOpts eo;
    CLI::App* eval = app.add_subcommand("eval", "score a disparity prediction");
    eval->add_option("--pred", eo.pred, "predicted disparity CSV")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--gt", eo.gt, "ground-truth disparity CSV")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("-o,--out", eo.out, "output directory")->required();
    eval->add_option("--scene", eo.scene, "scene JSON for depth error")
        ->check(CLI::ExistingFile);
    eval->add_option("--phi", eo.phi, "tilt separation, degrees");
    eval->add_option("--threads", threads, "worker threads (0 = hardware)");

    TomoOpts oo;
    CLI::App* tomo = app.add_subcommand("tomo", "stereo vs tomography sweep");
    tomo->add_option("--scene", oo.scene, "scene JSON")->required()->check(CLI::ExistingFile);
    tomo->add_option("--weights", oo.weights, "matcher weights")
        ->required()
        ->check(CLI::ExistingFile);
    tomo->add_option("-o,--out", oo.out, "output directory")->required();
    tomo->add_option("--views", oo.views, "view counts")->delimiter(',');
    tomo->add_option("--phi", oo.sweep.phi_deg, "stereo tilt separation, degrees");
    tomo->add_option("--span", oo.sweep.angle_span_deg, "tomography half-span, degrees");
    tomo->add_option("--nz", oo.sweep.nz, "depth voxels (0 = from scene)");
    tomo->add_option("--sirt-iterations", oo.sweep.sirt_iterations, "SIRT iterations");
    tomo->add_option("--sirt-relaxation", oo.sweep.sirt_relaxation, "SIRT relaxation");
    tomo->add_option("--seed", oo.seed, "render noise seed");
    tomo->add_option("--line-sigma", oo.render.line_sigma, "profile sigma, px");
    tomo->add_option("--background", oo.render.background, "background level");
    tomo->add_option("--contrast", oo.render.contrast, "darkness gap");
    tomo->add_option("--noise", oo.render.noise_sigma, "additive noise sigma");
    tomo->add_option("--config", oo.config, "JSON config with a matcher section")
        ->check(CLI::ExistingFile);
    oo.matcher.add(tomo);
    tomo->add_option("--threads", threads, "worker threads (0 = hardware)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kUsageError;
    }

    if (threads > 0) st::set_thread_count(threads);
    try {
        if (synth->parsed()) return run_synth(so);
        if (rectify->parsed()) return run_rectify(ro);
        if (train->parsed()) return run_train(to);
        if (infer->parsed()) return run_infer(io);
        if (reconstruct->parsed()) return run_reconstruct(co);
        if (eval->parsed()) return run_eval(eo);
        if (tomo->parsed()) return run_tomo(oo);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify(e);
    }
    return kUsageError;
}
