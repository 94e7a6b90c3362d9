#include "stereotrace/matcher.hpp"

#include <cmath>

#include "stereotrace/core_ops.hpp"

namespace stereotrace {

void MatcherConfig::validate() const {
    require(feature_channels > 0 && feature_width > 0 && cost_channels > 0,
            "matcher channel counts must be positive");
    require(hourglasses >= 0, "negative hourglass count");
    require(dmax > 0, "dmax must be positive");
    require(detection_threshold >= 0.0 && detection_threshold <= 1.0,
            "detection threshold outside [0,1]");
    require(disparity_origin == std::floor(disparity_origin) && disparity_origin >= 0.0 &&
                disparity_origin < double(dmax),
            "disparity origin must be an integer in [0, dmax)");
}

Weights init_weights(const MatcherConfig& cfg, Rng& rng) {
    cfg.validate();
    const int F = cfg.feature_channels, Fw = cfg.feature_width, Cc = cfg.cost_channels;
    Weights w;
    auto conv2 = [&](const std::string& name, int out, int in) {
        he_init(w.add(name + ".w", {out, in, 3, 3}).value, in * 9, rng);
        w.add(name + ".b", {out});
    };
    auto conv3 = [&](const std::string& name, int out, int in) {
        he_init(w.add(name + ".w", {out, in, 3, 3, 3}).value, in * 27, rng);
        w.add(name + ".b", {out});
    };
    conv2("feat.conv1", Fw, 1);
    conv2("feat.conv2", Fw, Fw);
    conv2("feat.conv3", F, Fw);
    conv2("det.head", 1, F);
    conv3("cost.stem", Cc, 2 * F);
    for (int i = 0; i < cfg.hourglasses; ++i) {
        const std::string p = "cost.hg" + std::to_string(i);
        conv3(p + ".down", Cc, Cc);
        conv3(p + ".mid", Cc, Cc);
        conv3(p + ".post", Cc, Cc);
    }
    conv3("cost.out", 1, Cc);
    w.quantize_f32();
    return w;
}

// --- feature network -------------------------------------------------------

FeatureTrace feature_forward(const ImageGrid& img, const MatcherConfig& cfg,
                             const Weights& w) {
    (void)cfg;
    require(img.width > 0 && img.height > 0, "empty image");
    FeatureTrace t;
    t.in = Tensor({1, img.height, img.width});
    std::copy(img.values.begin(), img.values.end(), t.in.data.begin());
    conv2d_forward(t.in, w.at("feat.conv1.w").value, w.at("feat.conv1.b").value, t.z1);
    relu_forward(t.z1, t.a1);
    conv2d_forward(t.a1, w.at("feat.conv2.w").value, w.at("feat.conv2.b").value, t.z2);
    relu_forward(t.z2, t.a2);
    conv2d_forward(t.a2, w.at("feat.conv3.w").value, w.at("feat.conv3.b").value, t.feat);
    conv2d_forward(t.feat, w.at("det.head.w").value, w.at("det.head.b").value, t.det_z);
    t.det = DetectionMap(img.width, img.height);
    for (size_t i = 0; i < t.det.probs.size(); ++i) t.det.probs[i] = sigmoid(t.det_z.data[i]);
    require(t.feat.all_finite(), "non-finite feature map");
    return t;
}

void feature_backward(const FeatureTrace& t, const MatcherConfig& cfg, Weights& w,
                      const Tensor& grad_feat, const Tensor& grad_det) {
    (void)cfg;
    const int H = t.in.shape[1], W = t.in.shape[2];
    Tensor gfeat({t.feat.shape});
    if (grad_feat.numel() > 0) {
        require(grad_feat.same_shape(t.feat), "feature gradient shape mismatch");
        gfeat = grad_feat;
    }
    if (grad_det.numel() > 0) {
        require(grad_det.numel() == int64_t(H) * W, "detection gradient shape mismatch");
        // through the sigmoid: dL/dz = dL/dp * p(1-p)
        Tensor gz({1, H, W});
        for (size_t i = 0; i < gz.data.size(); ++i) {
            const double p = t.det.probs[i];
            gz.data[i] = grad_det.data[i] * p * (1.0 - p);
        }
        conv2d_backward(t.feat, w.at("det.head.w").value, gz, gfeat,
                        w.at("det.head.w").grad, w.at("det.head.b").grad);
    }
    Tensor ga2(t.a2.shape), gz2(t.z2.shape), ga1(t.a1.shape), gz1(t.z1.shape),
        gin(t.in.shape);
    conv2d_backward(t.a2, w.at("feat.conv3.w").value, gfeat, ga2,
                    w.at("feat.conv3.w").grad, w.at("feat.conv3.b").grad);
    relu_backward(t.z2, ga2, gz2);
    conv2d_backward(t.a1, w.at("feat.conv2.w").value, gz2, ga1,
                    w.at("feat.conv2.w").grad, w.at("feat.conv2.b").grad);
    relu_backward(t.z1, ga1, gz1);
    conv2d_backward(t.in, w.at("feat.conv1.w").value, gz1, gin,
                    w.at("feat.conv1.w").grad, w.at("feat.conv1.b").grad);
}

FeatureMap extract_features(const ImageGrid& img, const MatcherConfig& cfg,
                            const Weights& w, DetectionMap* detections) {
    FeatureTrace t = feature_forward(img, cfg, w);
    if (detections) *detections = t.det;
    return FeatureMap{std::move(t.feat)};
}

// --- feature volume --------------------------------------------------------

FeatureVolume build_feature_volume(const FeatureMap& fl, const FeatureMap& fr, int dmax,
                                   int disparity_origin) {
    require(fl.values.same_shape(fr.values), "feature map shape mismatch");
    require(dmax > 0, "dmax must be positive");
    require(disparity_origin >= 0 && disparity_origin < dmax,
            "disparity origin outside [0, dmax)");
    const int F = fl.channels(), H = fl.height(), W = fl.width();
    FeatureVolume vf(2 * F, W, H, dmax);
    parallel_for(static_cast<size_t>(F) * H, [&](size_t row) {
        const int c = int(row / H), v = int(row % H);
        const double* lrow = &fl.values.data[(size_t(c) * H + v) * W];
        const double* rrow = &fr.values.data[(size_t(c) * H + v) * W];
        for (int u = 0; u < W; ++u) {
            double* left = &vf.values.data[((size_t(c) * H + v) * W + u) * dmax];
            double* right = &vf.values.data[(((size_t(c) + F) * H + v) * W + u) * dmax];
            for (int d = 0; d < dmax; ++d) {
                left[d] = lrow[u];
                const int x = u + d - disparity_origin;
                right[d] = (x >= 0 && x < W) ? rrow[x] : 0.0;
            }
        }
    });
    return vf;
}

// --- cost network ----------------------------------------------------------

namespace {

CostTrace cost_forward(const Tensor& vf, const MatcherConfig& cfg, const Weights& w) {
    const int H = vf.shape[1], W = vf.shape[2], D = vf.shape[3];
    require(H % 2 == 0 && W % 2 == 0 && D % 2 == 0,
            "cost network needs even H, W and D");
    CostTrace t;
    conv3d_forward(vf, w.at("cost.stem.w").value, w.at("cost.stem.b").value, 1, t.a_in_z);
    relu_forward(t.a_in_z, t.a_in);
    const Tensor* x = &t.a_in;
    t.blocks.resize(size_t(cfg.hourglasses));
    for (int i = 0; i < cfg.hourglasses; ++i) {
        HourglassTrace& h = t.blocks[size_t(i)];
        const std::string p = "cost.hg" + std::to_string(i);
        h.x = *x;
        conv3d_forward(h.x, w.at(p + ".down.w").value, w.at(p + ".down.b").value, 2, h.zd);
        relu_forward(h.zd, h.ad);
        conv3d_forward(h.ad, w.at(p + ".mid.w").value, w.at(p + ".mid.b").value, 1, h.zm);
        relu_forward(h.zm, h.am);
        upsample2_forward(h.am, h.us);
        h.s = h.us;
        for (size_t j = 0; j < h.s.data.size(); ++j) h.s.data[j] += h.x.data[j];
        conv3d_forward(h.s, w.at(p + ".post.w").value, w.at(p + ".post.b").value, 1, h.zp);
        relu_forward(h.zp, h.y);
        x = &h.y;
    }
    conv3d_forward(*x, w.at("cost.out.w").value, w.at("cost.out.b").value, 1, t.out_z);
    require(t.out_z.all_finite(), "non-finite cost volume");
    return t;
}

void cost_backward(const Tensor& vf, const CostTrace& t, const MatcherConfig& cfg,
                   Weights& w, const Tensor& gout, Tensor& gvf) {
    const Tensor* last = cfg.hourglasses > 0 ? &t.blocks.back().y : &t.a_in;
    Tensor gy(last->shape);
    conv3d_backward(*last, w.at("cost.out.w").value, gout, 1, gy,
                    w.at("cost.out.w").grad, w.at("cost.out.b").grad);
    for (int i = cfg.hourglasses - 1; i >= 0; --i) {
        const HourglassTrace& h = t.blocks[size_t(i)];
        const std::string p = "cost.hg" + std::to_string(i);
        Tensor gzp(h.zp.shape);
        relu_backward(h.zp, gy, gzp);
        Tensor gs(h.s.shape);
        conv3d_backward(h.s, w.at(p + ".post.w").value, gzp, 1, gs,
                        w.at(p + ".post.w").grad, w.at(p + ".post.b").grad);
        Tensor gx = gs;  // skip connection
        Tensor gam(h.am.shape);
        upsample2_backward(gs, gam);
        Tensor gzm(h.zm.shape);
        relu_backward(h.zm, gam, gzm);
        Tensor gad(h.ad.shape);
        conv3d_backward(h.ad, w.at(p + ".mid.w").value, gzm, 1, gad,
                        w.at(p + ".mid.w").grad, w.at(p + ".mid.b").grad);
        Tensor gzd(h.zd.shape);
        relu_backward(h.zd, gad, gzd);
        conv3d_backward(h.x, w.at(p + ".down.w").value, gzd, 2, gx,
                        w.at(p + ".down.w").grad, w.at(p + ".down.b").grad);
        gy = std::move(gx);
    }
    Tensor ga_in_z(t.a_in_z.shape);
    relu_backward(t.a_in_z, gy, ga_in_z);
    conv3d_backward(vf, w.at("cost.stem.w").value, ga_in_z, 1, gvf,
                    w.at("cost.stem.w").grad, w.at("cost.stem.b").grad);
}

}  // namespace

CostVolume cost_network(const FeatureVolume& vf, const MatcherConfig& cfg, const Weights& w) {
    CostTrace t = cost_forward(vf.values, cfg, w);
    CostVolume vc(vf.width, vf.height, vf.dmax);
    vc.cost.data = t.out_z.data;
    return vc;
}

DisparityMap predict_disparity(const CostVolume& vc, const DetectionMap& detections,
                               double threshold, double disparity_origin) {
    require(detections.width == vc.width && detections.height == vc.height,
            "detection map shape mismatch");
    DisparityMap out(vc.width, vc.height);
    parallel_for(static_cast<size_t>(vc.height), [&](size_t row) {
        const int v = int(row);
        std::vector<double> probs(size_t(vc.dmax));
        for (int u = 0; u < vc.width; ++u) {
            softmax_neg(vc.slice(u, v), probs.data(), vc.dmax);
            double est = 0.0;
            for (int d = 0; d < vc.dmax; ++d) est += d * probs[size_t(d)];
            out.d(u, v) = est - disparity_origin;
            out.valid(u, v) = detections.at(u, v) >= threshold ? 1 : 0;
        }
    });
    return out;
}

// --- recorded stereo pass --------------------------------------------------

MatcherRun matcher_forward(const ImageGrid& left, const ImageGrid& right,
                           const MatcherConfig& cfg, const Weights& w) {
    cfg.validate();
    require(left.width == right.width && left.height == right.height,
            "stereo pair shape mismatch");
    MatcherRun run;
    run.left = feature_forward(left, cfg, w);
    run.right = feature_forward(right, cfg, w);
    FeatureMap fl{run.left.feat}, fr{run.right.feat};
    run.vf = build_feature_volume(fl, fr, cfg.dmax, int(std::lround(cfg.disparity_origin))).values;
    run.cost = cost_forward(run.vf, cfg, w);
    const int H = left.height, W = left.width, D = cfg.dmax;
    run.vc = CostVolume(W, H, D);
    run.vc.cost.data = run.cost.out_z.data;
    run.probs = Tensor({H, W, D});
    run.dhat.assign(size_t(H) * W, 0.0);
    parallel_for(static_cast<size_t>(H), [&](size_t row) {
        const int v = int(row);
        for (int u = 0; u < W; ++u) {
            double* p = &run.probs.data[(size_t(v) * W + u) * D];
            softmax_neg(run.vc.slice(u, v), p, D);
            double est = 0.0;
            for (int d = 0; d < D; ++d) est += d * p[d];
            run.dhat[size_t(v) * W + u] = est;
        }
    });
    return run;
}

void matcher_backward(const MatcherRun& run, const MatcherConfig& cfg, Weights& w,
                      const Tensor& grad_cost, const Tensor& grad_det_left,
                      const Tensor& grad_det_right) {
    const int F = cfg.feature_channels;
    const int H = run.left.in.shape[1], W = run.left.in.shape[2], D = cfg.dmax;
    const int origin = int(std::lround(cfg.disparity_origin));
    Tensor gvf(run.vf.shape);
    if (grad_cost.numel() > 0) {
        require(grad_cost.numel() == int64_t(H) * W * D, "cost gradient shape mismatch");
        Tensor gz({1, H, W, D});
        gz.data = grad_cost.data;
        cost_backward(run.vf, run.cost, cfg, w, gz, gvf);
    }
    // split the volume gradient back onto the two feature maps
    Tensor gfl({F, H, W}), gfr({F, H, W});
    parallel_for(static_cast<size_t>(F) * H, [&](size_t row) {
        const int c = int(row / H), v = int(row % H);
        for (int u = 0; u < W; ++u) {
            const double* left = &gvf.data[((size_t(c) * H + v) * W + u) * D];
            double s = 0.0;
            for (int d = 0; d < D; ++d) s += left[d];
            gfl.data[(size_t(c) * H + v) * W + u] = s;
        }
        for (int x = 0; x < W; ++x) {
            // gather over (u,d) with u + d - origin = x
            double s = 0.0;
            for (int d = 0; d < D; ++d) {
                const int u = x - d + origin;
                if (u < 0 || u >= W) continue;
                s += gvf.data[(((size_t(c) + F) * H + v) * W + u) * D + d];
            }
            gfr.data[(size_t(c) * H + v) * W + x] = s;
        }
    });
    feature_backward(run.left, cfg, w, gfl, grad_det_left);
    feature_backward(run.right, cfg, w, gfr, grad_det_right);
}

}  // namespace stereotrace
