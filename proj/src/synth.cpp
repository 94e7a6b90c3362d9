#include "stereotrace/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace stereotrace {

void Scene3D::validate() const {
    require(width > 0 && height > 0, "scene dimensions must be positive");
    require(z_extent >= 0.0, "negative z extent");
    for (const Curve3D& c : curves) {
        require(c.control.size() >= 2, "curve needs at least 2 control points");
        require(c.thickness > 0.0, "curve thickness must be positive");
        require(c.intensity >= 0.0, "negative curve intensity");
        for (const auto& p : c.control)
            require(p[0] >= 0.0 && p[0] <= width && p[1] >= 0.0 && p[1] <= height &&
                        std::abs(p[2]) <= z_extent,
                    "control point outside slab");
    }
}

void RenderConfig::validate() const {
    require(line_sigma > 0.0, "line sigma must be positive");
    require(background >= 0.0 && background <= 1.0, "background outside [0,1]");
    require(contrast >= 0.0, "negative contrast");
    require(noise_sigma >= 0.0, "negative noise sigma");
}

// --- curve sampling --------------------------------------------------------

namespace {

using P3 = std::array<double, 3>;

P3 catmull_rom(const P3& p0, const P3& p1, const P3& p2, const P3& p3, double t) {
    P3 out;
    const double t2 = t * t, t3 = t2 * t;
    for (int k = 0; k < 3; ++k)
        out[size_t(k)] = 0.5 * (2.0 * p1[size_t(k)] + (p2[size_t(k)] - p0[size_t(k)]) * t +
                                (2.0 * p0[size_t(k)] - 5.0 * p1[size_t(k)] +
                                 4.0 * p2[size_t(k)] - p3[size_t(k)]) * t2 +
                                (3.0 * p1[size_t(k)] - p0[size_t(k)] - 3.0 * p2[size_t(k)] +
                                 p3[size_t(k)]) * t3);
    return out;
}

// dense spline samples clamped into the slab, spacing ~0.25 px
std::vector<P3> sample_curve(const Curve3D& c, const Scene3D& scene) {
    std::vector<P3> out;
    const int n = int(c.control.size());
    for (int i = 0; i + 1 < n; ++i) {
        const P3& p0 = c.control[size_t(std::max(0, i - 1))];
        const P3& p1 = c.control[size_t(i)];
        const P3& p2 = c.control[size_t(i + 1)];
        const P3& p3 = c.control[size_t(std::min(n - 1, i + 2))];
        const double len = std::hypot(p2[0] - p1[0], p2[1] - p1[1]);
        const int steps = std::max(2, int(std::ceil(len / 0.25)));
        const bool last = i + 2 == n;
        for (int s = 0; s < steps + (last ? 1 : 0); ++s) {
            P3 p = catmull_rom(p0, p1, p2, p3, double(s) / steps);
            p[0] = std::clamp(p[0], 0.0, double(scene.width));
            p[1] = std::clamp(p[1], 0.0, double(scene.height));
            p[2] = std::clamp(p[2], -scene.z_extent, scene.z_extent);
            out.push_back(p);
        }
    }
    return out;
}

struct Hit {
    double dist2 = std::numeric_limits<double>::infinity();
    double z = 0.0;
    int curve = -1;
};

// two nearest distinct curves per pixel of the projected view
struct HitMaps {
    int width = 0, height = 0;
    std::vector<Hit> best, second;

    HitMaps(int w, int h) : width(w), height(h), best(size_t(w) * h), second(size_t(w) * h) {}

    void update(int u, int v, double dist2, double z, int curve) {
        Hit& b = best[size_t(v) * width + u];
        Hit& s = second[size_t(v) * width + u];
        if (curve == b.curve) {
            if (dist2 < b.dist2) {
                b.dist2 = dist2;
                b.z = z;
            }
        } else if (curve == s.curve) {
            if (dist2 < s.dist2) {
                s.dist2 = dist2;
                s.z = z;
            }
            if (s.dist2 < b.dist2) std::swap(b, s);
        } else if (dist2 < s.dist2) {
            s = {dist2, z, curve};
            if (s.dist2 < b.dist2) std::swap(b, s);
        }
    }
};

HitMaps project_hits(const Scene3D& scene, double alpha_deg, const RenderConfig& cfg) {
    const double a = deg2rad(alpha_deg);
    const double ca = std::cos(a), sa = std::sin(a);
    const double cx = (scene.width - 1) / 2.0;
    HitMaps maps(scene.width, scene.height);
    for (int ci = 0; ci < int(scene.curves.size()); ++ci) {
        const Curve3D& c = scene.curves[size_t(ci)];
        const double reach = 3.0 * c.thickness * cfg.line_sigma;
        for (const P3& p : sample_curve(c, scene)) {
            const double u = (p[0] - cx) * ca + p[2] * sa + cx;
            const double v = p[1];
            const int u0 = std::max(0, int(std::ceil(u - reach)));
            const int u1 = std::min(scene.width - 1, int(std::floor(u + reach)));
            const int v0 = std::max(0, int(std::ceil(v - reach)));
            const int v1 = std::min(scene.height - 1, int(std::floor(v + reach)));
            for (int pv = v0; pv <= v1; ++pv)
                for (int pu = u0; pu <= u1; ++pu) {
                    const double d2 = (pu - u) * (pu - u) + (pv - v) * (pv - v);
                    maps.update(pu, pv, d2, p[2], ci);
                }
        }
    }
    return maps;
}

}  // namespace

// --- scene generation ------------------------------------------------------

Scene3D generate_scene(Rng& rng, int n_curves, int width, int height, double z_extent,
                       double max_curvature) {
    require(n_curves >= 0, "negative curve count");
    require(width > 0 && height > 0, "scene dimensions must be positive");
    require(z_extent >= 0.0 && max_curvature > 0.0, "bad scene parameters");
    Scene3D scene;
    scene.width = width;
    scene.height = height;
    scene.z_extent = z_extent;
    const double margin = 0.12 * std::min(width, height);
    const double step = 0.06 * std::min(width, height);
    const double turn_max = std::min(0.8, max_curvature * step);
    for (int ci = 0; ci < n_curves; ++ci) {
        Curve3D c;
        c.thickness = rng.uniform(0.9, 1.4);
        c.intensity = rng.uniform(0.75, 1.0);
        double x = rng.uniform(margin, width - margin);
        double y = rng.uniform(margin, height - margin);
        double z = rng.uniform(-0.7 * z_extent, 0.7 * z_extent);
        double dir = rng.uniform(0.0, 2.0 * kPi);
        const int n_ctrl = 10;
        for (int k = 0; k < n_ctrl; ++k) {
            c.control.push_back({x, y, z});
            dir += rng.uniform(-turn_max, turn_max);
            x += step * std::cos(dir);
            y += step * std::sin(dir);
            if (x < margin || x > width - margin || y < margin || y > height - margin) {
                // steer back toward the slab interior
                x = std::clamp(x, margin, width - margin);
                y = std::clamp(y, margin, height - margin);
                dir = std::atan2(height / 2.0 - y, width / 2.0 - x) +
                      rng.uniform(-0.3, 0.3);
            }
            z = std::clamp(z + rng.uniform(-0.08, 0.08) * z_extent, -0.9 * z_extent,
                           0.9 * z_extent);
        }
        scene.curves.push_back(std::move(c));
    }
    scene.validate();
    return scene;
}

// --- rendering -------------------------------------------------------------

std::pair<ImageGrid, DetectionMap> render_view(const Scene3D& scene, double alpha_deg,
                                               const RenderConfig& cfg) {
    scene.validate();
    cfg.validate();
    require(std::abs(alpha_deg) < 60.0, "view angle outside +/-60 degrees");
    const HitMaps maps = project_hits(scene, alpha_deg, cfg);
    ImageGrid img(scene.width, scene.height);
    DetectionMap det(scene.width, scene.height);
    for (int v = 0; v < scene.height; ++v)
        for (int u = 0; u < scene.width; ++u) {
            double val = cfg.background;
            bool detected = false;
            for (const Hit* h : {&maps.best[size_t(v) * scene.width + u],
                                 &maps.second[size_t(v) * scene.width + u]}) {
                if (h->curve < 0) continue;
                const Curve3D& c = scene.curves[size_t(h->curve)];
                const double sigma = c.thickness * cfg.line_sigma;
                if (h->dist2 > 9.0 * sigma * sigma) continue;
                const double dark =
                    c.intensity * cfg.contrast * std::exp(-h->dist2 / (2.0 * sigma * sigma));
                val = std::min(val, cfg.background - dark);
                if (h->dist2 <= sigma * sigma) detected = true;
            }
            img.at(u, v) = val;
            det.at(u, v) = detected ? 1.0 : 0.0;
        }
    if (cfg.noise_sigma > 0.0) {
        Rng noise = Rng(cfg.seed).fork(std::bit_cast<uint64_t>(alpha_deg));
        for (double& p : img.values)
            p = std::clamp(p + cfg.noise_sigma * noise.normal(), 0.0, 1.0);
    } else {
        for (double& p : img.values) p = std::clamp(p, 0.0, 1.0);
    }
    return {std::move(img), std::move(det)};
}

DisparityMap gt_disparity(const Scene3D& scene, double phi_deg, const RenderConfig& cfg) {
    scene.validate();
    cfg.validate();
    require(phi_deg > 0.0 && phi_deg < 120.0, "phi outside (0,120) degrees");
    const double scale = 2.0 * std::sin(deg2rad(phi_deg) / 2.0);
    const HitMaps maps = project_hits(scene, -phi_deg / 2.0, cfg);
    DisparityMap out(scene.width, scene.height);
    for (int v = 0; v < scene.height; ++v)
        for (int u = 0; u < scene.width; ++u) {
            const Hit& b = maps.best[size_t(v) * scene.width + u];
            const Hit& s = maps.second[size_t(v) * scene.width + u];
            auto within = [&](const Hit& h) {
                if (h.curve < 0) return false;
                const double sigma =
                    scene.curves[size_t(h.curve)].thickness * cfg.line_sigma;
                return h.dist2 <= sigma * sigma;
            };
            const bool bin = within(b), sin_ = within(s);
            if (!bin && !sin_) continue;
            if (bin && sin_) {
                const double d1 = b.z * scale, d2 = s.z * scale;
                if (std::abs(d1 - d2) > 0.5) continue;  // ambiguous overlap
                out.d(u, v) = std::max(b.z, s.z) * scale;  // nearest to camera
            } else {
                out.d(u, v) = (bin ? b.z : s.z) * scale;
            }
            out.valid(u, v) = 1;
        }
    return out;
}

std::vector<std::array<double, 3>> sample_scene_points(const Scene3D& scene) {
    scene.validate();
    std::vector<P3> out;
    for (const Curve3D& c : scene.curves) {
        auto samples = sample_curve(c, scene);
        out.insert(out.end(), samples.begin(), samples.end());
    }
    return out;
}

// --- scene file ------------------------------------------------------------

void write_scene_json(const Scene3D& scene, const std::string& path) {
    scene.validate();
    nlohmann::json j;
    j["width"] = scene.width;
    j["height"] = scene.height;
    j["z_extent"] = scene.z_extent;
    j["curves"] = nlohmann::json::array();
    for (const Curve3D& c : scene.curves) {
        nlohmann::json jc;
        jc["thickness"] = c.thickness;
        jc["intensity"] = c.intensity;
        jc["control"] = nlohmann::json::array();
        for (const auto& p : c.control) jc["control"].push_back({p[0], p[1], p[2]});
        j["curves"].push_back(std::move(jc));
    }
    std::ofstream f(path);
    require(bool(f), "cannot write: " + path);
    f << j.dump(2) << "\n";
    require(bool(f), "write failed: " + path);
}

Scene3D read_scene_json(const std::string& path) {
    std::ifstream f(path);
    require(bool(f), "cannot open: " + path);
    Scene3D scene;
    try {
        const nlohmann::json j = nlohmann::json::parse(f);
        scene.width = j.at("width").get<int>();
        scene.height = j.at("height").get<int>();
        scene.z_extent = j.at("z_extent").get<double>();
        for (const auto& jc : j.at("curves")) {
            Curve3D c;
            c.thickness = jc.at("thickness").get<double>();
            c.intensity = jc.at("intensity").get<double>();
            for (const auto& jp : jc.at("control"))
                c.control.push_back({jp.at(0).get<double>(), jp.at(1).get<double>(),
                                     jp.at(2).get<double>()});
            scene.curves.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        fail("bad scene file " + path + ": " + e.what());
    }
    scene.validate();
    return scene;
}

}  // namespace stereotrace
