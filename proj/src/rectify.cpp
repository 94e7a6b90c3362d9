#include "stereotrace/rectify.hpp"

#include <algorithm>
#include <cmath>

#include "stereotrace/common.hpp"

namespace stereotrace {

void RansacConfig::validate() const {
    require(iterations >= 1, "ransac iterations must be >= 1");
    require(inlier_threshold > 0.0, "ransac inlier threshold must be positive");
    require(min_inliers >= 1, "ransac min_inliers must be >= 1");
}

// --- Harris corners --------------------------------------------------------

std::vector<Keypoint> detect_keypoints(const ImageGrid& img, int max_n) {
    require(img.width >= 16 && img.height >= 16, "image too small for keypoints");
    require(max_n >= 0, "negative keypoint cap");
    const int W = img.width, H = img.height;
    // Sobel gradients, then 3x3 box-smoothed structure tensor
    std::vector<double> ix(size_t(W) * H, 0.0), iy(size_t(W) * H, 0.0);
    for (int v = 1; v < H - 1; ++v) {
        for (int u = 1; u < W - 1; ++u) {
            const auto p = [&](int du, int dv) { return img.at(u + du, v + dv); };
            ix[size_t(v) * W + u] = (p(1, -1) + 2 * p(1, 0) + p(1, 1) -
                                     p(-1, -1) - 2 * p(-1, 0) - p(-1, 1)) / 8.0;
            iy[size_t(v) * W + u] = (p(-1, 1) + 2 * p(0, 1) + p(1, 1) -
                                     p(-1, -1) - 2 * p(0, -1) - p(1, -1)) / 8.0;
        }
    }
    std::vector<double> resp(size_t(W) * H, 0.0);
    double rmax = 0.0;
    for (int v = 2; v < H - 2; ++v) {
        for (int u = 2; u < W - 2; ++u) {
            double sxx = 0, syy = 0, sxy = 0;
            for (int dv = -1; dv <= 1; ++dv) {
                for (int du = -1; du <= 1; ++du) {
                    const double gx = ix[size_t(v + dv) * W + u + du];
                    const double gy = iy[size_t(v + dv) * W + u + du];
                    sxx += gx * gx;
                    syy += gy * gy;
                    sxy += gx * gy;
                }
            }
            const double det = sxx * syy - sxy * sxy;
            const double tr = sxx + syy;
            const double r = det - 0.05 * tr * tr;
            resp[size_t(v) * W + u] = r;
            rmax = std::max(rmax, r);
        }
    }
    std::vector<Keypoint> kps;
    if (rmax <= 0.0) return kps;
    const double thresh = 0.01 * rmax;
    for (int v = 3; v < H - 3; ++v) {
        for (int u = 3; u < W - 3; ++u) {
            const double r = resp[size_t(v) * W + u];
            if (r < thresh) continue;
            bool is_max = true;
            for (int dv = -1; dv <= 1 && is_max; ++dv)
                for (int du = -1; du <= 1; ++du) {
                    if (du == 0 && dv == 0) continue;
                    const double n = resp[size_t(v + dv) * W + u + du];
                    if (n > r || (n == r && (dv < 0 || (dv == 0 && du < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (!is_max) continue;
            // separable quadratic fit for sub-pixel offset
            auto subpix = [&](double rm, double r0, double rp) {
                const double denom = rm - 2 * r0 + rp;
                if (denom >= 0.0) return 0.0;
                return std::clamp(0.5 * (rm - rp) / denom, -0.5, 0.5);
            };
            const double ox = subpix(resp[size_t(v) * W + u - 1], r, resp[size_t(v) * W + u + 1]);
            const double oy = subpix(resp[size_t(v - 1) * W + u], r, resp[size_t(v + 1) * W + u]);
            kps.push_back({u + ox, v + oy, r});
        }
    }
    std::sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    if (int(kps.size()) > max_n) kps.resize(size_t(max_n));
    return kps;
}

// --- ZNCC matching ---------------------------------------------------------

namespace {

// zero-mean normalized cross-correlation of patch x patch windows, or -2 if
// either window leaves the image or has no variance
double zncc(const ImageGrid& a, const ImageGrid& b, int au, int av, int bu, int bv,
            int half) {
    if (au - half < 0 || au + half >= a.width || av - half < 0 || av + half >= a.height)
        return -2.0;
    if (bu - half < 0 || bu + half >= b.width || bv - half < 0 || bv + half >= b.height)
        return -2.0;
    const int n = (2 * half + 1) * (2 * half + 1);
    double sa = 0, sb = 0;
    for (int dv = -half; dv <= half; ++dv)
        for (int du = -half; du <= half; ++du) {
            sa += a.at(au + du, av + dv);
            sb += b.at(bu + du, bv + dv);
        }
    const double ma = sa / n, mb = sb / n;
    double num = 0, da = 0, db = 0;
    for (int dv = -half; dv <= half; ++dv)
        for (int du = -half; du <= half; ++du) {
            const double va = a.at(au + du, av + dv) - ma;
            const double vb = b.at(bu + du, bv + dv) - mb;
            num += va * vb;
            da += va * va;
            db += vb * vb;
        }
    if (da <= 1e-12 || db <= 1e-12) return -2.0;
    return num / std::sqrt(da * db);
}

}  // namespace

std::vector<Correspondence> match_keypoints(const ImageGrid& left, const ImageGrid& right,
                                            const std::vector<Keypoint>& kl,
                                            const std::vector<Keypoint>& kr, int patch) {
    require(patch >= 5 && patch % 2 == 1, "patch side must be odd and >= 5");
    const int half = patch / 2;
    const int nl = int(kl.size()), nr = int(kr.size());
    std::vector<Correspondence> out;
    if (nl == 0 || nr == 0) return out;
    // all-pairs similarity, then mutual best
    std::vector<double> sim(size_t(nl) * nr);
    parallel_for(size_t(nl), [&](size_t i) {
        const int au = int(std::lround(kl[i].x)), av = int(std::lround(kl[i].y));
        for (int j = 0; j < nr; ++j) {
            const int bu = int(std::lround(kr[size_t(j)].x));
            const int bv = int(std::lround(kr[size_t(j)].y));
            sim[i * nr + j] = zncc(left, right, au, av, bu, bv, half);
        }
    });
    std::vector<int> best_for_left(size_t(nl), -1), best_for_right(size_t(nr), -1);
    for (int i = 0; i < nl; ++i) {
        double hi = -3.0;
        for (int j = 0; j < nr; ++j)
            if (sim[size_t(i) * nr + j] > hi) {
                hi = sim[size_t(i) * nr + j];
                best_for_left[size_t(i)] = j;
            }
    }
    for (int j = 0; j < nr; ++j) {
        double hi = -3.0;
        for (int i = 0; i < nl; ++i)
            if (sim[size_t(i) * nr + j] > hi) {
                hi = sim[size_t(i) * nr + j];
                best_for_right[size_t(j)] = i;
            }
    }
    for (int i = 0; i < nl; ++i) {
        const int j = best_for_left[size_t(i)];
        if (j < 0 || best_for_right[size_t(j)] != i) continue;
        const double s = sim[size_t(i) * nr + j];
        if (s < 0.8) continue;
        // Re-localize the right-hand side on the similarity surface itself: a
        // full 2D quadratic fit (cross term included, since the correlation
        // peak of an anisotropic texture is a tilted paraboloid) over the
        // 3x3 ZNCC neighbourhood.  The displacement then rests on the
        // correlation peak rather than on two independently biased corner
        // fits, and the left fit's sub-pixel part cancels out of it entirely.
        const int au = int(std::lround(kl[size_t(i)].x));
        const int av = int(std::lround(kl[size_t(i)].y));
        int bu = int(std::lround(kr[size_t(j)].x));
        int bv = int(std::lround(kr[size_t(j)].y));
        // The detector's integer cell can sit a pixel off the correlation
        // peak; walk uphill first so the fit brackets the true maximum.
        double center = s;
        for (int step = 0; step < 2; ++step) {
            int mu = 0, mv = 0;
            double hi = center;
            for (int dv = -1; dv <= 1; ++dv)
                for (int du = -1; du <= 1; ++du) {
                    if (du == 0 && dv == 0) continue;
                    const double v = zncc(left, right, au, av, bu + du, bv + dv, half);
                    if (v > hi) {
                        hi = v;
                        mu = du;
                        mv = dv;
                    }
                }
            if (mu == 0 && mv == 0) break;
            bu += mu;
            bv += mv;
            center = hi;
        }
        double sg[3][3];
        bool ok = true;
        for (int dv = -1; dv <= 1 && ok; ++dv)
            for (int du = -1; du <= 1; ++du) {
                const double v = (du == 0 && dv == 0)
                                     ? center
                                     : zncc(left, right, au, av, bu + du, bv + dv, half);
                if (v <= -2.0) {
                    ok = false;
                    break;
                }
                sg[dv + 1][du + 1] = v;
            }
        double offx = 0.0, offy = 0.0;
        // a perfect correlation peak is already localized
        if (ok && center < 1.0 - 1e-9) {
            double a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0;
            for (int dv = -1; dv <= 1; ++dv)
                for (int du = -1; du <= 1; ++du) {
                    const double v = sg[dv + 1][du + 1];
                    a1 += du * v;
                    a2 += dv * v;
                    a3 += (du * du - 2.0 / 3.0) * v;
                    a4 += (dv * dv - 2.0 / 3.0) * v;
                    a5 += du * dv * v;
                }
            a1 /= 6.0;
            a2 /= 6.0;
            a3 /= 2.0;
            a4 /= 2.0;
            a5 /= 4.0;
            const double det = 4.0 * a3 * a4 - a5 * a5;
            if (a3 < 0.0 && det > 1e-12) {
                const double px = (-2.0 * a4 * a1 + a5 * a2) / det;
                const double py = (-2.0 * a3 * a2 + a5 * a1) / det;
                if (std::abs(px) <= 0.75 && std::abs(py) <= 0.75) {
                    offx = px;
                    offy = py;
                }
            }
        }
        Keypoint refined = kr[size_t(j)];
        refined.x = double(bu) + offx + (kl[size_t(i)].x - double(au));
        refined.y = double(bv) + offy + (kl[size_t(i)].y - double(av));
        out.push_back({kl[size_t(i)], refined, s});
    }
    return out;
}

// --- translation + tilt angle ----------------------------------------------

namespace {

struct Vec2 {
    double x, y;
};

double median_of(std::vector<double> v) { return median(std::move(v)); }

}  // namespace

TranslationEstimate estimate_translation(const std::vector<Correspondence>& cs,
                                         const RansacConfig& cfg) {
    cfg.validate();
    require(int(cs.size()) >= cfg.min_inliers, "degenerate correspondences");
    // canonical order makes the estimate independent of input permutation
    std::vector<Correspondence> sorted = cs;
    std::sort(sorted.begin(), sorted.end(), [](const Correspondence& a, const Correspondence& b) {
        if (a.left.x != b.left.x) return a.left.x < b.left.x;
        if (a.left.y != b.left.y) return a.left.y < b.left.y;
        if (a.right.x != b.right.x) return a.right.x < b.right.x;
        return a.right.y < b.right.y;
    });
    const int n = int(sorted.size());
    std::vector<Vec2> disp(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) disp[size_t(i)] = {sorted[size_t(i)].dx(), sorted[size_t(i)].dy()};

    Rng rng(cfg.seed);
    std::vector<int> schedule(static_cast<size_t>(cfg.iterations));
    for (int k = 0; k < cfg.iterations; ++k) schedule[size_t(k)] = int(rng.index(size_t(n)));

    auto direction_angle = [](const std::vector<Vec2>& residuals) {
        // dominant line direction through the origin, mod pi
        std::vector<double> angles;
        for (const Vec2& r : residuals) {
            if (std::hypot(r.x, r.y) < 0.5) continue;
            angles.push_back(std::atan(r.x == 0.0 ? (r.y > 0 ? 1e18 : -1e18) : r.y / r.x));
        }
        if (angles.empty()) return 0.0;  // no spread: treat the line as horizontal
        return median_of(std::move(angles));
    };

    auto count_inliers = [&](const Vec2& t, double ang, std::vector<int>* idx) {
        const double px = -std::sin(ang), py = std::cos(ang);  // unit normal to the line
        int count = 0;
        for (int i = 0; i < n; ++i) {
            const double rx = disp[size_t(i)].x - t.x, ry = disp[size_t(i)].y - t.y;
            if (std::abs(rx * px + ry * py) <= cfg.inlier_threshold) {
                ++count;
                if (idx) idx->push_back(i);
            }
        }
        return count;
    };

    int best_count = -1;
    Vec2 best_t{0, 0};
    double best_ang = 0.0;
    for (int k = 0; k < cfg.iterations; ++k) {
        const Vec2 t = disp[size_t(schedule[size_t(k)])];
        std::vector<Vec2> residuals(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            residuals[size_t(i)] = {disp[size_t(i)].x - t.x, disp[size_t(i)].y - t.y};
        const double ang = direction_angle(residuals);
        const int count = count_inliers(t, ang, nullptr);
        if (count > best_count) {
            best_count = count;
            best_t = t;
            best_ang = ang;
        }
    }
    require(best_count >= cfg.min_inliers, "degenerate correspondences");

    // refit: median decomposition of inlier displacements along/normal to the line
    std::vector<int> inliers;
    count_inliers(best_t, best_ang, &inliers);
    Vec2 t = best_t;
    double ang = best_ang;
    for (int round = 0; round < 2; ++round) {
        std::vector<Vec2> residuals;
        residuals.reserve(inliers.size());
        for (int i : inliers)
            residuals.push_back({disp[size_t(i)].x - t.x, disp[size_t(i)].y - t.y});
        ang = direction_angle(residuals);
        const double ux = std::cos(ang), uy = std::sin(ang);
        std::vector<double> along, normal;
        for (int i : inliers) {
            along.push_back(disp[size_t(i)].x * ux + disp[size_t(i)].y * uy);
            normal.push_back(-disp[size_t(i)].x * uy + disp[size_t(i)].y * ux);
        }
        const double ta = median_of(std::move(along));
        const double tn = median_of(std::move(normal));
        t = {ta * ux - tn * uy, ta * uy + tn * ux};
        inliers.clear();
        count_inliers(t, ang, &inliers);
    }
    require(int(inliers.size()) >= cfg.min_inliers, "degenerate correspondences");
    return {t.x, t.y, std::move(inliers)};
}

double estimate_tilt_angle(const std::vector<Correspondence>& cs, double tx, double ty) {
    std::vector<double> angles;
    for (const Correspondence& c : cs) {
        const double rx = c.dx() - tx, ry = c.dy() - ty;
        if (std::hypot(rx, ry) <= 0.5) continue;
        angles.push_back(std::atan(rx == 0.0 ? (ry > 0 ? 1e18 : -1e18) : ry / rx));
    }
    require(int(angles.size()) >= 5, "degenerate: no measurable tilt displacement");
    return rad2deg(median_of(std::move(angles)));
}

// --- resampling ------------------------------------------------------------

ImageGrid translate_image(const ImageGrid& img, double tx, double ty) {
    const double fill = img.median_intensity();
    ImageGrid out(img.width, img.height);
    parallel_for(size_t(img.height), [&](size_t row) {
        const int v = int(row);
        for (int u = 0; u < img.width; ++u)
            out.at(u, v) = img.sample(u - tx, v - ty, fill);
    });
    return out;
}

ImageGrid derotate(const ImageGrid& img, double theta_deg) {
    require(std::abs(theta_deg) <= 90.0, "rotation angle outside +/-90 degrees");
    if (theta_deg == 0.0) return img;
    const double th = deg2rad(theta_deg);
    const double c = std::cos(th), s = std::sin(th);
    const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
    const double fill = img.median_intensity();
    ImageGrid out(img.width, img.height);
    parallel_for(size_t(img.height), [&](size_t row) {
        const int v = int(row);
        const double dy = v - cy;
        for (int u = 0; u < img.width; ++u) {
            const double dx = u - cx;
            out.at(u, v) = img.sample(cx + c * dx - s * dy, cy + s * dx + c * dy, fill);
        }
    });
    return out;
}

RectifyResult rectify_pair(const ImageGrid& left, const ImageGrid& right,
                           const RansacConfig& cfg) {
    require(left.width == right.width && left.height == right.height,
            "stereo pair shape mismatch");
    const auto kl = detect_keypoints(left, 500);
    const auto kr = detect_keypoints(right, 500);
    const auto cs = match_keypoints(left, right, kl, kr, 11);
    TranslationEstimate te = estimate_translation(cs, cfg);
    // re-sort exactly as the estimator does so inlier indices line up
    std::vector<Correspondence> sorted = cs;
    std::sort(sorted.begin(), sorted.end(), [](const Correspondence& a, const Correspondence& b) {
        if (a.left.x != b.left.x) return a.left.x < b.left.x;
        if (a.left.y != b.left.y) return a.left.y < b.left.y;
        if (a.right.x != b.right.x) return a.right.x < b.right.x;
        return a.right.y < b.right.y;
    });
    std::vector<Correspondence> inl;
    inl.reserve(te.inliers.size());
    for (int i : te.inliers) inl.push_back(sorted[size_t(i)]);
    double theta = 0.0;
    try {
        theta = estimate_tilt_angle(inl, te.tx, te.ty);
    } catch (const Error&) {
        // residuals carry no direction: the pair is already aligned in angle
    }
    RectifyResult res;
    res.geo.t_x = te.tx;
    res.geo.t_y = te.ty;
    res.geo.theta_deg = theta;
    res.geo.validate();
    res.inlier_count = int(te.inliers.size());
    res.right = derotate(translate_image(right, te.tx, te.ty), theta);
    res.left = derotate(left, theta);
    return res;
}

}  // namespace stereotrace
