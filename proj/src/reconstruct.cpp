#include "stereotrace/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace stereotrace {

void Reconstruction::validate() const {
    require(width >= 0 && height >= 0, "negative reconstruction dimensions");
    require(points.size() == provenance.size(), "points/provenance length mismatch");
    for (const Point3D& p : points)
        require(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z),
                "non-finite reconstruction point");
}

DisparityMap refine_disparity(const DisparityMap& disp, const DetectionMap& det_left,
                              const DetectionMap& det_right, int radius) {
    disp.validate();
    require(det_left.width == disp.width && det_left.height == disp.height &&
                det_right.width == disp.width && det_right.height == disp.height,
            "refine_disparity shape mismatch");
    require(radius >= 0, "negative refinement radius");
    (void)det_left;  // the mask already restricts to detected left pixels
    const int w = disp.width;
    DisparityMap out(disp.width, disp.height);
    parallel_for(size_t(disp.height), [&](size_t row) {
        const int v = int(row);
        for (int u = 0; u < w; ++u) {
            if (!disp.valid(u, v)) continue;
            const double x = u + disp.d(u, v);
            // nearest binary right detection in this row; ties go left
            int best = -1;
            double best_dist = double(radius) + 0.5;
            const int lo = std::max(0, int(std::ceil(x)) - radius - 1);
            const int hi = std::min(w - 1, int(std::floor(x)) + radius + 1);
            for (int c = lo; c <= hi; ++c) {
                if (det_right.at(c, v) < 0.5) continue;
                const double dist = std::abs(c - x);
                if (dist <= radius && dist < best_dist) {
                    best = c;
                    best_dist = dist;
                }
            }
            if (best < 0) continue;  // erroneous match, removed
            double snapped = best;
            if (best > 0 && best + 1 < w) {
                const double ym = det_right.at(best - 1, v);
                const double y0 = det_right.at(best, v);
                const double yp = det_right.at(best + 1, v);
                const double denom = ym - 2.0 * y0 + yp;
                if (std::abs(denom) > 1e-12)
                    snapped += std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
            }
            out.d(u, v) = snapped - u;
            out.valid(u, v) = 1;
        }
    });
    return out;
}

double depth_from_disparity(double d, double phi_deg) {
    require(phi_deg > 0.0 && phi_deg < 180.0, "phi outside (0,180) degrees");
    return d / (2.0 * std::sin(deg2rad(phi_deg) / 2.0));
}

Reconstruction triangulate(const DisparityMap& disp, const TiltGeometry& geo) {
    disp.validate();
    geo.validate();
    Reconstruction rec;
    rec.width = disp.width;
    rec.height = disp.height;
    rec.geo = geo;
    for (int v = 0; v < disp.height; ++v)
        for (int u = 0; u < disp.width; ++u) {
            if (!disp.valid(u, v)) continue;
            const double d = disp.d(u, v);
            rec.points.push_back(
                {u + d / 2.0, double(v), depth_from_disparity(d, geo.phi_deg)});
            rec.provenance.push_back({u, v, d});
        }
    rec.validate();
    return rec;
}

std::vector<std::array<double, 2>> reproject(const Reconstruction& rec, double alpha_deg) {
    rec.validate();
    const double a = deg2rad(alpha_deg);
    const double ca = std::cos(a), sa = std::sin(a);
    const double cx = (rec.width - 1) / 2.0;
    std::vector<std::array<double, 2>> out;
    out.reserve(rec.points.size());
    for (const Point3D& p : rec.points)
        out.push_back({(p.x - cx) * ca + p.z * sa + cx, p.y});
    return out;
}

namespace {

// Greedy polyline tracing over the provenance pixel mask: walk 8-connected
// unvisited neighbors starting from low-degree pixels, one edge per step.
std::vector<std::array<size_t, 2>> trace_edges(const Reconstruction& rec) {
    std::vector<std::array<size_t, 2>> edges;
    if (rec.width <= 0 || rec.height <= 0) return edges;
    std::vector<ptrdiff_t> index(size_t(rec.width) * size_t(rec.height), -1);
    for (size_t i = 0; i < rec.provenance.size(); ++i) {
        const PixelRef& p = rec.provenance[i];
        require(p.u >= 0 && p.u < rec.width && p.v >= 0 && p.v < rec.height,
                "provenance pixel out of bounds");
        index[size_t(p.v) * rec.width + p.u] = ptrdiff_t(i);
    }
    auto at = [&](int u, int v) -> ptrdiff_t {
        if (u < 0 || u >= rec.width || v < 0 || v >= rec.height) return -1;
        return index[size_t(v) * rec.width + u];
    };
    auto degree = [&](const PixelRef& p) {
        int n = 0;
        for (int dv = -1; dv <= 1; ++dv)
            for (int du = -1; du <= 1; ++du)
                if ((du || dv) && at(p.u + du, p.v + dv) >= 0) ++n;
        return n;
    };
    std::vector<size_t> order(rec.provenance.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return degree(rec.provenance[a]) < degree(rec.provenance[b]);
    });
    std::vector<char> visited(rec.provenance.size(), 0);
    for (size_t start : order) {
        if (visited[start]) continue;
        size_t cur = start;
        visited[cur] = 1;
        for (;;) {
            ptrdiff_t next = -1;
            const PixelRef& p = rec.provenance[cur];
            for (int dv = -1; dv <= 1 && next < 0; ++dv)
                for (int du = -1; du <= 1 && next < 0; ++du) {
                    if (!du && !dv) continue;
                    const ptrdiff_t j = at(p.u + du, p.v + dv);
                    if (j >= 0 && !visited[size_t(j)]) next = j;
                }
            if (next < 0) break;
            edges.push_back({cur, size_t(next)});
            cur = size_t(next);
            visited[cur] = 1;
        }
    }
    return edges;
}

}  // namespace

void export_ply(const Reconstruction& rec, const std::string& path) {
    rec.validate();
    const auto edges = trace_edges(rec);
    std::ofstream f(path);
    require(bool(f), "cannot write: " + path);
    f << "ply\nformat ascii 1.0\n";
    f << "element vertex " << rec.points.size() << "\n";
    f << "property float x\nproperty float y\nproperty float z\n";
    f << "element edge " << edges.size() << "\n";
    f << "property int vertex1\nproperty int vertex2\n";
    f << "end_header\n";
    char line[128];
    for (const Point3D& p : rec.points) {
        std::snprintf(line, sizeof line, "%.9g %.9g %.9g\n", p.x, p.y, p.z);
        f << line;
    }
    for (const auto& e : edges) f << e[0] << " " << e[1] << "\n";
    require(bool(f), "write failed: " + path);
}

}  // namespace stereotrace
