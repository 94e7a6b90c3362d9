#include "stereotrace/core_ops.hpp"

#include <cmath>

#include "stereotrace/common.hpp"

namespace stereotrace {

void softmax_neg(const double* costs, double* probs, int n) {
    require(n > 0, "softmax over empty slice");
    double hi = -costs[0];
    for (int i = 1; i < n; ++i) hi = std::max(hi, -costs[i]);
    require(std::isfinite(hi), "non-finite cost in softmax");
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        probs[i] = std::exp(-costs[i] - hi);
        sum += probs[i];
    }
    for (int i = 0; i < n; ++i) probs[i] /= sum;
}

std::vector<double> softmax_neg(const std::vector<double>& costs) {
    for (double c : costs) require(std::isfinite(c), "non-finite cost in softmax");
    std::vector<double> probs(costs.size());
    softmax_neg(costs.data(), probs.data(), static_cast<int>(costs.size()));
    return probs;
}

double soft_argmin(const CostVolume& vc, int u, int v) {
    require(vc.in_bounds(u, v), "soft_argmin: pixel out of bounds");
    const double* slice = vc.slice(u, v);
    std::vector<double> probs(vc.dmax);
    softmax_neg(slice, probs.data(), vc.dmax);
    double est = 0.0;
    for (int d = 0; d < vc.dmax; ++d) est += d * probs[d];
    return est;
}

std::vector<double> variance_map(const CostVolume& vc, const DisparityMap& dgt) {
    require(dgt.width == vc.width && dgt.height == vc.height,
            "variance_map: ground truth shape mismatch");
    std::vector<double> out(static_cast<size_t>(vc.width) * vc.height, 0.0);
    std::vector<double> probs(vc.dmax);
    for (int v = 0; v < vc.height; ++v) {
        for (int u = 0; u < vc.width; ++u) {
            if (!dgt.valid(u, v)) continue;
            softmax_neg(vc.slice(u, v), probs.data(), vc.dmax);
            double g = dgt.d(u, v);
            double var = 0.0;
            for (int d = 0; d < vc.dmax; ++d) {
                double dev = d - g;
                var += dev * dev * probs[d];
            }
            out[static_cast<size_t>(v) * vc.width + u] = var;
        }
    }
    return out;
}

void soft_argmin_backward(const double* probs, int n, double softmin,
                          double grad_out, double* grad_costs) {
    for (int k = 0; k < n; ++k)
        grad_costs[k] += grad_out * (-probs[k] * (k - softmin));
}

void variance_backward(const double* probs, int n, double dgt, double variance,
                       double grad_out, double* grad_costs) {
    for (int k = 0; k < n; ++k) {
        double dev = k - dgt;
        grad_costs[k] += grad_out * (-probs[k] * (dev * dev - variance));
    }
}

double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& x, const std::vector<double>& analytic,
                  double eps) {
    require(x.size() == analytic.size(), "grad_check: size mismatch");
    std::vector<double> probe = x;
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + eps;
        double fp = f(probe);
        probe[i] = x[i] - eps;
        double fm = f(probe);
        probe[i] = x[i];
        double numeric = (fp - fm) / (2.0 * eps);
        double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace stereotrace
