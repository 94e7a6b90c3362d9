#pragma once

#include <functional>
#include <vector>

#include "stereotrace/image.hpp"
#include "stereotrace/volume.hpp"

namespace stereotrace {

// Probability over disparity levels: entry i proportional to exp(-cost_i),
// stabilized by shifting with the per-slice max of -cost.
std::vector<double> softmax_neg(const std::vector<double>& costs);
void softmax_neg(const double* costs, double* probs, int n);

// Expected disparity index under softmax_neg: sum_d d * p_d. Range [0, D-1].
double soft_argmin(const CostVolume& vc, int u, int v);

// Expected squared deviation around the ground-truth disparity at each
// masked pixel: sum_d (d - d_gt)^2 * p_d. Unmasked pixels are left at 0.
std::vector<double> variance_map(const CostVolume& vc, const DisparityMap& dgt);

// --- adjoint rules --------------------------------------------------------
//
// Each rule maps the gradient of a scalar objective w.r.t. an op's output to
// the gradient w.r.t. the cost slice, using the forward-pass probabilities.

// d(soft_argmin)/d(cost_k) = -p_k * (k - soft_argmin).
void soft_argmin_backward(const double* probs, int n, double softmin,
                          double grad_out, double* grad_costs);

// d(variance)/d(cost_k) = -p_k * ((k - dgt)^2 - variance).
void variance_backward(const double* probs, int n, double dgt, double variance,
                       double grad_out, double* grad_costs);

// --- finite-difference gradient check ------------------------------------

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// `f` must be a scalar function of the flat input; `analytic` its gradient at x.
double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& x, const std::vector<double>& analytic,
                  double eps);

}  // namespace stereotrace
