#pragma once

#include <map>
#include <string>
#include <vector>

#include "stereotrace/common.hpp"
#include "stereotrace/tensor.hpp"

namespace stereotrace {

struct Param {
    Tensor value;
    Tensor grad;
};

// Named parameter registry for both networks. Values are kept representable
// in f32 (quantized after init and after every optimizer step) so the weights
// file round-trips losslessly; arithmetic stays in double.
class Weights {
public:
    Param& add(const std::string& name, const std::vector<int>& shape);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }

    const std::map<std::string, Param>& entries() const { return params_; }
    std::map<std::string, Param>& entries_mutable() { return params_; }
    size_t tensor_count() const { return params_.size(); }
    size_t scalar_count() const;

    void zero_grads();
    void quantize_f32();
    bool all_finite() const;

    // Flat views in name order, for the optimizer and gradient checks.
    std::vector<double> flat_values() const;
    void set_flat_values(const std::vector<double>& v);
    std::vector<double> flat_grads() const;

private:
    std::map<std::string, Param> params_;
};

void write_weights(const Weights& w, const std::string& path);
Weights read_weights(const std::string& path);

// He-normal fill: std = sqrt(2 / fan_in).
void he_init(Tensor& t, int fan_in, Rng& rng);

// --- layers ---------------------------------------------------------------
//
// Single-sample tensors, channels first: 2D activations are {C,H,W}, 3D are
// {C,H,W,D}. Kernels are 3x3(x3) with zero padding 1. Backward functions
// ACCUMULATE into the gradient tensors; callers zero them per step.

void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out);
void conv2d_backward(const Tensor& in, const Tensor& w, const Tensor& gout,
                     Tensor& gin, Tensor& gw, Tensor& gb);

// stride applies to all three spatial dims; 2 requires even extents.
void conv3d_forward(const Tensor& in, const Tensor& w, const Tensor& b, int stride,
                    Tensor& out);
void conv3d_backward(const Tensor& in, const Tensor& w, const Tensor& gout, int stride,
                     Tensor& gin, Tensor& gw, Tensor& gb);

void relu_forward(const Tensor& in, Tensor& out);
void relu_backward(const Tensor& in, const Tensor& gout, Tensor& gin);

// Nearest-neighbour x2 along H, W, D of a {C,H,W,D} tensor.
void upsample2_forward(const Tensor& in, Tensor& out);
void upsample2_backward(const Tensor& gout, Tensor& gin);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace stereotrace
