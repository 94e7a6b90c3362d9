#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "stereotrace/common.hpp"

namespace stereotrace {

// Dense row-major array of doubles; the last dimension varies fastest.
// Network activations, feature maps and cost volumes all live in this type.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::initializer_list<int> s) { resize(std::vector<int>(s)); }
    explicit Tensor(const std::vector<int>& s) { resize(s); }

    void resize(const std::vector<int>& s) {
        shape = s;
        data.assign(size_t(numel(s)), 0.0);
    }

    static int64_t numel(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            require(d >= 0, "negative tensor dimension");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return int64_t(data.size()); }
    int rank() const { return int(shape.size()); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    double& at(int i) { return data[size_t(i)]; }
    double& at(int i, int j) { return data[size_t(i) * shape[1] + j]; }
    double& at(int i, int j, int k) {
        return data[(size_t(i) * shape[1] + j) * shape[2] + k];
    }
    double& at(int i, int j, int k, int l) {
        return data[((size_t(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    double at(int i) const { return data[size_t(i)]; }
    double at(int i, int j) const { return data[size_t(i) * shape[1] + j]; }
    double at(int i, int j, int k) const {
        return data[(size_t(i) * shape[1] + j) * shape[2] + k];
    }
    double at(int i, int j, int k, int l) const {
        return data[((size_t(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    bool all_finite() const;
};

}  // namespace stereotrace
