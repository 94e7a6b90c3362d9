#include "stereotrace/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace stereotrace {

Param& Weights::add(const std::string& name, const std::vector<int>& shape) {
    require(params_.count(name) == 0, "duplicate parameter: " + name);
    Param& p = params_[name];
    p.value = Tensor(shape);
    p.grad = Tensor(shape);
    return p;
}

Param& Weights::at(const std::string& name) {
    auto it = params_.find(name);
    require(it != params_.end(), "unknown parameter: " + name);
    return it->second;
}

const Param& Weights::at(const std::string& name) const {
    auto it = params_.find(name);
    require(it != params_.end(), "unknown parameter: " + name);
    return it->second;
}

size_t Weights::scalar_count() const {
    size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.data.size();
    return n;
}

void Weights::zero_grads() {
    for (auto& [name, p] : params_) p.grad.zero();
}

void Weights::quantize_f32() {
    for (auto& [name, p] : params_)
        for (double& v : p.value.data) v = double(float(v));
}

bool Weights::all_finite() const {
    for (const auto& [name, p] : params_)
        if (!p.value.all_finite()) return false;
    return true;
}

std::vector<double> Weights::flat_values() const {
    std::vector<double> out;
    out.reserve(scalar_count());
    for (const auto& [name, p] : params_)
        out.insert(out.end(), p.value.data.begin(), p.value.data.end());
    return out;
}

void Weights::set_flat_values(const std::vector<double>& v) {
    require(v.size() == scalar_count(), "flat value size mismatch");
    size_t off = 0;
    for (auto& [name, p] : params_) {
        std::copy(v.begin() + off, v.begin() + off + p.value.data.size(),
                  p.value.data.begin());
        off += p.value.data.size();
    }
}

std::vector<double> Weights::flat_grads() const {
    std::vector<double> out;
    out.reserve(scalar_count());
    for (const auto& [name, p] : params_)
        out.insert(out.end(), p.grad.data.begin(), p.grad.data.end());
    return out;
}

// --- serialization --------------------------------------------------------

namespace {

void put_u32(std::ostream& f, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& f, uint64_t v) {
    put_u32(f, static_cast<uint32_t>(v));
    put_u32(f, static_cast<uint32_t>(v >> 32));
}

uint32_t get_u32(std::istream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

uint64_t get_u64(std::istream& f) {
    uint64_t lo = get_u32(f);
    uint64_t hi = get_u32(f);
    return lo | hi << 32;
}

}  // namespace

void write_weights(const Weights& w, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    require(bool(f), "cannot write: " + path);
    f.write("CSWT", 4);
    put_u32(f, 1);
    put_u64(f, w.tensor_count());
    for (const auto& [name, p] : w.entries()) {
        put_u32(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), std::streamsize(name.size()));
        put_u32(f, static_cast<uint32_t>(p.value.shape.size()));
        for (int dim : p.value.shape) put_u32(f, static_cast<uint32_t>(dim));
        std::vector<float> buf(p.value.data.size());
        for (size_t i = 0; i < buf.size(); ++i) buf[i] = float(p.value.data[i]);
        f.write(reinterpret_cast<const char*>(buf.data()),
                std::streamsize(buf.size() * sizeof(float)));
    }
    require(bool(f), "write failed: " + path);
}

Weights read_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(bool(f), "cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    require(bool(f) && std::memcmp(magic, "CSWT", 4) == 0, "bad weights magic: " + path);
    const uint32_t version = get_u32(f);
    require(version == 1, "unsupported weights version: " + path);
    const uint64_t count = get_u64(f);
    Weights w;
    for (uint64_t i = 0; i < count; ++i) {
        const uint32_t name_len = get_u32(f);
        require(bool(f) && name_len > 0 && name_len < 4096, "bad weights entry: " + path);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const uint32_t rank = get_u32(f);
        require(bool(f) && rank >= 1 && rank <= 8, "bad tensor rank: " + path);
        std::vector<int> shape(rank);
        for (uint32_t r = 0; r < rank; ++r) {
            uint32_t dim = get_u32(f);
            require(dim > 0 && dim < (1u << 24), "bad tensor dim: " + path);
            shape[r] = int(dim);
        }
        Param& p = w.add(name, shape);
        std::vector<float> buf(p.value.data.size());
        f.read(reinterpret_cast<char*>(buf.data()),
               std::streamsize(buf.size() * sizeof(float)));
        require(bool(f), "truncated weights file: " + path);
        for (size_t j = 0; j < buf.size(); ++j) p.value.data[j] = double(buf[j]);
    }
    return w;
}

void he_init(Tensor& t, int fan_in, Rng& rng) {
    const double std = std::sqrt(2.0 / fan_in);
    for (double& v : t.data) v = std * rng.normal();
}

// --- 2D convolution (3x3, pad 1, stride 1) --------------------------------

void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b, Tensor& out) {
    const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
    const int O = w.shape[0];
    require(w.shape.size() == 4 && w.shape[1] == C && w.shape[2] == 3 && w.shape[3] == 3,
            "conv2d weight shape mismatch");
    out = Tensor({O, H, W});
    parallel_for(static_cast<size_t>(O) * H, [&](size_t row) {
        const int o = int(row / H), y = int(row % H);
        double* orow = &out.data[(size_t(o) * H + y) * W];
        const double bias = b.data[size_t(o)];
        for (int x = 0; x < W; ++x) orow[x] = bias;
        for (int c = 0; c < C; ++c) {
            for (int ky = 0; ky < 3; ++ky) {
                const int iy = y + ky - 1;
                if (iy < 0 || iy >= H) continue;
                const double* irow = &in.data[(size_t(c) * H + iy) * W];
                const double* wk = &w.data[((size_t(o) * C + c) * 3 + ky) * 3];
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = wk[kx];
                    const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
                    for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x + kx - 1];
                }
            }
        }
    });
}

void conv2d_backward(const Tensor& in, const Tensor& w, const Tensor& gout,
                     Tensor& gin, Tensor& gw, Tensor& gb) {
    const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
    const int O = w.shape[0];
    // input gradient: gather over output positions, one writer per input row
    parallel_for(static_cast<size_t>(C) * H, [&](size_t row) {
        const int c = int(row / H), iy = int(row % H);
        double* grow = &gin.data[(size_t(c) * H + iy) * W];
        for (int o = 0; o < O; ++o) {
            for (int ky = 0; ky < 3; ++ky) {
                const int y = iy + 1 - ky;
                if (y < 0 || y >= H) continue;
                const double* gorow = &gout.data[(size_t(o) * H + y) * W];
                const double* wk = &w.data[((size_t(o) * C + c) * 3 + ky) * 3];
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = wk[kx];
                    const int ix0 = std::max(0, kx - 1), ix1 = std::min(W, W + kx - 1);
                    for (int ix = ix0; ix < ix1; ++ix) grow[ix] += wv * gorow[ix + 1 - kx];
                }
            }
        }
    });
    // weight gradient: one (o,c) kernel per task
    parallel_for(static_cast<size_t>(O) * C, [&](size_t oc) {
        const int o = int(oc / C), c = int(oc % C);
        double acc[9] = {0};
        for (int y = 0; y < H; ++y) {
            const double* gorow = &gout.data[(size_t(o) * H + y) * W];
            for (int ky = 0; ky < 3; ++ky) {
                const int iy = y + ky - 1;
                if (iy < 0 || iy >= H) continue;
                const double* irow = &in.data[(size_t(c) * H + iy) * W];
                for (int kx = 0; kx < 3; ++kx) {
                    const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
                    double s = 0.0;
                    for (int x = x0; x < x1; ++x) s += gorow[x] * irow[x + kx - 1];
                    acc[ky * 3 + kx] += s;
                }
            }
        }
        double* gk = &gw.data[(size_t(o) * C + c) * 9];
        for (int k = 0; k < 9; ++k) gk[k] += acc[k];
    });
    for (int o = 0; o < O; ++o) {
        double s = 0.0;
        const double* base = &gout.data[size_t(o) * H * W];
        for (size_t i = 0; i < size_t(H) * W; ++i) s += base[i];
        gb.data[size_t(o)] += s;
    }
}

// --- 3D convolution (3x3x3, pad 1, stride 1 or 2) -------------------------

void conv3d_forward(const Tensor& in, const Tensor& w, const Tensor& b, int stride,
                    Tensor& out) {
    const int C = in.shape[0], H = in.shape[1], W = in.shape[2], D = in.shape[3];
    const int O = w.shape[0];
    require(w.shape.size() == 5 && w.shape[1] == C, "conv3d weight shape mismatch");
    require(stride == 1 || stride == 2, "conv3d stride must be 1 or 2");
    if (stride == 2)
        require(H % 2 == 0 && W % 2 == 0 && D % 2 == 0,
                "conv3d stride-2 input extents must be even");
    const int Ho = H / stride, Wo = W / stride, Do = D / stride;
    out = Tensor({O, Ho, Wo, Do});
    parallel_for(static_cast<size_t>(O) * Ho, [&](size_t row) {
        const int o = int(row / Ho), y = int(row % Ho);
        for (int x = 0; x < Wo; ++x) {
            double* orow = &out.data[((size_t(o) * Ho + y) * Wo + x) * Do];
            const double bias = b.data[size_t(o)];
            for (int z = 0; z < Do; ++z) orow[z] = bias;
            for (int c = 0; c < C; ++c) {
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = y * stride + ky - 1;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = x * stride + kx - 1;
                        if (ix < 0 || ix >= W) continue;
                        const double* irow = &in.data[((size_t(c) * H + iy) * W + ix) * D];
                        const double* wk =
                            &w.data[(((size_t(o) * C + c) * 3 + ky) * 3 + kx) * 3];
                        if (stride == 1) {
                            for (int kz = 0; kz < 3; ++kz) {
                                const double wv = wk[kz];
                                const int z0 = std::max(0, 1 - kz);
                                const int z1 = std::min(Do, D + 1 - kz);
                                for (int z = z0; z < z1; ++z) orow[z] += wv * irow[z + kz - 1];
                            }
                        } else {
                            for (int z = 0; z < Do; ++z) {
                                const int iz = z * 2 - 1;
                                double s = 0.0;
                                if (iz >= 0) s += wk[0] * irow[iz];
                                s += wk[1] * irow[iz + 1];
                                if (iz + 2 < D) s += wk[2] * irow[iz + 2];
                                orow[z] += s;
                            }
                        }
                    }
                }
            }
        }
    });
}

void conv3d_backward(const Tensor& in, const Tensor& w, const Tensor& gout, int stride,
                     Tensor& gin, Tensor& gw, Tensor& gb) {
    const int C = in.shape[0], H = in.shape[1], W = in.shape[2], D = in.shape[3];
    const int O = w.shape[0];
    const int Ho = H / stride, Wo = W / stride, Do = D / stride;
    // input gradient: gather form, one writer per input row
    parallel_for(static_cast<size_t>(C) * H, [&](size_t row) {
        const int c = int(row / H), iy = int(row % H);
        for (int ix = 0; ix < W; ++ix) {
            double* grow = &gin.data[((size_t(c) * H + iy) * W + ix) * D];
            for (int o = 0; o < O; ++o) {
                for (int ky = 0; ky < 3; ++ky) {
                    const int ny = iy + 1 - ky;
                    if (ny % stride != 0) continue;
                    const int y = ny / stride;
                    if (ny < 0 || y >= Ho) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int nx = ix + 1 - kx;
                        if (nx % stride != 0) continue;
                        const int x = nx / stride;
                        if (nx < 0 || x >= Wo) continue;
                        const double* gorow =
                            &gout.data[((size_t(o) * Ho + y) * Wo + x) * Do];
                        const double* wk =
                            &w.data[(((size_t(o) * C + c) * 3 + ky) * 3 + kx) * 3];
                        if (stride == 1) {
                            for (int kz = 0; kz < 3; ++kz) {
                                const double wv = wk[kz];
                                const int iz0 = std::max(0, kz - 1);
                                const int iz1 = std::min(D, Do + kz - 1);
                                for (int iz = iz0; iz < iz1; ++iz)
                                    grow[iz] += wv * gorow[iz + 1 - kz];
                            }
                        } else {
                            for (int iz = 0; iz < D; ++iz) {
                                double s = 0.0;
                                for (int kz = 0; kz < 3; ++kz) {
                                    const int nz = iz + 1 - kz;
                                    if (nz % 2 != 0 || nz < 0) continue;
                                    const int z = nz / 2;
                                    if (z >= Do) continue;
                                    s += wk[kz] * gorow[z];
                                }
                                grow[iz] += s;
                            }
                        }
                    }
                }
            }
        }
    });
    // weight gradient: one (o,c) kernel per task
    parallel_for(static_cast<size_t>(O) * C, [&](size_t oc) {
        const int o = int(oc / C), c = int(oc % C);
        double acc[27] = {0};
        for (int y = 0; y < Ho; ++y) {
            for (int x = 0; x < Wo; ++x) {
                const double* gorow = &gout.data[((size_t(o) * Ho + y) * Wo + x) * Do];
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = y * stride + ky - 1;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = x * stride + kx - 1;
                        if (ix < 0 || ix >= W) continue;
                        const double* irow = &in.data[((size_t(c) * H + iy) * W + ix) * D];
                        for (int kz = 0; kz < 3; ++kz) {
                            double s = 0.0;
                            if (stride == 1) {
                                const int z0 = std::max(0, 1 - kz);
                                const int z1 = std::min(Do, D + 1 - kz);
                                for (int z = z0; z < z1; ++z) s += gorow[z] * irow[z + kz - 1];
                            } else {
                                for (int z = 0; z < Do; ++z) {
                                    const int iz = z * 2 + kz - 1;
                                    if (iz < 0 || iz >= D) continue;
                                    s += gorow[z] * irow[iz];
                                }
                            }
                            acc[(ky * 3 + kx) * 3 + kz] += s;
                        }
                    }
                }
            }
        }
        double* gk = &gw.data[(size_t(o) * C + c) * 27];
        for (int k = 0; k < 27; ++k) gk[k] += acc[k];
    });
    for (int o = 0; o < O; ++o) {
        double s = 0.0;
        const double* base = &gout.data[size_t(o) * Ho * Wo * Do];
        for (size_t i = 0; i < size_t(Ho) * Wo * Do; ++i) s += base[i];
        gb.data[size_t(o)] += s;
    }
}

// --- pointwise / resampling ------------------------------------------------

void relu_forward(const Tensor& in, Tensor& out) {
    out = Tensor(in.shape);
    for (size_t i = 0; i < in.data.size(); ++i) out.data[i] = std::max(0.0, in.data[i]);
}

void relu_backward(const Tensor& in, const Tensor& gout, Tensor& gin) {
    for (size_t i = 0; i < in.data.size(); ++i)
        if (in.data[i] > 0.0) gin.data[i] += gout.data[i];
}

void upsample2_forward(const Tensor& in, Tensor& out) {
    const int C = in.shape[0], H = in.shape[1], W = in.shape[2], D = in.shape[3];
    out = Tensor({C, H * 2, W * 2, D * 2});
    parallel_for(static_cast<size_t>(C) * H * 2, [&](size_t row) {
        const int c = int(row / (H * 2)), y = int(row % (H * 2));
        for (int x = 0; x < W * 2; ++x) {
            double* orow = &out.data[((size_t(c) * H * 2 + y) * W * 2 + x) * D * 2];
            const double* irow = &in.data[((size_t(c) * H + y / 2) * W + x / 2) * D];
            for (int z = 0; z < D * 2; ++z) orow[z] = irow[z / 2];
        }
    });
}

void upsample2_backward(const Tensor& gout, Tensor& gin) {
    const int C = gin.shape[0], H = gin.shape[1], W = gin.shape[2], D = gin.shape[3];
    parallel_for(static_cast<size_t>(C) * H, [&](size_t row) {
        const int c = int(row / H), y = int(row % H);
        for (int x = 0; x < W; ++x) {
            double* grow = &gin.data[((size_t(c) * H + y) * W + x) * D];
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const double* gorow =
                        &gout.data[((size_t(c) * H * 2 + y * 2 + dy) * W * 2 + x * 2 + dx) * D * 2];
                    for (int z = 0; z < D; ++z) grow[z] += gorow[z * 2] + gorow[z * 2 + 1];
                }
            }
        }
    });
}

}  // namespace stereotrace
