#pragma once

// Forward/backward kernels for the 3D denoiser. Single sample, channel-major
// layout. Backward functions accumulate into parameter gradients and overwrite
// input gradients.

#include "mapdiff/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <vector>

namespace mapdiff::nn {

inline constexpr int kKernel = 3;
inline constexpr int kTaps = kKernel * kKernel * kKernel;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
std::vector<T>& scratch_buffer(int slot) {
    thread_local std::vector<T> buffers[2];
    return buffers[slot];
}

/// Unfolds a zero-padded 3x3x3 neighbourhood: col[(c*27 + tap)][voxel].
template <typename T>
void im2col(const Tensor<T>& in, std::vector<T>& col) {
    const Dims s = in.spatial;
    const std::size_t n = s.count();
    col.resize(static_cast<std::size_t>(in.channels) * kTaps * n);
    for (int c = 0; c < in.channels; ++c) {
        const T* src = in.data.data() + static_cast<std::size_t>(c) * n;
        for (int tap = 0; tap < kTaps; ++tap) {
            const int di = tap / 9 - 1, dj = (tap / 3) % 3 - 1, dk = tap % 3 - 1;
            T* dst = col.data() + (static_cast<std::size_t>(c) * kTaps + tap) * n;
            for (int i = 0; i < s.h; ++i) {
                const int si = i + di;
                for (int j = 0; j < s.w; ++j) {
                    const int sj = j + dj;
                    T* row = dst + s.index(i, j, 0);
                    if (si < 0 || si >= s.h || sj < 0 || sj >= s.w) {
                        std::fill(row, row + s.d, T(0));
                        continue;
                    }
                    const T* line = src + s.index(si, sj, 0);
                    const int k0 = dk < 0 ? 1 : 0;
                    const int k1 = dk > 0 ? s.d - 1 : s.d;
                    if (k0 == 1) row[0] = T(0);
                    if (k1 == s.d - 1) row[s.d - 1] = T(0);
                    std::copy(line + k0 + dk, line + k1 + dk, row + k0);
                }
            }
        }
    }
}

/// Adjoint of im2col: scatters column gradients back onto the input grid.
template <typename T>
void col2im(const std::vector<T>& col, Tensor<T>& out) {
    const Dims s = out.spatial;
    const std::size_t n = s.count();
    std::fill(out.data.begin(), out.data.end(), T(0));
    for (int c = 0; c < out.channels; ++c) {
        T* dst = out.data.data() + static_cast<std::size_t>(c) * n;
        for (int tap = 0; tap < kTaps; ++tap) {
            const int di = tap / 9 - 1, dj = (tap / 3) % 3 - 1, dk = tap % 3 - 1;
            const T* src = col.data() + (static_cast<std::size_t>(c) * kTaps + tap) * n;
            for (int i = 0; i < s.h; ++i) {
                const int si = i + di;
                if (si < 0 || si >= s.h) continue;
                for (int j = 0; j < s.w; ++j) {
                    const int sj = j + dj;
                    if (sj < 0 || sj >= s.w) continue;
                    const T* row = src + s.index(i, j, 0);
                    T* line = dst + s.index(si, sj, 0);
                    const int k0 = dk < 0 ? 1 : 0;
                    const int k1 = dk > 0 ? s.d - 1 : s.d;
                    for (int k = k0; k < k1; ++k) line[k + dk] += row[k];
                }
            }
        }
    }
}

/// 3x3x3 convolution, stride 1, zero padding 1. weight is [cout][cin*27].
template <typename T>
Tensor<T> conv3d(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, int cout) {
    auto& col = scratch_buffer<T>(0);
    im2col(in, col);
    const auto n = static_cast<Eigen::Index>(in.plane());
    const auto k = static_cast<Eigen::Index>(in.channels) * kTaps;
    Tensor<T> out(cout, in.spatial);
    MatMap<T> o(out.data.data(), cout, n);
    o.noalias() = ConstMatMap<T>(weight.data(), cout, k) * ConstMatMap<T>(col.data(), k, n);
    for (int c = 0; c < cout; ++c) o.row(c).array() += bias[static_cast<std::size_t>(c)];
    return out;
}

/// Accumulates dweight/dbias; writes din when non-null.
template <typename T>
void conv3d_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& dout,
                     std::span<T> dweight, std::span<T> dbias, Tensor<T>* din) {
    auto& col = scratch_buffer<T>(0);
    im2col(in, col);
    const int cout = dout.channels;
    const auto n = static_cast<Eigen::Index>(in.plane());
    const auto k = static_cast<Eigen::Index>(in.channels) * kTaps;
    ConstMatMap<T> go(dout.data.data(), cout, n);
    MatMap<T>(dweight.data(), cout, k).noalias() += go * ConstMatMap<T>(col.data(), k, n).transpose();
    for (int c = 0; c < cout; ++c) {
        const T* row = dout.data.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(n);
        T acc = T(0);
        for (Eigen::Index i = 0; i < n; ++i) acc += row[i];
        dbias[static_cast<std::size_t>(c)] += acc;
    }
    if (din) {
        auto& dcol = scratch_buffer<T>(1);
        dcol.resize(col.size());
        MatMap<T>(dcol.data(), k, n).noalias() = ConstMatMap<T>(weight.data(), cout, k).transpose() * go;
        *din = Tensor<T>(in.channels, in.spatial);
        col2im(dcol, *din);
    }
}

/// 1x1x1 convolution. weight is [cout][cin].
template <typename T>
Tensor<T> pointwise_conv(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, int cout) {
    const auto n = static_cast<Eigen::Index>(in.plane());
    Tensor<T> out(cout, in.spatial);
    MatMap<T> o(out.data.data(), cout, n);
    o.noalias() = ConstMatMap<T>(weight.data(), cout, in.channels) * ConstMatMap<T>(in.data.data(), in.channels, n);
    for (int c = 0; c < cout; ++c) o.row(c).array() += bias[static_cast<std::size_t>(c)];
    return out;
}

/// Accumulates dweight/dbias and adds the input gradient into din.
template <typename T>
void pointwise_conv_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& dout,
                             std::span<T> dweight, std::span<T> dbias, Tensor<T>& din) {
    const int cout = dout.channels;
    const auto n = static_cast<Eigen::Index>(in.plane());
    ConstMatMap<T> go(dout.data.data(), cout, n);
    MatMap<T>(dweight.data(), cout, in.channels).noalias() +=
        go * ConstMatMap<T>(in.data.data(), in.channels, n).transpose();
    for (int c = 0; c < cout; ++c) {
        const T* row = dout.data.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(n);
        T acc = T(0);
        for (Eigen::Index i = 0; i < n; ++i) acc += row[i];
        dbias[static_cast<std::size_t>(c)] += acc;
    }
    MatMap<T>(din.data.data(), in.channels, n).noalias() += ConstMatMap<T>(weight.data(), cout, in.channels).transpose() * go;
}

struct GroupStats {
    std::vector<double> mean;
    std::vector<double> rstd;
};

inline constexpr double kNormEps = 1e-5;

template <typename T>
Tensor<T> group_norm(const Tensor<T>& in, std::span<const T> gamma, std::span<const T> beta, int groups,
                     GroupStats& stats) {
    const int per = in.channels / groups;
    const std::size_t plane = in.plane();
    const std::size_t count = static_cast<std::size_t>(per) * plane;
    stats.mean.assign(static_cast<std::size_t>(groups), 0.0);
    stats.rstd.assign(static_cast<std::size_t>(groups), 0.0);
    Tensor<T> out(in.channels, in.spatial);
    for (int g = 0; g < groups; ++g) {
        const T* x = in.data.data() + static_cast<std::size_t>(g) * count;
        double sum = 0.0;
        for (std::size_t i = 0; i < count; ++i) sum += x[i];
        const double mean = sum / static_cast<double>(count);
        double var = 0.0;
        for (std::size_t i = 0; i < count; ++i) var += (x[i] - mean) * (x[i] - mean);
        var /= static_cast<double>(count);
        const double rstd = 1.0 / std::sqrt(var + kNormEps);
        stats.mean[static_cast<std::size_t>(g)] = mean;
        stats.rstd[static_cast<std::size_t>(g)] = rstd;
        for (int c = g * per; c < (g + 1) * per; ++c) {
            const T* xc = in.data.data() + static_cast<std::size_t>(c) * plane;
            T* yc = out.data.data() + static_cast<std::size_t>(c) * plane;
            const T scale = static_cast<T>(rstd) * gamma[static_cast<std::size_t>(c)];
            const T shift = beta[static_cast<std::size_t>(c)] - static_cast<T>(mean) * scale;
            for (std::size_t i = 0; i < plane; ++i) yc[i] = xc[i] * scale + shift;
        }
    }
    return out;
}

template <typename T>
Tensor<T> group_norm_backward(const Tensor<T>& in, std::span<const T> gamma, const GroupStats& stats,
                              int groups, const Tensor<T>& dout, std::span<T> dgamma, std::span<T> dbeta) {
    const int per = in.channels / groups;
    const std::size_t plane = in.plane();
    const double count = static_cast<double>(per) * static_cast<double>(plane);
    Tensor<T> din(in.channels, in.spatial);
    for (int g = 0; g < groups; ++g) {
        const double mean = stats.mean[static_cast<std::size_t>(g)];
        const double rstd = stats.rstd[static_cast<std::size_t>(g)];
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int c = g * per; c < (g + 1) * per; ++c) {
            const T* x = in.data.data() + static_cast<std::size_t>(c) * plane;
            const T* dy = dout.data.data() + static_cast<std::size_t>(c) * plane;
            double dg = 0.0, db = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                const double xhat = (x[i] - mean) * rstd;
                dg += dy[i] * xhat;
                db += dy[i];
            }
            dgamma[static_cast<std::size_t>(c)] += static_cast<T>(dg);
            dbeta[static_cast<std::size_t>(c)] += static_cast<T>(db);
            const double gm = gamma[static_cast<std::size_t>(c)];
            sum_dxhat += gm * db;
            sum_dxhat_xhat += gm * dg;
        }
        for (int c = g * per; c < (g + 1) * per; ++c) {
            const T* x = in.data.data() + static_cast<std::size_t>(c) * plane;
            const T* dy = dout.data.data() + static_cast<std::size_t>(c) * plane;
            T* dx = din.data.data() + static_cast<std::size_t>(c) * plane;
            const double gm = gamma[static_cast<std::size_t>(c)];
            for (std::size_t i = 0; i < plane; ++i) {
                const double xhat = (x[i] - mean) * rstd;
                dx[i] = static_cast<T>(rstd / count * (count * gm * dy[i] - sum_dxhat - xhat * sum_dxhat_xhat));
            }
        }
    }
    return din;
}

template <typename T>
T silu(T x) {
    return x / (T(1) + std::exp(-x));
}

template <typename T>
T silu_grad(T x) {
    const T s = T(1) / (T(1) + std::exp(-x));
    return s * (T(1) + x * (T(1) - s));
}

template <typename T>
Tensor<T> silu(const Tensor<T>& in) {
    Tensor<T> out(in.channels, in.spatial);
    for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = silu(in.data[i]);
    return out;
}

/// dout * silu'(pre), in place on dout.
template <typename T>
void silu_backward(const Tensor<T>& pre, Tensor<T>& grad) {
    for (std::size_t i = 0; i < pre.size(); ++i) grad.data[i] *= silu_grad(pre.data[i]);
}

template <typename T>
void add_channel_bias(Tensor<T>& t, std::span<const T> bias) {
    for (int c = 0; c < t.channels; ++c) {
        auto ch = t.channel(c);
        const T b = bias[static_cast<std::size_t>(c)];
        for (T& v : ch) v += b;
    }
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& in) {
    const Dims s = in.spatial;
    const Dims h{s.h / 2, s.w / 2, s.d / 2};
    Tensor<T> out(in.channels, h);
    for (int c = 0; c < in.channels; ++c) {
        auto src = in.channel(c);
        auto dst = out.channel(c);
        for (int i = 0; i < h.h; ++i)
            for (int j = 0; j < h.w; ++j)
                for (int k = 0; k < h.d; ++k) {
                    T acc = T(0);
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b)
                            for (int e = 0; e < 2; ++e) acc += src[s.index(2 * i + a, 2 * j + b, 2 * k + e)];
                    dst[h.index(i, j, k)] = acc * T(0.125);
                }
    }
    return out;
}

template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& dout, Dims full) {
    Tensor<T> din(dout.channels, full);
    const Dims h = dout.spatial;
    for (int c = 0; c < dout.channels; ++c) {
        auto src = dout.channel(c);
        auto dst = din.channel(c);
        for (int i = 0; i < h.h; ++i)
            for (int j = 0; j < h.w; ++j)
                for (int k = 0; k < h.d; ++k) {
                    const T g = src[h.index(i, j, k)] * T(0.125);
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b)
                            for (int e = 0; e < 2; ++e) dst[full.index(2 * i + a, 2 * j + b, 2 * k + e)] = g;
                }
    }
    return din;
}

template <typename T>
Tensor<T> upsample2(const Tensor<T>& in) {
    const Dims s = in.spatial;
    const Dims f{s.h * 2, s.w * 2, s.d * 2};
    Tensor<T> out(in.channels, f);
    for (int c = 0; c < in.channels; ++c) {
        auto src = in.channel(c);
        auto dst = out.channel(c);
        for (int i = 0; i < f.h; ++i)
            for (int j = 0; j < f.w; ++j)
                for (int k = 0; k < f.d; ++k) dst[f.index(i, j, k)] = src[s.index(i / 2, j / 2, k / 2)];
    }
    return out;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dout) {
    const Dims f = dout.spatial;
    const Dims s{f.h / 2, f.w / 2, f.d / 2};
    Tensor<T> din(dout.channels, s);
    for (int c = 0; c < dout.channels; ++c) {
        auto src = dout.channel(c);
        auto dst = din.channel(c);
        for (int i = 0; i < f.h; ++i)
            for (int j = 0; j < f.w; ++j)
                for (int k = 0; k < f.d; ++k) dst[s.index(i / 2, j / 2, k / 2)] += src[f.index(i, j, k)];
    }
    return din;
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out(a.channels + b.channels, a.spatial);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

/// Channel range [first, first + count) of t.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int first, int count) {
    const auto begin = t.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(first) * t.plane());
    return Tensor<T>(count, t.spatial,
                     std::vector<T>(begin, begin + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(count) * t.plane())));
}

/// y = W x + b with W [out][in].
template <typename T>
std::vector<T> linear(std::span<const T> x, std::span<const T> w, std::span<const T> b, int out) {
    std::vector<T> y(static_cast<std::size_t>(out));
    const std::size_t in = x.size();
    for (int o = 0; o < out; ++o) {
        T acc = b[static_cast<std::size_t>(o)];
        const T* row = w.data() + static_cast<std::size_t>(o) * in;
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
        y[static_cast<std::size_t>(o)] = acc;
    }
    return y;
}

/// Accumulates dW, db and returns dx.
template <typename T>
std::vector<T> linear_backward(std::span<const T> x, std::span<const T> w, std::span<const T> dy,
                               std::span<T> dw, std::span<T> db) {
    const std::size_t in = x.size();
    std::vector<T> dx(in, T(0));
    for (std::size_t o = 0; o < dy.size(); ++o) {
        db[o] += dy[o];
        const T* row = w.data() + o * in;
        T* drow = dw.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) {
            drow[i] += dy[o] * x[i];
            dx[i] += row[i] * dy[o];
        }
    }
    return dx;
}

}  // namespace mapdiff::nn
