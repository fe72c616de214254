#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ltcf/autograd.hpp"
#include "ltcf/fft.hpp"
#include "ltcf/tensor.hpp"

namespace ltcf {

enum class Pad { Same, Valid };

// ---------------------------------------------------------------------------
// elementwise helpers
// ---------------------------------------------------------------------------

namespace detail {

/// Range-reduced polynomial expf (deterministic, ~1e-8 relative error):
/// x = n ln2 + r with |r| <= ln2/2, e^x = 2^n * P(r). Softmax over large
/// attention grids is exp-bound, and libm expf does not vectorize.
inline float fast_expf(float x) {
    x = std::min(88.0f, std::max(-87.0f, x));  // branchless clamp, keeps loops vectorizable
    const float n = std::floor(x * 1.4426950408889634f + 0.5f);
    // two-part ln2 keeps the reduction exact in float
    float r = x - n * 0.693359375f;
    r += n * 2.12194440e-4f;
    float p = 1.0f / 5040.0f;
    p = p * r + 1.0f / 720.0f;
    p = p * r + 1.0f / 120.0f;
    p = p * r + 1.0f / 24.0f;
    p = p * r + 1.0f / 6.0f;
    p = p * r + 0.5f;
    p = p * r + 1.0f;
    p = p * r + 1.0f;
    // scale by 2^n through the exponent bits (n stays within [-126, 127])
    const uint32_t bits = static_cast<uint32_t>(static_cast<int32_t>(n) + 127) << 23;
    float scale;
    std::memcpy(&scale, &bits, sizeof scale);
    return p * scale;
}

template <typename T>
inline T exp_val(T x) {
    if constexpr (std::is_same_v<T, float>) {
        return fast_expf(x);
    } else {
        return std::exp(x);
    }
}

template <typename T, typename F, typename DF>
inline ValueT<T> unary_op(const ValueT<T>& x, F f, DF df) {
    TensorT<T> out(x->value.shape);
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] = f(x->value.data[i]);
    return make_op<T>(std::move(out), {x}, [x, df](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < n.grad.numel(); ++i) {
            x->grad.data[i] += n.grad.data[i] * df(x->value.data[i]);
        }
    });
}

}  // namespace detail

template <typename T>
inline ValueT<T> add(const ValueT<T>& a, const ValueT<T>& b) {
    check_same_shape(a->value, b->value, "add");
    TensorT<T> out(a->value.shape);
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] = a->value.data[i] + b->value.data[i];
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](NodeT<T>& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) b->accumulate(n.grad);
    });
}

template <typename T>
inline ValueT<T> sub(const ValueT<T>& a, const ValueT<T>& b) {
    check_same_shape(a->value, b->value, "sub");
    TensorT<T> out(a->value.shape);
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] = a->value.data[i] - b->value.data[i];
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](NodeT<T>& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.numel(); ++i) b->grad.data[i] -= n.grad.data[i];
        }
    });
}

template <typename T>
inline ValueT<T> mul(const ValueT<T>& a, const ValueT<T>& b) {
    check_same_shape(a->value, b->value, "mul");
    TensorT<T> out(a->value.shape);
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] = a->value.data[i] * b->value.data[i];
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](NodeT<T>& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.numel(); ++i)
                a->grad.data[i] += n.grad.data[i] * b->value.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.numel(); ++i)
                b->grad.data[i] += n.grad.data[i] * a->value.data[i];
        }
    });
}

template <typename T>
inline ValueT<T> div_elem(const ValueT<T>& a, const ValueT<T>& b) {
    check_same_shape(a->value, b->value, "div");
    TensorT<T> out(a->value.shape);
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] = a->value.data[i] / b->value.data[i];
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](NodeT<T>& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.numel(); ++i)
                a->grad.data[i] += n.grad.data[i] / b->value.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.numel(); ++i) {
                T bv = b->value.data[i];
                b->grad.data[i] -= n.grad.data[i] * a->value.data[i] / (bv * bv);
            }
        }
    });
}

template <typename T>
inline ValueT<T> scale(const ValueT<T>& x, double c) {
    return detail::unary_op(
        x, [c](T v) { return static_cast<T>(v * c); },
        [c](T) { return static_cast<T>(c); });
}

template <typename T>
inline ValueT<T> add_const(const ValueT<T>& x, double c) {
    return detail::unary_op(
        x, [c](T v) { return static_cast<T>(v + c); }, [](T) { return T(1); });
}

template <typename T>
inline ValueT<T> relu(const ValueT<T>& x) {
    return detail::unary_op(
        x, [](T v) { return v > T(0) ? v : T(0); }, [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
inline ValueT<T> leaky_relu(const ValueT<T>& x, double slope) {
    return detail::unary_op(
        x, [slope](T v) { return v > T(0) ? v : static_cast<T>(v * slope); },
        [slope](T v) { return v > T(0) ? T(1) : static_cast<T>(slope); });
}

template <typename T>
inline ValueT<T> tanh_act(const ValueT<T>& x) {
    return detail::unary_op(
        x, [](T v) { return static_cast<T>(std::tanh(static_cast<double>(v))); },
        [](T v) {
            double t = std::tanh(static_cast<double>(v));
            return static_cast<T>(1.0 - t * t);
        });
}

template <typename T>
inline ValueT<T> abs_val(const ValueT<T>& x) {
    return detail::unary_op(
        x, [](T v) { return v < T(0) ? -v : v; },
        [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
inline ValueT<T> square(const ValueT<T>& x) {
    return detail::unary_op(
        x, [](T v) { return v * v; }, [](T v) { return T(2) * v; });
}

template <typename T>
inline ValueT<T> log10_val(const ValueT<T>& x) {
    return detail::unary_op(
        x, [](T v) { return static_cast<T>(std::log10(static_cast<double>(v))); },
        [](T v) { return static_cast<T>(1.0 / (static_cast<double>(v) * 2.302585092994046)); });
}

/// max(x, c); gradient passes only where x > c.
template <typename T>
inline ValueT<T> max_with(const ValueT<T>& x, double c) {
    return detail::unary_op(
        x, [c](T v) { return static_cast<T>(std::max(static_cast<double>(v), c)); },
        [c](T v) { return static_cast<double>(v) > c ? T(1) : T(0); });
}

/// Clamp with straight-through gradient: the value is hard-clamped to
/// [lo, hi] but the gradient passes unchanged while x stays inside
/// [lo - margin, hi + margin], so near-saturated pixels keep learning.
template <typename T>
inline ValueT<T> clamp_st(const ValueT<T>& x, double lo, double hi, double margin) {
    return detail::unary_op(
        x,
        [lo, hi](T v) {
            double d = static_cast<double>(v);
            return static_cast<T>(d < lo ? lo : (d > hi ? hi : d));
        },
        [lo, hi, margin](T v) {
            double d = static_cast<double>(v);
            return (d >= lo - margin && d <= hi + margin) ? T(1) : T(0);
        });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename T>
inline ValueT<T> sum_all(const ValueT<T>& x) {
    T s = T(0);
    for (T v : x->value.data) s += v;
    return detail::make_op<T>(TensorT<T>::scalar(s), {x}, [x](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        T g = n.grad.data[0];
        for (size_t i = 0; i < x->grad.numel(); ++i) x->grad.data[i] += g;
    });
}

template <typename T>
inline ValueT<T> mean_all(const ValueT<T>& x) {
    T s = T(0);
    for (T v : x->value.data) s += v;
    const T inv = static_cast<T>(1.0 / static_cast<double>(x->value.numel()));
    return detail::make_op<T>(TensorT<T>::scalar(s * inv), {x}, [x, inv](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        T g = n.grad.data[0] * inv;
        for (size_t i = 0; i < x->grad.numel(); ++i) x->grad.data[i] += g;
    });
}

/// Per-channel spatial mean: HxWxC -> 1x1xC.
template <typename T>
inline ValueT<T> global_avg_pool(const ValueT<T>& x) {
    if (x->value.rank() != 3) throw ShapeError("global_avg_pool expects HxWxC");
    const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
    TensorT<T> out({1, 1, c});
    const size_t hw = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < hw; ++i) {
        for (int ch = 0; ch < c; ++ch) out.data[static_cast<size_t>(ch)] += x->value.data[i * c + ch];
    }
    const T inv = static_cast<T>(1.0 / static_cast<double>(hw));
    for (int ch = 0; ch < c; ++ch) out.data[static_cast<size_t>(ch)] *= inv;
    return detail::make_op<T>(std::move(out), {x}, [x, hw, c, inv](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < hw; ++i) {
            for (int ch = 0; ch < c; ++ch) {
                x->grad.data[i * c + ch] += n.grad.data[static_cast<size_t>(ch)] * inv;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// shape plumbing
// ---------------------------------------------------------------------------

template <typename T>
inline ValueT<T> reshape(const ValueT<T>& x, std::vector<int> new_shape) {
    if (TensorT<T>::count(new_shape) != x->value.numel()) {
        throw ShapeError("reshape " + x->value.shape_str() + " to incompatible " +
                         TensorT<T>::shape_str(new_shape));
    }
    TensorT<T> out(new_shape, x->value.data);
    return detail::make_op<T>(std::move(out), {x}, [x](NodeT<T>& n) {
        if (x->requires_grad) {
            x->ensure_grad();
            for (size_t i = 0; i < n.grad.numel(); ++i) x->grad.data[i] += n.grad.data[i];
        }
    });
}

/// Concatenate along the last dimension (rank 2 or 3 inputs).
template <typename T>
inline ValueT<T> concat_lastdim(const std::vector<ValueT<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat of nothing");
    const int rank = xs[0]->value.rank();
    std::vector<int> lead(xs[0]->value.shape.begin(), xs[0]->value.shape.end() - 1);
    int ctotal = 0;
    std::vector<int> widths;
    for (const auto& x : xs) {
        if (x->value.rank() != rank) throw ShapeError("concat rank mismatch");
        std::vector<int> l(x->value.shape.begin(), x->value.shape.end() - 1);
        if (l != lead) throw ShapeError("concat leading-dim mismatch");
        widths.push_back(x->value.shape.back());
        ctotal += widths.back();
    }
    std::vector<int> oshape = lead;
    oshape.push_back(ctotal);
    TensorT<T> out(oshape);
    const size_t rows = out.numel() / static_cast<size_t>(ctotal);
    size_t base = 0;
    for (size_t k = 0; k < xs.size(); ++k) {
        const auto& src = xs[k]->value;
        const size_t wk = static_cast<size_t>(widths[k]);
        for (size_t r = 0; r < rows; ++r) {
            for (size_t j = 0; j < wk; ++j) {
                out.data[r * ctotal + base + j] = src.data[r * wk + j];
            }
        }
        base += wk;
    }
    std::vector<ValueT<T>> parents(xs.begin(), xs.end());
    return detail::make_op<T>(std::move(out), parents,
                              [xs, widths, ctotal, rows](NodeT<T>& n) {
                                  size_t base2 = 0;
                                  for (size_t k = 0; k < xs.size(); ++k) {
                                      const size_t wk = static_cast<size_t>(widths[k]);
                                      if (xs[k]->requires_grad) {
                                          xs[k]->ensure_grad();
                                          for (size_t r = 0; r < rows; ++r) {
                                              for (size_t j = 0; j < wk; ++j) {
                                                  xs[k]->grad.data[r * wk + j] +=
                                                      n.grad.data[r * ctotal + base2 + j];
                                              }
                                          }
                                      }
                                      base2 += wk;
                                  }
                              });
}

/// Slice columns [c0, c1) of the last dimension (rank 2 or 3 inputs).
template <typename T>
inline ValueT<T> slice_lastdim(const ValueT<T>& x, int c0, int c1) {
    const int c = x->value.shape.back();
    if (c0 < 0 || c1 > c || c0 >= c1) throw ShapeError("bad slice range");
    std::vector<int> oshape = x->value.shape;
    oshape.back() = c1 - c0;
    TensorT<T> out(oshape);
    const size_t rows = out.numel() / static_cast<size_t>(c1 - c0);
    const size_t wk = static_cast<size_t>(c1 - c0);
    for (size_t r = 0; r < rows; ++r) {
        for (size_t j = 0; j < wk; ++j) {
            out.data[r * wk + j] = x->value.data[r * c + c0 + j];
        }
    }
    return detail::make_op<T>(std::move(out), {x}, [x, c, c0, wk, rows](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t r = 0; r < rows; ++r) {
            for (size_t j = 0; j < wk; ++j) {
                x->grad.data[r * c + c0 + j] += n.grad.data[r * wk + j];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

template <typename T>
inline ValueT<T> transpose2d(const ValueT<T>& x) {
    if (x->value.rank() != 2) throw ShapeError("transpose2d expects NxM");
    const int n = x->value.dim(0), m = x->value.dim(1);
    TensorT<T> out({m, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.at(j, i) = x->value.at(i, j);
    return detail::make_op<T>(std::move(out), {x}, [x, n, m](NodeT<T>& g) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) x->grad.at(i, j) += g.grad.at(j, i);
    });
}

namespace detail {

// C(N,M) += A(N,K) * B(K,M); cache-friendly i,k,j order. Attention products
// have M as small as the per-head dim, where register accumulators win.
template <typename T>
inline void mm_nn(const TensorT<T>& a, const TensorT<T>& b, TensorT<T>& c) {
    const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    if (m <= 8) {
        for (int i = 0; i < n; ++i) {
            T acc[8] = {};
            const T* arow = &a.data[static_cast<size_t>(i) * k];
            for (int p = 0; p < k; ++p) {
                const T av = arow[p];
                const T* brow = &b.data[static_cast<size_t>(p) * m];
                for (int j = 0; j < m; ++j) acc[j] += av * brow[j];
            }
            T* crow = &c.data[static_cast<size_t>(i) * m];
            for (int j = 0; j < m; ++j) crow[j] += acc[j];
        }
        return;
    }
    for (int i = 0; i < n; ++i) {
        for (int p = 0; p < k; ++p) {
            const T av = a.at(i, p);
            if (av == T(0)) continue;
            const T* brow = &b.data[static_cast<size_t>(p) * m];
            T* crow = &c.data[static_cast<size_t>(i) * m];
            for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// C(N,K) += A(N,M) * B(K,M)^T. For short rows (per-head dims) the dot
// products degenerate; transpose B once and run the vectorizable i,k,j form.
template <typename T>
inline void mm_nt(const TensorT<T>& a, const TensorT<T>& b, TensorT<T>& c) {
    const int n = a.dim(0), m = a.dim(1), k = b.dim(0);
    if (m <= 8 && k >= 32) {
        TensorT<T> bt({m, k});
        for (int p = 0; p < k; ++p)
            for (int j = 0; j < m; ++j) bt.at(j, p) = b.at(p, j);
        for (int i = 0; i < n; ++i) {
            const T* arow = &a.data[static_cast<size_t>(i) * m];
            T* crow = &c.data[static_cast<size_t>(i) * k];
            for (int j = 0; j < m; ++j) {
                const T av = arow[j];
                const T* btrow = &bt.data[static_cast<size_t>(j) * k];
                for (int p = 0; p < k; ++p) crow[p] += av * btrow[p];
            }
        }
        return;
    }
    for (int i = 0; i < n; ++i) {
        const T* arow = &a.data[static_cast<size_t>(i) * m];
        for (int p = 0; p < k; ++p) {
            const T* brow = &b.data[static_cast<size_t>(p) * m];
            T acc = T(0);
            for (int j = 0; j < m; ++j) acc += arow[j] * brow[j];
            c.at(i, p) += acc;
        }
    }
}

// C(M,K) += A(N,M)^T * B(N,K)
template <typename T>
inline void mm_tn(const TensorT<T>& a, const TensorT<T>& b, TensorT<T>& c) {
    const int n = a.dim(0), m = a.dim(1), k = b.dim(1);
    for (int i = 0; i < n; ++i) {
        const T* arow = &a.data[static_cast<size_t>(i) * m];
        const T* brow = &b.data[static_cast<size_t>(i) * k];
        for (int j = 0; j < m; ++j) {
            const T av = arow[j];
            if (av == T(0)) continue;
            T* crow = &c.data[static_cast<size_t>(j) * k];
            for (int p = 0; p < k; ++p) crow[p] += av * brow[p];
        }
    }
}

}  // namespace detail

/// Dense product of two rank-2 tensors; both sides receive gradients.
template <typename T>
inline ValueT<T> matmul(const ValueT<T>& a, const ValueT<T>& b) {
    if (a->value.rank() != 2 || b->value.rank() != 2) throw ShapeError("matmul expects rank-2");
    if (a->value.dim(1) != b->value.dim(0)) {
        throw ShapeError("matmul inner dims disagree: " + a->value.shape_str() + " x " +
                         b->value.shape_str());
    }
    TensorT<T> out({a->value.dim(0), b->value.dim(1)});
    detail::mm_nn(a->value, b->value, out);
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](NodeT<T>& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            detail::mm_nt(n.grad, b->value, a->grad);  // gA += G * B^T
        }
        if (b->requires_grad) {
            b->ensure_grad();
            detail::mm_tn(a->value, n.grad, b->grad);  // gB += A^T * G
        }
    });
}

/// Bias-free fully connected layer: (N x D) * (D x D2).
template <typename T>
inline ValueT<T> linear(const ValueT<T>& x, const ValueT<T>& weight) {
    return matmul(x, weight);
}

/// Row-wise softmax of a rank-2 tensor, stabilized by row-max subtraction.
template <typename T>
inline ValueT<T> softmax_rows(const ValueT<T>& x) {
    if (x->value.rank() != 2) throw ShapeError("softmax_rows expects NxM");
    const int n = x->value.dim(0), m = x->value.dim(1);
    TensorT<T> out({n, m});
    for (int i = 0; i < n; ++i) {
        const T* row = &x->value.data[static_cast<size_t>(i) * m];
        T mx = row[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        T denom = T(0);
        T* orow = &out.data[static_cast<size_t>(i) * m];
        for (int j = 0; j < m; ++j) {
            const T e = detail::exp_val(row[j] - mx);
            orow[j] = e;
            denom += e;
        }
        const T inv = T(1) / denom;
        for (int j = 0; j < m; ++j) orow[j] *= inv;
    }
    return detail::make_op<T>(std::move(out), {x}, [x, n, m](NodeT<T>& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < n; ++i) {
            const T* y = &node.value.data[static_cast<size_t>(i) * m];
            const T* g = &node.grad.data[static_cast<size_t>(i) * m];
            T dot = T(0);
            for (int j = 0; j < m; ++j) dot += y[j] * g[j];
            T* gx = &x->grad.data[static_cast<size_t>(i) * m];
            for (int j = 0; j < m; ++j) gx[j] += y[j] * (g[j] - dot);
        }
    });
}

// ---------------------------------------------------------------------------
// convolutions
// ---------------------------------------------------------------------------

namespace detail {

struct ConvGeom {
    int oh, ow, pad_top, pad_left;
};

inline ConvGeom conv_geometry(int h, int w, int kh, int kw, int stride, Pad pad) {
    ConvGeom g{};
    if (pad == Pad::Same) {
        g.oh = (h + stride - 1) / stride;
        g.ow = (w + stride - 1) / stride;
        const int ph = std::max((g.oh - 1) * stride + kh - h, 0);
        const int pw = std::max((g.ow - 1) * stride + kw - w, 0);
        g.pad_top = ph / 2;
        g.pad_left = pw / 2;
    } else {
        if (h < kh || w < kw) {
            throw ShapeError("valid convolution: input " + std::to_string(h) + "x" +
                             std::to_string(w) + " smaller than kernel " + std::to_string(kh) +
                             "x" + std::to_string(kw));
        }
        g.oh = (h - kh) / stride + 1;
        g.ow = (w - kw) / stride + 1;
        g.pad_top = 0;
        g.pad_left = 0;
    }
    return g;
}

// kernel layout: kh x kw x Cin x Cout. skip_zeros pays off only for the
// zero-inserted grids of transposed convolutions.
template <typename T>
inline TensorT<T> conv_forward(const TensorT<T>& in, const TensorT<T>& k, int stride, Pad pad,
                               bool skip_zeros = false) {
    const int h = in.dim(0), w = in.dim(1), cin = in.dim(2);
    const int kh = k.dim(0), kw = k.dim(1), cout = k.dim(3);
    if (k.dim(2) != cin) {
        throw ShapeError("conv2d: input channels " + std::to_string(cin) +
                         " != kernel Cin " + std::to_string(k.dim(2)));
    }
    const ConvGeom g = conv_geometry(h, w, kh, kw, stride, pad);
    TensorT<T> out({g.oh, g.ow, cout});
    for (int oy = 0; oy < g.oh; ++oy) {
        for (int ox = 0; ox < g.ow; ++ox) {
            T* optr = &out.data[(static_cast<size_t>(oy) * g.ow + ox) * cout];
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * stride + ky - g.pad_top;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * stride + kx - g.pad_left;
                    if (ix < 0 || ix >= w) continue;
                    const T* iptr = &in.data[(static_cast<size_t>(iy) * w + ix) * cin];
                    const T* kptr = &k.data[(static_cast<size_t>(ky) * kw + kx) * cin * cout];
                    for (int ci = 0; ci < cin; ++ci) {
                        const T iv = iptr[ci];
                        if (skip_zeros && iv == T(0)) continue;
                        const T* kc = kptr + static_cast<size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) optr[co] += iv * kc[co];
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
inline void conv_backward(const TensorT<T>& in, const TensorT<T>& k, const TensorT<T>& gout,
                          int stride, Pad pad, TensorT<T>* gin, TensorT<T>* gk) {
    const int h = in.dim(0), w = in.dim(1), cin = in.dim(2);
    const int kh = k.dim(0), kw = k.dim(1), cout = k.dim(3);
    const ConvGeom g = conv_geometry(h, w, kh, kw, stride, pad);
    for (int oy = 0; oy < g.oh; ++oy) {
        for (int ox = 0; ox < g.ow; ++ox) {
            const T* gptr = &gout.data[(static_cast<size_t>(oy) * g.ow + ox) * cout];
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * stride + ky - g.pad_top;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * stride + kx - g.pad_left;
                    if (ix < 0 || ix >= w) continue;
                    const size_t ibase = (static_cast<size_t>(iy) * w + ix) * cin;
                    const size_t kbase = (static_cast<size_t>(ky) * kw + kx) * cin * cout;
                    if (gin && gk) {
                        for (int ci = 0; ci < cin; ++ci) {
                            const T iv = in.data[ibase + ci];
                            const T* kc = &k.data[kbase + static_cast<size_t>(ci) * cout];
                            T* gkc = &gk->data[kbase + static_cast<size_t>(ci) * cout];
                            T gacc = T(0);
                            for (int co = 0; co < cout; ++co) {
                                const T gv = gptr[co];
                                gacc += gv * kc[co];
                                gkc[co] += gv * iv;
                            }
                            gin->data[ibase + ci] += gacc;
                        }
                    } else if (gin) {
                        for (int ci = 0; ci < cin; ++ci) {
                            const T* kc = &k.data[kbase + static_cast<size_t>(ci) * cout];
                            T gacc = T(0);
                            for (int co = 0; co < cout; ++co) gacc += gptr[co] * kc[co];
                            gin->data[ibase + ci] += gacc;
                        }
                    } else if (gk) {
                        for (int ci = 0; ci < cin; ++ci) {
                            const T iv = in.data[ibase + ci];
                            if (iv == T(0)) continue;
                            T* gkc = &gk->data[kbase + static_cast<size_t>(ci) * cout];
                            for (int co = 0; co < cout; ++co) gkc[co] += gptr[co] * iv;
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
inline TensorT<T> zero_insert_upsample(const TensorT<T>& in, int stride) {
    const int h = in.dim(0), w = in.dim(1), c = in.dim(2);
    TensorT<T> up({h * stride, w * stride, c});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) up.at(y * stride, x * stride, ch) = in.at(y, x, ch);
        }
    }
    return up;
}

}  // namespace detail

/// 2-D convolution over HxWxCin with a kh x kw x Cin x Cout kernel.
/// Same padding keeps ceil(H/stride) x ceil(W/stride); valid padding shrinks.
template <typename T>
inline ValueT<T> conv2d(const ValueT<T>& x, const ValueT<T>& kernel, int stride = 1,
                        Pad pad = Pad::Same) {
    if (x->value.rank() != 3 || kernel->value.rank() != 4) {
        throw ShapeError("conv2d expects HxWxCin input and khxkwxCinxCout kernel");
    }
    if (kernel->value.dim(0) % 2 == 0 || kernel->value.dim(1) % 2 == 0) {
        throw ShapeError("conv2d kernel spatial dims must be odd");
    }
    if (stride != 1 && stride != 2) throw ShapeError("conv2d stride must be 1 or 2");
    TensorT<T> out = detail::conv_forward(x->value, kernel->value, stride, pad);
    return detail::make_op<T>(std::move(out), {x, kernel}, [x, kernel, stride, pad](NodeT<T>& n) {
        TensorT<T>* gin = nullptr;
        TensorT<T>* gk = nullptr;
        if (x->requires_grad) {
            x->ensure_grad();
            gin = &x->grad;
        }
        if (kernel->requires_grad) {
            kernel->ensure_grad();
            gk = &kernel->grad;
        }
        detail::conv_backward(x->value, kernel->value, n.grad, stride, pad, gin, gk);
    });
}

/// Transposed convolution: zero-insertion upsample by `stride` followed by a
/// stride-1 same-padding convolution. Doubles each spatial dim at stride 2.
template <typename T>
inline ValueT<T> deconv2d(const ValueT<T>& x, const ValueT<T>& kernel, int stride = 2) {
    if (x->value.rank() != 3 || kernel->value.rank() != 4) {
        throw ShapeError("deconv2d expects HxWxCin input and khxkwxCinxCout kernel");
    }
    if (kernel->value.dim(0) % 2 == 0 || kernel->value.dim(1) % 2 == 0) {
        throw ShapeError("deconv2d kernel spatial dims must be odd");
    }
    TensorT<T> up = detail::zero_insert_upsample(x->value, stride);
    TensorT<T> out = detail::conv_forward(up, kernel->value, 1, Pad::Same, /*skip_zeros=*/true);
    return detail::make_op<T>(
        std::move(out), {x, kernel},
        [x, kernel, stride, up = std::move(up)](NodeT<T>& n) {
            const bool need_in = x->requires_grad;
            const bool need_k = kernel->requires_grad;
            TensorT<T> gup;
            if (need_in) gup = TensorT<T>(up.shape);
            TensorT<T>* gk = nullptr;
            if (need_k) {
                kernel->ensure_grad();
                gk = &kernel->grad;
            }
            detail::conv_backward(up, kernel->value, n.grad, 1, Pad::Same,
                                  need_in ? &gup : nullptr, gk);
            if (need_in) {
                x->ensure_grad();
                const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
                for (int y = 0; y < h; ++y) {
                    for (int xx = 0; xx < w; ++xx) {
                        for (int ch = 0; ch < c; ++ch) {
                            x->grad.at(y, xx, ch) += gup.at(y * stride, xx * stride, ch);
                        }
                    }
                }
            }
        });
}

/// Depthwise 2-D convolution: HxWxC input, kh x kw x C kernel, one filter per
/// channel. Used for the attention positional encoder and SSIM windows.
template <typename T>
inline ValueT<T> depthwise_conv2d(const ValueT<T>& x, const ValueT<T>& kernel,
                                  Pad pad = Pad::Same) {
    if (x->value.rank() != 3 || kernel->value.rank() != 3) {
        throw ShapeError("depthwise_conv2d expects HxWxC input and khxkwxC kernel");
    }
    if (x->value.dim(2) != kernel->value.dim(2)) {
        throw ShapeError("depthwise_conv2d channel mismatch");
    }
    const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
    const int kh = kernel->value.dim(0), kw = kernel->value.dim(1);
    const detail::ConvGeom g = detail::conv_geometry(h, w, kh, kw, 1, pad);
    TensorT<T> out({g.oh, g.ow, c});
    for (int oy = 0; oy < g.oh; ++oy) {
        for (int ox = 0; ox < g.ow; ++ox) {
            T* optr = &out.data[(static_cast<size_t>(oy) * g.ow + ox) * c];
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy + ky - g.pad_top;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox + kx - g.pad_left;
                    if (ix < 0 || ix >= w) continue;
                    const T* iptr = &x->value.data[(static_cast<size_t>(iy) * w + ix) * c];
                    const T* kptr = &kernel->value.data[(static_cast<size_t>(ky) * kw + kx) * c];
                    for (int ch = 0; ch < c; ++ch) optr[ch] += iptr[ch] * kptr[ch];
                }
            }
        }
    }
    return detail::make_op<T>(std::move(out), {x, kernel}, [x, kernel, g, h, w, c, kh,
                                                            kw](NodeT<T>& n) {
        const bool need_in = x->requires_grad;
        const bool need_k = kernel->requires_grad;
        if (need_in) x->ensure_grad();
        if (need_k) kernel->ensure_grad();
        for (int oy = 0; oy < g.oh; ++oy) {
            for (int ox = 0; ox < g.ow; ++ox) {
                const T* gptr = &n.grad.data[(static_cast<size_t>(oy) * g.ow + ox) * c];
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy + ky - g.pad_top;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox + kx - g.pad_left;
                        if (ix < 0 || ix >= w) continue;
                        const size_t ibase = (static_cast<size_t>(iy) * w + ix) * c;
                        const size_t kbase = (static_cast<size_t>(ky) * kw + kx) * c;
                        for (int ch = 0; ch < c; ++ch) {
                            if (need_in)
                                x->grad.data[ibase + ch] +=
                                    gptr[ch] * kernel->value.data[kbase + ch];
                            if (need_k)
                                kernel->grad.data[kbase + ch] += gptr[ch] * x->value.data[ibase + ch];
                        }
                    }
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// normalization / pooling / resampling
// ---------------------------------------------------------------------------

/// Per-position channel normalization of HxWxC to zero mean / unit variance
/// followed by a learned channel-wise affine.
template <typename T>
inline ValueT<T> layer_norm(const ValueT<T>& x, const ValueT<T>& gain, const ValueT<T>& bias,
                            double eps = 1e-5) {
    if (x->value.rank() != 3) throw ShapeError("layer_norm expects HxWxC");
    const int c = x->value.dim(2);
    if (gain->value.numel() != static_cast<size_t>(c) ||
        bias->value.numel() != static_cast<size_t>(c)) {
        throw ShapeError("layer_norm gain/bias must have C elements");
    }
    const size_t positions = x->value.numel() / static_cast<size_t>(c);
    TensorT<T> out(x->value.shape);
    TensorT<T> xhat(x->value.shape);        // saved for backward
    std::vector<T> inv_sigma(positions);
    for (size_t p = 0; p < positions; ++p) {
        const T* row = &x->value.data[p * c];
        double mu = 0.0;
        for (int ch = 0; ch < c; ++ch) mu += static_cast<double>(row[ch]);
        mu /= c;
        double var = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            double d = static_cast<double>(row[ch]) - mu;
            var += d * d;
        }
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[p] = static_cast<T>(is);
        for (int ch = 0; ch < c; ++ch) {
            const T xh = static_cast<T>((static_cast<double>(row[ch]) - mu) * is);
            xhat.data[p * c + ch] = xh;
            out.data[p * c + ch] = xh * gain->value.data[static_cast<size_t>(ch)] +
                                   bias->value.data[static_cast<size_t>(ch)];
        }
    }
    return detail::make_op<T>(
        std::move(out), {x, gain, bias},
        [x, gain, bias, c, positions, xhat = std::move(xhat),
         inv_sigma = std::move(inv_sigma)](NodeT<T>& n) {
            if (gain->requires_grad) gain->ensure_grad();
            if (bias->requires_grad) bias->ensure_grad();
            if (x->requires_grad) x->ensure_grad();
            for (size_t p = 0; p < positions; ++p) {
                const T* g = &n.grad.data[p * c];
                const T* xh = &xhat.data[p * c];
                if (gain->requires_grad || bias->requires_grad) {
                    for (int ch = 0; ch < c; ++ch) {
                        if (gain->requires_grad) gain->grad.data[static_cast<size_t>(ch)] += g[ch] * xh[ch];
                        if (bias->requires_grad) bias->grad.data[static_cast<size_t>(ch)] += g[ch];
                    }
                }
                if (x->requires_grad) {
                    // dxhat = g * gain; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) / sigma
                    double m1 = 0.0, m2 = 0.0;
                    for (int ch = 0; ch < c; ++ch) {
                        const double dxh = static_cast<double>(g[ch]) *
                                           static_cast<double>(gain->value.data[static_cast<size_t>(ch)]);
                        m1 += dxh;
                        m2 += dxh * static_cast<double>(xh[ch]);
                    }
                    m1 /= c;
                    m2 /= c;
                    for (int ch = 0; ch < c; ++ch) {
                        const double dxh = static_cast<double>(g[ch]) *
                                           static_cast<double>(gain->value.data[static_cast<size_t>(ch)]);
                        x->grad.data[p * c + ch] += static_cast<T>(
                            (dxh - m1 - static_cast<double>(xh[ch]) * m2) *
                            static_cast<double>(inv_sigma[p]));
                    }
                }
            }
        });
}

/// Average pool by integer factor (dims must divide).
template <typename T>
inline ValueT<T> avg_pool(const ValueT<T>& x, int p) {
    if (x->value.rank() != 3) throw ShapeError("avg_pool expects HxWxC");
    const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
    if (h % p != 0 || w % p != 0) throw ShapeError("avg_pool: dims not divisible by factor");
    const int oh = h / p, ow = w / p;
    TensorT<T> out({oh, ow, c});
    const T inv = static_cast<T>(1.0 / (static_cast<double>(p) * p));
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int dy = 0; dy < p; ++dy)
                for (int dx = 0; dx < p; ++dx)
                    for (int ch = 0; ch < c; ++ch)
                        out.at(oy, ox, ch) += x->value.at(oy * p + dy, ox * p + dx, ch) * inv;
    return detail::make_op<T>(std::move(out), {x}, [x, p, oh, ow, c, inv](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx)
                        for (int ch = 0; ch < c; ++ch)
                            x->grad.at(oy * p + dy, ox * p + dx, ch) += n.grad.at(oy, ox, ch) * inv;
    });
}

/// Nearest-neighbor upsample by integer factor.
template <typename T>
inline ValueT<T> upsample_nearest(const ValueT<T>& x, int p) {
    if (x->value.rank() != 3) throw ShapeError("upsample_nearest expects HxWxC");
    const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
    TensorT<T> out({h * p, w * p, c});
    for (int y = 0; y < h * p; ++y)
        for (int xx = 0; xx < w * p; ++xx)
            for (int ch = 0; ch < c; ++ch) out.at(y, xx, ch) = x->value.at(y / p, xx / p, ch);
    return detail::make_op<T>(std::move(out), {x}, [x, p, h, w, c](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int y = 0; y < h * p; ++y)
            for (int xx = 0; xx < w * p; ++xx)
                for (int ch = 0; ch < c; ++ch) x->grad.at(y / p, xx / p, ch) += n.grad.at(y, xx, ch);
    });
}

namespace detail {

inline int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

}  // namespace detail

/// Reflect padding (mirror without edge duplication).
template <typename T>
inline ValueT<T> pad_reflect(const ValueT<T>& x, int top, int bottom, int left, int right) {
    if (x->value.rank() != 3) throw ShapeError("pad_reflect expects HxWxC");
    const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
    const int oh = h + top + bottom, ow = w + left + right;
    TensorT<T> out({oh, ow, c});
    for (int y = 0; y < oh; ++y) {
        const int sy = detail::mirror_index(y - top, h);
        for (int xx = 0; xx < ow; ++xx) {
            const int sx = detail::mirror_index(xx - left, w);
            for (int ch = 0; ch < c; ++ch) out.at(y, xx, ch) = x->value.at(sy, sx, ch);
        }
    }
    return detail::make_op<T>(std::move(out), {x}, [x, top, left, h, w, c](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const int oh = n.value.dim(0), ow = n.value.dim(1);
        for (int y = 0; y < oh; ++y) {
            const int sy = detail::mirror_index(y - top, h);
            for (int xx = 0; xx < ow; ++xx) {
                const int sx = detail::mirror_index(xx - left, w);
                for (int ch = 0; ch < c; ++ch) x->grad.at(sy, sx, ch) += n.grad.at(y, xx, ch);
            }
        }
    });
}

/// Crop a window starting at (y0, x0) of size nh x nw.
template <typename T>
inline ValueT<T> crop(const ValueT<T>& x, int y0, int x0, int nh, int nw) {
    if (x->value.rank() != 3) throw ShapeError("crop expects HxWxC");
    const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
    if (y0 < 0 || x0 < 0 || y0 + nh > h || x0 + nw > w) throw ShapeError("crop out of range");
    TensorT<T> out({nh, nw, c});
    for (int y = 0; y < nh; ++y)
        for (int xx = 0; xx < nw; ++xx)
            for (int ch = 0; ch < c; ++ch) out.at(y, xx, ch) = x->value.at(y0 + y, x0 + xx, ch);
    return detail::make_op<T>(std::move(out), {x}, [x, y0, x0, nh, nw, c](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int y = 0; y < nh; ++y)
            for (int xx = 0; xx < nw; ++xx)
                for (int ch = 0; ch < c; ++ch) x->grad.at(y0 + y, x0 + xx, ch) += n.grad.at(y, xx, ch);
    });
}

/// Channel-wise broadcast multiply: HxWxC * 1x1xC.
template <typename T>
inline ValueT<T> mul_channels(const ValueT<T>& x, const ValueT<T>& s) {
    if (x->value.rank() != 3 || s->value.rank() != 3 || s->value.dim(0) != 1 ||
        s->value.dim(1) != 1 || s->value.dim(2) != x->value.dim(2)) {
        throw ShapeError("mul_channels expects HxWxC and 1x1xC");
    }
    const int c = x->value.dim(2);
    const size_t positions = x->value.numel() / static_cast<size_t>(c);
    TensorT<T> out(x->value.shape);
    for (size_t p = 0; p < positions; ++p)
        for (int ch = 0; ch < c; ++ch)
            out.data[p * c + ch] = x->value.data[p * c + ch] * s->value.data[static_cast<size_t>(ch)];
    return detail::make_op<T>(std::move(out), {x, s}, [x, s, c, positions](NodeT<T>& n) {
        if (x->requires_grad) {
            x->ensure_grad();
            for (size_t p = 0; p < positions; ++p)
                for (int ch = 0; ch < c; ++ch)
                    x->grad.data[p * c + ch] +=
                        n.grad.data[p * c + ch] * s->value.data[static_cast<size_t>(ch)];
        }
        if (s->requires_grad) {
            s->ensure_grad();
            for (size_t p = 0; p < positions; ++p)
                for (int ch = 0; ch < c; ++ch)
                    s->grad.data[static_cast<size_t>(ch)] +=
                        n.grad.data[p * c + ch] * x->value.data[p * c + ch];
        }
    });
}

/// Fixed per-channel affine y = x * scale[c] + offset[c] (constants, not
/// parameters); used by the normalization layers around the network.
template <typename T>
inline ValueT<T> affine_channels(const ValueT<T>& x, std::vector<double> sc,
                                 std::vector<double> off) {
    if (x->value.rank() != 3 || x->value.dim(2) != static_cast<int>(sc.size()) ||
        sc.size() != off.size()) {
        throw ShapeError("affine_channels expects HxWxC with C scales/offsets");
    }
    const int c = x->value.dim(2);
    const size_t positions = x->value.numel() / static_cast<size_t>(c);
    TensorT<T> out(x->value.shape);
    for (size_t p = 0; p < positions; ++p)
        for (int ch = 0; ch < c; ++ch)
            out.data[p * c + ch] = static_cast<T>(
                static_cast<double>(x->value.data[p * c + ch]) * sc[static_cast<size_t>(ch)] +
                off[static_cast<size_t>(ch)]);
    return detail::make_op<T>(std::move(out), {x},
                              [x, sc = std::move(sc), c, positions](NodeT<T>& n) {
                                  if (!x->requires_grad) return;
                                  x->ensure_grad();
                                  for (size_t p = 0; p < positions; ++p)
                                      for (int ch = 0; ch < c; ++ch)
                                          x->grad.data[p * c + ch] += static_cast<T>(
                                              static_cast<double>(n.grad.data[p * c + ch]) *
                                              sc[static_cast<size_t>(ch)]);
                              });
}

/// Per-pixel 3x3 matrix applied to the channel triple of an HxWx3 tensor.
template <typename T>
inline ValueT<T> pixel_mat3(const ValueT<T>& x, const std::array<double, 9>& m) {
    if (x->value.rank() != 3 || x->value.dim(2) != 3) throw ShapeError("pixel_mat3 expects HxWx3");
    const size_t positions = x->value.numel() / 3;
    TensorT<T> out(x->value.shape);
    for (size_t p = 0; p < positions; ++p) {
        const T* v = &x->value.data[p * 3];
        T* o = &out.data[p * 3];
        for (int r = 0; r < 3; ++r) {
            o[r] = static_cast<T>(m[r * 3 + 0] * static_cast<double>(v[0]) +
                                  m[r * 3 + 1] * static_cast<double>(v[1]) +
                                  m[r * 3 + 2] * static_cast<double>(v[2]));
        }
    }
    return detail::make_op<T>(std::move(out), {x}, [x, m, positions](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t p = 0; p < positions; ++p) {
            const T* g = &n.grad.data[p * 3];
            T* gx = &x->grad.data[p * 3];
            for (int j = 0; j < 3; ++j) {
                gx[j] += static_cast<T>(m[0 * 3 + j] * static_cast<double>(g[0]) +
                                        m[1 * 3 + j] * static_cast<double>(g[1]) +
                                        m[2 * 3 + j] * static_cast<double>(g[2]));
            }
        }
    });
}

// ---------------------------------------------------------------------------
// frequency domain
// ---------------------------------------------------------------------------

/// Forward 2-D DFT of a real HxW plane, producing the stacked HxWx2 tensor
/// (real plane, imaginary plane). Linear, so backward is another transform.
template <typename T>
inline ValueT<T> fft2_stack(const ValueT<T>& x) {
    if (x->value.rank() != 2) throw ShapeError("fft2_stack expects HxW");
    const int h = x->value.dim(0), w = x->value.dim(1);
    ComplexTensorT<T> z = fft2(x->value);
    TensorT<T> out({h, w, 2});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            out.at(y, xx, 0) = z.real.at(y, xx);
            out.at(y, xx, 1) = z.imag.at(y, xx);
        }
    return detail::make_op<T>(std::move(out), {x}, [x, h, w](NodeT<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        TensorT<T> gre({h, w}), gim({h, w});
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                gre.at(y, xx) = n.grad.at(y, xx, 0);
                gim.at(y, xx) = n.grad.at(y, xx, 1);
            }
        // d/dx of sum(gre.*Re F + gim.*Im F) = Re F(gre) + Im F(gim)
        ComplexTensorT<T> a = fft2(gre);
        ComplexTensorT<T> b = fft2(gim);
        for (size_t i = 0; i < x->grad.numel(); ++i)
            x->grad.data[i] += a.real.data[i] + b.imag.data[i];
    });
}

/// Inverse 2-D DFT of a stacked HxWx2 spectrum, returning the real part.
/// Equivalent to Hermitian-symmetrizing the spectrum before inversion.
template <typename T>
inline ValueT<T> ifft2_real(const ValueT<T>& z) {
    if (z->value.rank() != 3 || z->value.dim(2) != 2) throw ShapeError("ifft2_real expects HxWx2");
    const int h = z->value.dim(0), w = z->value.dim(1);
    TensorT<T> re({h, w}), im({h, w});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            re.at(y, xx) = z->value.at(y, xx, 0);
            im.at(y, xx) = z->value.at(y, xx, 1);
        }
    TensorT<T> out = ifft2(ComplexTensorT<T>(std::move(re), std::move(im)));
    return detail::make_op<T>(std::move(out), {z}, [z, h, w](NodeT<T>& n) {
        if (!z->requires_grad) return;
        z->ensure_grad();
        ComplexTensorT<T> f = fft2(n.grad);
        const T inv = static_cast<T>(1.0 / (static_cast<double>(h) * w));
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                z->grad.at(y, xx, 0) += f.real.at(y, xx) * inv;
                z->grad.at(y, xx, 1) += f.imag.at(y, xx) * inv;
            }
    });
}

// ---------------------------------------------------------------------------
// loss kernels
// ---------------------------------------------------------------------------

/// Mean over elements of the smooth-L1 penalty of a difference tensor.
template <typename T>
inline ValueT<T> smooth_l1_mean(const ValueT<T>& d) {
    const size_t n = d->value.numel();
    double acc = 0.0;
    for (T v : d->value.data) {
        const double a = std::abs(static_cast<double>(v));
        acc += a < 1.0 ? 0.5 * a * a : a - 0.5;
    }
    const double inv = 1.0 / static_cast<double>(n);
    return detail::make_op<T>(TensorT<T>::scalar(static_cast<T>(acc * inv)), {d},
                              [d, inv](NodeT<T>& node) {
                                  if (!d->requires_grad) return;
                                  d->ensure_grad();
                                  const T g = node.grad.data[0];
                                  for (size_t i = 0; i < d->grad.numel(); ++i) {
                                      const double v = static_cast<double>(d->value.data[i]);
                                      const double dv =
                                          std::abs(v) < 1.0 ? v : (v > 0.0 ? 1.0 : -1.0);
                                      d->grad.data[i] += static_cast<T>(g * dv * inv);
                                  }
                              });
}

/// Differentiable histogram: each value spreads Gaussian mass over the bins
/// (softmax of negative squared distance to bin centers), per-value mass sums
/// to one, and the result is averaged over values so the histogram itself
/// sums to one. Bins cover [0, 1]. Mass beyond 8 sigma falls below float
/// precision, so the kernel is evaluated only over that window.
template <typename T>
inline ValueT<T> soft_histogram(const ValueT<T>& x, int bins, double sigma) {
    if (bins < 2) throw ShapeError("soft_histogram needs >= 2 bins");
    const size_t n = x->value.numel();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
    const int radius = std::min(bins - 1, static_cast<int>(std::ceil(8.0 * sigma * bins)) + 1);
    auto center = [bins](int b) { return (static_cast<double>(b) + 0.5) / bins; };
    auto window = [bins, radius](double v, int& b0, int& b1) {
        const int nearest = std::min(bins - 1, std::max(0, static_cast<int>(v * bins)));
        b0 = std::max(0, nearest - radius);
        b1 = std::min(bins - 1, nearest + radius);
    };

    // weights over [b0, b1]: softmax of -(v-c)^2 / (2 sigma^2)
    auto weights_for = [inv_2s2, center](double v, int b0, int b1, std::vector<double>& w) {
        double mx = -1e300;
        for (int b = b0; b <= b1; ++b) {
            const double d = v - center(b);
            w[static_cast<size_t>(b - b0)] = -d * d * inv_2s2;
            mx = std::max(mx, w[static_cast<size_t>(b - b0)]);
        }
        double denom = 0.0;
        for (int b = b0; b <= b1; ++b) {
            w[static_cast<size_t>(b - b0)] = std::exp(w[static_cast<size_t>(b - b0)] - mx);
            denom += w[static_cast<size_t>(b - b0)];
        }
        for (int b = b0; b <= b1; ++b) w[static_cast<size_t>(b - b0)] /= denom;
    };

    TensorT<T> out({bins});
    {
        std::vector<double> w(static_cast<size_t>(2 * radius + 1));
        std::vector<double> acc(static_cast<size_t>(bins), 0.0);
        for (size_t i = 0; i < n; ++i) {
            int b0, b1;
            const double v = static_cast<double>(x->value.data[i]);
            window(v, b0, b1);
            weights_for(v, b0, b1, w);
            for (int b = b0; b <= b1; ++b) acc[static_cast<size_t>(b)] += w[static_cast<size_t>(b - b0)];
        }
        for (int b = 0; b < bins; ++b)
            out.data[static_cast<size_t>(b)] = static_cast<T>(acc[static_cast<size_t>(b)] * inv_n);
    }
    return detail::make_op<T>(
        std::move(out), {x},
        [x, radius, inv_n, inv_2s2, n, center, window, weights_for](NodeT<T>& node) {
            if (!x->requires_grad) return;
            x->ensure_grad();
            std::vector<double> w(static_cast<size_t>(2 * radius + 1));
            for (size_t i = 0; i < n; ++i) {
                const double v = static_cast<double>(x->value.data[i]);
                int b0, b1;
                window(v, b0, b1);
                weights_for(v, b0, b1, w);
                // u_b = d a_b / d v ;  dH_b/dv = w_b (u_b - sum_m w_m u_m) / n
                double ubar = 0.0;
                for (int b = b0; b <= b1; ++b) {
                    const double u = -2.0 * (v - center(b)) * inv_2s2;
                    ubar += w[static_cast<size_t>(b - b0)] * u;
                }
                double acc = 0.0;
                for (int b = b0; b <= b1; ++b) {
                    const double u = -2.0 * (v - center(b)) * inv_2s2;
                    acc += static_cast<double>(node.grad.data[static_cast<size_t>(b)]) *
                           w[static_cast<size_t>(b - b0)] * (u - ubar);
                }
                x->grad.data[i] += static_cast<T>(acc * inv_n);
            }
        });
}

}  // namespace ltcf
