// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>
#include <string>

namespace tsflow {

using detail::make_result;
using detail::Node;

namespace {

std::vector<double>& grad_of(Node& self, std::size_t parent) { return self.parents[parent]->grad_buffer(); }
bool wants_grad(const Node& self, std::size_t parent) { return self.parents[parent]->requires_grad; }

blasint blas_int(std::size_t v) {
    if (v > static_cast<std::size_t>(INT_MAX)) throw ShapeError("matmul: dimension too large for BLAS");
    return static_cast<blasint>(v);
}

// Maps a flat index of the broadcast output onto a flat index of one operand.
class BroadcastMap {
public:
    BroadcastMap(const Shape& out, const Shape& in) : n_in_(shape_numel(in)) {
        if (in == out) {
            kind_ = Kind::Identity;
            return;
        }
        std::size_t lead = 0;
        while (lead < in.size() && in[lead] == 1) ++lead;
        const std::size_t tail = in.size() - lead;
        bool trailing = tail <= out.size();
        for (std::size_t i = 0; trailing && i < tail; ++i) trailing = in[lead + i] == out[out.size() - tail + i];
        if (trailing) {
            kind_ = Kind::Modulo;
            return;
        }
        kind_ = Kind::General;
        const std::size_t rank = out.size();
        const std::size_t offset = rank - in.size();
        std::vector<std::size_t> strides(rank, 0);
        std::size_t stride = 1;
        for (std::size_t d = in.size(); d-- > 0;) {
            strides[d + offset] = in[d] == 1 ? 0 : stride;
            stride *= in[d];
        }
        const std::size_t n = shape_numel(out);
        map_.resize(n);
        std::vector<std::size_t> idx(rank, 0);
        std::size_t src = 0;
        for (std::size_t o = 0; o < n; ++o) {
            map_[o] = src;
            for (std::size_t d = rank; d-- > 0;) {
                ++idx[d];
                src += strides[d];
                if (idx[d] < out[d]) break;
                src -= strides[d] * out[d];
                idx[d] = 0;
            }
        }
    }

    std::size_t operator()(std::size_t i) const {
        switch (kind_) {
            case Kind::Identity: return i;
            case Kind::Modulo: return i % n_in_;
            default: return map_[i];
        }
    }

private:
    enum class Kind { Identity, Modulo, General };
    Kind kind_ = Kind::Identity;
    std::size_t n_in_;
    std::vector<std::size_t> map_;
};

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        out[i] = std::max(da, db);
    }
    if (out != a && out != b) {
        throw ShapeError(std::string(op) + ": neither operand has the broadcast shape (" + shape_str(a) + " vs " +
                         shape_str(b) + ")");
    }
    return out;
}

enum class BinaryKind { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
    Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
    auto ma = std::make_shared<BroadcastMap>(out_shape, a.shape());
    auto mb = std::make_shared<BroadcastMap>(out_shape, b.shape());
    const std::size_t n = shape_numel(out_shape);
    std::vector<double> out(n);
    auto av = a.values();
    auto bv = b.values();
    switch (kind) {
        case BinaryKind::Add:
            for (std::size_t i = 0; i < n; ++i) out[i] = av[(*ma)(i)] + bv[(*mb)(i)];
            break;
        case BinaryKind::Sub:
            for (std::size_t i = 0; i < n; ++i) out[i] = av[(*ma)(i)] - bv[(*mb)(i)];
            break;
        case BinaryKind::Mul:
            for (std::size_t i = 0; i < n; ++i) out[i] = av[(*ma)(i)] * bv[(*mb)(i)];
            break;
    }
    return make_result(std::move(out_shape), std::move(out), {a, b}, name, [kind, ma, mb](Node& self) {
        const auto& g = self.grad;
        const std::size_t n = g.size();
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        if (wants_grad(self, 0)) {
            auto& ga = grad_of(self, 0);
            if (kind == BinaryKind::Mul) {
                for (std::size_t i = 0; i < n; ++i) ga[(*ma)(i)] += g[i] * bv[(*mb)(i)];
            } else {
                for (std::size_t i = 0; i < n; ++i) ga[(*ma)(i)] += g[i];
            }
        }
        if (wants_grad(self, 1)) {
            auto& gb = grad_of(self, 1);
            if (kind == BinaryKind::Mul) {
                for (std::size_t i = 0; i < n; ++i) gb[(*mb)(i)] += g[i] * av[(*ma)(i)];
            } else if (kind == BinaryKind::Sub) {
                for (std::size_t i = 0; i < n; ++i) gb[(*mb)(i)] -= g[i];
            } else {
                for (std::size_t i = 0; i < n; ++i) gb[(*mb)(i)] += g[i];
            }
        }
    });
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    return make_result(a.shape(), std::move(out), {a}, name, [deriv](Node& self) {
        auto& ga = grad_of(self, 0);
        const auto& x = self.parents[0]->value;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * deriv(x[i], self.value[i]);
    });
}

double dot(const double* x, const double* y, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        s0 += x[j] * y[j];
        s1 += x[j + 1] * y[j + 1];
        s2 += x[j + 2] * y[j + 2];
        s3 += x[j + 3] * y[j + 3];
    }
    for (; j < n; ++j) s0 += x[j] * y[j];
    return (s0 + s1) + (s2 + s3);
}

// Row-major products accumulated into C (beta = 1), delegated to BLAS.

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
    if (m == 0 || n == 0 || k == 0) return;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, blas_int(m), blas_int(n), blas_int(k), 1.0, A,
                blas_int(k), B, blas_int(n), 1.0, C, blas_int(n));
}

// C[m,k] += G[m,n] * B[k,n]^T
void gemm_nt(const double* G, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
    if (m == 0 || n == 0 || k == 0) return;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, blas_int(m), blas_int(k), blas_int(n), 1.0, G,
                blas_int(n), B, blas_int(n), 1.0, C, blas_int(k));
}

// C[k,n] += A[m,k]^T * G[m,n]
void gemm_tn(const double* A, const double* G, double* C, std::size_t m, std::size_t k, std::size_t n) {
    if (m == 0 || n == 0 || k == 0) return;
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, blas_int(k), blas_int(n), blas_int(m), 1.0, A,
                blas_int(k), G, blas_int(n), 1.0, C, blas_int(n));
}

template <class Fn>
void for_each_permuted(const Shape& out_shape, const std::vector<std::size_t>& src_strides, Fn fn) {
    const std::size_t rank = out_shape.size();
    const std::size_t n = shape_numel(out_shape);
    if (rank == 0) {
        if (n) fn(0, 0);
        return;
    }
    const std::size_t inner = out_shape[rank - 1];
    const std::size_t inner_stride = src_strides[rank - 1];
    std::vector<std::size_t> idx(rank, 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < n; o += inner) {
        for (std::size_t j = 0; j < inner; ++j) fn(o + j, src + j * inner_stride);
        for (std::size_t d = rank - 1; d-- > 0;) {
            ++idx[d];
            src += src_strides[d];
            if (idx[d] < out_shape[d]) break;
            src -= src_strides[d] * out_shape[d];
            idx[d] = 0;
        }
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Mul, "mul"); }

Tensor scale(const Tensor& a, double s) {
    return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& a) {
    return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor gelu(const Tensor& a) {
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double c = 0.044715;
    return unary(
        a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x))); },
        [](double x, double) {
            const double t = std::tanh(k * (x + c * x * x * x));
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * c * x * x);
        });
}

Tensor silu(const Tensor& a) {
    return unary(
        a, "silu", [](double x) { return x / (1.0 + std::exp(-x)); },
        [](double x, double) {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 + x * (1.0 - s));
        });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() < 2 || bs.size() < 2) {
        throw ShapeError("matmul: operands must be at least 2-D, got " + shape_str(as) + " and " + shape_str(bs));
    }
    const std::size_t m = as[as.size() - 2], k = as.back();
    const std::size_t kb = bs[bs.size() - 2], n = bs.back();
    const Shape a_batch(as.begin(), as.end() - 2);
    const Shape b_batch(bs.begin(), bs.end() - 2);
    bool suffix = k == kb && b_batch.size() <= a_batch.size();
    for (std::size_t i = 0; suffix && i < b_batch.size(); ++i)
        suffix = b_batch[i] == a_batch[a_batch.size() - b_batch.size() + i];
    if (!suffix) throw ShapeError("matmul: incompatible shapes " + shape_str(as) + " and " + shape_str(bs));

    const std::size_t nb_a = shape_numel(a_batch);
    const std::size_t nb_b = shape_numel(b_batch);
    Shape out_shape = a_batch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    std::vector<double> out(nb_a * m * n, 0.0);
    const double* A = a.values().data();
    const double* B = b.values().data();
    if (nb_b == 1) {
        gemm_nn(A, B, out.data(), nb_a * m, k, n);
    } else {
        for (std::size_t t = 0; t < nb_a; ++t)
            gemm_nn(A + t * m * k, B + (t % nb_b) * k * n, out.data() + t * m * n, m, k, n);
    }
    return make_result(std::move(out_shape), std::move(out), {a, b}, "matmul", [=](Node& self) {
        const double* G = self.grad.data();
        const double* A = self.parents[0]->value.data();
        const double* B = self.parents[1]->value.data();
        if (wants_grad(self, 0)) {
            double* GA = grad_of(self, 0).data();
            if (nb_b == 1) {
                gemm_nt(G, B, GA, nb_a * m, k, n);
            } else {
                for (std::size_t t = 0; t < nb_a; ++t)
                    gemm_nt(G + t * m * n, B + (t % nb_b) * k * n, GA + t * m * k, m, k, n);
            }
        }
        if (wants_grad(self, 1)) {
            double* GB = grad_of(self, 1).data();
            if (nb_b == 1) {
                gemm_tn(A, G, GB, nb_a * m, k, n);
            } else {
                for (std::size_t t = 0; t < nb_a; ++t)
                    gemm_tn(A + t * m * k, G + t * m * n, GB + (t % nb_b) * k * n, m, k, n);
            }
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.rank() != 2) throw ShapeError("linear: weight must be 2-D, got " + shape_str(weight.shape()));
    if (x.rank() == 0 || x.shape().back() != weight.dim(0)) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
    }
    Tensor y;
    if (x.rank() == 1) {
        y = reshape(matmul(reshape(x, {1, x.dim(0)}), weight), {weight.dim(1)});
    } else {
        y = matmul(x, weight);
    }
    return bias.defined() ? add(y, bias) : y;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(a.values().begin(), a.values().end());
    return make_result(std::move(shape), std::move(out), {a}, "reshape", [](Node& self) {
        auto& ga = grad_of(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm) {
    const Shape& in = a.shape();
    const std::size_t rank = in.size();
    if (perm.size() != rank) throw ShapeError("permute: permutation rank mismatch for " + shape_str(in));
    std::vector<bool> seen(rank, false);
    for (std::size_t p : perm) {
        if (p >= rank || seen[p]) throw ShapeError("permute: invalid permutation for " + shape_str(in));
        seen[p] = true;
    }
    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t d = rank; d-- > 1;) in_strides[d - 1] = in_strides[d] * in[d];
    Shape out_shape(rank);
    std::vector<std::size_t> src_strides(rank);
    for (std::size_t d = 0; d < rank; ++d) {
        out_shape[d] = in[perm[d]];
        src_strides[d] = in_strides[perm[d]];
    }
    std::vector<double> out(a.numel());
    auto av = a.values();
    for_each_permuted(out_shape, src_strides, [&](std::size_t o, std::size_t s) { out[o] = av[s]; });
    Shape captured = out_shape;
    return make_result(std::move(out_shape), std::move(out), {a}, "permute",
                       [captured, src_strides](Node& self) {
                           auto& ga = grad_of(self, 0);
                           const auto& g = self.grad;
                           for_each_permuted(captured, src_strides,
                                             [&](std::size_t o, std::size_t s) { ga[s] += g[o]; });
                       });
}

Tensor transpose_last(const Tensor& a) {
    if (a.rank() < 2) throw ShapeError("transpose_last: need rank >= 2, got " + shape_str(a.shape()));
    std::vector<std::size_t> perm(a.rank());
    std::iota(perm.begin(), perm.end(), 0);
    std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
    return permute(a, perm);
}

Tensor softmax_lastdim(const Tensor& x) {
    if (x.rank() == 0 || x.numel() == 0) throw ShapeError("softmax_lastdim: empty tensor " + shape_str(x.shape()));
    const std::size_t len = x.shape().back();
    const std::size_t rows = x.numel() / len;
    auto xv = x.values();
    std::vector<double> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = xv.data() + r * len;
        double* o = out.data() + r * len;
        const double mx = *std::max_element(in, in + len);
        double total = 0.0;
        for (std::size_t j = 0; j < len; ++j) total += (o[j] = std::exp(in[j] - mx));
        const double inv = 1.0 / total;
        for (std::size_t j = 0; j < len; ++j) o[j] *= inv;
    }
    return make_result(x.shape(), std::move(out), {x}, "softmax", [len, rows](Node& self) {
        auto& gx = grad_of(self, 0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = self.value.data() + r * len;
            const double* g = self.grad.data() + r * len;
            const double s = dot(y, g, len);
            for (std::size_t j = 0; j < len; ++j) gx[r * len + j] += y[j] * (g[j] - s);
        }
    });
}

Tensor layer_norm(const Tensor& x, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
    if (x.rank() == 0 || x.shape().back() == 0) {
        throw ShapeError("layer_norm: zero-length channel dimension in " + shape_str(x.shape()));
    }
    const std::size_t len = x.shape().back();
    const std::size_t rows = x.numel() / len;
    auto xv = x.values();
    std::vector<double> out(x.numel());
    std::vector<double> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = xv.data() + r * len;
        double mu = 0.0;
        for (std::size_t j = 0; j < len; ++j) mu += in[j];
        mu /= static_cast<double>(len);
        double var = 0.0;
        for (std::size_t j = 0; j < len; ++j) var += (in[j] - mu) * (in[j] - mu);
        var /= static_cast<double>(len);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[r] = inv;
        for (std::size_t j = 0; j < len; ++j) out[r * len + j] = (in[j] - mu) * inv;
    }
    return make_result(x.shape(), std::move(out), {x}, "layer_norm",
                       [len, rows, inv_std = std::move(inv_std)](Node& self) {
                           auto& gx = grad_of(self, 0);
                           const double n = static_cast<double>(len);
                           for (std::size_t r = 0; r < rows; ++r) {
                               const double* y = self.value.data() + r * len;
                               const double* g = self.grad.data() + r * len;
                               double g_mean = 0.0;
                               for (std::size_t j = 0; j < len; ++j) g_mean += g[j];
                               g_mean /= n;
                               const double gy_mean = dot(g, y, len) / n;
                               for (std::size_t j = 0; j < len; ++j)
                                   gx[r * len + j] += inv_std[r] * (g[j] - g_mean - y[j] * gy_mean);
                           }
                       });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return make_result(Shape{}, {s}, {a}, "sum", [](Node& self) {
        auto& ga = grad_of(self, 0);
        const double g = self.grad[0];
        for (double& v : ga) v += g;
    });
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
    const Shape& s = a.shape();
    if (axis >= s.size()) throw ShapeError("mean_axis: axis out of range for " + shape_str(s));
    if (s[axis] == 0) throw ShapeError("mean_axis: empty axis in " + shape_str(s));
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
    for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
    const std::size_t len = s[axis];
    Shape out_shape = s;
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    std::vector<double> out(outer * inner, 0.0);
    auto av = a.values();
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t l = 0; l < len; ++l)
            for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += av[(o * len + l) * inner + i] * inv;
    return make_result(std::move(out_shape), std::move(out), {a}, "mean_axis", [=](Node& self) {
        auto& ga = grad_of(self, 0);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t l = 0; l < len; ++l)
                for (std::size_t i = 0; i < inner; ++i) ga[(o * len + l) * inner + i] += self.grad[o * inner + i] * inv;
    });
}

Tensor gather_bias(const Tensor& table, std::span<const int> ids, std::size_t rows, std::size_t cols) {
    if (table.rank() != 2) throw ShapeError("gather_bias: table must be 2-D, got " + shape_str(table.shape()));
    if (ids.size() != rows * cols) throw ShapeError("gather_bias: id count does not match rows*cols");
    const std::size_t heads = table.dim(0), width = table.dim(1);
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= width)
            throw std::out_of_range("gather_bias: bucket id " + std::to_string(id) + " outside table of width " +
                                    std::to_string(width));
    std::vector<int> idv(ids.begin(), ids.end());
    std::vector<double> out(heads * rows * cols);
    auto tv = table.values();
    const std::size_t rc = rows * cols;
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < rc; ++i) out[h * rc + i] = tv[h * width + static_cast<std::size_t>(idv[i])];
    return make_result(Shape{heads, rows, cols}, std::move(out), {table}, "gather_bias",
                       [idv = std::move(idv), heads, width, rc](Node& self) {
                           auto& gt = grad_of(self, 0);
                           for (std::size_t h = 0; h < heads; ++h)
                               for (std::size_t i = 0; i < rc; ++i)
                                   gt[h * width + static_cast<std::size_t>(idv[i])] += self.grad[h * rc + i];
                       });
}

Tensor rotate_pairs(const Tensor& x, std::span<const double> angles) {
    if (x.rank() < 2) throw ShapeError("rotate_pairs: need [..., L, d], got " + shape_str(x.shape()));
    const std::size_t d = x.shape().back();
    const std::size_t len = x.shape()[x.rank() - 2];
    if (d % 2 != 0) throw ShapeError("rotate_pairs: odd last dimension " + std::to_string(d));
    const std::size_t half = d / 2;
    if (angles.size() != len * half) throw ShapeError("rotate_pairs: angle table does not match L*(d/2)");
    std::vector<double> cs(angles.size()), sn(angles.size());
    for (std::size_t i = 0; i < angles.size(); ++i) {
        cs[i] = std::cos(angles[i]);
        sn[i] = std::sin(angles[i]);
    }
    const std::size_t batches = x.numel() / (len * d);
    auto xv = x.values();
    std::vector<double> out(x.numel());
    for (std::size_t b = 0; b < batches; ++b)
        for (std::size_t l = 0; l < len; ++l)
            for (std::size_t f = 0; f < half; ++f) {
                const std::size_t i = (b * len + l) * d + 2 * f;
                const std::size_t a = l * half + f;
                out[i] = xv[i] * cs[a] - xv[i + 1] * sn[a];
                out[i + 1] = xv[i] * sn[a] + xv[i + 1] * cs[a];
            }
    return make_result(x.shape(), std::move(out), {x}, "rotate_pairs",
                       [cs = std::move(cs), sn = std::move(sn), batches, len, half, d](Node& self) {
                           auto& gx = grad_of(self, 0);
                           const auto& g = self.grad;
                           for (std::size_t b = 0; b < batches; ++b)
                               for (std::size_t l = 0; l < len; ++l)
                                   for (std::size_t f = 0; f < half; ++f) {
                                       const std::size_t i = (b * len + l) * d + 2 * f;
                                       const std::size_t a = l * half + f;
                                       gx[i] += g[i] * cs[a] + g[i + 1] * sn[a];
                                       gx[i + 1] += -g[i] * sn[a] + g[i + 1] * cs[a];
                                   }
                       });
}

}  // namespace tsflow
