#pragma once

// Dense tensors with tape-based reverse-mode differentiation. Covers exactly
// what GRU / 1-D convolution / pooling / affine layers and their activations
// need: 1-D and 2-D values, 3-D filter banks, exact-shape or scalar
// broadcasting, and a replayable tape of backward closures.
//
// Two precisions are intended: Real = float for training and inference,
// Real = double for finite-difference gradient checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fudfend/errors.hpp"

namespace fudfend {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "}";
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

namespace detail {
inline thread_local bool grad_enabled_flag = true;
}

inline bool grad_enabled() { return detail::grad_enabled_flag; }

// Scoped "inference mode": operations executed while a guard is alive do not
// record backward closures even when inputs require gradients.
struct NoGradGuard {
    NoGradGuard() : prev_(detail::grad_enabled_flag) { detail::grad_enabled_flag = false; }
    ~NoGradGuard() { detail::grad_enabled_flag = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Shared-node handle: copying a Tensor aliases the same storage, which is what
// backward closures rely on. Gradients live next to the values and are
// allocated lazily on first touch.
template <typename Real>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = std::move(shape);
        t.node_->value.assign(shape_numel(t.node_->shape), Real(0));
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(Real v, bool requires_grad = false) {
        Tensor t = zeros({1}, requires_grad);
        t.data()[0] = v;
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<Real> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                             std::to_string(data.size()) + " elements");
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(data);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }
    std::size_t size() const { return node_->value.size(); }

    std::vector<Real>& data() const { return node_->value; }
    Real item() const {
        if (size() != 1) throw UsageError("item(): tensor has shape " + shape_str(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) const { node_->requires_grad = b; }

    bool has_grad() const { return !node_->grad.empty(); }
    // Grad accumulator, allocated (zeroed) on first access.
    std::vector<Real>& grad() const {
        if (node_->grad.empty()) node_->grad.assign(node_->value.size(), Real(0));
        return node_->grad;
    }
    void zero_grad() const {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
    }

    // Deep copy with detached storage (used for best-epoch snapshots).
    Tensor clone() const {
        Tensor t = from_data(shape(), data(), requires_grad());
        return t;
    }

    // Identity comparison (same underlying node).
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    struct Node {
        Shape shape;
        std::vector<Real> value;
        bool requires_grad = false;
        std::vector<Real> grad;
    };
    std::shared_ptr<Node> node_;
};

// Ordered log of backward closures. Replaying in reverse recording order is a
// valid reverse topological order because closures are appended as operations
// execute. Each step remembers its output tensor so that backward() can reset
// intermediate accumulators before a pass; leaf gradients are never reset by
// the tape, which keeps accumulation across passes additive.
template <typename Real>
class Tape {
public:
    void record(std::function<void()> backward_step) {
        steps_.push_back({Tensor<Real>{}, std::move(backward_step)});
    }
    void record(Tensor<Real> out, std::function<void()> backward_step) {
        steps_.push_back({std::move(out), std::move(backward_step)});
    }
    std::size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }

    void zero_intermediate_grads() {
        for (auto& s : steps_)
            if (s.out.defined()) s.out.zero_grad();
    }

    void replay_backward() {
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->fn();
    }

private:
    struct Step {
        Tensor<Real> out;
        std::function<void()> fn;
    };
    std::vector<Step> steps_;
};

namespace detail {

template <typename Real>
bool want_grad(const Tensor<Real>& a) {
    return grad_enabled() && a.requires_grad();
}

template <typename Real>
bool want_grad(const Tensor<Real>& a, const Tensor<Real>& b) {
    return grad_enabled() && (a.requires_grad() || b.requires_grad());
}

template <typename Real>
void mark_output(Tape<Real>& tape, const Tensor<Real>& out, std::function<void()> step) {
    out.set_requires_grad(true);
    out.grad();  // allocate now so closures can read it unconditionally
    tape.record(out, std::move(step));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul: (m×k)·(k×n) -> m×n, or (m×k)·(k) -> (m) for the affine/vector case.
// ---------------------------------------------------------------------------
template <typename Real>
Tensor<Real> matmul(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1))
        throw ShapeError("matmul: need 2-D lhs and 1-D/2-D rhs, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1);
    const std::size_t kb = b.dim(0);
    if (k != kb)
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));

    const bool vec = (b.rank() == 1);
    const std::size_t n = vec ? 1 : b.dim(1);
    Tensor<Real> out = Tensor<Real>::zeros(vec ? Shape{m} : Shape{m, n});
    {
        const auto& av = a.data();
        const auto& bv = b.data();
        auto& ov = out.data();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const Real aip = av[i * k + p];
                if (aip == Real(0)) continue;
                const Real* brow = bv.data() + p * n;
                Real* orow = ov.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
            }
        }
    }
    if (detail::want_grad(a, b)) {
        detail::mark_output(tape, out, [a, b, out, m, k, n]() {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                const auto& bv = b.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        Real s = 0;
                        const Real* brow = bv.data() + p * n;
                        const Real* grow = g.data() + i * n;
                        for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                        ga[i * k + p] += s;
                    }
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                const auto& av = a.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const Real* grow = g.data() + i * n;
                    for (std::size_t p = 0; p < k; ++p) {
                        const Real aip = av[i * k + p];
                        if (aip == Real(0)) continue;
                        Real* gbrow = gb.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise binary ops. Shapes must match exactly, or one side is a scalar
// (single element) broadcast over the other.
// ---------------------------------------------------------------------------
namespace detail {

enum class Binary { add, mul };

template <typename Real>
Tensor<Real> binary_op(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b, Binary op,
                       const char* name) {
    const bool a_scalar = a.size() == 1, b_scalar = b.size() == 1;
    if (a.shape() != b.shape() && !a_scalar && !b_scalar)
        throw ShapeError(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));

    const Tensor<Real>& big = (a_scalar && !b_scalar) ? b : a;
    Tensor<Real> out = Tensor<Real>::zeros(big.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    const std::size_t n = ov.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Real x = av[a_scalar ? 0 : i];
        const Real y = bv[b_scalar ? 0 : i];
        ov[i] = (op == Binary::add) ? x + y : x * y;
    }
    if (want_grad(a, b)) {
        mark_output(tape, out, [a, b, out, op, a_scalar, b_scalar, n]() {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < n; ++i) {
                    const Real w = (op == Binary::add) ? Real(1) : b.data()[b_scalar ? 0 : i];
                    ga[a_scalar ? 0 : i] += g[i] * w;
                }
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < n; ++i) {
                    const Real w = (op == Binary::add) ? Real(1) : a.data()[a_scalar ? 0 : i];
                    gb[b_scalar ? 0 : i] += g[i] * w;
                }
            }
        });
    }
    return out;
}

}  // namespace detail

template <typename Real>
Tensor<Real> add(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b) {
    return detail::binary_op(tape, a, b, detail::Binary::add, "add");
}

template <typename Real>
Tensor<Real> mul(Tape<Real>& tape, const Tensor<Real>& a, const Tensor<Real>& b) {
    return detail::binary_op(tape, a, b, detail::Binary::mul, "mul");
}

// ---------------------------------------------------------------------------
// Elementwise unary activations.
// ---------------------------------------------------------------------------
namespace detail {

template <typename Real>
Real stable_sigmoid(Real x) {
    if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
    const Real e = std::exp(x);
    return e / (Real(1) + e);
}

}  // namespace detail

template <typename Real>
Tensor<Real> sigmoid(Tape<Real>& tape, const Tensor<Real>& x) {
    Tensor<Real> out = Tensor<Real>::zeros(x.shape());
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = detail::stable_sigmoid(xv[i]);
    if (detail::want_grad(x)) {
        detail::mark_output(tape, out, [x, out]() {
            auto& gx = x.grad();
            const auto& g = out.grad();
            const auto& y = out.data();
            for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * y[i] * (Real(1) - y[i]);
        });
    }
    return out;
}

template <typename Real>
Tensor<Real> tanh(Tape<Real>& tape, const Tensor<Real>& x) {
    Tensor<Real> out = Tensor<Real>::zeros(x.shape());
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = std::tanh(xv[i]);
    if (detail::want_grad(x)) {
        detail::mark_output(tape, out, [x, out]() {
            auto& gx = x.grad();
            const auto& g = out.grad();
            const auto& y = out.data();
            for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * (Real(1) - y[i] * y[i]);
        });
    }
    return out;
}

template <typename Real>
Tensor<Real> relu(Tape<Real>& tape, const Tensor<Real>& x) {
    Tensor<Real> out = Tensor<Real>::zeros(x.shape());
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] > Real(0) ? xv[i] : Real(0);
    if (detail::want_grad(x)) {
        detail::mark_output(tape, out, [x, out]() {
            auto& gx = x.grad();
            const auto& g = out.grad();
            const auto& xv2 = x.data();
            for (std::size_t i = 0; i < xv2.size(); ++i)
                if (xv2[i] > Real(0)) gx[i] += g[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax over the last axis (1-D vector or rows of a 2-D matrix), computed
// with max-subtraction. Each slice sums to 1.
// ---------------------------------------------------------------------------
template <typename Real>
Tensor<Real> softmax(Tape<Real>& tape, const Tensor<Real>& x) {
    if (x.rank() != 1 && x.rank() != 2)
        throw ShapeError("softmax: need 1-D or 2-D input, got " + shape_str(x.shape()));
    const std::size_t n = x.dim(x.rank() - 1);
    if (n < 1) throw ShapeError("softmax: empty last axis");
    const std::size_t rows = x.size() / n;

    Tensor<Real> out = Tensor<Real>::zeros(x.shape());
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const Real* xi = xv.data() + r * n;
        Real* yi = ov.data() + r * n;
        Real mx = xi[0];
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, xi[i]);
        Real sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            yi[i] = std::exp(xi[i] - mx);
            sum += yi[i];
        }
        for (std::size_t i = 0; i < n; ++i) yi[i] /= sum;
    }
    if (detail::want_grad(x)) {
        detail::mark_output(tape, out, [x, out, rows, n]() {
            auto& gx = x.grad();
            const auto& g = out.grad();
            const auto& y = out.data();
            for (std::size_t r = 0; r < rows; ++r) {
                const Real* yi = y.data() + r * n;
                const Real* gi = g.data() + r * n;
                Real dot = 0;
                for (std::size_t i = 0; i < n; ++i) dot += gi[i] * yi[i];
                for (std::size_t i = 0; i < n; ++i) gx[r * n + i] += yi[i] * (gi[i] - dot);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// max_over_time: per-channel maximum over the first valid_len rows of an L×c
// matrix. Gradient routes to the argmax row; ties break to the lowest index.
// ---------------------------------------------------------------------------
template <typename Real>
Tensor<Real> max_over_time(Tape<Real>& tape, const Tensor<Real>& seq, std::size_t valid_len) {
    if (seq.rank() != 2)
        throw ShapeError("max_over_time: need 2-D input, got " + shape_str(seq.shape()));
    const std::size_t rows = seq.dim(0), c = seq.dim(1);
    if (valid_len < 1 || valid_len > rows)
        throw ShapeError("max_over_time: valid_len " + std::to_string(valid_len) +
                         " out of range for " + shape_str(seq.shape()));

    Tensor<Real> out = Tensor<Real>::zeros({c});
    std::vector<std::size_t> argmax(c, 0);
    const auto& sv = seq.data();
    auto& ov = out.data();
    for (std::size_t j = 0; j < c; ++j) {
        Real best = sv[j];
        std::size_t pos = 0;
        for (std::size_t r = 1; r < valid_len; ++r) {
            const Real v = sv[r * c + j];
            if (v > best) {
                best = v;
                pos = r;
            }
        }
        ov[j] = best;
        argmax[j] = pos;
    }
    if (detail::want_grad(seq)) {
        detail::mark_output(tape, out, [seq, out, argmax, c]() {
            auto& gs = seq.grad();
            const auto& g = out.grad();
            for (std::size_t j = 0; j < c; ++j) gs[argmax[j] * c + j] += g[j];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// conv1d: sliding dot-product of a w×d×c filter bank over the valid region of
// an L×d token matrix; output is (valid_len−w+1)×c.
// ---------------------------------------------------------------------------
template <typename Real>
Tensor<Real> conv1d(Tape<Real>& tape, const Tensor<Real>& seq, const Tensor<Real>& filters,
                    std::size_t valid_len) {
    if (seq.rank() != 2 || filters.rank() != 3)
        throw ShapeError("conv1d: need L×d sequence and w×d×c filters, got " +
                         shape_str(seq.shape()) + " and " + shape_str(filters.shape()));
    const std::size_t rows = seq.dim(0), d = seq.dim(1);
    const std::size_t w = filters.dim(0), fd = filters.dim(1), c = filters.dim(2);
    if (fd != d)
        throw ShapeError("conv1d: token dim mismatch: " + shape_str(seq.shape()) + " vs " +
                         shape_str(filters.shape()));
    if (valid_len > rows)
        throw ShapeError("conv1d: valid_len " + std::to_string(valid_len) + " exceeds rows of " +
                         shape_str(seq.shape()));
    if (valid_len < w)
        throw SequenceTooShort("conv1d: sequence of length " + std::to_string(valid_len) +
                               " is shorter than filter width " + std::to_string(w));

    const std::size_t out_rows = valid_len - w + 1;
    Tensor<Real> out = Tensor<Real>::zeros({out_rows, c});
    {
        const auto& sv = seq.data();
        const auto& fv = filters.data();
        auto& ov = out.data();
        for (std::size_t p = 0; p < out_rows; ++p) {
            Real* orow = ov.data() + p * c;
            for (std::size_t i = 0; i < w; ++i) {
                const Real* srow = sv.data() + (p + i) * d;
                const Real* fplane = fv.data() + i * d * c;
                for (std::size_t j = 0; j < d; ++j) {
                    const Real s = srow[j];
                    if (s == Real(0)) continue;
                    const Real* frow = fplane + j * c;
                    for (std::size_t ch = 0; ch < c; ++ch) orow[ch] += s * frow[ch];
                }
            }
        }
    }
    if (detail::want_grad(seq, filters)) {
        detail::mark_output(tape, out, [seq, filters, out, out_rows, w, d, c]() {
            const auto& g = out.grad();
            if (seq.requires_grad()) {
                auto& gs = seq.grad();
                const auto& fv = filters.data();
                for (std::size_t p = 0; p < out_rows; ++p)
                    for (std::size_t i = 0; i < w; ++i)
                        for (std::size_t j = 0; j < d; ++j) {
                            Real s = 0;
                            const Real* frow = fv.data() + (i * d + j) * c;
                            const Real* grow = g.data() + p * c;
                            for (std::size_t ch = 0; ch < c; ++ch) s += grow[ch] * frow[ch];
                            gs[(p + i) * d + j] += s;
                        }
            }
            if (filters.requires_grad()) {
                auto& gf = filters.grad();
                const auto& sv = seq.data();
                for (std::size_t p = 0; p < out_rows; ++p)
                    for (std::size_t i = 0; i < w; ++i) {
                        const Real* srow = sv.data() + (p + i) * d;
                        const Real* grow = g.data() + p * c;
                        for (std::size_t j = 0; j < d; ++j) {
                            const Real s = srow[j];
                            if (s == Real(0)) continue;
                            Real* frow = gf.data() + (i * d + j) * c;
                            for (std::size_t ch = 0; ch < c; ++ch) frow[ch] += s * grow[ch];
                        }
                    }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structural ops: concatenation of vectors, row/element extraction, sum.
// ---------------------------------------------------------------------------
template <typename Real>
Tensor<Real> concat(Tape<Real>& tape, const std::vector<Tensor<Real>>& parts) {
    if (parts.empty()) throw UsageError("concat: no inputs");
    std::size_t total = 0;
    bool any_grad = false;
    for (const auto& p : parts) {
        if (p.rank() != 1)
            throw ShapeError("concat: need 1-D parts, got " + shape_str(p.shape()));
        total += p.size();
        any_grad = any_grad || p.requires_grad();
    }
    Tensor<Real> out = Tensor<Real>::zeros({total});
    auto& ov = out.data();
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), ov.begin() + off);
        off += p.size();
    }
    if (grad_enabled() && any_grad) {
        detail::mark_output(tape, out, [parts, out]() {
            const auto& g = out.grad();
            std::size_t o = 0;
            for (const auto& p : parts) {
                if (p.requires_grad()) {
                    auto& gp = p.grad();
                    for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g[o + i];
                }
                o += p.size();
            }
        });
    }
    return out;
}

// Row r of a 2-D tensor as a 1-D vector.
template <typename Real>
Tensor<Real> take_row(Tape<Real>& tape, const Tensor<Real>& m, std::size_t r) {
    if (m.rank() != 2) throw ShapeError("take_row: need 2-D input, got " + shape_str(m.shape()));
    const std::size_t rows = m.dim(0), cols = m.dim(1);
    if (r >= rows)
        throw ShapeError("take_row: row " + std::to_string(r) + " out of range for " +
                         shape_str(m.shape()));
    Tensor<Real> out = Tensor<Real>::zeros({cols});
    std::copy(m.data().begin() + r * cols, m.data().begin() + (r + 1) * cols, out.data().begin());
    if (detail::want_grad(m)) {
        detail::mark_output(tape, out, [m, out, r, cols]() {
            auto& gm = m.grad();
            const auto& g = out.grad();
            for (std::size_t j = 0; j < cols; ++j) gm[r * cols + j] += g[j];
        });
    }
    return out;
}

// Single element by flat index, as a scalar tensor.
template <typename Real>
Tensor<Real> take(Tape<Real>& tape, const Tensor<Real>& x, std::size_t index) {
    if (index >= x.size())
        throw ShapeError("take: index " + std::to_string(index) + " out of range for " +
                         shape_str(x.shape()));
    Tensor<Real> out = Tensor<Real>::scalar(x.data()[index]);
    if (detail::want_grad(x)) {
        detail::mark_output(tape, out, [x, out, index]() { x.grad()[index] += out.grad()[0]; });
    }
    return out;
}

template <typename Real>
Tensor<Real> sum(Tape<Real>& tape, const Tensor<Real>& x) {
    Real s = std::accumulate(x.data().begin(), x.data().end(), Real(0));
    Tensor<Real> out = Tensor<Real>::scalar(s);
    if (detail::want_grad(x)) {
        detail::mark_output(tape, out, [x, out]() {
            auto& gx = x.grad();
            const Real g = out.grad()[0];
            for (auto& v : gx) v += g;
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// backward: seed the scalar loss with gradient 1 and replay the tape in
// reverse. The tape is cleared afterwards unless retain_tape is set (a
// retained tape can be replayed again; gradients accumulate additively).
// ---------------------------------------------------------------------------
template <typename Real>
void backward(Tape<Real>& tape, const Tensor<Real>& loss, bool retain_tape = false) {
    if (loss.size() != 1)
        throw UsageError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    tape.zero_intermediate_grads();
    loss.grad()[0] += Real(1);
    tape.replay_backward();
    if (!retain_tape) tape.clear();
}

// ---------------------------------------------------------------------------
// finite_diff_check: compare tape gradients of a scalar-valued function of
// the given parameters against central finite differences. Returns the worst
// relative error over all coordinates, with denominators floored at 1e-12.
// Intended for Real = double.
// ---------------------------------------------------------------------------
template <typename Real, typename LossFn>
Real finite_diff_check(LossFn&& make_loss, const std::vector<Tensor<Real>>& params, Real h) {
    for (const auto& p : params) p.zero_grad();
    std::vector<std::vector<Real>> analytic;
    {
        Tape<Real> tape;
        Tensor<Real> loss = make_loss(tape);
        backward(tape, loss);
    }
    analytic.reserve(params.size());
    for (const auto& p : params) {
        analytic.push_back(p.has_grad() ? p.grad() : std::vector<Real>(p.size(), Real(0)));
        p.zero_grad();
    }

    // Numeric passes do not need the graph.
    std::vector<bool> saved;
    saved.reserve(params.size());
    for (const auto& p : params) {
        saved.push_back(p.requires_grad());
        p.set_requires_grad(false);
    }

    Real worst = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].data();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const Real v = vals[i];
            Real lp, lm;
            {
                Tape<Real> t;
                vals[i] = v + h;
                lp = make_loss(t).item();
            }
            {
                Tape<Real> t;
                vals[i] = v - h;
                lm = make_loss(t).item();
            }
            vals[i] = v;
            const Real numeric = (lp - lm) / (Real(2) * h);
            const Real analytic_g = analytic[pi][i];
            const Real denom =
                std::max({std::abs(numeric), std::abs(analytic_g), Real(1e-12)});
            worst = std::max(worst, std::abs(numeric - analytic_g) / denom);
        }
    }
    for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi].set_requires_grad(saved[pi]);
    return worst;
}

}  // namespace fudfend
