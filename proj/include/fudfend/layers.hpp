#pragma once

// The three parameterized building blocks of the detector: a GRU encoder, a
// Kim-style TextCNN with max-over-time pooling, and a plain MLP. All layers
// are pure functions of (input, params) over the tape engine.

#include <cstddef>
#include <random>
#include <vector>

#include "fudfend/tensor.hpp"

namespace fudfend {

// Variance-preserving uniform init: U(-sqrt(6/(fan_in+fan_out)), +...).
template <typename Real>
Tensor<Real> init_weight(Shape shape, std::size_t fan_in, std::size_t fan_out,
                         std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<Real> v(shape_numel(shape));
    for (auto& x : v) x = Real(dist(rng));
    return Tensor<Real>::from_data(std::move(shape), std::move(v), /*requires_grad=*/true);
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------
template <typename Real>
struct GruParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    // Each gate consumes the concatenation [x_t, h_{t-1}] of size d+H.
    Tensor<Real> w_update, b_update;
    Tensor<Real> w_reset, b_reset;
    Tensor<Real> w_cand, b_cand;

    std::vector<Tensor<Real>> parameters() const {
        return {w_update, b_update, w_reset, b_reset, w_cand, b_cand};
    }

    GruParams clone() const {
        GruParams c;
        c.input_dim = input_dim;
        c.hidden_dim = hidden_dim;
        c.w_update = w_update.clone();
        c.b_update = b_update.clone();
        c.w_reset = w_reset.clone();
        c.b_reset = b_reset.clone();
        c.w_cand = w_cand.clone();
        c.b_cand = b_cand.clone();
        return c;
    }
};

template <typename Real>
GruParams<Real> make_gru(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng) {
    GruParams<Real> p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    const std::size_t in = input_dim + hidden_dim;
    p.w_update = init_weight<Real>({hidden_dim, in}, in, hidden_dim, rng);
    p.b_update = Tensor<Real>::zeros({hidden_dim}, true);
    p.w_reset = init_weight<Real>({hidden_dim, in}, in, hidden_dim, rng);
    p.b_reset = Tensor<Real>::zeros({hidden_dim}, true);
    p.w_cand = init_weight<Real>({hidden_dim, in}, in, hidden_dim, rng);
    p.b_cand = Tensor<Real>::zeros({hidden_dim}, true);
    return p;
}

// How the recurrence is read out: the last hidden state, or the mean of the
// hidden states over the valid region. The mean readout gives every timestep
// a direct gradient path and is what the membership function uses.
enum class GruPool { final_state, mean_states };

// Standard GRU recurrence over the first valid_len rows of an L×d matrix,
// h0 = 0. Rows beyond valid_len are never read, so trailing padding cannot
// change the result.
template <typename Real>
Tensor<Real> gru_forward(Tape<Real>& tape, const Tensor<Real>& seq, std::size_t valid_len,
                         const GruParams<Real>& p, GruPool pool = GruPool::final_state) {
    if (seq.rank() != 2 || seq.dim(1) != p.input_dim)
        throw ShapeError("gru_forward: expected L x " + std::to_string(p.input_dim) +
                         " sequence, got " + shape_str(seq.shape()));
    if (valid_len < 1 || valid_len > seq.dim(0))
        throw InputError("gru_forward: valid_len " + std::to_string(valid_len) +
                         " out of range for " + shape_str(seq.shape()));

    auto one = Tensor<Real>::scalar(Real(1));
    auto minus_one = Tensor<Real>::scalar(Real(-1));
    Tensor<Real> h = Tensor<Real>::zeros({p.hidden_dim});
    Tensor<Real> acc;
    for (std::size_t t = 0; t < valid_len; ++t) {
        auto x = take_row(tape, seq, t);
        auto xh = concat(tape, {x, h});
        auto z = sigmoid(tape, add(tape, matmul(tape, p.w_update, xh), p.b_update));
        auto r = sigmoid(tape, add(tape, matmul(tape, p.w_reset, xh), p.b_reset));
        auto xrh = concat(tape, {x, mul(tape, r, h)});
        auto n = tanh(tape, add(tape, matmul(tape, p.w_cand, xrh), p.b_cand));
        // h <- (1 - z) * n + z * h
        auto one_minus_z = add(tape, mul(tape, z, minus_one), one);
        h = add(tape, mul(tape, one_minus_z, n), mul(tape, z, h));
        if (pool == GruPool::mean_states) acc = acc.defined() ? add(tape, acc, h) : h;
    }
    if (pool == GruPool::mean_states)
        return mul(tape, acc, Tensor<Real>::scalar(Real(1) / Real(valid_len)));
    return h;
}

// ---------------------------------------------------------------------------
// MLP: affine -> relu chains, final layer affine only.
// ---------------------------------------------------------------------------
template <typename Real>
struct MlpParams {
    std::vector<Tensor<Real>> weights;  // layer i: {out_i, in_i}
    std::vector<Tensor<Real>> biases;   // layer i: {out_i}

    std::size_t input_dim() const { return weights.front().dim(1); }
    std::size_t output_dim() const { return weights.back().dim(0); }

    std::vector<Tensor<Real>> parameters() const {
        std::vector<Tensor<Real>> out;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            out.push_back(weights[i]);
            out.push_back(biases[i]);
        }
        return out;
    }

    MlpParams clone() const {
        MlpParams c;
        for (const auto& w : weights) c.weights.push_back(w.clone());
        for (const auto& b : biases) c.biases.push_back(b.clone());
        return c;
    }
};

// dims = {in, hidden..., out}; at least one layer.
template <typename Real>
MlpParams<Real> make_mlp(const std::vector<std::size_t>& dims, std::mt19937_64& rng) {
    if (dims.size() < 2) throw UsageError("make_mlp: need at least input and output dims");
    MlpParams<Real> p;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        p.weights.push_back(init_weight<Real>({dims[i + 1], dims[i]}, dims[i], dims[i + 1], rng));
        p.biases.push_back(Tensor<Real>::zeros({dims[i + 1]}, true));
    }
    return p;
}

template <typename Real>
Tensor<Real> mlp_forward(Tape<Real>& tape, const Tensor<Real>& x, const MlpParams<Real>& p) {
    if (x.rank() != 1 || x.dim(0) != p.input_dim())
        throw ShapeError("mlp_forward: expected vector of dim " +
                         std::to_string(p.input_dim()) + ", got " + shape_str(x.shape()));
    Tensor<Real> h = x;
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
        h = add(tape, matmul(tape, p.weights[i], h), p.biases[i]);
        if (i + 1 < p.weights.size()) h = relu(tape, h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// TextCNN: per width w, conv1d -> relu -> max_over_time; pooled channels are
// concatenated and affine-projected to expert_dim.
// ---------------------------------------------------------------------------
template <typename Real>
struct TextCnnParams {
    std::size_t input_dim = 0;
    std::size_t expert_dim = 0;
    std::size_t channels = 0;             // per width
    std::vector<std::size_t> widths;      // strictly increasing, all >= 1
    std::vector<Tensor<Real>> filters;    // per width: {w, d, channels}
    Tensor<Real> proj_w;                  // {expert_dim, widths.size()*channels}
    Tensor<Real> proj_b;                  // {expert_dim}

    std::size_t max_width() const { return widths.back(); }

    std::vector<Tensor<Real>> parameters() const {
        std::vector<Tensor<Real>> out(filters.begin(), filters.end());
        out.push_back(proj_w);
        out.push_back(proj_b);
        return out;
    }

    TextCnnParams clone() const {
        TextCnnParams c = *this;
        c.filters.clear();
        for (const auto& f : filters) c.filters.push_back(f.clone());
        c.proj_w = proj_w.clone();
        c.proj_b = proj_b.clone();
        return c;
    }
};

template <typename Real>
TextCnnParams<Real> make_textcnn(std::size_t input_dim, const std::vector<std::size_t>& widths,
                                 std::size_t channels, std::size_t expert_dim,
                                 std::mt19937_64& rng) {
    if (widths.empty()) throw UsageError("make_textcnn: need at least one filter width");
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (widths[i] < 1 || (i > 0 && widths[i] <= widths[i - 1]))
            throw UsageError("make_textcnn: widths must be strictly increasing and >= 1");
    }
    TextCnnParams<Real> p;
    p.input_dim = input_dim;
    p.expert_dim = expert_dim;
    p.channels = channels;
    p.widths = widths;
    for (auto w : widths)
        p.filters.push_back(init_weight<Real>({w, input_dim, channels}, w * input_dim, channels, rng));
    const std::size_t pooled = widths.size() * channels;
    p.proj_w = init_weight<Real>({expert_dim, pooled}, pooled, expert_dim, rng);
    p.proj_b = Tensor<Real>::zeros({expert_dim}, true);
    return p;
}

template <typename Real>
Tensor<Real> textcnn_forward(Tape<Real>& tape, const Tensor<Real>& seq, std::size_t valid_len,
                             const TextCnnParams<Real>& p) {
    std::vector<Tensor<Real>> pooled;
    pooled.reserve(p.widths.size());
    for (std::size_t i = 0; i < p.widths.size(); ++i) {
        auto conv = conv1d(tape, seq, p.filters[i], valid_len);
        auto act = relu(tape, conv);
        pooled.push_back(max_over_time(tape, act, act.dim(0)));
    }
    auto cat = concat(tape, pooled);
    return add(tape, matmul(tape, p.proj_w, cat), p.proj_b);
}

}  // namespace fudfend
