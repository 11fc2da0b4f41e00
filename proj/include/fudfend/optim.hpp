#pragma once

// Training losses (summed binary cross-entropy for the detector, categorical
// cross-entropy for membership pretraining) and the Adam optimizer with bias
// correction.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fudfend/tensor.hpp"

namespace fudfend {

// Probabilities are clamped away from 0/1 before logs; with 32-bit sigmoid
// saturation this keeps the loss finite.
inline constexpr double kProbClamp = 1e-7;

// L = -sum_i ( y_i log yhat_i + (1 - y_i) log(1 - yhat_i) ), summed over the
// batch (not averaged). Each prediction is a scalar tensor in (0,1).
template <typename Real>
Tensor<Real> bce_loss(Tape<Real>& tape, const std::vector<Tensor<Real>>& preds,
                      const std::vector<int>& labels) {
    if (preds.empty() || preds.size() != labels.size())
        throw InputError("bce_loss: need equal, nonzero prediction/label counts (" +
                         std::to_string(preds.size()) + " vs " + std::to_string(labels.size()) +
                         ")");
    const Real lo = Real(kProbClamp), hi = Real(1) - Real(kProbClamp);

    Real total = 0;
    std::vector<Real> clamped(preds.size());
    bool any_grad = false;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw InputError("bce_loss: label at index " + std::to_string(i) +
                             " is not in {0,1}");
        Real y = preds[i].item();
        Real c = std::min(hi, std::max(lo, y));
        clamped[i] = c;
        total -= labels[i] ? std::log(c) : std::log(Real(1) - c);
        any_grad = any_grad || preds[i].requires_grad();
    }
    Tensor<Real> out = Tensor<Real>::scalar(total);
    if (grad_enabled() && any_grad) {
        detail::mark_output(tape, out, [preds, labels, clamped, out, lo, hi]() {
            const Real g = out.grad()[0];
            for (std::size_t i = 0; i < preds.size(); ++i) {
                if (!preds[i].requires_grad()) continue;
                const Real y = preds[i].data()[0];
                if (y <= lo || y >= hi) continue;  // clamp is flat outside
                const Real c = clamped[i];
                const Real d = labels[i] ? -Real(1) / c : Real(1) / (Real(1) - c);
                preds[i].grad()[0] += g * d;
            }
        });
    }
    return out;
}

// L = -sum_i log p_i[label_i] over rows of a probability simplex, with the
// same clamp before the log.
template <typename Real>
Tensor<Real> ce_loss(Tape<Real>& tape, const std::vector<Tensor<Real>>& probs,
                     const std::vector<int>& labels) {
    if (probs.empty() || probs.size() != labels.size())
        throw InputError("ce_loss: need equal, nonzero row/label counts (" +
                         std::to_string(probs.size()) + " vs " + std::to_string(labels.size()) +
                         ")");
    const Real lo = Real(kProbClamp);

    Real total = 0;
    bool any_grad = false;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto& row = probs[i];
        if (row.rank() != 1)
            throw InputError("ce_loss: row " + std::to_string(i) + " is not a vector");
        if (labels[i] < 0 || std::size_t(labels[i]) >= row.size())
            throw InputError("ce_loss: label " + std::to_string(labels[i]) +
                             " out of range at index " + std::to_string(i));
        Real s = 0;
        for (Real v : row.data()) s += v;
        if (std::abs(s - Real(1)) > Real(1e-3))
            throw InputError("ce_loss: row " + std::to_string(i) +
                             " is not a probability simplex (sum " + std::to_string(double(s)) +
                             ")");
        total -= std::log(std::max(lo, row.data()[std::size_t(labels[i])]));
        any_grad = any_grad || row.requires_grad();
    }
    Tensor<Real> out = Tensor<Real>::scalar(total);
    if (grad_enabled() && any_grad) {
        detail::mark_output(tape, out, [probs, labels, out, lo]() {
            const Real g = out.grad()[0];
            for (std::size_t i = 0; i < probs.size(); ++i) {
                if (!probs[i].requires_grad()) continue;
                const std::size_t k = std::size_t(labels[i]);
                const Real p = probs[i].data()[k];
                if (p <= lo) continue;
                probs[i].grad()[k] += g * (-Real(1) / p);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------
template <typename Real>
struct AdamConfig {
    Real lr = Real(5e-4);
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real eps = Real(1e-8);
};

// Owns first/second-moment accumulators for a fixed parameter list. step()
// applies one bias-corrected update and zeroes the gradients afterwards.
template <typename Real>
class Adam {
public:
    explicit Adam(std::vector<Tensor<Real>> params, AdamConfig<Real> cfg = {})
        : params_(std::move(params)), cfg_(cfg) {
        m_.reserve(params_.size());
        u_.reserve(params_.size());
        for (const auto& p : params_) {
            m_.emplace_back(p.size(), Real(0));
            u_.emplace_back(p.size(), Real(0));
        }
    }

    std::uint64_t steps() const { return t_; }
    const AdamConfig<Real>& config() const { return cfg_; }

    void step() {
        for (std::size_t pi = 0; pi < params_.size(); ++pi)
            if (!params_[pi].has_grad())
                throw UsageError("adam_step: parameter " + std::to_string(pi) +
                                 " has no gradient; run backward first");
        ++t_;
        const Real bc1 = Real(1) - std::pow(cfg_.beta1, Real(t_));
        const Real bc2 = Real(1) - std::pow(cfg_.beta2, Real(t_));
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            auto& vals = params_[pi].data();
            auto& grads = params_[pi].grad();
            auto& m = m_[pi];
            auto& u = u_[pi];
            for (std::size_t i = 0; i < vals.size(); ++i) {
                const Real g = grads[i];
                m[i] = cfg_.beta1 * m[i] + (Real(1) - cfg_.beta1) * g;
                u[i] = cfg_.beta2 * u[i] + (Real(1) - cfg_.beta2) * g * g;
                const Real mhat = m[i] / bc1;
                const Real uhat = u[i] / bc2;
                vals[i] -= cfg_.lr * mhat / (std::sqrt(uhat) + cfg_.eps);
            }
            params_[pi].zero_grad();
        }
    }

private:
    std::vector<Tensor<Real>> params_;
    std::vector<std::vector<Real>> m_, u_;
    AdamConfig<Real> cfg_;
    std::uint64_t t_ = 0;
};

}  // namespace fudfend
