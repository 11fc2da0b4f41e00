#pragma once

// End-to-end finite-difference verification of the whole detector graph on a
// tiny instance, in high precision. Every parameter — including the
// membership function's, which ordinary training freezes — gets its tape
// gradient compared against central differences.

#include <cstdint>
#include <vector>

#include "fudfend/detector.hpp"

namespace fudfend {

template <typename Real>
struct GradcheckReport {
    Real worst_rel_err = 0;
    std::size_t param_count = 0;
    std::size_t coord_count = 0;
};

inline TrainConfig gradcheck_config() {
    TrainConfig cfg;
    cfg.embed_dim = 4;
    cfg.hidden_dim = 3;
    cfg.expert_count = 2;
    cfg.expert_dim = 3;
    cfg.widths = {1, 2};
    cfg.channels = 2;
    cfg.head_hidden = 4;
    cfg.gate_hidden = 4;
    cfg.classifier_hidden = 4;
    return cfg;
}

// Loss: summed BCE of the fuzzy-mode detector over two 2-token records with
// opposite labels. Gradients flow through classifier, aggregation, gate,
// experts, and the membership GRU.
template <typename Real>
GradcheckReport<Real> end_to_end_gradcheck(std::uint64_t seed, Real h,
                                           const TrainConfig& cfg = gradcheck_config()) {
    std::mt19937_64 rng(seed);
    auto membership =
        make_membership<Real>(cfg.embed_dim, cfg.hidden_dim, cfg.head_hidden, rng);
    membership.freeze();  // detector construction expects a frozen model
    auto model = make_detector<Real>(cfg, GateMode::fuzzy, membership, rng);
    // re-enable gradients so the check covers the membership path too
    for (auto& p : model.membership.parameters()) p.set_requires_grad(true);

    std::vector<EmbeddingSequence> seqs = {
        toy_embed("alpha beta", cfg.embed_dim),
        toy_embed("gamma delta", cfg.embed_dim),
    };
    const std::vector<int> labels = {1, 0};

    std::vector<Tensor<Real>> params = model.trainable_parameters();
    for (auto& p : model.membership.parameters()) params.push_back(p);

    GradcheckReport<Real> report;
    report.param_count = params.size();
    for (const auto& p : params) report.coord_count += p.size();

    report.worst_rel_err = finite_diff_check(
        [&](Tape<Real>& tape) {
            std::vector<Tensor<Real>> preds;
            for (const auto& seq : seqs) {
                auto gi = detail::make_gate_input(tape, seq, model, std::nullopt);
                preds.push_back(detail::detector_forward(tape, seq, model, gi).y_hat);
            }
            return bce_loss(tape, preds, labels);
        },
        params, h);
    return report;
}

}  // namespace fudfend
