#pragma once

// The fuzzy membership function: a GRU + MLP + softmax network over the nine
// news domains. It is pretrained as a domain classifier, then frozen; its
// output vector g (a point on the 9-simplex) is the fuzzy domain label the
// detector's gate consumes.

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "fudfend/config.hpp"
#include "fudfend/corpus.hpp"
#include "fudfend/domains.hpp"
#include "fudfend/layers.hpp"
#include "fudfend/metrics.hpp"
#include "fudfend/optim.hpp"

namespace fudfend {

template <typename Real>
struct FuzzyDomainLabel {
    std::array<Real, kNumDomains> grades{};
};

// Index of the largest grade; ties break to the lowest index.
template <typename Real>
Domain argmax_domain(const FuzzyDomainLabel<Real>& g) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kNumDomains; ++i)
        if (g.grades[i] > g.grades[best]) best = i;
    return Domain(int(best));
}

template <typename Real>
struct MembershipModel {
    GruParams<Real> gru;
    MlpParams<Real> head;  // hidden -> head_hidden -> 9
    bool frozen = false;

    std::vector<Tensor<Real>> parameters() const {
        auto out = gru.parameters();
        for (auto& p : head.parameters()) out.push_back(p);
        return out;
    }

    // Marks every parameter grad-free; training code treats frozen models as
    // read-only constants.
    void freeze() {
        frozen = true;
        for (auto& p : parameters()) p.set_requires_grad(false);
    }

    MembershipModel clone() const {
        MembershipModel c;
        c.gru = gru.clone();
        c.head = head.clone();
        c.frozen = frozen;
        if (frozen)
            for (auto& p : c.parameters()) p.set_requires_grad(false);
        return c;
    }
};

template <typename Real>
MembershipModel<Real> make_membership(std::size_t embed_dim, std::size_t hidden_dim,
                                      std::size_t head_hidden, std::mt19937_64& rng) {
    MembershipModel<Real> m;
    m.gru = make_gru<Real>(embed_dim, hidden_dim, rng);
    m.head = make_mlp<Real>({hidden_dim, head_hidden, kNumDomains}, rng);
    return m;
}

// Graph-building forward pass: g = softmax(MLP(GRU(W))).
template <typename Real>
Tensor<Real> membership_forward(Tape<Real>& tape, const EmbeddingSequence& seq,
                                const MembershipModel<Real>& m) {
    if (seq.valid_len == 0) throw InputError("membership: empty sequence");
    auto mat = to_tensor<Real>(seq);
    auto h = gru_forward(tape, mat, seq.valid_len, m.gru, GruPool::mean_states);
    return softmax(tape, mlp_forward(tape, h, m.head));
}

template <typename Real>
FuzzyDomainLabel<Real> membership_infer(const EmbeddingSequence& seq,
                                        const MembershipModel<Real>& m) {
    NoGradGuard guard;
    Tape<Real> tape;
    auto g = membership_forward(tape, seq, m);
    FuzzyDomainLabel<Real> label;
    for (std::size_t i = 0; i < kNumDomains; ++i) label.grades[i] = g.data()[i];
    return label;
}

struct EpochMetrics {
    std::size_t epoch = 0;       // 1-based
    double train_loss = 0.0;     // summed loss over the epoch
    double val_f1 = 0.0;
    double wall_ms = 0.0;
};

template <typename Real>
struct PretrainResult {
    MembershipModel<Real> model;  // frozen, from the best-F1 epoch
    std::vector<EpochMetrics> epochs;
    std::size_t best_epoch = 0;  // 1-based
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

// Pretrain on a 70/30 split with summed cross-entropy and Adam; evaluate
// macro-F1 on the held-out split each epoch and return the best epoch's
// parameters, frozen.
template <typename Real>
PretrainResult<Real> membership_pretrain(const Corpus& corpus, const TrainConfig& cfg,
                                         std::uint64_t seed) {
    cfg.validate();
    std::string missing;
    for (const auto& rec : corpus.records) {
        if (!rec.domain) missing += (missing.empty() ? "" : ", ") + rec.id;
        if (!rec.embeddings)
            throw InputError("membership_pretrain: record " + rec.id + " has no embeddings");
    }
    if (!missing.empty())
        throw InputError("membership_pretrain: records missing domain labels: " + missing);

    auto [train, val] = split(corpus, cfg.train_frac, seed);

    std::mt19937_64 rng(detail::mix_seed(seed, 0xF00D));
    auto model = make_membership<Real>(corpus.dim, cfg.hidden_dim, cfg.head_hidden, rng);
    Adam<Real> opt(model.parameters(), AdamConfig<Real>{Real(cfg.lr)});

    auto evaluate = [&](const Corpus& data) {
        NoGradGuard guard;
        std::vector<int> preds, golds;
        preds.reserve(data.size());
        for (const auto& rec : data.records) {
            Tape<Real> tape;
            auto g = membership_forward(tape, *rec.embeddings, model);
            std::size_t best = 0;
            for (std::size_t i = 1; i < kNumDomains; ++i)
                if (g.data()[i] > g.data()[best]) best = i;
            preds.push_back(int(best));
            golds.push_back(int(*rec.domain));
        }
        return macro_f1(preds, golds, kNumDomains);
    };

    PretrainResult<Real> result;
    double best_f1 = -1.0;
    for (std::size_t epoch = 1; epoch <= cfg.membership_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double epoch_loss = 0.0;
        for (const auto& batch : batches(train, cfg.membership_batch,
                                         detail::mix_seed(seed, epoch))) {
            Tape<Real> tape;
            std::vector<Tensor<Real>> probs;
            std::vector<int> labels;
            probs.reserve(batch.indices.size());
            for (std::size_t i = 0; i < batch.indices.size(); ++i) {
                probs.push_back(membership_forward(tape, batch.sequences[i], model));
                labels.push_back(int(*train.records[batch.indices[i]].domain));
            }
            auto loss = ce_loss(tape, probs, labels);
            epoch_loss += double(loss.item());
            backward(tape, loss);
            opt.step();
        }
        const double f1 = evaluate(val);
        const auto t1 = std::chrono::steady_clock::now();
        result.epochs.push_back(
            {epoch, epoch_loss, f1,
             std::chrono::duration<double, std::milli>(t1 - t0).count()});
        if (f1 > best_f1) {
            best_f1 = f1;
            result.best_epoch = epoch;
            result.model = model.clone();
        }
    }
    result.model.freeze();
    return result;
}

}  // namespace fudfend
