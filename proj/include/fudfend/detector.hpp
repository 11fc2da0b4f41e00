#pragma once

// The detector pipeline: a bank of TextCNN experts, a gate that turns the
// fuzzy domain label into expert weights, a convex aggregation of expert
// features, and a sigmoid classifier head. Three gate modes:
//   fuzzy            gate input is the frozen membership function's output
//   one_hot_baseline gate input is a learned row of a 9x9 domain table,
//                    selected by the record's single domain label
//   uniform          ablation, fixed alpha = 1/T, no gate network

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fudfend/config.hpp"
#include "fudfend/corpus.hpp"
#include "fudfend/membership.hpp"

namespace fudfend {

template <typename Real>
struct GateWeights {
    Tensor<Real> alpha;  // {T}, nonnegative, sums to 1
};

template <typename Real>
struct DetectorModel {
    GateMode mode = GateMode::fuzzy;
    std::size_t expert_count = 0;  // T
    std::vector<TextCnnParams<Real>> experts;
    MlpParams<Real> gate;            // 9 -> gate_hidden -> T
    MlpParams<Real> classifier;      // expert_dim -> classifier_hidden -> 1
    Tensor<Real> domain_embedding;   // {9, 9}; defined in one_hot_baseline mode only
    MembershipModel<Real> membership;  // frozen; shared handles, read-only

    std::size_t max_width() const { return experts.front().max_width(); }

    // Parameters updated during detector training. The membership function is
    // never included; the gate only exists outside uniform mode.
    std::vector<Tensor<Real>> trainable_parameters() const {
        std::vector<Tensor<Real>> out;
        for (const auto& e : experts)
            for (auto& p : e.parameters()) out.push_back(p);
        if (mode != GateMode::uniform)
            for (auto& p : gate.parameters()) out.push_back(p);
        for (auto& p : classifier.parameters()) out.push_back(p);
        if (mode == GateMode::one_hot_baseline) out.push_back(domain_embedding);
        return out;
    }

    DetectorModel clone() const {
        DetectorModel c;
        c.mode = mode;
        c.expert_count = expert_count;
        for (const auto& e : experts) c.experts.push_back(e.clone());
        c.gate = gate.clone();
        c.classifier = classifier.clone();
        if (domain_embedding.defined()) c.domain_embedding = domain_embedding.clone();
        c.membership = membership;  // frozen, shared
        return c;
    }
};

template <typename Real>
DetectorModel<Real> make_detector(const TrainConfig& cfg, GateMode mode,
                                  const MembershipModel<Real>& membership,
                                  std::mt19937_64& rng) {
    if (!membership.frozen)
        throw UsageError("make_detector: membership function must be frozen first");
    DetectorModel<Real> m;
    m.mode = mode;
    m.expert_count = cfg.expert_count;
    for (std::size_t i = 0; i < cfg.expert_count; ++i)
        m.experts.push_back(
            make_textcnn<Real>(cfg.embed_dim, cfg.widths, cfg.channels, cfg.expert_dim, rng));
    m.gate = make_mlp<Real>({kNumDomains, cfg.gate_hidden, cfg.expert_count}, rng);
    m.classifier = make_mlp<Real>({cfg.expert_dim, cfg.classifier_hidden, 1}, rng);
    if (mode == GateMode::one_hot_baseline)
        m.domain_embedding =
            init_weight<Real>({kNumDomains, kNumDomains}, kNumDomains, kNumDomains, rng);
    m.membership = membership;
    return m;
}

// Zero-pad a sequence whose valid region is shorter than the widest filter;
// the pad rows count as valid so conv windows exist (mask extended).
inline EmbeddingSequence ensure_min_len(const EmbeddingSequence& seq, std::size_t min_len) {
    if (seq.valid_len >= min_len) return seq;
    EmbeddingSequence padded;
    padded.dim = seq.dim;
    padded.valid_len = min_len;
    padded.data.assign(min_len * seq.dim, 0.0f);
    std::copy(seq.data.begin(), seq.data.begin() + std::ptrdiff_t(seq.valid_len * seq.dim),
              padded.data.begin());
    return padded;
}

// r_i = TextCNN_i(W) for every expert.
template <typename Real>
std::vector<Tensor<Real>> expert_forward_all(Tape<Real>& tape, const Tensor<Real>& seq,
                                             std::size_t valid_len,
                                             const DetectorModel<Real>& model) {
    std::vector<Tensor<Real>> out;
    out.reserve(model.experts.size());
    for (const auto& e : model.experts)
        out.push_back(textcnn_forward(tape, seq, valid_len, e));
    return out;
}

// alpha = softmax(MLP(gate_input)); uniform mode returns the constant 1/T.
template <typename Real>
GateWeights<Real> gate_weights(Tape<Real>& tape, const Tensor<Real>& gate_input,
                               const DetectorModel<Real>& model) {
    if (model.mode == GateMode::uniform) {
        auto alpha = Tensor<Real>::zeros({model.expert_count});
        for (auto& v : alpha.data()) v = Real(1) / Real(model.expert_count);
        return {alpha};
    }
    if (gate_input.rank() != 1 || gate_input.dim(0) != kNumDomains)
        throw ShapeError("gate_weights: expected a 9-dim gate input, got " +
                         shape_str(gate_input.shape()));
    return {softmax(tape, mlp_forward(tape, gate_input, model.gate))};
}

// v = sum_i alpha_i r_i
template <typename Real>
Tensor<Real> aggregate(Tape<Real>& tape, const GateWeights<Real>& weights,
                       const std::vector<Tensor<Real>>& expert_outputs) {
    if (expert_outputs.empty() || weights.alpha.size() != expert_outputs.size())
        throw UsageError("aggregate: need one weight per expert (" +
                         std::to_string(weights.alpha.size()) + " weights, " +
                         std::to_string(expert_outputs.size()) + " experts)");
    Tensor<Real> v;
    for (std::size_t i = 0; i < expert_outputs.size(); ++i) {
        auto term = mul(tape, expert_outputs[i], take(tape, weights.alpha, i));
        v = (i == 0) ? term : add(tape, v, term);
    }
    return v;
}

namespace detail {

// Full graph-building forward pass. The gate input is supplied by the caller:
// the membership output (fuzzy), a domain-table row (baseline), or nothing
// (uniform). Returns yhat as a scalar graph tensor plus diagnostics handles.
template <typename Real>
struct ForwardTrace {
    Tensor<Real> y_hat;
    Tensor<Real> gate_input;  // undefined in uniform mode
    Tensor<Real> alpha;
};

template <typename Real>
ForwardTrace<Real> detector_forward(Tape<Real>& tape, const EmbeddingSequence& raw_seq,
                                    const DetectorModel<Real>& model,
                                    const Tensor<Real>& gate_input) {
    const EmbeddingSequence seq = ensure_min_len(raw_seq, model.max_width());
    auto mat = to_tensor<Real>(seq);
    auto weights = gate_weights(tape, gate_input, model);
    auto r = expert_forward_all(tape, mat, seq.valid_len, model);
    auto v = aggregate(tape, weights, r);
    auto y = sigmoid(tape, mlp_forward(tape, v, model.classifier));
    return {y, gate_input, weights.alpha};
}

// Builds the gate input for a record. In fuzzy mode this runs the frozen
// membership function on the (possibly padded) sequence.
template <typename Real>
Tensor<Real> make_gate_input(Tape<Real>& tape, const EmbeddingSequence& raw_seq,
                             const DetectorModel<Real>& model, std::optional<Domain> domain) {
    switch (model.mode) {
        case GateMode::fuzzy: {
            const EmbeddingSequence seq = ensure_min_len(raw_seq, model.max_width());
            return membership_forward(tape, seq, model.membership);
        }
        case GateMode::one_hot_baseline: {
            if (!domain)
                throw InputError("predict: one_hot_baseline mode needs a domain label");
            return take_row(tape, model.domain_embedding, std::size_t(int(*domain)));
        }
        case GateMode::uniform:
            return Tensor<Real>{};
    }
    throw UsageError("predict: bad gate mode");
}

}  // namespace detail

template <typename Real>
struct Prediction {
    Real y_hat = 0;                 // P(fake), strictly inside (0,1)
    std::vector<Real> gate_input;   // g (fuzzy), domain row (baseline), empty (uniform)
    std::vector<Real> alpha;        // expert weights
};

template <typename Real>
Prediction<Real> predict(const EmbeddingSequence& seq, const DetectorModel<Real>& model,
                         std::optional<Domain> domain = std::nullopt) {
    if (seq.valid_len == 0 || seq.dim == 0) throw InputError("predict: empty sequence");
    NoGradGuard guard;
    Tape<Real> tape;
    auto gate_in = detail::make_gate_input(tape, seq, model, domain);
    auto trace = detail::detector_forward(tape, seq, model, gate_in);
    Prediction<Real> p;
    p.y_hat = trace.y_hat.item();
    if (trace.gate_input.defined()) p.gate_input = trace.gate_input.data();
    p.alpha = trace.alpha.data();
    return p;
}

template <typename Real>
struct DetectorResult {
    DetectorModel<Real> model;  // best validation-F1 epoch
    std::vector<EpochMetrics> epochs;
    std::size_t best_epoch = 0;  // 1-based
};

namespace detail {

template <typename Real>
std::uint64_t param_bytes_hash(const std::vector<Tensor<Real>>& params) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : params) {
        const auto& v = p.data();
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(v.data());
        for (std::size_t i = 0; i < v.size() * sizeof(Real); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    }
    return h;
}

}  // namespace detail

// Train experts + gate + classifier (+ domain table in baseline mode) with
// summed BCE and Adam. The membership function is fixed: its parameters take
// no gradient and a byte hash is verified around the whole run.
template <typename Real>
DetectorResult<Real> detector_train(const Corpus& corpus, const TrainConfig& cfg,
                                    std::uint64_t seed,
                                    const MembershipModel<Real>& membership) {
    cfg.validate();
    if (!membership.frozen)
        throw UsageError("detector_train: membership function must be frozen");
    std::string missing_domains;
    for (const auto& rec : corpus.records) {
        if (!rec.embeddings)
            throw InputError("detector_train: record " + rec.id + " has no embeddings");
        if (cfg.mode == GateMode::one_hot_baseline && !rec.domain)
            missing_domains += (missing_domains.empty() ? "" : ", ") + rec.id;
    }
    if (!missing_domains.empty())
        throw InputError("detector_train: one_hot_baseline mode needs domain labels; missing: " +
                         missing_domains);

    const std::uint64_t membership_hash_before =
        detail::param_bytes_hash(membership.parameters());

    auto [train, val] = split(corpus, cfg.train_frac, seed);

    std::mt19937_64 rng(detail::mix_seed(seed, 0xDE7EC7));
    auto model = make_detector<Real>(cfg, cfg.mode, membership, rng);

    // The frozen membership output per record is constant, so compute the
    // fuzzy gate inputs once up front.
    auto cache_gate_inputs = [&](const Corpus& data) {
        std::vector<std::vector<Real>> cached(data.size());
        if (cfg.mode != GateMode::fuzzy) return cached;
        NoGradGuard guard;
        for (std::size_t i = 0; i < data.size(); ++i) {
            Tape<Real> tape;
            const EmbeddingSequence seq =
                ensure_min_len(*data.records[i].embeddings, model.max_width());
            cached[i] = membership_forward(tape, seq, model.membership).data();
        }
        return cached;
    };
    const auto train_gate = cache_gate_inputs(train);
    const auto val_gate = cache_gate_inputs(val);

    auto gate_input_for = [&](Tape<Real>& tape, const Corpus& data,
                              const std::vector<std::vector<Real>>& cache,
                              std::size_t idx) -> Tensor<Real> {
        switch (cfg.mode) {
            case GateMode::fuzzy:
                return Tensor<Real>::from_data({kNumDomains}, cache[idx]);
            case GateMode::one_hot_baseline:
                return take_row(tape, model.domain_embedding,
                                std::size_t(int(*data.records[idx].domain)));
            case GateMode::uniform:
                return Tensor<Real>{};
        }
        throw UsageError("detector_train: bad gate mode");
    };

    Adam<Real> opt(model.trainable_parameters(), AdamConfig<Real>{Real(cfg.lr)});

    auto validate = [&]() {
        NoGradGuard guard;
        std::vector<double> preds;
        std::vector<int> labels;
        preds.reserve(val.size());
        for (std::size_t i = 0; i < val.size(); ++i) {
            Tape<Real> tape;
            auto gi = gate_input_for(tape, val, val_gate, i);
            auto trace = detail::detector_forward(tape, *val.records[i].embeddings, model, gi);
            preds.push_back(double(trace.y_hat.item()));
            labels.push_back(val.records[i].fake);
        }
        return f1_binary(preds, labels);
    };

    DetectorResult<Real> result;
    double best_f1 = -1.0;
    for (std::size_t epoch = 1; epoch <= cfg.detector_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double epoch_loss = 0.0;
        for (const auto& batch :
             batches(train, cfg.detector_batch, detail::mix_seed(seed, 0xB000 + epoch))) {
            Tape<Real> tape;
            std::vector<Tensor<Real>> preds;
            std::vector<int> labels;
            preds.reserve(batch.indices.size());
            for (std::size_t i = 0; i < batch.indices.size(); ++i) {
                auto gi = gate_input_for(tape, train, train_gate, batch.indices[i]);
                auto trace = detail::detector_forward(tape, batch.sequences[i], model, gi);
                preds.push_back(trace.y_hat);
                labels.push_back(train.records[batch.indices[i]].fake);
            }
            auto loss = bce_loss(tape, preds, labels);
            epoch_loss += double(loss.item());
            backward(tape, loss);
            opt.step();
        }
        const double f1 = validate();
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

    if (detail::param_bytes_hash(membership.parameters()) != membership_hash_before)
        throw VerificationError("detector_train: frozen membership parameters changed");
    return result;
}

}  // namespace fudfend
