#pragma once

// F1 metrics and the evaluation report structure.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fudfend/domains.hpp"
#include "fudfend/errors.hpp"

namespace fudfend {

// Binary F1 with fake (label 1) as the positive class. Predictions at or
// above the threshold count as positive. Degenerate buckets (P + R == 0)
// score 0.
inline double f1_binary(const std::vector<double>& preds, const std::vector<int>& labels,
                        double threshold = 0.5) {
    if (preds.empty() || preds.size() != labels.size())
        throw InputError("f1_binary: need equal, nonzero prediction/label counts");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool pos = preds[i] >= threshold;
        if (pos && labels[i] == 1) ++tp;
        else if (pos && labels[i] == 0) ++fp;
        else if (!pos && labels[i] == 1) ++fn;
    }
    const double precision = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
    const double recall = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

// Macro-averaged F1 over n_classes one-vs-rest problems; absent classes
// contribute 0 (same zero-division convention as f1_binary).
inline double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                       std::size_t n_classes) {
    if (preds.empty() || preds.size() != labels.size())
        throw InputError("macro_f1: need equal, nonzero prediction/label counts");
    double total = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const bool p = preds[i] == int(c), g = labels[i] == int(c);
            if (p && g) ++tp;
            else if (p && !g) ++fp;
            else if (!p && g) ++fn;
        }
        const double precision = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
        const double recall = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
        if (precision + recall > 0) total += 2.0 * precision * recall / (precision + recall);
    }
    return total / double(n_classes);
}

// Fake-detection F1 bucketed per domain, plus an overall score and, when the
// corpus carries mixture metadata, the mixed-subset score.
struct EvalReport {
    std::array<double, kNumDomains> domain_f1{};
    std::array<std::size_t, kNumDomains> domain_counts{};
    double overall_f1 = 0.0;
    std::size_t total = 0;
    std::optional<double> mixed_f1;
    std::size_t mixed_count = 0;
    std::string domain_source = "gold";  // "gold" or "membership"
    std::vector<std::uint64_t> seeds;
    bool mean_of_runs = false;
};

}  // namespace fudfend
