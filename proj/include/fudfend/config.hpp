#pragma once

// Resolved training configuration. Defaults follow the reference setting:
// Adam at lr 5e-4, membership pretraining for 7 epochs at batch 32, detector
// training at batch 64, max sequence length 170, five evaluation seeds.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fudfend/errors.hpp"

namespace fudfend {

enum class GateMode {
    fuzzy,             // gate driven by the membership function's fuzzy label
    one_hot_baseline,  // gate driven by a learned per-domain embedding row
    uniform,           // ablation: fixed uniform expert weights, no gate net
};

inline std::string gate_mode_name(GateMode m) {
    switch (m) {
        case GateMode::fuzzy: return "fuzzy";
        case GateMode::one_hot_baseline: return "one_hot";
        case GateMode::uniform: return "uniform";
    }
    return "?";
}

inline GateMode gate_mode_from_name(const std::string& s) {
    if (s == "fuzzy") return GateMode::fuzzy;
    if (s == "one_hot" || s == "one_hot_baseline" || s == "baseline")
        return GateMode::one_hot_baseline;
    if (s == "uniform") return GateMode::uniform;
    throw UsageError("unknown gate mode '" + s + "' (expected fuzzy|one_hot|uniform)");
}

enum class Precision { standard, high };

struct TrainConfig {
    double lr = 5e-4;

    std::size_t membership_epochs = 7;
    std::size_t membership_batch = 32;
    std::size_t detector_epochs = 10;
    std::size_t detector_batch = 64;

    std::size_t expert_count = 5;  // T
    std::size_t embed_dim = 32;    // d; desk-scale default, 768 selectable
    std::size_t hidden_dim = 64;   // H
    std::size_t expert_dim = 64;
    std::vector<std::size_t> widths = {1, 2, 3, 5};
    std::size_t channels = 20;      // per width
    std::size_t head_hidden = 128;  // membership classification head
    std::size_t gate_hidden = 32;
    std::size_t classifier_hidden = 64;

    std::size_t max_len = 170;
    double train_frac = 0.7;

    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    GateMode mode = GateMode::fuzzy;
    Precision precision = Precision::standard;

    void validate() const {
        auto positive = [](std::size_t v, const char* name) {
            if (v == 0) throw UsageError(std::string("config: ") + name + " must be positive");
        };
        positive(membership_epochs, "membership.epochs");
        positive(membership_batch, "membership.batch");
        positive(detector_epochs, "detector.epochs");
        positive(detector_batch, "detector.batch");
        positive(expert_count, "experts");
        positive(embed_dim, "embed_dim");
        positive(hidden_dim, "hidden_dim");
        positive(expert_dim, "expert_dim");
        positive(channels, "channels");
        positive(head_hidden, "head_hidden");
        positive(gate_hidden, "gate_hidden");
        positive(classifier_hidden, "classifier_hidden");
        if (max_len < 2) throw UsageError("config: max_len must be at least 2");
        if (lr <= 0) throw UsageError("config: lr must be positive");
        if (train_frac <= 0 || train_frac >= 1)
            throw UsageError("config: train_frac must be in (0,1)");
        if (widths.empty()) throw UsageError("config: widths must be nonempty");
        for (std::size_t i = 0; i < widths.size(); ++i)
            if (widths[i] < 1 || (i > 0 && widths[i] <= widths[i - 1]))
                throw UsageError("config: widths must be strictly increasing and >= 1");
        if (seeds.empty()) throw UsageError("config: need at least one seed");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["lr"] = lr;
        j["membership"] = {{"epochs", membership_epochs}, {"batch", membership_batch}};
        j["detector"] = {{"epochs", detector_epochs}, {"batch", detector_batch}};
        j["experts"] = expert_count;
        j["embed_dim"] = embed_dim;
        j["hidden_dim"] = hidden_dim;
        j["expert_dim"] = expert_dim;
        j["widths"] = widths;
        j["channels"] = channels;
        j["head_hidden"] = head_hidden;
        j["gate_hidden"] = gate_hidden;
        j["classifier_hidden"] = classifier_hidden;
        j["max_len"] = max_len;
        j["train_frac"] = train_frac;
        j["seeds"] = seeds;
        j["mode"] = gate_mode_name(mode);
        j["precision"] = precision == Precision::high ? "high" : "standard";
        return j;
    }

    void apply_json(const nlohmann::json& j) {
        if (j.contains("lr")) lr = j["lr"].get<double>();
        if (j.contains("membership")) {
            const auto& m = j["membership"];
            if (m.contains("epochs")) membership_epochs = m["epochs"].get<std::size_t>();
            if (m.contains("batch")) membership_batch = m["batch"].get<std::size_t>();
        }
        if (j.contains("detector")) {
            const auto& d = j["detector"];
            if (d.contains("epochs")) detector_epochs = d["epochs"].get<std::size_t>();
            if (d.contains("batch")) detector_batch = d["batch"].get<std::size_t>();
        }
        if (j.contains("experts")) expert_count = j["experts"].get<std::size_t>();
        if (j.contains("embed_dim")) embed_dim = j["embed_dim"].get<std::size_t>();
        if (j.contains("hidden_dim")) hidden_dim = j["hidden_dim"].get<std::size_t>();
        if (j.contains("expert_dim")) expert_dim = j["expert_dim"].get<std::size_t>();
        if (j.contains("widths")) widths = j["widths"].get<std::vector<std::size_t>>();
        if (j.contains("channels")) channels = j["channels"].get<std::size_t>();
        if (j.contains("head_hidden")) head_hidden = j["head_hidden"].get<std::size_t>();
        if (j.contains("gate_hidden")) gate_hidden = j["gate_hidden"].get<std::size_t>();
        if (j.contains("classifier_hidden"))
            classifier_hidden = j["classifier_hidden"].get<std::size_t>();
        if (j.contains("max_len")) max_len = j["max_len"].get<std::size_t>();
        if (j.contains("train_frac")) train_frac = j["train_frac"].get<double>();
        if (j.contains("seeds")) seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("mode")) mode = gate_mode_from_name(j["mode"].get<std::string>());
        if (j.contains("precision"))
            precision = j["precision"].get<std::string>() == "high" ? Precision::high
                                                                    : Precision::standard;
    }

    static TrainConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InputError("config file not found: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw InputError("config file " + path + ": " + e.what());
        }
        TrainConfig cfg;
        cfg.apply_json(j);
        return cfg;
    }

    std::size_t max_width() const { return widths.back(); }
};

}  // namespace fudfend
