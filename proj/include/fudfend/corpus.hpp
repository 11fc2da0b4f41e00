#pragma once

// News records, corpora, file formats, the synthetic multi-domain generator,
// splits and batching.
//
// On disk a corpus is two files:
//   - a UTF-8 JSONL text file (one record per line, optional meta first line)
//   - an optional binary embedding sidecar ("FUDE", little-endian)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fudfend/domains.hpp"
#include "fudfend/embedding.hpp"
#include "fudfend/errors.hpp"

namespace fudfend {

struct NewsRecord {
    std::string id;
    std::optional<std::string> text;
    std::optional<EmbeddingSequence> embeddings;
    std::optional<Domain> domain;
    int fake = 0;  // 1 = fake

    // Generator metadata, kept out of the model's sight and used only for
    // analysis (mixed-subset evaluation).
    bool mixed = false;
    std::vector<std::pair<Domain, double>> mix;  // source domains and weights
    std::optional<Domain> signal_domain;
};

struct Corpus {
    std::string name;
    std::size_t dim = 0;  // embedding dim; 0 until embeddings exist
    std::vector<NewsRecord> records;
    bool synthetic = false;
    std::uint64_t gen_seed = 0;

    std::size_t size() const { return records.size(); }
};

// ---------------------------------------------------------------------------
// Synthetic corpus generation.
//
// Each domain k owns a token cluster (its vocabulary) plus a marker set M_k.
// Marker polarity differs per domain: inside domain k, M_k tokens accompany
// fake items and M_{k+1 mod 9} tokens accompany real items, so a marker's
// global label correlation washes out and only the (content domain, marker)
// pairing carries signal. Mixed items draw content from two or three domain
// clusters, take the majority source as their single label, and draw their
// marker's domain uniformly from the sources.
// ---------------------------------------------------------------------------
struct SyntheticSpec {
    std::size_t domain_vocab = 8;   // content tokens per domain cluster
    std::size_t marker_vocab = 6;   // marker tokens per domain set
    std::size_t noise_vocab = 30;   // shared tokens with no domain identity
    double noise_level = 0.05;      // probability a content slot is noise
    double mixed_fraction = 0.20;
    std::size_t min_tokens = 6, max_tokens = 12;    // content tokens per item
    std::size_t min_markers = 2, max_markers = 4;

    // Per-domain real/fake item counts. Defaults reproduce the benchmark's
    // domain balance scaled to 3600 items.
    std::array<std::size_t, kNumDomains> real_counts = {56, 48, 96, 73, 121, 191, 378, 394, 472};
    std::array<std::size_t, kNumDomains> fake_counts = {37, 88, 98, 233, 215, 203, 143, 174, 580};

    std::size_t total() const {
        std::size_t n = 0;
        for (std::size_t k = 0; k < kNumDomains; ++k) n += real_counts[k] + fake_counts[k];
        return n;
    }

    void scale_to(std::size_t target_total) {
        const double s = double(target_total) / double(total());
        for (std::size_t k = 0; k < kNumDomains; ++k) {
            real_counts[k] = std::size_t(std::llround(double(real_counts[k]) * s));
            fake_counts[k] = std::size_t(std::llround(double(fake_counts[k]) * s));
        }
    }

    // A corpus that a bag-of-words count model separates perfectly: disjoint
    // clusters, no mixing, no noise.
    static SyntheticSpec separable(std::size_t per_domain_real = 30,
                                   std::size_t per_domain_fake = 30) {
        SyntheticSpec s;
        s.mixed_fraction = 0.0;
        s.noise_level = 0.0;
        s.real_counts.fill(per_domain_real);
        s.fake_counts.fill(per_domain_fake);
        return s;
    }

    // Distribution-shifted counterpart used for transfer evaluation: domain
    // priors inverted, more mixing, noisier and shorter texts.
    static SyntheticSpec shifted(std::size_t target_total = 1200) {
        SyntheticSpec s;
        std::reverse(s.real_counts.begin(), s.real_counts.end());
        std::reverse(s.fake_counts.begin(), s.fake_counts.end());
        s.mixed_fraction = 0.35;
        s.noise_level = 0.10;
        s.min_tokens = 5;
        s.max_tokens = 10;
        s.scale_to(target_total);
        return s;
    }

    nlohmann::json to_json() const {
        return {{"domain_vocab", domain_vocab}, {"marker_vocab", marker_vocab},
                {"noise_vocab", noise_vocab},   {"noise_level", noise_level},
                {"mixed_fraction", mixed_fraction},
                {"min_tokens", min_tokens},     {"max_tokens", max_tokens},
                {"min_markers", min_markers},   {"max_markers", max_markers},
                {"real_counts", real_counts},   {"fake_counts", fake_counts}};
    }
};

namespace detail {

inline std::string content_token(std::size_t domain, std::size_t j) {
    return "d" + std::to_string(domain) + "w" + std::to_string(j);
}
inline std::string marker_token(std::size_t domain, std::size_t j) {
    return "m" + std::to_string(domain) + "x" + std::to_string(j);
}
inline std::string noise_token(std::size_t j) { return "nz" + std::to_string(j); }

}  // namespace detail

inline Corpus gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.total() == 0) throw InputError("gen_synthetic: spec has zero total count");
    if (spec.mixed_fraction < 0 || spec.mixed_fraction > 1)
        throw InputError("gen_synthetic: mixed_fraction must be in [0,1]");
    if (spec.min_tokens < 1 || spec.max_tokens < spec.min_tokens)
        throw InputError("gen_synthetic: bad token count range");

    std::mt19937_64 rng(seed);

    struct Slot {
        std::size_t domain;
        int fake;
        bool mixed = false;
    };
    std::vector<Slot> slots;
    slots.reserve(spec.total());
    for (std::size_t k = 0; k < kNumDomains; ++k) {
        for (std::size_t i = 0; i < spec.real_counts[k]; ++i) slots.push_back({k, 0});
        for (std::size_t i = 0; i < spec.fake_counts[k]; ++i) slots.push_back({k, 1});
    }
    std::shuffle(slots.begin(), slots.end(), rng);
    const std::size_t mixed_n =
        std::size_t(std::llround(spec.mixed_fraction * double(slots.size())));
    for (std::size_t i = 0; i < mixed_n && i < slots.size(); ++i) slots[i].mixed = true;
    std::shuffle(slots.begin(), slots.end(), rng);

    std::uniform_int_distribution<std::size_t> tok_count(spec.min_tokens, spec.max_tokens);
    std::uniform_int_distribution<std::size_t> marker_count(spec.min_markers, spec.max_markers);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Corpus corpus;
    corpus.synthetic = true;
    corpus.gen_seed = seed;
    corpus.name = "synthetic";
    corpus.records.reserve(slots.size());

    for (std::size_t idx = 0; idx < slots.size(); ++idx) {
        const Slot& slot = slots[idx];
        NewsRecord rec;
        {
            std::ostringstream os;
            os << "r" << std::setw(5) << std::setfill('0') << idx;
            rec.id = os.str();
        }
        rec.domain = Domain(int(slot.domain));
        rec.fake = slot.fake;
        rec.mixed = slot.mixed;

        // Source domains and weights.
        std::vector<std::pair<std::size_t, double>> sources;
        if (slot.mixed) {
            std::vector<std::size_t> others;
            for (std::size_t k = 0; k < kNumDomains; ++k)
                if (k != slot.domain) others.push_back(k);
            std::shuffle(others.begin(), others.end(), rng);
            const bool three = (rng() & 1) != 0;
            if (three) {
                sources = {{slot.domain, 0.45}, {others[0], 0.35}, {others[1], 0.20}};
            } else {
                sources = {{slot.domain, 0.55}, {others[0], 0.45}};
            }
            for (const auto& [k, wgt] : sources) rec.mix.emplace_back(Domain(int(k)), wgt);
        } else {
            sources = {{slot.domain, 1.0}};
        }

        // Content tokens: pick a source cluster by weight, then a token from
        // that cluster, with occasional shared-noise substitution.
        std::vector<std::string> tokens;
        const std::size_t n_content = tok_count(rng);
        for (std::size_t t = 0; t < n_content; ++t) {
            if (spec.noise_level > 0 && unit(rng) < spec.noise_level) {
                tokens.push_back(detail::noise_token(rng() % spec.noise_vocab));
                continue;
            }
            double u = unit(rng);
            std::size_t src = sources.back().first;
            for (const auto& [k, wgt] : sources) {
                if (u < wgt) {
                    src = k;
                    break;
                }
                u -= wgt;
            }
            tokens.push_back(detail::content_token(src, rng() % spec.domain_vocab));
        }

        // Markers: polarity belongs to the signal domain. For mixed items the
        // signal domain is drawn with inverse-weight bias, so the deceptive
        // claim tends to live in a minority source — the regime where a
        // single hard label loses information.
        std::size_t sig = sources[0].first;
        if (sources.size() > 1) {
            double total_inv = 0;
            for (const auto& [k, wgt] : sources) total_inv += 1.0 - wgt;
            double u = unit(rng) * total_inv;
            for (const auto& [k, wgt] : sources) {
                if (u < 1.0 - wgt) {
                    sig = k;
                    break;
                }
                u -= 1.0 - wgt;
            }
        }
        rec.signal_domain = Domain(int(sig));
        const std::size_t marker_set = slot.fake ? sig : (sig + 1) % kNumDomains;
        const std::size_t n_markers = marker_count(rng);
        for (std::size_t t = 0; t < n_markers; ++t)
            tokens.push_back(detail::marker_token(marker_set, rng() % spec.marker_vocab));

        std::shuffle(tokens.begin(), tokens.end(), rng);
        std::string text;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            if (t) text += ' ';
            text += tokens[t];
        }
        rec.text = std::move(text);
        corpus.records.push_back(std::move(rec));
    }
    return corpus;
}

// Fill embeddings for every record from its text via the toy embedder.
inline void embed_corpus(Corpus& corpus, std::size_t dim, std::size_t max_len = 170) {
    for (auto& rec : corpus.records) {
        if (!rec.text)
            throw InputError("embed: record " + rec.id + " has no text to embed");
        rec.embeddings = toy_embed(*rec.text, dim, max_len);
    }
    corpus.dim = dim;
}

inline void strip_domains(Corpus& corpus) {
    for (auto& rec : corpus.records) rec.domain.reset();
}

// ---------------------------------------------------------------------------
// JSONL text file
// ---------------------------------------------------------------------------
inline void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: no newline translation
    if (!out) throw InputError("cannot write corpus file: " + path);
    nlohmann::json meta = {{"name", corpus.name},
                           {"dim", corpus.dim},
                           {"synthetic", corpus.synthetic},
                           {"seed", corpus.gen_seed}};
    out << nlohmann::json{{"meta", meta}}.dump() << "\n";
    for (const auto& rec : corpus.records) {
        nlohmann::json j;
        j["id"] = rec.id;
        if (rec.text) j["text"] = *rec.text;
        if (rec.domain) j["domain"] = std::string(domain_name(*rec.domain));
        j["fake"] = rec.fake;
        if (rec.mixed) {
            j["mixed"] = true;
            nlohmann::json doms = nlohmann::json::array(), wgts = nlohmann::json::array();
            for (const auto& [d, w] : rec.mix) {
                doms.push_back(std::string(domain_name(d)));
                wgts.push_back(w);
            }
            j["mix_domains"] = doms;
            j["mix_weights"] = wgts;
        }
        if (rec.signal_domain) j["signal_domain"] = std::string(domain_name(*rec.signal_domain));
        out << j.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// FUDE embedding sidecar (binary, little-endian):
//   magic "FUDE", u32 version=1, u32 record_count, then per record:
//   u16 id length + id bytes, u32 valid_len, u32 dim, valid_len*dim f32.
// ---------------------------------------------------------------------------
namespace detail {

inline void wr_u16(std::ostream& out, std::uint16_t v) {
    const char b[2] = {char(v & 0xFF), char((v >> 8) & 0xFF)};
    out.write(b, 2);
}
inline void wr_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF),
                       char((v >> 24) & 0xFF)};
    out.write(b, 4);
}
inline void wr_f32(std::ostream& out, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    wr_u32(out, v);
}
inline std::uint16_t rd_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return std::uint16_t(b[0] | (b[1] << 8));
}
inline std::uint32_t rd_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}
inline float rd_f32(std::istream& in) {
    const std::uint32_t v = rd_u32(in);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace detail

inline void save_embeddings(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write embedding sidecar: " + path);
    std::uint32_t count = 0;
    for (const auto& rec : corpus.records)
        if (rec.embeddings) ++count;
    out.write("FUDE", 4);
    detail::wr_u32(out, 1);  // version
    detail::wr_u32(out, count);
    for (const auto& rec : corpus.records) {
        if (!rec.embeddings) continue;
        const auto& seq = *rec.embeddings;
        detail::wr_u16(out, std::uint16_t(rec.id.size()));
        out.write(rec.id.data(), std::streamsize(rec.id.size()));
        detail::wr_u32(out, std::uint32_t(seq.valid_len));
        detail::wr_u32(out, std::uint32_t(seq.dim));
        for (std::size_t i = 0; i < seq.valid_len * seq.dim; ++i)
            detail::wr_f32(out, seq.data[i]);
    }
}

inline Corpus load_corpus(const std::string& path,
                          const std::optional<std::string>& sidecar = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("corpus file not found: " + path);

    Corpus corpus;
    corpus.name = path;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (j.contains("meta")) {
            const auto& m = j["meta"];
            if (m.contains("name")) corpus.name = m["name"].get<std::string>();
            if (m.contains("synthetic")) corpus.synthetic = m["synthetic"].get<bool>();
            if (m.contains("seed")) corpus.gen_seed = m["seed"].get<std::uint64_t>();
            continue;
        }
        NewsRecord rec;
        try {
            if (!j.contains("id")) throw InputError("missing 'id'");
            rec.id = j["id"].get<std::string>();
            if (j.contains("text")) rec.text = j["text"].get<std::string>();
            if (j.contains("domain"))
                rec.domain = domain_from_name(j["domain"].get<std::string>());
            if (!j.contains("fake")) throw InputError("missing 'fake'");
            rec.fake = j["fake"].get<int>();
            if (rec.fake != 0 && rec.fake != 1) throw InputError("'fake' must be 0 or 1");
            if (j.contains("mixed")) rec.mixed = j["mixed"].get<bool>();
            if (j.contains("mix_domains") && j.contains("mix_weights")) {
                const auto doms = j["mix_domains"].get<std::vector<std::string>>();
                const auto wgts = j["mix_weights"].get<std::vector<double>>();
                if (doms.size() != wgts.size()) throw InputError("mix arrays disagree");
                for (std::size_t i = 0; i < doms.size(); ++i)
                    rec.mix.emplace_back(domain_from_name(doms[i]), wgts[i]);
            }
            if (j.contains("signal_domain"))
                rec.signal_domain = domain_from_name(j["signal_domain"].get<std::string>());
        } catch (const InputError& e) {
            throw ParseError(line_no, e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        corpus.records.push_back(std::move(rec));
    }

    if (sidecar) {
        std::ifstream emb(*sidecar, std::ios::binary);
        if (!emb) throw InputError("embedding sidecar not found: " + *sidecar);
        char magic[4];
        emb.read(magic, 4);
        if (!emb || std::string_view(magic, 4) != "FUDE")
            throw InputError("bad sidecar magic in " + *sidecar);
        const std::uint32_t version = detail::rd_u32(emb);
        if (version != 1)
            throw InputError("unsupported sidecar version " + std::to_string(version));
        const std::uint32_t count = detail::rd_u32(emb);

        std::unordered_map<std::string, std::size_t> by_id;
        for (std::size_t i = 0; i < corpus.records.size(); ++i)
            by_id[corpus.records[i].id] = i;

        for (std::uint32_t r = 0; r < count; ++r) {
            const std::uint16_t idlen = detail::rd_u16(emb);
            std::string id(idlen, '\0');
            emb.read(id.data(), idlen);
            EmbeddingSequence seq;
            seq.valid_len = detail::rd_u32(emb);
            seq.dim = detail::rd_u32(emb);
            if (!emb) throw InputError("truncated sidecar: " + *sidecar);
            seq.data.resize(seq.valid_len * seq.dim);
            for (auto& v : seq.data) v = detail::rd_f32(emb);
            if (!emb) throw InputError("truncated sidecar: " + *sidecar);
            if (corpus.dim == 0) corpus.dim = seq.dim;
            if (seq.dim != corpus.dim)
                throw InputError("sidecar integrity: record " + id + " has dim " +
                                 std::to_string(seq.dim) + ", corpus dim " +
                                 std::to_string(corpus.dim));
            auto it = by_id.find(id);
            if (it == by_id.end())
                throw InputError("sidecar record " + id + " not present in corpus");
            corpus.records[it->second].embeddings = std::move(seq);
        }
    }

    std::string orphans;
    for (const auto& rec : corpus.records)
        if (!rec.text && !rec.embeddings) orphans += (orphans.empty() ? "" : ", ") + rec.id;
    if (!orphans.empty())
        throw InputError("records missing both text and embeddings: " + orphans);
    return corpus;
}

// ---------------------------------------------------------------------------
// Splits and batches
// ---------------------------------------------------------------------------
inline std::pair<Corpus, Corpus> split(const Corpus& corpus, double train_frac,
                                       std::uint64_t seed) {
    if (train_frac <= 0 || train_frac >= 1)
        throw UsageError("split: train_frac must be in (0,1)");
    std::vector<std::size_t> order(corpus.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t n_train = std::size_t(double(order.size()) * train_frac);
    Corpus train, val;
    train.name = corpus.name;
    val.name = corpus.name;
    train.dim = val.dim = corpus.dim;
    train.synthetic = val.synthetic = corpus.synthetic;
    train.gen_seed = val.gen_seed = corpus.gen_seed;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_train ? train : val).records.push_back(corpus.records[order[i]]);
    return {std::move(train), std::move(val)};
}

struct Batch {
    std::vector<std::size_t> indices;              // into the source corpus
    std::vector<EmbeddingSequence> sequences;      // padded to padded_len rows
    std::vector<std::vector<std::uint8_t>> masks;  // 1 marks a valid position
    std::size_t padded_len = 0;
};

// One shuffled pass over the corpus; call once per epoch with a fresh seed to
// reshuffle. Each batch is padded to its own longest sequence with zero rows
// and an explicit mask.
inline std::vector<Batch> batches(const Corpus& corpus, std::size_t batch_size,
                                  std::uint64_t seed) {
    if (batch_size < 1) throw UsageError("batches: batch_size must be >= 1");
    std::vector<std::size_t> order(corpus.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<Batch> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        Batch b;
        b.indices.assign(order.begin() + start, order.begin() + end);
        for (auto idx : b.indices) {
            const auto& rec = corpus.records[idx];
            if (!rec.embeddings)
                throw InputError("batches: record " + rec.id + " has no embeddings");
            b.padded_len = std::max(b.padded_len, rec.embeddings->valid_len);
        }
        for (auto idx : b.indices) {
            const auto& src = *corpus.records[idx].embeddings;
            EmbeddingSequence padded;
            padded.dim = src.dim;
            padded.valid_len = src.valid_len;
            padded.data.assign(b.padded_len * src.dim, 0.0f);
            std::copy(src.data.begin(), src.data.begin() + std::ptrdiff_t(src.valid_len * src.dim),
                      padded.data.begin());
            b.sequences.push_back(std::move(padded));
            std::vector<std::uint8_t> mask(b.padded_len, 0);
            std::fill(mask.begin(), mask.begin() + std::ptrdiff_t(src.valid_len), 1);
            b.masks.push_back(std::move(mask));
        }
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace fudfend
