#pragma once

// Token-embedding sequences and the deterministic toy embedder that stands in
// for a frozen sentence encoder. Each distinct token hashes to a seed that
// generates a fixed unit-norm vector, so embeddings are a pure function of
// (text, dim). Sequences carry fixed boundary-start/end vectors in rows 0 and
// valid_len-1.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fudfend/errors.hpp"
#include "fudfend/tensor.hpp"

namespace fudfend {

struct EmbeddingSequence {
    std::size_t dim = 0;
    std::size_t valid_len = 0;        // meaningful rows, including boundary rows
    std::vector<float> data;          // rows x dim, row-major; rows() >= valid_len

    std::size_t rows() const { return dim ? data.size() / dim : 0; }
    const float* row(std::size_t r) const { return data.data() + r * dim; }
};

// Copy the valid region into a Tensor, zero-padding up to min_rows when the
// sequence is shorter. Rows beyond valid_len in the source are never read,
// which is what makes trailing padding invisible to every consumer.
template <typename Real>
Tensor<Real> to_tensor(const EmbeddingSequence& seq, std::size_t min_rows = 0) {
    const std::size_t rows = std::max(seq.valid_len, min_rows);
    Tensor<Real> t = Tensor<Real>::zeros({rows, seq.dim});
    auto& v = t.data();
    for (std::size_t r = 0; r < seq.valid_len; ++r)
        for (std::size_t j = 0; j < seq.dim; ++j) v[r * seq.dim + j] = Real(seq.row(r)[j]);
    return t;
}

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// CJK unified ideographs (plus extension A and compatibility block) are
// tokenized per character; everything else splits on whitespace.
inline bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
           (cp >= 0xF900 && cp <= 0xFAFF);
}

inline bool is_space(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0x3000;
}

// Minimal UTF-8 decode; malformed bytes fall back to single-byte codepoints.
inline char32_t next_codepoint(std::string_view s, std::size_t& i) {
    const unsigned char c = s[i];
    std::size_t extra = 0;
    char32_t cp = c;
    if (c >= 0xF0)
        extra = 3, cp = c & 0x07;
    else if (c >= 0xE0)
        extra = 2, cp = c & 0x0F;
    else if (c >= 0xC0)
        extra = 1, cp = c & 0x1F;
    if (i + extra >= s.size()) {
        ++i;
        return c;
    }
    for (std::size_t k = 1; k <= extra; ++k) {
        const unsigned char cc = s[i + k];
        if ((cc & 0xC0) != 0x80) {
            ++i;
            return c;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    i += extra + 1;
    return cp;
}

}  // namespace detail

// Whitespace-delimited tokens; CJK ideographs are additionally split into
// single-character tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t start = i;
        const char32_t cp = detail::next_codepoint(text, i);
        if (detail::is_space(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else if (detail::is_cjk(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            tokens.emplace_back(text.substr(start, i - start));
        } else {
            current.append(text.substr(start, i - start));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// Deterministic unit-norm vector for a token: the token's hash seeds a PRNG
// that emits a Gaussian vector, normalized.
inline std::vector<float> token_vector(std::string_view token, std::size_t dim) {
    std::mt19937_64 rng(detail::fnv1a64(token));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<float> v(dim);
    double norm_sq = 0;
    for (auto& x : v) {
        const double g = gauss(rng);
        x = float(g);
        norm_sq += g * g;
    }
    const double norm = std::sqrt(norm_sq);
    for (auto& x : v) x = float(double(x) / norm);
    return v;
}

inline constexpr std::string_view kBoundaryStart = "\x01<bos>";
inline constexpr std::string_view kBoundaryEnd = "\x01<eos>";

// Embed a text as [start, tokens..., end], truncating interior tokens so the
// sequence never exceeds max_len rows (earliest tokens are kept).
inline EmbeddingSequence toy_embed(std::string_view text, std::size_t dim,
                                   std::size_t max_len = 170) {
    if (dim < 1) throw UsageError("toy_embed: dim must be positive");
    if (max_len < 2) throw UsageError("toy_embed: max_len must be at least 2");
    auto tokens = tokenize(text);
    if (tokens.empty()) throw InputError("toy_embed: empty text");
    if (tokens.size() > max_len - 2) tokens.resize(max_len - 2);

    EmbeddingSequence seq;
    seq.dim = dim;
    seq.valid_len = tokens.size() + 2;
    seq.data.reserve(seq.valid_len * dim);
    auto append = [&](std::string_view tok) {
        auto v = token_vector(tok, dim);
        seq.data.insert(seq.data.end(), v.begin(), v.end());
    };
    append(kBoundaryStart);
    for (const auto& t : tokens) append(t);
    append(kBoundaryEnd);
    return seq;
}

}  // namespace fudfend
