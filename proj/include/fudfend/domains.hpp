#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "fudfend/errors.hpp"

namespace fudfend {

inline constexpr std::size_t kNumDomains = 9;

// Canonical nine-domain order. Index and name map bijectively.
enum class Domain : int {
    Science = 0,
    Military,
    Education,
    Accidents,
    Politics,
    Health,
    Finance,
    Entertainment,
    Society,
};

inline constexpr std::array<std::string_view, kNumDomains> kDomainNames = {
    "Science",  "Military", "Education",     "Accidents", "Politics",
    "Health",   "Finance",  "Entertainment", "Society",
};

inline std::string_view domain_name(Domain d) { return kDomainNames[std::size_t(int(d))]; }

inline Domain domain_from_index(int i) {
    if (i < 0 || std::size_t(i) >= kNumDomains)
        throw InputError("domain index " + std::to_string(i) + " out of range 0..8");
    return Domain(i);
}

inline Domain domain_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNumDomains; ++i)
        if (kDomainNames[i] == name) return Domain(int(i));
    throw InputError("unknown domain name '" + std::string(name) + "'");
}

}  // namespace fudfend
