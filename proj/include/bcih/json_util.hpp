#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "bcih/geometry.hpp"

namespace bcih {

using json = nlohmann::json;

/// FNV-1a 64-bit hash, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Hash of the compact dump of a JSON value.
std::string json_hash(const json& j);

/// Matrices are stored as {"rows": r, "cols": c, "data": [row-major values]}.
json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);

json vec2_to_json(Vec2 v);
Vec2 vec2_from_json(const json& j);

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) {
    return mix_seed(mix_seed(mix_seed(mix_seed(base) ^ a) ^ b) ^ c);
}

}  // namespace bcih
