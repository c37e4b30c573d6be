#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace crowdnav {

std::uint64_t fnv1a64(std::string_view bytes);

/// Hex FNV-1a of the compact JSON dump (keys are sorted by nlohmann::json).
std::string config_hash(const nlohmann::json& config);

/// Derives an independent seed for a sub-stream, e.g. (train seed, env index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

std::string iso_timestamp();

}  // namespace crowdnav
