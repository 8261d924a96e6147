#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace divsample {

using Rng = std::mt19937_64;

/// Independent generator for a named purpose ("data", "init", "train",
/// "eval") derived from one master seed.
Rng make_stream(std::uint64_t master_seed, std::string_view name);

/// Uniform draw on the open interval (0, 1).
double open_uniform(Rng& rng);

}  // namespace divsample
