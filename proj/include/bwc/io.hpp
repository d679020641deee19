#pragma once

#include <cstdint>
#include <string>

#include "bwc/brickwall.hpp"
#include "bwc/mpo.hpp"
#include "bwc/optimizer.hpp"

namespace bwc {

// Circuit JSON: {"n", "depth", "layers": [[{"sites": [i, j], "u": [32 reals]}]]},
// u row-major over (o1*2+o2, i1*2+i2) as (re, im) pairs. Extra keys are ignored.
std::string circuit_to_json(const BrickwallCircuit& c, const std::string& config_hash = "");
// Throws ArgumentError naming the offending field.
BrickwallCircuit circuit_from_json(const std::string& text);

// MPO JSON: {"n", "sites": [{"shape": [l, o, i, r], "data": [re, im, ...]}]}.
std::string mpo_to_json(const Mpo& m);
Mpo mpo_from_json(const std::string& text);

std::string read_file(const std::string& path);
// Writes through a temporary file and renames, so readers never see partial output.
void write_file(const std::string& path, const std::string& text);

std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

// Cache key of a model target; covers every field that changes the MPO.
std::string target_key(const ModelTarget& t);
// Loads the target from `dir` when present, else builds and stores it. Empty dir disables caching.
Mpo cached_target(const ModelTarget& t, const std::string& dir);

}  // namespace bwc
