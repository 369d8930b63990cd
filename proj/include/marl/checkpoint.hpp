#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "marl/agent.hpp"
#include "marl/rng.hpp"

namespace marl {

// Algorithm tag stored as a single byte per agent.
enum class AlgoId : uint8_t { mahsac = 0, hsac = 1, mahddpg = 2, hddpg = 3 };

const char* algo_name(AlgoId id);
bool parse_algo(const std::string& s, AlgoId& out);
bool algo_centralized(AlgoId id);
bool algo_is_sac(AlgoId id);

// Tag of a live agent, derived from its dynamic type and critic scope.
AlgoId agent_algo(const Agent& a);

struct Checkpoint {
  std::string scenario;
  std::vector<int> obs_dims;
  std::vector<std::unique_ptr<Agent>> agents;
  std::array<uint64_t, 4> rng_state{};
};

// Versioned little-endian binary: magic, version, then a section table of
// (name, dtype, rows, cols, offset) entries followed by the payload blob.
// Sections hold every parameter array, Adam moments and step counts, the
// entropy weights / epsilon schedule, per-agent update clocks, and the
// trainer RNG state, so a run can resume or be evaluated from the file
// alone. Throws std::runtime_error on malformed input.
void save_checkpoint(const std::string& path, const std::string& scenario,
                     const std::vector<std::unique_ptr<Agent>>& agents,
                     const Rng& trainer_rng);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace marl
