#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>

#include "mcac/agent_ac.hpp"
#include "mcac/agent_dqn.hpp"

namespace mcac {

// Layout (little-endian):
//   "MCACCKPT", u32 version, u8 agent tag (0 = ac, 1 = dqn),
//   u32 length + config as key=value lines,
//   i64 step counter, u32 M + M x i16 window codes (newest first),
//   network containers (ac: actor, critic; dqn: q, target).
// Optimizer moments, RNG state and the replay buffer are not stored.
inline constexpr std::uint32_t kCheckpointVersion = 1;

using LoadedAgent = std::variant<AcAgent, DqnAgent>;

void save_checkpoint(std::ostream& os, const AcAgent& agent);
void save_checkpoint(std::ostream& os, const DqnAgent& agent);
void save_checkpoint(const std::string& path, const AcAgent& agent);
void save_checkpoint(const std::string& path, const DqnAgent& agent);

// Throws CheckpointError on truncation, bad magic, version mismatch or a
// config that does not match the stored networks. Nothing is returned on
// failure.
LoadedAgent load_checkpoint(std::istream& is);
LoadedAgent load_checkpoint(const std::string& path);

// Config text helpers, exposed for tests.
std::string encode_config(const AcAgentConfig& c);
std::string encode_config(const DqnConfig& c);
AcAgentConfig decode_ac_config(const std::string& text);
DqnConfig decode_dqn_config(const std::string& text);

}  // namespace mcac
