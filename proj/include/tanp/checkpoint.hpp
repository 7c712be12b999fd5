#pragma once

#include "tanp/kernel/adam.hpp"
#include "tanp/types.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tanp {

inline constexpr char kCheckpointMagic[8] = {'T', 'A', 'N', 'P', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk layout (all integers little-endian):
///   8-byte magic "TANPCKPT", u32 version,
///   u32 length + UTF-8 config text,
///   u32 tensor count, then per tensor:
///     u32 length + UTF-8 name, u32 rank, rank x u64 dims, row-major f64 payload.
///
/// Tensor names: "param/<name>" for model parameters, "adam.m/<name>" and
/// "adam.v/<name>" for optimizer moments, "state/adam_step", "state/epoch"
/// and "state/seed" (low and high 32-bit halves).
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix& tensor(const std::string& name) const;
  bool has(const std::string& name) const;
};

std::string serialize(const Checkpoint& checkpoint);
Checkpoint deserialize(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Training state captured in a checkpoint.
struct TrainingSnapshot {
  Params params;
  AdamState<double> adam;
  int epoch = 0;
  std::uint64_t seed = 0;
};

Checkpoint make_checkpoint(const std::string& config_text, const TrainingSnapshot& snapshot);
TrainingSnapshot read_snapshot(const Checkpoint& checkpoint);

}  // namespace tanp
