#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "motiongait/adam.hpp"
#include "motiongait/network.hpp"

namespace motiongait {

inline constexpr char kCheckpointMagic[4] = {'M', 'G', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

/// Versioned binary checkpoint. Layout, all integers little-endian:
///   "MGCK" | u32 version | u32 len + config echo bytes | u32 blob count |
///   blobs: u8 kind | u32 len + name | payload
/// kind 0 payload: u32 rank, rank x i64 extents, float32 data.
/// kind 1 payload: one i64.
struct Checkpoint {
  std::string config_echo;
  std::vector<CheckpointTensor> tensors;
  std::map<std::string, std::int64_t> integers;

  const CheckpointTensor& tensor(const std::string& name) const;
  std::int64_t integer(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// IoError if unreadable, IngestionError for a bad magic, version or layout.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Adds network parameters and batchnorm running statistics.
void store_network(Checkpoint& ckpt, const NetworkParams<float>& params);
/// Copies stored values into `params`; shapes must match (DimensionError).
void restore_network(const Checkpoint& ckpt, NetworkParams<float>& params);

void store_optimizer(Checkpoint& ckpt, const NetworkParams<float>& params, const Adam<float>& adam);
void restore_optimizer(const Checkpoint& ckpt, const NetworkParams<float>& params, Adam<float>& adam);

}  // namespace motiongait
