#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "motiongait/adam.hpp"
#include "motiongait/checkpoint.hpp"
#include "motiongait/dataset.hpp"
#include "motiongait/loss.hpp"
#include "motiongait/network.hpp"

namespace motiongait {

struct TrainConfig {
  std::int64_t P = 8;
  std::int64_t K = 8;
  double margin = 0.2;
  AdamConfig adam{};
  std::int64_t iterations = 2000;
  std::int64_t frames_per_sample = 30;
  std::int64_t checkpoint_every = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Identity-balanced batches. Batch i is a pure function of (seed, i): P
/// distinct classes drawn uniformly, then K sequences per class, without
/// replacement when the class has at least K sequences and with replacement
/// otherwise. Samples are grouped class by class.
class BaSampler {
 public:
  struct Batch {
    std::vector<std::int64_t> samples;  // indices into the sequence pool
    std::vector<std::int64_t> labels;
  };

  /// `labels[i]` is the class of pool sequence i.
  BaSampler(const std::vector<std::int64_t>& labels, std::int64_t P, std::int64_t K, std::uint64_t seed);
  Batch batch(std::int64_t iteration) const;
  std::int64_t num_classes() const { return static_cast<std::int64_t>(by_class_.size()); }

 private:
  std::vector<std::int64_t> class_ids_;
  std::vector<std::vector<std::int64_t>> by_class_;
  std::int64_t P_, K_;
  std::uint64_t seed_;
};

/// Frame indices for a training clip of `target` frames from an n-frame
/// sequence: i mod n when n <= target, else a uniformly placed contiguous window.
std::vector<std::int64_t> sample_window(std::int64_t n, std::int64_t target, std::mt19937_64& rng);

/// Generator for the stream that belongs to (seed, iteration, slot).
std::mt19937_64 stream_rng(std::uint64_t seed, std::int64_t iteration, std::int64_t slot);

struct IterationRecord {
  std::int64_t iteration = 0;  // 1-based
  double triplet = 0.0;
  double cross_entropy = 0.0;
  double joint = 0.0;
  double wall_ms = 0.0;
};

class Trainer {
 public:
  /// `labels[i]` is the class id of `sequences[i]`. `config_echo` is stored in
  /// every checkpoint so the network can be rebuilt from it.
  Trainer(NetworkConfig network, TrainConfig train, std::vector<SilhouetteSequence> sequences,
          std::vector<std::int64_t> labels, std::string config_echo);

  /// Runs the next iteration. On a non-finite loss writes `dump_path` (when
  /// set) and throws NumericError.
  IterationRecord step(const std::optional<std::filesystem::path>& dump_path = std::nullopt);

  /// Trains until train.iterations, appending to out_dir/loss.csv and
  /// writing out_dir/checkpoint_<iter>.mgck every checkpoint_every
  /// iterations plus out_dir/final.mgck at the end.
  void run(const std::filesystem::path& out_dir);

  Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const;
  /// Restores parameters, running statistics, optimizer state and the
  /// iteration counter.
  void resume(const std::filesystem::path& path);

  std::int64_t iteration() const { return iteration_; }
  const NetworkConfig& network_config() const { return network_; }
  NetworkParams<float>& params() { return params_; }
  const std::vector<IterationRecord>& history() const { return history_; }

 private:
  NetworkConfig network_;
  TrainConfig train_;
  std::vector<SilhouetteSequence> sequences_;
  std::string config_echo_;
  BaSampler sampler_;
  NetworkParams<float> params_;
  Adam<float> adam_;
  std::int64_t iteration_ = 0;
  std::vector<IterationRecord> history_;
};

/// Eval-mode descriptor of every sequence (full length), one row per sequence.
std::vector<std::vector<float>> embed_sequences(const std::vector<SilhouetteSequence>& sequences,
                                                const NetworkConfig& config, NetworkParams<float>& params);

}  // namespace motiongait
