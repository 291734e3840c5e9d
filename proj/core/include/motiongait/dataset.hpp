#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "motiongait/tensor.hpp"

namespace motiongait {

enum class Condition { NM, BG, CL };

/// Condition plus its 1-based sequence index, e.g. nm-05.
struct ConditionId {
  Condition condition = Condition::NM;
  int index = 1;

  std::string str() const;  // "nm-05"
  auto operator<=>(const ConditionId&) const = default;
};

/// Parses "nm-01".."nm-06", "bg-01".."bg-02", "cl-01".."cl-02".
std::optional<ConditionId> parse_condition(const std::string& name);
/// The ten condition ids in canonical order.
std::vector<ConditionId> all_conditions();

/// The eleven camera angles 0, 18, ..., 180.
std::vector<int> all_views();
/// Parses a three-digit view directory name such as "090".
std::optional<int> parse_view(const std::string& name);
std::string view_str(int view);

struct SequenceKey {
  std::string subject;
  ConditionId condition;
  int view = 0;

  auto operator<=>(const SequenceKey&) const = default;
};

/// A loaded sequence of canonical 64x44 binary frames, one byte per pixel.
struct SilhouetteSequence {
  SequenceKey key;
  std::int64_t num_frames = 0;
  std::vector<std::uint8_t> mask;  // (num_frames, 64, 44)

  /// (1, num_frames, 64, 44) in {0, 1}.
  Tensor<float> to_tensor() const;
  /// (1, indices.size(), 64, 44) gathered in the given order.
  Tensor<float> gather(const std::vector<std::int64_t>& indices) const;
};

struct SequenceEntry {
  SequenceKey key;
  std::filesystem::path directory;
  std::vector<std::filesystem::path> frame_files;  // lexicographic order
};

struct SplitConfig {
  /// The first this-many subjects (lexicographic) form the training split.
  std::int64_t train_subjects = 74;
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<SequenceEntry> entries;  // sorted by key
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  std::map<std::string, std::int64_t> class_ids;  // training subjects only
  std::vector<std::string> warnings;

  bool is_train(const std::string& subject) const { return class_ids.contains(subject); }
  /// Entries whose subject lies in the requested split.
  std::vector<const SequenceEntry*> split_entries(bool train) const;
};

/// Scans root/<subject>/<condition-idx>/<view>/<frames>. Missing root is an
/// IoError; malformed condition or view directory names raise one
/// IngestionError naming every offender. Sequence directories without frame
/// files are skipped with a warning.
DatasetIndex load_dataset(const std::filesystem::path& root, const SplitConfig& split = {});

/// Reads and preprocesses the frames of one entry. Unreadable frames and
/// all-background frames are dropped with a warning; returns nullopt (plus a
/// warning) when nothing usable remains.
std::optional<SilhouetteSequence> load_sequence(const SequenceEntry& entry,
                                                std::vector<std::string>& warnings);

/// Loads many entries (parallel over sequences), keeping input order and
/// dropping unusable sequences.
std::vector<SilhouetteSequence> load_sequences(const std::vector<const SequenceEntry*>& entries,
                                               std::vector<std::string>& warnings);

}  // namespace motiongait
