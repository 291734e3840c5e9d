#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "motiongait/dataset.hpp"
#include "motiongait/image.hpp"

namespace motiongait {

/// Body and gait constants of one synthetic subject (pixels, radians, frames).
struct WalkerParams {
  double leg_length = 34.0;
  double arm_length = 25.0;
  double torso_length = 25.0;
  double torso_half_width = 7.5;  // lateral
  double torso_half_depth = 5.0;  // sagittal
  double head_radius = 6.0;
  double limb_radius = 2.5;
  double period = 16.0;           // frames per full gait cycle
  double leg_amplitude = 0.45;
  double arm_amplitude = 0.35;
  double bob = 1.0;
};

/// Per-recording offsets shared by all views of one (subject, condition) take.
struct SequenceMotion {
  double phase = 0.0;
  double x_offset = 0.0;
};

struct SynthConfig {
  std::int64_t num_subjects = 8;
  std::vector<int> views = all_views();
  std::vector<ConditionId> conditions = all_conditions();
  std::int64_t frames_per_sequence = 36;
  std::uint64_t seed = 0;
  std::int64_t canvas_height = 96;
  std::int64_t canvas_width = 72;

  void validate() const;
};

WalkerParams subject_walker(std::uint64_t seed, std::int64_t subject_index);
SequenceMotion sequence_motion(std::uint64_t seed, std::int64_t subject_index, const ConditionId& condition);

/// Raw canvas frame t of a walker seen from `view` degrees.
Image render_walker(const WalkerParams& walker, const SequenceMotion& motion, int view, Condition condition,
                    std::int64_t t, std::int64_t canvas_height = 96, std::int64_t canvas_width = 72);

/// The region a coat may add: the torso ellipse dilated by the coat margin.
Image coat_region(const WalkerParams& walker, const SequenceMotion& motion, int view, std::int64_t t,
                  std::int64_t canvas_height = 96, std::int64_t canvas_width = 72);

/// Zero-padded three-digit subject id, 1-based ("001").
std::string subject_name(std::int64_t subject_index);

struct ManifestEntry {
  SequenceKey key;
  std::int64_t frames = 0;
  std::uint32_t crc32 = 0;  // over the frame files' bytes in order
};

/// Writes root/<subject>/<condition>/<view>/<frame>.pgm plus manifest.json
/// and returns the manifest entries in key order. IoError when unwritable.
std::vector<ManifestEntry> synth_generate(const SynthConfig& config, const std::filesystem::path& root);

}  // namespace motiongait
