#include "motiongait/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <system_error>

#include "motiongait/error.hpp"
#include "motiongait/image.hpp"
#include "motiongait/parallel.hpp"
#include "motiongait/preprocess.hpp"

namespace fs = std::filesystem;

namespace motiongait {

std::string ConditionId::str() const {
  const char* prefix = condition == Condition::NM ? "nm" : condition == Condition::BG ? "bg" : "cl";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%02d", prefix, index);
  return buf;
}

std::optional<ConditionId> parse_condition(const std::string& name) {
  if (name.size() != 5 || name[2] != '-' || name[3] != '0') return std::nullopt;
  const std::string prefix = name.substr(0, 2);
  const int idx = name[4] - '0';
  if (prefix == "nm" && idx >= 1 && idx <= 6) return ConditionId{Condition::NM, idx};
  if (prefix == "bg" && idx >= 1 && idx <= 2) return ConditionId{Condition::BG, idx};
  if (prefix == "cl" && idx >= 1 && idx <= 2) return ConditionId{Condition::CL, idx};
  return std::nullopt;
}

std::vector<ConditionId> all_conditions() {
  std::vector<ConditionId> out;
  for (int i = 1; i <= 6; ++i) out.push_back({Condition::NM, i});
  for (int i = 1; i <= 2; ++i) out.push_back({Condition::BG, i});
  for (int i = 1; i <= 2; ++i) out.push_back({Condition::CL, i});
  return out;
}

std::vector<int> all_views() {
  std::vector<int> v;
  for (int a = 0; a <= 180; a += 18) v.push_back(a);
  return v;
}

std::optional<int> parse_view(const std::string& name) {
  if (name.size() != 3 || !std::all_of(name.begin(), name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  const int v = std::stoi(name);
  if (v > 180 || v % 18 != 0) return std::nullopt;
  return v;
}

std::string view_str(int view) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03d", view);
  return buf;
}

namespace {
constexpr std::int64_t kFramePixels = kFrameHeight * kFrameWidth;
}

Tensor<float> SilhouetteSequence::to_tensor() const {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(num_frames));
  for (std::int64_t i = 0; i < num_frames; ++i) idx[static_cast<std::size_t>(i)] = i;
  return gather(idx);
}

Tensor<float> SilhouetteSequence::gather(const std::vector<std::int64_t>& indices) const {
  Tensor<float> t(Shape{1, static_cast<std::int64_t>(indices.size()), kFrameHeight, kFrameWidth});
  float* out = t.ptr();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto f = indices[k];
    if (f < 0 || f >= num_frames) throw ContractError("frame index " + std::to_string(f) + " out of range");
    const std::uint8_t* src = mask.data() + f * kFramePixels;
    for (std::int64_t p = 0; p < kFramePixels; ++p) out[static_cast<std::int64_t>(k) * kFramePixels + p] = src[p];
  }
  return t;
}

std::vector<const SequenceEntry*> DatasetIndex::split_entries(bool train) const {
  std::vector<const SequenceEntry*> out;
  for (const auto& e : entries)
    if (is_train(e.key.subject) == train) out.push_back(&e);
  return out;
}

namespace {

std::vector<fs::path> sorted_children(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (directories ? de.is_directory() : de.is_regular_file()) out.push_back(de.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

DatasetIndex load_dataset(const fs::path& root, const SplitConfig& split) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("dataset root not found: " + root.string());
  if (split.train_subjects < 0) throw ConfigError("train_subjects must be non-negative");

  DatasetIndex index;
  index.root = root;
  std::vector<std::string> offenders;
  std::vector<std::string> subjects;
  for (const auto& subject_dir : sorted_children(root, true)) {
    const std::string subject = subject_dir.filename().string();
    bool any = false;
    for (const auto& cond_dir : sorted_children(subject_dir, true)) {
      const auto cond = parse_condition(cond_dir.filename().string());
      if (!cond) {
        offenders.push_back(subject + "/" + cond_dir.filename().string());
        continue;
      }
      for (const auto& view_dir : sorted_children(cond_dir, true)) {
        const auto view = parse_view(view_dir.filename().string());
        if (!view) {
          offenders.push_back(subject + "/" + cond_dir.filename().string() + "/" + view_dir.filename().string());
          continue;
        }
        SequenceEntry entry{{subject, *cond, *view}, view_dir, sorted_children(view_dir, false)};
        if (entry.frame_files.empty()) {
          index.warnings.push_back("empty sequence skipped: " + view_dir.string());
          continue;
        }
        index.entries.push_back(std::move(entry));
        any = true;
      }
    }
    if (any) subjects.push_back(subject);
  }
  if (!offenders.empty()) {
    std::string msg = "malformed dataset directory names:";
    for (const auto& o : offenders) msg += " " + o;
    throw IngestionError(msg);
  }
  std::sort(index.entries.begin(), index.entries.end(),
            [](const SequenceEntry& a, const SequenceEntry& b) { return a.key < b.key; });
  const auto n_train = std::min<std::size_t>(subjects.size(), static_cast<std::size_t>(split.train_subjects));
  index.train_subjects.assign(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_train));
  index.test_subjects.assign(subjects.begin() + static_cast<std::ptrdiff_t>(n_train), subjects.end());
  for (std::size_t i = 0; i < index.train_subjects.size(); ++i)
    index.class_ids[index.train_subjects[i]] = static_cast<std::int64_t>(i);
  return index;
}

std::optional<SilhouetteSequence> load_sequence(const SequenceEntry& entry, std::vector<std::string>& warnings) {
  SilhouetteSequence seq;
  seq.key = entry.key;
  for (const auto& file : entry.frame_files) {
    Image raw;
    try {
      raw = read_pgm(file);
    } catch (const Error& e) {
      warnings.push_back("frame skipped: " + std::string(e.what()));
      continue;
    }
    const auto frame = preprocess_frame(raw);
    if (!frame) {
      warnings.push_back("background-only frame dropped: " + file.string());
      continue;
    }
    for (const float v : frame->pixels) seq.mask.push_back(v >= 0.5f ? 1 : 0);
    ++seq.num_frames;
  }
  if (seq.num_frames == 0) {
    warnings.push_back("sequence has no usable frames: " + entry.directory.string());
    return std::nullopt;
  }
  return seq;
}

std::vector<SilhouetteSequence> load_sequences(const std::vector<const SequenceEntry*>& entries,
                                               std::vector<std::string>& warnings) {
  std::vector<std::optional<SilhouetteSequence>> slots(entries.size());
  std::vector<std::vector<std::string>> local(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) { slots[i] = load_sequence(*entries[i], local[i]); });
  std::vector<SilhouetteSequence> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    warnings.insert(warnings.end(), local[i].begin(), local[i].end());
    if (slots[i]) out.push_back(std::move(*slots[i]));
  }
  return out;
}

}  // namespace motiongait
