#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "motiongait/dataset.hpp"

namespace motiongait {

struct EmbeddingRecord {
  SequenceKey key;
  std::vector<float> descriptor;
};

/// Text header "MGEMB1 <dim> <count>\n", then per record a label line
/// "subject condition view\n" followed by dim little-endian float32 values.
void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path);

enum class ProbeGroup { NM, BG, CL };
inline constexpr std::array<ProbeGroup, 3> kProbeGroups{ProbeGroup::NM, ProbeGroup::BG, ProbeGroup::CL};
/// "NM#5-6", "BG#1-2", "CL#1-2".
std::string probe_group_name(ProbeGroup g);

struct GalleryProbe {
  std::vector<std::size_t> gallery;                        // record indices, NM#1-4
  std::map<ProbeGroup, std::vector<std::size_t>> probes;   // record indices per group
};

/// Gallery = every nm-01..nm-04 record; probes = nm-05/06, bg-01/02, cl-01/02.
GalleryProbe build_gallery_probe(const std::vector<EmbeddingRecord>& records);

inline constexpr std::size_t kNumViews = 11;
using ViewMatrix = std::array<std::array<std::optional<double>, kNumViews>, kNumViews>;

/// Cell (probe view, gallery view) holds the percentage of probes whose
/// nearest gallery record (Euclidean, ties to the lowest record index) at the
/// gallery view shares their subject. Probes whose subject has no gallery
/// record at that view are left out of the cell (noted in `warnings`); a cell
/// with no usable probe or no gallery is absent.
ViewMatrix rank1_matrix(const std::vector<EmbeddingRecord>& records, const std::vector<std::size_t>& gallery,
                        const std::vector<std::size_t>& probes, std::vector<std::string>* warnings = nullptr);

struct GroupReport {
  ViewMatrix matrix{};
  std::array<std::optional<double>, kNumViews> view_means{};  // off-diagonal, present cells
  std::optional<double> mean;                                 // over probe views with a mean
};

struct EvalReport {
  std::map<ProbeGroup, GroupReport> groups;
  std::vector<std::string> warnings;
};

/// Fills view_means and mean from the matrix; the diagonal never contributes.
void compute_means(GroupReport& group);

EvalReport evaluate(const std::vector<EmbeddingRecord>& records);

/// One row per probe group, eleven view columns and the mean, one decimal.
std::string format_table(const EvalReport& report);
std::string report_json(const EvalReport& report);

}  // namespace motiongait
