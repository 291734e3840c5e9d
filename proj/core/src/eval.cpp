#include "motiongait/eval.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "motiongait/error.hpp"
#include "motiongait/parallel.hpp"

namespace motiongait {

namespace {
constexpr const char* kEmbeddingMagic = "MGEMB1";

std::size_t view_slot(int view) { return static_cast<std::size_t>(view / 18); }
}  // namespace

void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
  const std::size_t dim = records.empty() ? 0 : records.front().descriptor.size();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << kEmbeddingMagic << ' ' << dim << ' ' << records.size() << '\n';
  for (const auto& r : records) {
    if (r.descriptor.size() != dim) throw DimensionError("embedding records disagree on descriptor length");
    out << r.key.subject << ' ' << r.key.condition.str() << ' ' << view_str(r.key.view) << '\n';
    out.write(reinterpret_cast<const char*>(r.descriptor.data()), static_cast<std::streamsize>(dim * sizeof(float)));
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto bad = [&](const std::string& why) { return IngestionError(path.string() + ": " + why); };
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  long long dim = -1, count = -1;
  if (!(hs >> magic >> dim >> count) || magic != kEmbeddingMagic || dim < 0 || count < 0) {
    throw bad("bad embedding header '" + header + "'");
  }
  std::vector<EmbeddingRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw bad("missing label line for record " + std::to_string(i));
    std::istringstream ls(line);
    std::string subject, cond, view;
    if (!(ls >> subject >> cond >> view)) throw bad("malformed label line '" + line + "'");
    const auto c = parse_condition(cond);
    const auto v = parse_view(view);
    if (!c || !v) throw bad("unknown condition or view in '" + line + "'");
    EmbeddingRecord r{{subject, *c, *v}, std::vector<float>(static_cast<std::size_t>(dim))};
    in.read(reinterpret_cast<char*>(r.descriptor.data()), static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) throw bad("truncated descriptor for record " + std::to_string(i));
    out.push_back(std::move(r));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw bad("trailing data after " + std::to_string(count) + " records");
  return out;
}

std::string probe_group_name(ProbeGroup g) {
  switch (g) {
    case ProbeGroup::NM: return "NM#5-6";
    case ProbeGroup::BG: return "BG#1-2";
    case ProbeGroup::CL: return "CL#1-2";
  }
  return "?";
}

GalleryProbe build_gallery_probe(const std::vector<EmbeddingRecord>& records) {
  GalleryProbe gp;
  for (const auto g : kProbeGroups) gp.probes[g];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& c = records[i].key.condition;
    switch (c.condition) {
      case Condition::NM:
        if (c.index <= 4) gp.gallery.push_back(i);
        else gp.probes[ProbeGroup::NM].push_back(i);
        break;
      case Condition::BG: gp.probes[ProbeGroup::BG].push_back(i); break;
      case Condition::CL: gp.probes[ProbeGroup::CL].push_back(i); break;
    }
  }
  return gp;
}

ViewMatrix rank1_matrix(const std::vector<EmbeddingRecord>& records, const std::vector<std::size_t>& gallery,
                        const std::vector<std::size_t>& probes, std::vector<std::string>* warnings) {
  std::array<std::vector<std::size_t>, kNumViews> gallery_at;
  std::array<std::set<std::string>, kNumViews> subjects_at;
  for (const auto g : gallery) {
    gallery_at[view_slot(records[g].key.view)].push_back(g);
    subjects_at[view_slot(records[g].key.view)].insert(records[g].key.subject);
  }
  const std::size_t dim = records.empty() ? 0 : records.front().descriptor.size();
  for (const auto& r : records)
    if (r.descriptor.size() != dim) throw DimensionError("rank1_matrix: descriptor lengths disagree");

  // hits/total per (probe view, gallery view), filled per probe in parallel.
  struct Outcome {
    std::array<int, kNumViews> usable{}, correct{};
  };
  std::vector<Outcome> outcomes(probes.size());
  parallel_for(probes.size(), [&](std::size_t pi) {
    const auto& probe = records[probes[pi]];
    for (std::size_t vg = 0; vg < kNumViews; ++vg) {
      if (!subjects_at[vg].contains(probe.key.subject)) continue;
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_idx = 0;
      for (const auto g : gallery_at[vg]) {
        double acc = 0.0;
        const auto& a = probe.descriptor;
        const auto& b = records[g].descriptor;
        for (std::size_t q = 0; q < dim; ++q) {
          const double diff = static_cast<double>(a[q]) - static_cast<double>(b[q]);
          acc += diff * diff;
        }
        if (acc < best || (acc == best && g < best_idx)) {
          best = acc;
          best_idx = g;
        }
      }
      outcomes[pi].usable[vg] = 1;
      outcomes[pi].correct[vg] = records[best_idx].key.subject == probe.key.subject ? 1 : 0;
    }
  });

  std::array<std::array<int, kNumViews>, kNumViews> usable{}, correct{};
  std::size_t excluded = 0;
  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    const auto vp = view_slot(records[probes[pi]].key.view);
    for (std::size_t vg = 0; vg < kNumViews; ++vg) {
      usable[vp][vg] += outcomes[pi].usable[vg];
      correct[vp][vg] += outcomes[pi].correct[vg];
      if (!outcomes[pi].usable[vg] && !gallery_at[vg].empty()) ++excluded;
    }
  }
  if (warnings && excluded > 0) {
    warnings->push_back(std::to_string(excluded) + " probe/gallery-view pairs excluded: subject absent from gallery view");
  }
  ViewMatrix m{};
  for (std::size_t vp = 0; vp < kNumViews; ++vp)
    for (std::size_t vg = 0; vg < kNumViews; ++vg)
      if (usable[vp][vg] > 0) m[vp][vg] = 100.0 * correct[vp][vg] / usable[vp][vg];
  return m;
}

void compute_means(GroupReport& group) {
  double grand = 0.0;
  int rows = 0;
  for (std::size_t vp = 0; vp < kNumViews; ++vp) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t vg = 0; vg < kNumViews; ++vg) {
      if (vg == vp || !group.matrix[vp][vg]) continue;
      sum += *group.matrix[vp][vg];
      ++n;
    }
    group.view_means[vp] = n > 0 ? std::optional<double>(sum / n) : std::nullopt;
    if (group.view_means[vp]) {
      grand += *group.view_means[vp];
      ++rows;
    }
  }
  group.mean = rows > 0 ? std::optional<double>(grand / rows) : std::nullopt;
}

EvalReport evaluate(const std::vector<EmbeddingRecord>& records) {
  EvalReport report;
  const auto gp = build_gallery_probe(records);
  if (gp.gallery.empty()) report.warnings.push_back("gallery is empty: no nm-01..nm-04 records");
  for (const auto g : kProbeGroups) {
    GroupReport group;
    group.matrix = rank1_matrix(records, gp.gallery, gp.probes.at(g), &report.warnings);
    compute_means(group);
    report.groups[g] = group;
  }
  return report;
}

std::string format_table(const EvalReport& report) {
  std::string out = "Probe  ";
  char cell[32];
  for (const int v : all_views()) {
    std::snprintf(cell, sizeof cell, " %6d", v);
    out += cell;
  }
  out += "    Mean\n";
  auto fmt = [&](const std::optional<double>& x) {
    if (x) std::snprintf(cell, sizeof cell, " %6.1f", *x);
    else std::snprintf(cell, sizeof cell, " %6s", "-");
    return std::string(cell);
  };
  for (const auto& [g, group] : report.groups) {
    out += probe_group_name(g);
    out += ' ';
    for (const auto& m : group.view_means) out += fmt(m);
    out += "  " + fmt(group.mean) + "\n";
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  using nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& x) { return x ? ordered_json(*x) : ordered_json(nullptr); };
  ordered_json doc;
  doc["views"] = all_views();
  for (const auto& [g, group] : report.groups) {
    ordered_json matrix = ordered_json::array();
    for (const auto& row : group.matrix) {
      ordered_json r = ordered_json::array();
      for (const auto& c : row) r.push_back(opt(c));
      matrix.push_back(r);
    }
    ordered_json means = ordered_json::array();
    for (const auto& m : group.view_means) means.push_back(opt(m));
    doc["conditions"][probe_group_name(g)] = {{"matrix", matrix}, {"view_means", means}, {"mean", opt(group.mean)}};
  }
  doc["warnings"] = report.warnings;
  return doc.dump(2) + "\n";
}

}  // namespace motiongait
