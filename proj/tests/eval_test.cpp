#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "motiongait/error.hpp"
#include "motiongait/eval.hpp"
#include "protocol_oracles.hpp"
#include "support.hpp"

using namespace motiongait;
using namespace mgtest;
namespace fs = std::filesystem;


TEST(EmbeddingFile, RoundTripsExactly) {
  const auto dir = temp_dir("emb");
  std::mt19937_64 rng(1);
  auto rs = full_records(2, 5, rng);
  rs[0].descriptor[0] = -0.0f;
  rs[1].descriptor[1] = 3.4e38f;
  rs[2].descriptor[2] = 1e-40f;
  write_embeddings(dir / "e.mgemb", rs);
  const auto back = read_embeddings(dir / "e.mgemb");
  ASSERT_EQ(back.size(), rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    EXPECT_EQ(back[i].key, rs[i].key);
    EXPECT_EQ(std::memcmp(back[i].descriptor.data(), rs[i].descriptor.data(), 5 * sizeof(float)), 0);
  }
  std::ifstream in(dir / "e.mgemb");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "MGEMB1 5 220");
}

TEST(EmbeddingFile, RejectsMalformedFiles) {
  const auto dir = temp_dir("emb_bad");
  EXPECT_THROW(read_embeddings(dir / "none"), IoError);
  std::ofstream(dir / "hdr") << "MGEMB2 1 1\n";
  EXPECT_THROW(read_embeddings(dir / "hdr"), IngestionError);
  std::mt19937_64 rng(2);
  write_embeddings(dir / "ok", full_records(1, 3, rng));
  const auto size = fs::file_size(dir / "ok");
  fs::copy_file(dir / "ok", dir / "short");
  fs::resize_file(dir / "short", size - 2);
  EXPECT_THROW(read_embeddings(dir / "short"), IngestionError);
  fs::copy_file(dir / "ok", dir / "long");
  std::ofstream(dir / "long", std::ios::app | std::ios::binary) << "x";
  EXPECT_THROW(read_embeddings(dir / "long"), IngestionError);
  std::ofstream(dir / "label") << "MGEMB1 0 1\n001 zz-01 090\n";
  EXPECT_THROW(read_embeddings(dir / "label"), IngestionError);
  std::vector<EmbeddingRecord> mixed{{{"001", {Condition::NM, 1}, 0}, {1.0f}}, {{"001", {Condition::NM, 2}, 0}, {1.0f, 2.0f}}};
  EXPECT_THROW(write_embeddings(dir / "mixed", mixed), DimensionError);
}

TEST(Protocol, GalleryAndProbePartition) {
  std::mt19937_64 rng(3);
  const auto rs = full_records(3, 2, rng);
  const auto gp = build_gallery_probe(rs);
  EXPECT_EQ(gp.gallery.size(), 3u * 4u * 11u);
  EXPECT_EQ(gp.probes.at(ProbeGroup::NM).size(), 3u * 2u * 11u);
  EXPECT_EQ(gp.probes.at(ProbeGroup::BG).size(), 3u * 2u * 11u);
  EXPECT_EQ(gp.probes.at(ProbeGroup::CL).size(), 3u * 2u * 11u);
  for (const auto i : gp.gallery) {
    EXPECT_EQ(rs[i].key.condition.condition, Condition::NM);
    EXPECT_LE(rs[i].key.condition.index, 4);
  }
  for (const auto i : gp.probes.at(ProbeGroup::NM)) EXPECT_GE(rs[i].key.condition.index, 5);
  EXPECT_EQ(probe_group_name(ProbeGroup::NM), "NM#5-6");
  EXPECT_EQ(probe_group_name(ProbeGroup::BG), "BG#1-2");
  EXPECT_EQ(probe_group_name(ProbeGroup::CL), "CL#1-2");
}

TEST(Protocol, IdentityDescriptorsScorePerfectly) {
  std::vector<EmbeddingRecord> rs;
  for (int s = 0; s < 6; ++s)
    for (const auto& c : all_conditions())
      for (const int v : all_views()) {
        std::vector<float> d(6, 0.0f);
        d[static_cast<std::size_t>(s)] = 1.0f;
        rs.push_back({{subj(s), c, v}, d});
      }
  const auto report = evaluate(rs);
  for (const auto& [g, group] : report.groups) {
    for (std::size_t a = 0; a < kNumViews; ++a)
      for (std::size_t b = 0; b < kNumViews; ++b) EXPECT_EQ(group.matrix[a][b], 100.0);
    EXPECT_EQ(group.mean, 100.0);
  }
  EXPECT_TRUE(report.warnings.empty());
}

TEST(Protocol, RandomDescriptorsScoreAtChance) {
  std::mt19937_64 rng(4);
  const int subjects = 10;
  double total = 0.0;
  const int trials = 3;
  for (int t = 0; t < trials; ++t) {
    const auto report = evaluate(full_records(subjects, 8, rng));
    for (const auto& [g, group] : report.groups) total += *group.mean;
  }
  EXPECT_NEAR(total / (3 * trials), 100.0 / subjects, 5.0);
}

TEST(Protocol, MatchesDirectRecomputation) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    auto rs = full_records(2, 3, rng);
    // Thin out to at most 200 records, keeping some gallery gaps.
    std::shuffle(rs.begin(), rs.end(), rng);
    rs.resize(150);
    for (auto& r : rs)
      for (auto& x : r.descriptor) x = std::round(x * 2.0f) / 2.0f;  // frequent distance ties
    const auto gp = build_gallery_probe(rs);
    for (const auto g : kProbeGroups) {
      const auto m = rank1_matrix(rs, gp.gallery, gp.probes.at(g));
      const auto o = oracle_matrix(rs, g);
      for (std::size_t a = 0; a < kNumViews; ++a)
        for (std::size_t b = 0; b < kNumViews; ++b) {
          ASSERT_EQ(m[a][b].has_value(), o[a][b].has_value()) << a << "," << b;
          if (m[a][b]) {
            EXPECT_NEAR(*m[a][b], *o[a][b], 1e-9);
          }
        }
    }
  }
}

TEST(Protocol, TiesGoToTheLowestRecordIndex) {
  const std::vector<float> probe{0.0f}, near{1.0f};
  std::vector<EmbeddingRecord> rs{
      {{"001", {Condition::NM, 1}, 0}, near},
      {{"002", {Condition::NM, 1}, 0}, {-1.0f}},
      {{"002", {Condition::NM, 5}, 0}, probe},
      {{"001", {Condition::NM, 5}, 0}, probe},
  };
  const auto m = rank1_matrix(rs, {0, 1}, {2, 3});
  EXPECT_EQ(m[0][0], 50.0);  // both probes pick record 0 (subject 001)
  std::swap(rs[0].key.subject, rs[1].key.subject);
  EXPECT_EQ(rank1_matrix(rs, {0, 1}, {2, 3})[0][0], 50.0);
  const auto only_second = rank1_matrix(rs, {0, 1}, {2});
  EXPECT_EQ(only_second[0][0], 100.0);
}

TEST(Protocol, AbsentGallerySubjectsAreExcludedWithAWarning) {
  std::vector<EmbeddingRecord> rs{
      {{"001", {Condition::NM, 1}, 0}, {0.0f}},
      {{"002", {Condition::NM, 1}, 18}, {5.0f}},
      {{"001", {Condition::NM, 5}, 18}, {0.1f}},
  };
  std::vector<std::string> warnings;
  const auto m = rank1_matrix(rs, {0, 1}, {2}, &warnings);
  EXPECT_EQ(m[1][0], 100.0);
  EXPECT_FALSE(m[1][1].has_value());
  EXPECT_FALSE(m[0][0].has_value());
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("1 probe/gallery-view"), std::string::npos);
}

TEST(Protocol, MeansExcludeTheDiagonalAndAbsentCells) {
  GroupReport g;
  for (std::size_t a = 0; a < kNumViews; ++a)
    for (std::size_t b = 0; b < kNumViews; ++b) g.matrix[a][b] = a == b ? 0.0 : 80.0 + static_cast<double>(b);
  g.matrix[2][5].reset();
  for (auto& c : g.matrix[7]) c.reset();
  g.matrix[9] = {};
  g.matrix[9][9] = 100.0;  // diagonal only
  compute_means(g);
  double row0 = 0.0;
  for (std::size_t b = 1; b < kNumViews; ++b) row0 += 80.0 + static_cast<double>(b);
  EXPECT_NEAR(*g.view_means[0], row0 / 10.0, 1e-12);
  double row2 = 0.0;
  for (std::size_t b = 0; b < kNumViews; ++b)
    if (b != 2 && b != 5) row2 += 80.0 + static_cast<double>(b);
  EXPECT_NEAR(*g.view_means[2], row2 / 9.0, 1e-12);
  EXPECT_FALSE(g.view_means[7].has_value());
  EXPECT_FALSE(g.view_means[9].has_value());
  double grand = 0.0;
  int rows = 0;
  for (const auto& v : g.view_means)
    if (v) {
      grand += *v;
      ++rows;
    }
  EXPECT_EQ(rows, 9);
  EXPECT_NEAR(*g.mean, grand / 9.0, 1e-12);
}

TEST(Report, RendersPublishedRowsAndTheirMeans) {
  // Published per-view averages and means of the three probe conditions.
  const std::map<ProbeGroup, std::pair<std::array<double, kNumViews>, std::string>> published{
      {ProbeGroup::NM, {{96.1, 98.1, 99.0, 98.1, 96.8, 95.7, 97.5, 98.9, 99.3, 98.6, 94.6}, "97.5"}},
      {ProbeGroup::BG, {{93.8, 96.1, 97.1, 96.0, 95.0, 90.6, 94.4, 97.8, 98.3, 96.8, 92.7}, "95.3"}},
      {ProbeGroup::CL, {{77.7, 92.6, 94.1, 91.0, 86.1, 79.9, 85.4, 89.9, 92.2, 87.6, 73.5}, "86.4"}},
  };
  EvalReport report;
  for (const auto& [g, row] : published) {
    GroupReport gr;
    for (std::size_t a = 0; a < kNumViews; ++a)
      for (std::size_t b = 0; b < kNumViews; ++b) gr.matrix[a][b] = a == b ? 0.0 : row.first[a];
    compute_means(gr);
    report.groups[g] = gr;
  }
  const auto table = format_table(report);
  std::istringstream lines(table);
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header.substr(0, 5), "Probe");
  EXPECT_NE(header.find("180"), std::string::npos);
  EXPECT_NE(header.find("Mean"), std::string::npos);
  for (const auto& [g, row] : published) {
    std::string line;
    std::getline(lines, line);
    std::istringstream cells(line);
    std::string name;
    cells >> name;
    EXPECT_EQ(name, probe_group_name(g));
    for (std::size_t v = 0; v < kNumViews; ++v) {
      std::string cell;
      cells >> cell;
      char want[16];
      std::snprintf(want, sizeof want, "%.1f", row.first[v]);
      EXPECT_EQ(cell, want);
    }
    std::string mean;
    cells >> mean;
    EXPECT_EQ(mean, row.second) << name;
  }
  const auto doc = nlohmann::json::parse(report_json(report));
  EXPECT_NEAR(doc["conditions"]["NM#5-6"]["mean"].get<double>(), 97.518, 1e-3);
  EXPECT_EQ(doc["views"].size(), 11u);
}

TEST(Report, AbsentValuesRenderAsDashes) {
  EvalReport report;
  GroupReport g;
  compute_means(g);
  report.groups[ProbeGroup::CL] = g;
  const auto table = format_table(report);
  const auto row = table.substr(table.find("CL#1-2"));
  std::istringstream cells(row);
  std::string tok;
  cells >> tok;
  int dashes = 0;
  while (cells >> tok) dashes += tok == "-" ? 1 : 0;
  EXPECT_EQ(dashes, 12);
  EXPECT_TRUE(nlohmann::json::parse(report_json(report))["conditions"]["CL#1-2"]["mean"].is_null());
}
