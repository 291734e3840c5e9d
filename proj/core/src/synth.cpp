#include "motiongait/synth.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <system_error>

#include <json.hpp>

#include "motiongait/error.hpp"
#include "motiongait/parallel.hpp"

namespace fs = std::filesystem;

namespace motiongait {

namespace {

constexpr double kCoatMargin = 3.0;

// Portable uniform draw in [lo, hi).
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

struct Vec2 {
  double x, y;
};

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

struct Ellipse {
  Vec2 c;
  double rx, ry;
  bool contains(Vec2 p, double grow = 0.0) const {
    const double ex = (p.x - c.x) / (rx + grow), ey = (p.y - c.y) / (ry + grow);
    return ex * ex + ey * ey <= 1.0;
  }
};

struct Capsule {
  Vec2 a, b;
  double r;
};

// Body pose at one frame, projected to the image plane.
struct Pose {
  Ellipse torso, head, blob;
  std::vector<Capsule> limbs;
};

Pose pose_at(const WalkerParams& w, const SequenceMotion& m, int view, std::int64_t t, std::int64_t height,
             std::int64_t width) {
  const double v = view * std::numbers::pi / 180.0;
  const double sv = std::sin(v), cv = std::cos(v);
  const double omega = 2.0 * std::numbers::pi / w.period;
  const double cycle = omega * static_cast<double>(t) + m.phase;
  const double hip_y = static_cast<double>(height) - 6.0 - w.leg_length - w.bob * std::abs(std::sin(cycle));
  const double cx = static_cast<double>(width) / 2.0 + m.x_offset;
  const double shear = 0.15 * cv;
  // Body frame (forward f, lateral l, vertical y) to image coordinates.
  auto project = [&](double f, double l, double y) { return Vec2{cx + f * sv + l * cv + shear * (y - hip_y), y}; };
  auto span = [&](double depth, double lateral) { return depth * std::abs(sv) + lateral * std::abs(cv); };

  Pose p;
  const double torso_cy = hip_y - w.torso_length / 2.0;
  p.torso = {project(0, 0, torso_cy), span(w.torso_half_depth, w.torso_half_width), w.torso_length / 2.0};
  const double head_cy = hip_y - w.torso_length - 1.0 - w.head_radius;
  p.head = {project(0, 0, head_cy), w.head_radius, w.head_radius};
  const double blob_f = -(w.torso_half_depth + 3.0);
  p.blob = {project(blob_f, 0, hip_y - w.torso_length * 0.55), span(4.5, w.torso_half_width + 1.0), 7.0};

  const double theta = w.leg_amplitude * std::sin(cycle);
  const double hip_l = w.torso_half_width * 0.45;
  for (const double side : {-1.0, 1.0}) {
    const double th = side * theta;
    p.limbs.push_back({project(0, side * hip_l, hip_y),
                       project(w.leg_length * std::sin(th), side * hip_l, hip_y + w.leg_length * std::cos(th)),
                       w.limb_radius});
  }
  const double shoulder_y = hip_y - w.torso_length * 0.85;
  const double arm_l = w.torso_half_width + 1.0;
  const double phi = w.arm_amplitude * std::sin(cycle);
  for (const double side : {-1.0, 1.0}) {
    const double th = -side * phi;
    p.limbs.push_back({project(0, side * arm_l, shoulder_y),
                       project(w.arm_length * std::sin(th), side * arm_l, shoulder_y + w.arm_length * std::cos(th)),
                       w.limb_radius * 0.8});
  }
  return p;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_subjects < 1) throw ConfigError("synth: num_subjects must be positive");
  if (frames_per_sequence < 1) throw ConfigError("synth: frames_per_sequence must be positive");
  if (views.empty() || conditions.empty()) throw ConfigError("synth: views and conditions must be non-empty");
  if (canvas_height < 32 || canvas_width < 16) throw ConfigError("synth: canvas too small");
  for (const int v : views)
    if (v < 0 || v > 180 || v % 18 != 0) throw ConfigError("synth: invalid view " + std::to_string(v));
}

WalkerParams subject_walker(std::uint64_t seed, std::int64_t subject_index) {
  auto rng = seeded(seed, static_cast<std::uint64_t>(subject_index), 0x57a1);
  WalkerParams w;
  w.leg_length = uniform(rng, 30.0, 38.0);
  w.arm_length = uniform(rng, 21.0, 28.0);
  w.torso_length = uniform(rng, 22.0, 28.0);
  w.torso_half_width = uniform(rng, 6.0, 9.0);
  w.torso_half_depth = uniform(rng, 4.0, 6.5);
  w.head_radius = uniform(rng, 5.0, 7.0);
  w.limb_radius = uniform(rng, 2.0, 3.2);
  w.period = uniform(rng, 12.0, 22.0);
  w.leg_amplitude = uniform(rng, 0.3, 0.6);
  w.arm_amplitude = uniform(rng, 0.15, 0.5);
  w.bob = uniform(rng, 0.0, 2.0);
  return w;
}

SequenceMotion sequence_motion(std::uint64_t seed, std::int64_t subject_index, const ConditionId& condition) {
  const auto tag = static_cast<std::uint64_t>(condition.condition) * 16 + static_cast<std::uint64_t>(condition.index);
  auto rng = seeded(seed, static_cast<std::uint64_t>(subject_index), 0x1000 + tag);
  SequenceMotion m;
  m.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  m.x_offset = uniform(rng, -5.0, 5.0);
  return m;
}

Image render_walker(const WalkerParams& walker, const SequenceMotion& motion, int view, Condition condition,
                    std::int64_t t, std::int64_t canvas_height, std::int64_t canvas_width) {
  const Pose p = pose_at(walker, motion, view, t, canvas_height, canvas_width);
  Image img(canvas_height, canvas_width);
  for (std::int64_t y = 0; y < canvas_height; ++y)
    for (std::int64_t x = 0; x < canvas_width; ++x) {
      const Vec2 q{static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5};
      bool on = p.torso.contains(q) || p.head.contains(q);
      for (const auto& c : p.limbs) on = on || segment_distance(q, c.a, c.b) <= c.r;
      if (condition == Condition::BG) on = on || p.blob.contains(q);
      if (condition == Condition::CL) on = on || p.torso.contains(q, kCoatMargin);
      if (on) img.at(y, x) = 1.0f;
    }
  return img;
}

Image coat_region(const WalkerParams& walker, const SequenceMotion& motion, int view, std::int64_t t,
                  std::int64_t canvas_height, std::int64_t canvas_width) {
  const Pose p = pose_at(walker, motion, view, t, canvas_height, canvas_width);
  Image img(canvas_height, canvas_width);
  for (std::int64_t y = 0; y < canvas_height; ++y)
    for (std::int64_t x = 0; x < canvas_width; ++x)
      if (p.torso.contains({static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5}, kCoatMargin))
        img.at(y, x) = 1.0f;
  return img;
}

std::string subject_name(std::int64_t subject_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03lld", static_cast<long long>(subject_index + 1));
  return buf;
}

std::vector<ManifestEntry> synth_generate(const SynthConfig& config, const fs::path& root) {
  config.validate();
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw IoError("cannot create dataset root " + root.string());

  struct Job {
    std::int64_t subject;
    ConditionId condition;
    int view;
  };
  std::vector<Job> jobs;
  for (std::int64_t s = 0; s < config.num_subjects; ++s)
    for (const auto& c : config.conditions)
      for (const int v : config.views) jobs.push_back({s, c, v});

  std::vector<ManifestEntry> manifest(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    const WalkerParams walker = subject_walker(config.seed, job.subject);
    const SequenceMotion motion = sequence_motion(config.seed, job.subject, job.condition);
    const fs::path dir = root / subject_name(job.subject) / job.condition.str() / view_str(job.view);
    std::error_code dir_ec;
    fs::create_directories(dir, dir_ec);
    if (dir_ec) throw IoError("cannot create " + dir.string());
    uLong crc = crc32(0L, Z_NULL, 0);
    for (std::int64_t t = 0; t < config.frames_per_sequence; ++t) {
      const Image frame = render_walker(walker, motion, job.view, job.condition.condition, t,
                                        config.canvas_height, config.canvas_width);
      const auto bytes = encode_pgm(frame);
      crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
      char name[32];
      std::snprintf(name, sizeof name, "%04lld.pgm", static_cast<long long>(t));
      std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw IoError("cannot write " + (dir / name).string());
    }
    manifest[i] = {{subject_name(job.subject), job.condition, job.view}, config.frames_per_sequence,
                   static_cast<std::uint32_t>(crc)};
  });
  std::sort(manifest.begin(), manifest.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.key < b.key; });

  nlohmann::ordered_json doc;
  doc["format"] = "motiongait-dataset";
  doc["version"] = 1;
  doc["seed"] = config.seed;
  doc["frames_per_sequence"] = config.frames_per_sequence;
  std::vector<std::string> subjects;
  for (std::int64_t s = 0; s < config.num_subjects; ++s) subjects.push_back(subject_name(s));
  doc["subjects"] = subjects;
  doc["num_sequences"] = manifest.size();
  auto& seqs = doc["sequences"] = nlohmann::ordered_json::array();
  for (const auto& m : manifest) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "%08x", m.crc32);
    seqs.push_back({{"subject", m.key.subject},
                    {"condition", m.key.condition.str()},
                    {"view", view_str(m.key.view)},
                    {"frames", m.frames},
                    {"crc32", hex}});
  }
  std::ofstream out(root / "manifest.json", std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("cannot write manifest in " + root.string());
  return manifest;
}

}  // namespace motiongait
