#include "motiongait/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "motiongait/error.hpp"

namespace motiongait {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string join(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

using Defaults = std::map<std::string, std::string>;

Defaults profile_defaults(Profile p) {
  const NetworkConfig net = p == Profile::Desk ? desk_profile() : full_profile();
  const TrainConfig train;
  const SynthConfig synth;
  const bool desk = p == Profile::Desk;
  return {
      {"profile", desk ? "desk" : "full"},
      {"seed", "0"},
      {"model.channels", join(net.stage_channels)},
      {"model.mge_blocks", std::to_string(net.num_mge_blocks)},
      {"model.embed_dim", std::to_string(net.embed_dim)},
      {"model.num_classes", "auto"},
      {"model.stem_stride", std::to_string(net.stem_stride)},
      {"model.spatial_pool", net.spatial_pool ? "true" : "false"},
      {"mem.enabled", "true"},
      {"mem.clip_len", std::to_string(net.clip_len)},
      {"ffe.local", "true"},
      {"ffe.num_parts", std::to_string(net.num_parts)},
      {"lta.kernel_t", std::to_string(net.lta_kernel_t)},
      {"lta.stride_t", std::to_string(net.lta_stride_t)},
      {"gem.p_init", fmt_double(net.gem_p_init)},
      {"train.P", "8"},
      {"train.K", desk ? "2" : "8"},
      {"train.margin", fmt_double(train.margin)},
      {"train.lr", desk ? "0.005" : "0.0001"},
      {"train.beta1", fmt_double(train.adam.beta1)},
      {"train.beta2", fmt_double(train.adam.beta2)},
      {"train.eps", fmt_double(train.adam.eps)},
      {"train.iterations", desk ? "2000" : "90000"},
      {"train.frames", std::to_string(train.frames_per_sample)},
      {"train.checkpoint_every", desk ? "500" : "10000"},
      {"data.train_subjects", "74"},
      {"synth.subjects", std::to_string(synth.num_subjects)},
      {"synth.frames", std::to_string(synth.frames_per_sequence)},
  };
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, value] : profile_defaults(Profile::Desk)) k.push_back(key);
    return k;
  }();
  return keys;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError("unknown config key '" + key + "'");
  if (key == "profile" && value != "desk" && value != "full") {
    throw ConfigError("profile must be desk or full, got '" + value + "'");
  }
  explicit_[key] = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

Profile RunConfig::profile() const {
  const auto it = explicit_.find("profile");
  return it != explicit_.end() && it->second == "full" ? Profile::Full : Profile::Desk;
}

std::string RunConfig::get(const std::string& key) const {
  if (const auto it = explicit_.find(key); it != explicit_.end()) return it->second;
  const auto defaults = profile_defaults(profile());
  const auto it = defaults.find(key);
  if (it == defaults.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  return parse_int(key, get(key));
}

double RunConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

NetworkConfig RunConfig::network(std::optional<std::int64_t> auto_classes) const {
  NetworkConfig c = profile() == Profile::Desk ? desk_profile() : full_profile();
  c.stage_channels.clear();
  std::stringstream ss(get("model.channels"));
  std::string item;
  while (std::getline(ss, item, ',')) c.stage_channels.push_back(parse_int("model.channels", trim(item)));
  c.num_mge_blocks = get_int("model.mge_blocks");
  c.embed_dim = get_int("model.embed_dim");
  if (get("model.num_classes") == "auto") {
    if (!auto_classes) throw ConfigError("model.num_classes is auto but no training split is available");
    c.num_classes = *auto_classes;
  } else {
    c.num_classes = get_int("model.num_classes");
  }
  c.stem_stride = get_int("model.stem_stride");
  c.spatial_pool = get_bool("model.spatial_pool");
  c.use_mem = get_bool("mem.enabled");
  c.clip_len = get_int("mem.clip_len");
  c.use_local = get_bool("ffe.local");
  c.num_parts = get_int("ffe.num_parts");
  c.lta_kernel_t = get_int("lta.kernel_t");
  c.lta_stride_t = get_int("lta.stride_t");
  c.gem_p_init = get_double("gem.p_init");
  c.validate();
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.P = get_int("train.P");
  t.K = get_int("train.K");
  t.margin = get_double("train.margin");
  t.adam.lr = get_double("train.lr");
  t.adam.beta1 = get_double("train.beta1");
  t.adam.beta2 = get_double("train.beta2");
  t.adam.eps = get_double("train.eps");
  t.iterations = get_int("train.iterations");
  t.frames_per_sample = get_int("train.frames");
  t.checkpoint_every = get_int("train.checkpoint_every");
  t.seed = static_cast<std::uint64_t>(get_int("seed"));
  t.validate();
  return t;
}

SynthConfig RunConfig::synth() const {
  SynthConfig s;
  s.num_subjects = get_int("synth.subjects");
  s.frames_per_sequence = get_int("synth.frames");
  s.seed = static_cast<std::uint64_t>(get_int("seed"));
  s.validate();
  return s;
}

SplitConfig RunConfig::split() const {
  SplitConfig s;
  s.train_subjects = get_int("data.train_subjects");
  if (s.train_subjects < 0) throw ConfigError("data.train_subjects must be non-negative");
  return s;
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& key : known_keys()) out += key + " = " + get(key) + "\n";
  return out;
}

void RunConfig::write_echo(const std::filesystem::path& dir) const {
  std::ofstream out(dir / "config.txt", std::ios::trunc);
  out << echo();
  if (!out) throw IoError("cannot write " + (dir / "config.txt").string());
}

}  // namespace motiongait
