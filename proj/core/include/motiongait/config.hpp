#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "motiongait/dataset.hpp"
#include "motiongait/network.hpp"
#include "motiongait/synth.hpp"
#include "motiongait/training.hpp"

namespace motiongait {

enum class Profile { Desk, Full };

/// Flat key=value run configuration. Defaults depend on the profile; explicit
/// settings (file or command line) override them. Unknown keys and
/// unparsable values raise ConfigError.
class RunConfig {
 public:
  RunConfig() = default;

  /// Lines of `key = value`; '#' starts a comment; blank lines are ignored.
  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig from_file(const std::filesystem::path& path);

  /// Sets one key; the later of two settings wins.
  void set(const std::string& key, const std::string& value);
  /// Parses "key=value".
  void set_assignment(const std::string& assignment);

  /// Resolved value (explicit setting, else the profile default).
  std::string get(const std::string& key) const;
  Profile profile() const;

  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// `model.num_classes = auto` resolves to `auto_classes`.
  NetworkConfig network(std::optional<std::int64_t> auto_classes = std::nullopt) const;
  TrainConfig train() const;
  SynthConfig synth() const;
  SplitConfig split() const;

  /// Every known key with its resolved value, one `key = value` per line in
  /// key order. parse(echo()) reproduces the configuration.
  std::string echo() const;
  /// Writes echo() to dir/config.txt.
  void write_echo(const std::filesystem::path& dir) const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> explicit_;
};

}  // namespace motiongait
