#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mid/datagen.hpp"
#include "mid/networks.hpp"
#include "mid/noise.hpp"
#include "mid/trainer.hpp"

namespace mid {

/// Flat sectioned key=value config ([section] headers, '#' comments).
class Config {
 public:
  static Config parse_file(const std::filesystem::path& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  std::size_t get_size(const std::string& section, const std::string& key,
                       std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;

  /// Rejects keys outside the schema with an error naming the key and the
  /// accepted values. Schema maps section -> allowed keys.
  void validate_schema(
      const std::map<std::string, std::vector<std::string>>& schema) const;

  /// Sorted canonical dump; stable input for config hashing.
  std::string canonical_string() const;
  std::uint64_t hash() const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Builders from the [process], [model], [train], [scene], [signal] sections.
NoiseProcessSpec process_from_config(const Config& cfg);
ModelSpec model_from_config(const Config& cfg);
TrainConfig train_config_from_config(const Config& cfg, std::uint64_t seed_override,
                                     bool has_seed_override);
SceneSpec scene_spec_from_config(const Config& cfg);
SignalSpec signal_spec_from_config(const Config& cfg);

}  // namespace mid
