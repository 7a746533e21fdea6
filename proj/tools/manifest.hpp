#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace CLI {
class App;
}

namespace semprobe::cli {

std::string sha256_hex(const std::filesystem::path& path);

// Records what produced an output: subcommand, every resolved flag, input
// digests, tool version, seed and wall time.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand);

  void capture_flags(const CLI::App& app);
  void add_input(const std::filesystem::path& path);
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  nlohmann::json to_json() const;

  // Writes <output>.manifest.json.
  void write_next_to(const std::filesystem::path& output) const;

 private:
  std::string subcommand_;
  nlohmann::json flags_ = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::optional<std::uint64_t> seed_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace semprobe::cli
