#include "manifest.hpp"

#include <array>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "semprobe/error.hpp"
#include "semprobe/storage.hpp"
#include "semprobe/version.hpp"

namespace semprobe::cli {

std::string sha256_hex(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Storage, "SHA-256 failed for " + path.string());
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

RunManifest::RunManifest(std::string subcommand)
    : subcommand_(std::move(subcommand)), start_(std::chrono::steady_clock::now()) {}

void RunManifest::capture_flags(const CLI::App& app) {
  for (const CLI::Option* opt : app.get_options()) {
    if (opt == app.get_help_ptr() || opt == app.get_help_all_ptr()) continue;
    const std::string name = opt->get_name(false, true);
    if (name.empty()) continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      flags_[name] = results.size() == 1 ? nlohmann::json(results.front()) : nlohmann::json(results);
    } else if (!opt->get_default_str().empty()) {
      flags_[name] = opt->get_default_str();
    } else {
      flags_[name] = nullptr;
    }
  }
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_.emplace_back(path.string(), sha256_hex(path));
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [path, digest] : inputs_) inputs.push_back({{"path", path}, {"sha256", digest}});
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  return nlohmann::json{{"subcommand", subcommand_},
                        {"flags", flags_},
                        {"inputs", inputs},
                        {"tool", "semprobe"},
                        {"version", kVersion},
                        {"seed", seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr)},
                        {"wall_time_s", elapsed}};
}

void RunManifest::write_next_to(const std::filesystem::path& output) const {
  auto path = output;
  path += ".manifest.json";
  write_json(path, to_json());
}

}  // namespace semprobe::cli
