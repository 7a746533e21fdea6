#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <unistd.h>

#include "semprobe/annotations.hpp"
#include "semprobe/error.hpp"
#include "semprobe/mask.hpp"
#include "semprobe/rng.hpp"

namespace semprobe::testing {

// Scratch directory removed when the fixture goes out of scope.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = info ? std::string(info->test_suite_name()) + "_" + info->name() : "semprobe";
    for (char& c : name)
      if (c == '/') c = '_';
    path_ = std::filesystem::temp_directory_path() / ("semprobe_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Bitmask random_bitmask(Rng& rng, std::uint32_t h, std::uint32_t w, double density) {
  Bitmask m(h, w);
  for (auto& v : m.data) v = rng.uniform() < density ? 1 : 0;
  return m;
}

// Blobby random mask: a union of a few rectangles, which gives long runs.
inline Bitmask random_blob_mask(Rng& rng, std::uint32_t h, std::uint32_t w) {
  Bitmask m(h, w);
  const int rects = 1 + static_cast<int>(rng.below(3));
  for (int r = 0; r < rects; ++r) {
    const std::uint32_t x0 = static_cast<std::uint32_t>(rng.below(w));
    const std::uint32_t y0 = static_cast<std::uint32_t>(rng.below(h));
    const std::uint32_t x1 = x0 + 1 + static_cast<std::uint32_t>(rng.below(w - x0));
    const std::uint32_t y1 = y0 + 1 + static_cast<std::uint32_t>(rng.below(h - y0));
    for (std::uint32_t y = y0; y < y1; ++y)
      for (std::uint32_t x = x0; x < x1; ++x) m.set(y, x);
  }
  return m;
}

template <typename F>
ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected semprobe::Error";
  return ErrorKind::Config;
}

template <typename F>
std::string error_message_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected semprobe::Error";
  return {};
}

}  // namespace semprobe::testing
