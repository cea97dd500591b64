#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "qv/common/rng.hpp"
#include "qv/imaging/image.hpp"

namespace qv::testing {

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "qv") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline imaging::Image random_image(SplitMix64& rng, int h, int w) {
  imaging::Image img(h, w);
  for (auto& v : img.pixels) v = rng.uniform();
  return img;
}

}  // namespace qv::testing
