#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ensimpute/data.hpp"
#include "ensimpute/random.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ensimpute_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Gaussian blobs: class k has mean k * sep on every attribute.
inline ensimpute::Dataset blobs(std::size_t n, std::size_t f, std::size_t classes, double sep, std::uint64_t seed) {
  ensimpute::RandomStream rng(seed);
  std::vector<std::vector<double>> rows(n, std::vector<double>(f));
  std::vector<int> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    labels[r] = static_cast<int>(r % classes);
    for (auto& v : rows[r]) v = labels[r] * sep + rng.normal();
  }
  return ensimpute::make_dataset(rows, labels, classes, "blobs");
}

/// Uniform values on a small integer grid (many ties), random labels.
inline ensimpute::Dataset grid_data(std::size_t n, std::size_t f, std::size_t classes, int levels,
                                    ensimpute::RandomStream& rng) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(f));
  std::vector<int> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    labels[r] = static_cast<int>(rng.index(classes));
    for (auto& v : rows[r]) v = static_cast<double>(rng.index(static_cast<std::size_t>(levels)));
  }
  return ensimpute::make_dataset(rows, labels, classes, "grid");
}

}  // namespace testutil
