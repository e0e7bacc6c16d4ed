#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "qrel/corpus.hpp"
#include "qrel/rng.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("qrel_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string mini_corpus(const std::string& name) { return std::string(QREL_MINI_CORPUS) + "/" + name; }

// Random store with iids "i0000".."iNNNN" (zero-padded so lexical order is
// row order).
inline qrel::FeatureStore random_store(std::size_t n, std::uint32_t dim, std::uint64_t seed) {
  qrel::Rng rng(seed);
  std::vector<std::string> ids;
  std::vector<float> data;
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = std::to_string(i);
    ids.push_back("i" + std::string(5 - id.size(), '0') + id);
    for (std::uint32_t k = 0; k < dim; ++k) data.push_back(static_cast<float>(rng.normal()));
  }
  return qrel::FeatureStore(dim, std::move(ids), std::move(data));
}

}  // namespace testutil

#include <unistd.h>
