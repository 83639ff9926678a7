#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "fewshot/embedding_store.hpp"
#include "fewshot/random.hpp"

namespace fewshot::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fewshot-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// `sizes[c]` records for class "c<c>", all in `split`, random N(0,1) vectors.
inline DatasetManifest sized_manifest(const std::vector<std::size_t>& sizes, std::uint32_t dim,
                                      std::uint64_t seed, Split split = Split::kTrain) {
  Rng rng(seed);
  DatasetManifest m;
  m.dimension = dim;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    m.class_table.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < sizes[c]; ++i) {
      EmbeddingRecord r;
      r.sample_id = "c" + std::to_string(c) + "_" + std::to_string(i);
      r.split = split;
      r.label = static_cast<std::uint32_t>(c);
      r.vector.resize(dim);
      for (auto& v : r.vector) v = static_cast<float>(rng.normal());
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

}  // namespace fewshot::testing
