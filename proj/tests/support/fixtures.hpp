#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "sigkit/corpus.hpp"
#include "sigkit/lexicon.hpp"

namespace fixtures {

inline std::filesystem::path source_dir() { return SIGKIT_SOURCE_DIR; }
inline std::filesystem::path data(const std::string& name) { return source_dir() / "data" / name; }

inline const sigkit::SigLexicon& lexicon() {
  static const auto lx = sigkit::SigLexicon::load(data("lexicon.json"));
  return lx;
}
inline const sigkit::BrandMap& brands() {
  static const auto bm = sigkit::BrandMap::load(data("brand_map.json"));
  return bm;
}
inline const sigkit::Corpus& seed() {
  static const auto c = sigkit::load_corpus(data("seed_corpus.jsonl"));
  return c;
}
inline const sigkit::MedicationStatement& statement(const std::string& id) {
  for (const auto& s : seed())
    if (s.id == id) return s;
  throw std::out_of_range(id);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("sigkit-" + tag + "-" + std::to_string(rng() % 1000000000));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
