#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sigkit/corpus.hpp"

namespace sigkit {

enum class MatchMode { strict, partial };

std::string_view to_string(MatchMode m);
std::optional<MatchMode> parse_match_mode(std::string_view s);

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const MatchCounts&) const = default;
};

using TypeCounts = std::array<MatchCounts, kEntityTypes.size()>;
using CategoryCounts = std::array<MatchCounts, kExCategories.size()>;

struct Metrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;

  bool operator==(const Metrics&) const = default;
};

struct Interval {
  double low = 0;
  double high = 1;
  double confidence = 0.95;
};

/// Greedy one-to-one matching per entity type. Candidates for each gold span
/// (taken left to right) are ranked leftmost, then longest. Partial mode
/// first pairs identical spans, then pairs the rest by overlap, so every
/// strict match is also a partial match.
TypeCounts match_entities(std::span<const EntityAnnotation> gold, std::span<const EntityAnnotation> pred,
                          MatchMode mode);

Metrics prf(const MatchCounts& c);
double harmonic(double p, double r);

/// Mean precision, mean recall, and F1 as their harmonic mean.
Metrics aggregate(std::span<const Metrics> per_type);
Metrics aggregate(const std::map<std::string, Metrics>& per_type);

class EquivalenceLexicon {
 public:
  static EquivalenceLexicon from_json(const nlohmann::json& j);
  static EquivalenceLexicon load(const std::filesystem::path& path);
  /// Compares trimmed strings verbatim.
  static EquivalenceLexicon identity();

  std::string normalize(std::string_view s) const;
  /// Normalized string, replaced by its class representative when it has one.
  std::string canonical(std::string_view s) const;
  bool equivalent(std::string_view a, std::string_view b) const { return canonical(a) == canonical(b); }

  std::size_t class_count() const { return class_count_; }

 private:
  bool fold_ = true;
  std::map<std::string, std::string> word_forms_;
  std::map<std::string, std::string> representative_;
  std::size_t class_count_ = 0;
};

/// Per-category tp/fp/fn. Active ingredients compare as sets (one decision per record).
CategoryCounts score_expansion(const ExpansionRecord& gold, const ExpansionRecord& pred,
                               const EquivalenceLexicon& eq);

/// Exact binomial interval. Throws std::invalid_argument outside
/// 0 <= successes <= n, n >= 1, 0 < confidence < 1.
Interval clopper_pearson(std::size_t successes, std::size_t n, double confidence = 0.95);

/// Statement-level pairing by id; predictions missing for a gold id count as empty.
/// score_corpus_ex skips gold statements that carry no expansion.
TypeCounts score_corpus_ner(const Corpus& gold, const Corpus& pred, MatchMode mode);
CategoryCounts score_corpus_ex(const Corpus& gold, const Corpus& pred, const EquivalenceLexicon& eq);

}  // namespace sigkit
