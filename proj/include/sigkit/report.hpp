#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigkit/evalkit.hpp"

namespace sigkit {

/// Rows of P/R/F1 cells under one or more column groups ("Strict", "Partial"),
/// closed by an Average row per group.
struct MetricTable {
  std::string title;
  std::string row_heading = "Entity";
  std::vector<std::string> groups;
  std::vector<std::string> row_names;
  std::vector<std::vector<Metrics>> cells;                    // [row][group]
  std::vector<std::vector<std::optional<MatchCounts>>> counts;  // optional, same shape

  void add_row(std::string name, std::vector<Metrics> metrics, std::vector<std::optional<MatchCounts>> raw = {});
  /// Empty when the table has no rows.
  std::optional<Metrics> average(std::size_t group) const;
};

struct CiAnnotation {
  std::string label;
  std::size_t successes = 0;
  std::size_t n = 0;
  Interval interval;
};

CiAnnotation make_ci(std::string label, std::size_t successes, std::size_t n, double confidence = 0.95);

struct Report {
  std::string title = "sigkit evaluation report";
  std::vector<MetricTable> tables;
  std::vector<CiAnnotation> intervals;
};

MetricTable ner_table(std::string title, const TypeCounts& strict, const TypeCounts& partial);
MetricTable ex_table(std::string title, const CategoryCounts& counts);

/// Fixed-width text, values rounded to two decimals.
std::string render_text(const Report& report);
/// Same content, unrounded.
nlohmann::ordered_json render_json(const Report& report);
Report report_from_json(const nlohmann::json& j);

}  // namespace sigkit
