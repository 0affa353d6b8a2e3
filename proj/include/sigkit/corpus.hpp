#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sigkit {

enum class EntityType { medication, strength, unit, mode, instructions };

inline constexpr std::array<EntityType, 5> kEntityTypes = {
    EntityType::medication, EntityType::strength, EntityType::unit, EntityType::mode,
    EntityType::instructions};

inline constexpr std::size_t index_of(EntityType t) { return static_cast<std::size_t>(t); }

std::string_view to_string(EntityType t);
std::optional<EntityType> parse_entity_type(std::string_view name);

enum class Split { train, validation, test, unassigned };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view name);

/// Where a predicted annotation came from relative to the statement text.
/// Gold annotations are always `exact`.
enum class Alignment {
  exact,               // span located on token boundaries
  boundary_inclusive,  // located, but the value carries a bracket/special at its edge
  unaligned,           // value not found in the text; kept so it can be charged as fp
};

std::string_view to_string(Alignment a);

struct EntityAnnotation {
  EntityType type = EntityType::medication;
  std::size_t start = 0;  // scalar offset, inclusive
  std::size_t end = 0;    // scalar offset, exclusive
  std::string surface;
  bool zero_width = false;
  std::optional<std::string> inferred_value;
  Alignment alignment = Alignment::exact;
  std::string model_text;  // the raw cell value when unaligned

  bool operator==(const EntityAnnotation&) const = default;
};

/// The eight expansion categories. Absent optionals / an empty ingredient list mean "not stated".
struct ExpansionRecord {
  std::vector<std::string> active_ingredients;
  std::optional<std::string> unit;
  std::optional<std::string> mode;
  std::optional<std::string> quantity_of_dose_form;
  std::optional<std::string> dose_form;
  std::optional<std::string> relation_to_meal;
  std::optional<std::string> frequency;
  std::optional<std::string> other;

  bool empty() const;
  bool operator==(const ExpansionRecord&) const = default;
};

enum class ExCategory {
  active_ingredients,
  unit,
  mode,
  quantity_of_dose_form,
  dose_form,
  relation_to_meal,
  frequency,
  other,
};

inline constexpr std::array<ExCategory, 8> kExCategories = {
    ExCategory::active_ingredients, ExCategory::unit,        ExCategory::mode,
    ExCategory::quantity_of_dose_form, ExCategory::dose_form, ExCategory::relation_to_meal,
    ExCategory::frequency,          ExCategory::other};

std::string_view to_string(ExCategory c);
/// Human-facing label, e.g. "Relation to Meal".
std::string_view display_name(ExCategory c);

/// Scalar field accessor; nullptr for active_ingredients.
const std::optional<std::string>* field(const ExpansionRecord& r, ExCategory c);
std::optional<std::string>* field(ExpansionRecord& r, ExCategory c);

struct MedicationStatement {
  std::string id;
  Split split = Split::unassigned;
  std::string text;
  std::vector<EntityAnnotation> ner;
  std::optional<ExpansionRecord> ex;
  std::map<std::string, std::string> provenance;

  bool operator==(const MedicationStatement&) const = default;
};

using Corpus = std::vector<MedicationStatement>;

class CorpusError : public std::runtime_error {
 public:
  CorpusError(std::size_t line, std::string field, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + field + ": " + what),
        line_(line),
        field_(std::move(field)) {}
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

struct Violation {
  std::string statement_id;
  std::string field;
  std::string rule;

  std::string describe() const;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Checks every type invariant. Predicted annotations that are unaligned or
/// boundary-inclusive are exempt from the span/surface rules they break by construction.
std::vector<Violation> validate_statement(const MedicationStatement& stmt);

nlohmann::ordered_json to_json(const EntityAnnotation& a);
nlohmann::ordered_json to_json(const ExpansionRecord& r);
nlohmann::ordered_json to_json(const MedicationStatement& s);
ExpansionRecord expansion_from_json(const nlohmann::json& j);

/// Canonical single-line serialization (no trailing newline).
std::string to_jsonl_line(const MedicationStatement& s);

/// Parses JSON Lines without invariant checks. Throws CorpusError.
Corpus read_corpus(std::istream& in);
/// read_corpus + validate_statement on every statement. Throws CorpusError / ValidationError.
Corpus load_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);

void save_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.25;
  double validation = 0.25;
  double test = 0.50;
};

/// Sorts by id, shuffles with a seeded Fisher-Yates, then assigns
/// floor(ratio*n) to train and validation and the remainder to test.
/// The returned corpus keeps the caller's order; only labels change.
Corpus split_corpus(Corpus corpus, const SplitRatios& ratios, std::uint64_t seed);

using EntityCounts = std::array<std::size_t, 5>;

struct CorpusStats {
  std::map<Split, EntityCounts> per_split;
  EntityCounts total{};
  std::map<Split, std::size_t> statements;
};

CorpusStats corpus_stats(const Corpus& corpus);

}  // namespace sigkit
