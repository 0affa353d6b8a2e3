#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sigkit/corpus.hpp"
#include "sigkit/lexicon.hpp"

namespace sigkit {

enum class Script { latin, thai, digit, mixed, symbol };

std::string_view to_string(Script s);

struct Token {
  std::size_t start = 0;  // scalar offsets
  std::size_t end = 0;
  std::string surface;
  Script script = Script::symbol;

  bool operator==(const Token&) const = default;
};

/// Splits on whitespace, on ( ) [ ] *, and on an `x` standing between two
/// numeric fragments ("1x1", "0.5x1", "1 x 1"). "1/2" and "4-6" stay whole.
std::vector<Token> tokenize(std::string_view text);

/// True when the scalar at `pos` is not part of any token.
std::vector<bool> separator_mask(std::string_view text, const std::vector<Token>& tokens);

bool is_numeric_token(std::string_view surface);
std::optional<double> parse_positive_number(std::string_view surface);

/// Deterministic NER: Medication, Strength, Unit (explicit or zero-width
/// inferred), Mode, Instructions. Total; returns whatever fired.
std::vector<EntityAnnotation> parse_statement(std::string_view text, const SigLexicon& lexicon,
                                              const BrandMap& brand_map);

/// Unit for an elided strength: brand default, else "mg" up to 1000, else nothing.
std::optional<std::string> infer_unit(std::string_view medication_surface, std::string_view strength,
                                      const BrandMap& brand_map);

/// The ten-column table layout used in the NER prompts.
struct TableRow {
  enum Column : std::size_t {
    medication,
    strength,
    unit,
    quantity,
    dose_form,
    mode,
    timing,
    frequency,
    duration,
    instructions,
  };
  static constexpr std::size_t kColumns = 10;
  static constexpr std::array<std::string_view, kColumns> kHeaders = {
      "Medication ET", "Strength ET", "Unit ET", "Quantity of Dose Form per intake ET", "Dose Form ET",
      "Mode ET", "Timing ET", "Frequency ET", "Duration ET", "Instructions ET (Dose, Frequency, Duration)"};
  static constexpr std::array<std::string_view, kColumns> kKeys = {
      "medication", "strength", "unit", "quantity", "dose_form",
      "mode", "timing", "frequency", "duration", "instructions"};

  std::string original_text;
  std::array<std::optional<std::string>, kColumns> columns;
  bool absent = false;  // set by response parsing when the model produced no row

  const std::optional<std::string>& operator[](Column c) const { return columns[c]; }
  std::optional<std::string>& operator[](Column c) { return columns[c]; }

  /// Stores the value, mapping empty/blank strings to an absent cell.
  void set(Column c, std::string_view value);

  bool operator==(const TableRow&) const = default;
};

nlohmann::ordered_json to_json(const TableRow& row);
TableRow table_row_from_json(const nlohmann::json& j);
std::vector<TableRow> load_table_rows(const std::filesystem::path& path);
void save_table_rows(std::span<const TableRow> rows, std::ostream& out);

TableRow to_table_row(std::string_view text, std::span<const EntityAnnotation> annotations,
                      const SigLexicon& lexicon);

/// Locates each entity cell in the text (leftmost whole-token match).
/// Unit values missing from the text become zero-width; other missing values
/// become unaligned annotations at the end of the text.
std::vector<EntityAnnotation> from_table_row(const TableRow& row, std::string_view original_text);

}  // namespace sigkit
