#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sigkit {

/// Code tables driving tokenization-level NER and abbreviation expansion.
/// All keys are stored lowercase; lookups lowercase their argument (ASCII only).
struct SigLexicon {
  std::map<std::string, std::string> route_codes;      // "po" -> "oral"
  std::map<std::string, std::string> meal_codes;       // "pc" -> "after meals"
  std::map<std::string, std::string> frequency_codes;  // "bid" -> "twice daily"
  std::map<std::string, std::string> dose_form_words;  // "tab" -> "tablet"
  std::set<std::string> prn_markers;                   // "prn"
  std::map<std::string, std::string> thai_tokens;      // placeholder -> meaning
  std::map<std::string, std::string> unit_codes;       // "mg" -> "milligram"
  std::map<std::string, std::string> duration_words;   // "mos." -> "months"
  std::set<std::string> interval_words;                // "hr" in "q 4-6 hr"

  static SigLexicon from_json(const nlohmann::json& j);
  static SigLexicon load(const std::filesystem::path& path);

  const std::string* route(std::string_view token) const;
  const std::string* meal(std::string_view token) const;
  const std::string* frequency(std::string_view token) const;
  const std::string* dose_form(std::string_view token) const;
  const std::string* thai(std::string_view token) const;
  const std::string* unit(std::string_view token) const;
  const std::string* duration(std::string_view token) const;
  bool is_prn(std::string_view token) const;
  bool is_interval_word(std::string_view token) const;

  /// True for route, meal, frequency, unit and prn codes (not dose-form words).
  bool is_code(std::string_view token) const;

  /// Pairwise overlap between code tables, except the dual-role route/meal codes
  /// (opc, oac) which must appear in both. Empty when consistent.
  std::vector<std::string> check_disjoint() const;
};

struct BrandEntry {
  std::vector<std::string> ingredients;
  std::optional<std::string> default_unit;
  std::optional<std::string> default_dose_form;

  bool operator==(const BrandEntry&) const = default;
};

/// Brand / local name -> active ingredients. Keys are normalized with
/// normalize_brand_key, so "Hidil Cap" and "HIDIL" share the key "hidil".
class BrandMap {
 public:
  static std::string normalize_key(std::string_view name);

  static BrandMap from_json(const nlohmann::json& j);
  static BrandMap load(const std::filesystem::path& path);

  /// Adds an entry; an existing key is left untouched. Returns false in that case.
  bool insert(std::string_view name, BrandEntry entry);
  bool erase(std::string_view name);
  const BrandEntry* find(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<std::string, BrandEntry>& entries() const { return entries_; }

 private:
  std::map<std::string, BrandEntry> entries_;
};

}  // namespace sigkit
