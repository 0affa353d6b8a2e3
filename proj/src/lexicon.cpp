#include "sigkit/lexicon.hpp"

#include <fstream>
#include <stdexcept>

#include "sigkit/unicode.hpp"

namespace sigkit {

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::map<std::string, std::string> lower_map(const nlohmann::json& j, const char* key, bool required) {
  std::map<std::string, std::string> out;
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw std::runtime_error(std::string("lexicon: missing key ") + key);
    return out;
  }
  if (it->is_array()) {
    for (const auto& v : *it) {
      auto s = v.get<std::string>();
      out[ascii_lower(s)] = s;
    }
    return out;
  }
  if (!it->is_object()) throw std::runtime_error(std::string("lexicon: ") + key + " must be an object");
  for (const auto& [k, v] : it->items()) out[ascii_lower(k)] = v.get<std::string>();
  return out;
}

std::set<std::string> lower_set(const nlohmann::json& j, const char* key, bool required) {
  std::set<std::string> out;
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw std::runtime_error(std::string("lexicon: missing key ") + key);
    return out;
  }
  for (const auto& v : *it) out.insert(ascii_lower(v.get<std::string>()));
  return out;
}

const std::string* lookup(const std::map<std::string, std::string>& m, std::string_view token) {
  auto it = m.find(ascii_lower(token));
  return it == m.end() ? nullptr : &it->second;
}

}  // namespace

SigLexicon SigLexicon::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::runtime_error("lexicon: expected a JSON object");
  SigLexicon lx;
  lx.route_codes = lower_map(j, "route_codes", true);
  lx.meal_codes = lower_map(j, "meal_codes", true);
  lx.frequency_codes = lower_map(j, "frequency_codes", true);
  lx.dose_form_words = lower_map(j, "dose_form_words", true);
  lx.prn_markers = lower_set(j, "prn_markers", true);
  lx.thai_tokens = lower_map(j, "thai_tokens", true);
  lx.unit_codes = lower_map(j, "unit_codes", false);
  if (lx.unit_codes.empty())
    lx.unit_codes = {{"mg", "milligram"}, {"m.g.", "milligram"}, {"mcg", "microgram"}, {"\xC2\xB5g", "microgram"}};
  lx.duration_words = lower_map(j, "duration_words", false);
  lx.interval_words = lower_set(j, "interval_words", false);
  if (lx.interval_words.empty()) lx.interval_words = {"hr", "hr.", "hrs", "hrs.", "h", "hour", "hours"};
  return lx;
}

SigLexicon SigLexicon::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

const std::string* SigLexicon::route(std::string_view t) const { return lookup(route_codes, t); }
const std::string* SigLexicon::meal(std::string_view t) const { return lookup(meal_codes, t); }
const std::string* SigLexicon::frequency(std::string_view t) const { return lookup(frequency_codes, t); }
const std::string* SigLexicon::dose_form(std::string_view t) const { return lookup(dose_form_words, t); }
const std::string* SigLexicon::thai(std::string_view t) const { return lookup(thai_tokens, t); }
const std::string* SigLexicon::unit(std::string_view t) const { return lookup(unit_codes, t); }
const std::string* SigLexicon::duration(std::string_view t) const { return lookup(duration_words, t); }
bool SigLexicon::is_prn(std::string_view t) const { return prn_markers.count(ascii_lower(t)) > 0; }
bool SigLexicon::is_interval_word(std::string_view t) const { return interval_words.count(ascii_lower(t)) > 0; }

bool SigLexicon::is_code(std::string_view t) const {
  return route(t) || meal(t) || frequency(t) || unit(t) || is_prn(t);
}

std::vector<std::string> SigLexicon::check_disjoint() const {
  std::vector<std::string> problems;
  const std::vector<std::pair<const char*, std::set<std::string>>> tables = [&] {
    auto keys = [](const std::map<std::string, std::string>& m) {
      std::set<std::string> s;
      for (const auto& [k, _] : m) s.insert(k);
      return s;
    };
    return std::vector<std::pair<const char*, std::set<std::string>>>{
        {"route_codes", keys(route_codes)},       {"meal_codes", keys(meal_codes)},
        {"frequency_codes", keys(frequency_codes)}, {"dose_form_words", keys(dose_form_words)},
        {"prn_markers", prn_markers},             {"unit_codes", keys(unit_codes)}};
  }();
  for (std::size_t a = 0; a < tables.size(); ++a)
    for (std::size_t b = a + 1; b < tables.size(); ++b)
      for (const auto& k : tables[a].second) {
        if (!tables[b].second.count(k)) continue;
        bool dual_role = a == 0 && b == 1;  // route + meal, e.g. opc / oac
        if (!dual_role)
          problems.push_back("\"" + k + "\" appears in both " + tables[a].first + " and " + tables[b].first);
      }
  return problems;
}

std::string BrandMap::normalize_key(std::string_view name) {
  auto key = squeeze_spaces(ascii_lower(name));
  // attached dose-form suffixes stay out of the key
  for (std::string_view suffix : {" cap", " tab", " caps", " tabs"}) {
    if (key.size() > suffix.size() && key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0) {
      key.erase(key.size() - suffix.size());
      break;
    }
  }
  return key;
}

BrandMap BrandMap::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::runtime_error("brand map: expected a JSON object");
  BrandMap m;
  for (const auto& [name, v] : j.items()) {
    BrandEntry e;
    if (!v.contains("ingredients") || !v["ingredients"].is_array() || v["ingredients"].empty())
      throw std::runtime_error("brand map: entry \"" + name + "\" needs a non-empty ingredients array");
    for (const auto& ing : v["ingredients"]) e.ingredients.push_back(ing.get<std::string>());
    if (v.contains("default_unit")) e.default_unit = v["default_unit"].get<std::string>();
    if (v.contains("default_dose_form")) e.default_dose_form = v["default_dose_form"].get<std::string>();
    if (!m.insert(name, std::move(e)))
      throw std::runtime_error("brand map: duplicate key after normalization: \"" + name + "\"");
  }
  return m;
}

BrandMap BrandMap::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

bool BrandMap::insert(std::string_view name, BrandEntry entry) {
  if (entry.ingredients.empty()) throw std::invalid_argument("brand map entry needs ingredients");
  return entries_.emplace(normalize_key(name), std::move(entry)).second;
}

bool BrandMap::erase(std::string_view name) { return entries_.erase(normalize_key(name)) > 0; }

const BrandEntry* BrandMap::find(std::string_view name) const {
  auto it = entries_.find(normalize_key(name));
  return it == entries_.end() ? nullptr : &it->second;
}

}  // namespace sigkit
