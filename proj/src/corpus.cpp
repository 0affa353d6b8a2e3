#include "sigkit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "sigkit/unicode.hpp"

namespace sigkit {

namespace {

constexpr std::array<std::string_view, 5> kEntityNames = {"Medication", "Strength", "Unit", "Mode",
                                                          "Instructions"};
constexpr std::array<std::string_view, 4> kSplitNames = {"train", "validation", "test", "unassigned"};
constexpr std::array<std::string_view, 8> kCategoryKeys = {
    "active_ingredients", "unit",       "mode",      "quantity_of_dose_form",
    "dose_form",          "relation_to_meal", "frequency", "other"};
constexpr std::array<std::string_view, 8> kCategoryLabels = {
    "Active Ingredient", "Unit",      "Mode",     "Quantity of Dose Form",
    "Dose Form",         "Relation to Meal", "Frequency", "Others"};

// Relation-to-meal phrasings accepted in gold and prediction records.
const std::set<std::string>& relation_closure() {
  static const std::set<std::string> k = {
      "before meals", "before meal", "before a meal", "ac",        "after meals", "after meal",
      "after a meal", "postprandial", "pc",           "before bed", "at bedtime", "bedtime",
      "before bedtime", "hs"};
  return k;
}

bool is_special(char32_t c) { return c == U'(' || c == U')' || c == U'[' || c == U']' || c == U'*'; }

bool bad_boundary(const std::u32string& s) {
  if (s.empty()) return false;
  if (is_special(s.front()) || is_special(s.back())) return true;
  // an 'x' joining numbers ("1x1") is a separator, never part of a span edge
  if (s.size() > 1 && s.front() == U'x' && is_ascii_digit(s[1])) return true;
  if (s.size() > 1 && s.back() == U'x' && is_ascii_digit(s[s.size() - 2])) return true;
  return false;
}

std::string ner_field(std::size_t i, std::string_view key = {}) {
  std::string f = "ner[" + std::to_string(i) + "]";
  if (!key.empty()) f += "." + std::string(key);
  return f;
}

}  // namespace

std::string_view to_string(EntityType t) { return kEntityNames[index_of(t)]; }

std::optional<EntityType> parse_entity_type(std::string_view name) {
  for (std::size_t i = 0; i < kEntityNames.size(); ++i)
    if (kEntityNames[i] == name) return kEntityTypes[i];
  return std::nullopt;
}

std::string_view to_string(Split s) { return kSplitNames[static_cast<std::size_t>(s)]; }

std::optional<Split> parse_split(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i)
    if (kSplitNames[i] == name) return static_cast<Split>(i);
  return std::nullopt;
}

std::string_view to_string(Alignment a) {
  switch (a) {
    case Alignment::exact: return "exact";
    case Alignment::boundary_inclusive: return "boundary_inclusive";
    case Alignment::unaligned: return "unaligned";
  }
  return "exact";
}

std::string_view to_string(ExCategory c) { return kCategoryKeys[static_cast<std::size_t>(c)]; }
std::string_view display_name(ExCategory c) { return kCategoryLabels[static_cast<std::size_t>(c)]; }

const std::optional<std::string>* field(const ExpansionRecord& r, ExCategory c) {
  switch (c) {
    case ExCategory::active_ingredients: return nullptr;
    case ExCategory::unit: return &r.unit;
    case ExCategory::mode: return &r.mode;
    case ExCategory::quantity_of_dose_form: return &r.quantity_of_dose_form;
    case ExCategory::dose_form: return &r.dose_form;
    case ExCategory::relation_to_meal: return &r.relation_to_meal;
    case ExCategory::frequency: return &r.frequency;
    case ExCategory::other: return &r.other;
  }
  return nullptr;
}

std::optional<std::string>* field(ExpansionRecord& r, ExCategory c) {
  return const_cast<std::optional<std::string>*>(field(std::as_const(r), c));
}

bool ExpansionRecord::empty() const {
  if (!active_ingredients.empty()) return false;
  for (auto c : kExCategories)
    if (auto f = field(*this, c); f && f->has_value()) return false;
  return true;
}

std::string Violation::describe() const { return statement_id + ": " + field + ": " + rule; }

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::runtime_error([&] {
        std::set<std::string> ids;
        for (const auto& v : violations) ids.insert(v.statement_id);
        std::string msg = "invariant violations in statement(s):";
        for (const auto& id : ids) msg += " " + id;
        for (const auto& v : violations) msg += "\n  " + v.describe();
        return msg;
      }()),
      violations_(std::move(violations)) {}

std::vector<Violation> validate_statement(const MedicationStatement& stmt) {
  std::vector<Violation> out;
  auto flag = [&](std::string field, std::string rule) {
    out.push_back({stmt.id, std::move(field), std::move(rule)});
  };

  if (stmt.id.empty()) flag("id", "id must be non-empty");

  std::u32string text;
  try {
    text = decode_utf8(stmt.text);
  } catch (const Utf8Error& e) {
    flag("text", e.what());
    return out;
  }

  std::array<int, 5> per_type{};
  std::set<std::tuple<int, std::size_t, std::size_t>> seen_spans;

  for (std::size_t i = 0; i < stmt.ner.size(); ++i) {
    const auto& a = stmt.ner[i];
    ++per_type[index_of(a.type)];
    if (a.end < a.start) {
      flag(ner_field(i), "end (" + std::to_string(a.end) + ") < start (" + std::to_string(a.start) + ")");
      continue;
    }
    if (a.end > text.size()) {
      flag(ner_field(i), "span [" + std::to_string(a.start) + ", " + std::to_string(a.end) +
                             ") exceeds text length " + std::to_string(text.size()));
      continue;
    }
    if (a.alignment == Alignment::unaligned) {
      if (a.model_text.empty()) flag(ner_field(i, "model_text"), "unaligned annotation needs model_text");
      continue;
    }

    if (a.zero_width) {
      if (a.start != a.end) flag(ner_field(i), "zero-width annotation must have start == end");
      if (!a.surface.empty()) flag(ner_field(i, "text"), "zero-width annotation must have empty surface");
      if (!a.inferred_value || trim(*a.inferred_value).empty())
        flag(ner_field(i, "inferred"), "zero-width annotation needs a non-empty inferred value");
      continue;
    }

    if (a.start >= a.end) flag(ner_field(i), "non-zero-width annotation must have start < end");
    if (a.surface.empty()) flag(ner_field(i, "text"), "surface must be non-empty");
    if (a.inferred_value) flag(ner_field(i, "inferred"), "inferred value only allowed on zero-width annotations");
    auto slice = encode_utf8(std::u32string_view(text).substr(a.start, a.end - a.start));
    if (slice != a.surface)
      flag(ner_field(i, "text"), "surface \"" + a.surface + "\" != text slice \"" + slice + "\"");
    if (a.alignment == Alignment::exact && bad_boundary(decode_utf8(a.surface)))
      flag(ner_field(i, "text"), "surface starts or ends with an excluded special character");
    if (!seen_spans.insert({static_cast<int>(a.type), a.start, a.end}).second)
      flag(ner_field(i), "duplicate " + std::string(to_string(a.type)) + " span");
  }

  for (auto t : {EntityType::medication, EntityType::strength, EntityType::unit, EntityType::mode})
    if (per_type[index_of(t)] > 1)
      flag("ner", "more than one " + std::string(to_string(t)) + " annotation");

  if (stmt.ex) {
    const auto& ex = *stmt.ex;
    for (std::size_t i = 0; i < ex.active_ingredients.size(); ++i)
      if (trim(ex.active_ingredients[i]).empty())
        flag("ex.active_ingredients[" + std::to_string(i) + "]", "must be non-empty after trimming");
    for (auto c : kExCategories) {
      auto f = field(ex, c);
      if (f && f->has_value() && trim(**f).empty())
        flag("ex." + std::string(to_string(c)), "must be non-empty after trimming");
    }
    if (ex.relation_to_meal && !relation_closure().count(squeeze_spaces(ascii_lower(*ex.relation_to_meal))))
      flag("ex.relation_to_meal", "\"" + *ex.relation_to_meal + "\" is not a before/after meals or before bed phrasing");
  }
  return out;
}

nlohmann::ordered_json to_json(const EntityAnnotation& a) {
  nlohmann::ordered_json j;
  j["type"] = to_string(a.type);
  j["start"] = a.start;
  j["end"] = a.end;
  j["text"] = a.surface;
  j["zero_width"] = a.zero_width;
  if (a.inferred_value) j["inferred"] = *a.inferred_value;
  if (a.alignment != Alignment::exact) j["alignment"] = to_string(a.alignment);
  if (!a.model_text.empty()) j["model_text"] = a.model_text;
  return j;
}

nlohmann::ordered_json to_json(const ExpansionRecord& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (!r.active_ingredients.empty()) j["active_ingredients"] = r.active_ingredients;
  for (auto c : kExCategories)
    if (auto f = field(r, c); f && f->has_value()) j[std::string(to_string(c))] = **f;
  return j;
}

nlohmann::ordered_json to_json(const MedicationStatement& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["split"] = to_string(s.split);
  j["text"] = s.text;
  j["ner"] = nlohmann::ordered_json::array();
  for (const auto& a : s.ner) j["ner"].push_back(to_json(a));
  if (s.ex) j["ex"] = to_json(*s.ex);
  if (!s.provenance.empty()) j["provenance"] = s.provenance;
  return j;
}

std::string to_jsonl_line(const MedicationStatement& s) { return to_json(s).dump(); }

ExpansionRecord expansion_from_json(const nlohmann::json& j) {
  ExpansionRecord r;
  if (!j.is_object()) throw std::invalid_argument("ex must be an object");
  if (auto it = j.find("active_ingredients"); it != j.end()) {
    if (!it->is_array()) throw std::invalid_argument("active_ingredients must be an array");
    for (const auto& v : *it) r.active_ingredients.push_back(v.get<std::string>());
  }
  for (auto c : kExCategories) {
    if (c == ExCategory::active_ingredients) continue;
    if (auto it = j.find(std::string(to_string(c))); it != j.end() && !it->is_null())
      *field(r, c) = it->get<std::string>();
  }
  return r;
}

namespace {

template <typename T>
T require(const nlohmann::json& j, const char* key, std::size_t line, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw CorpusError(line, path + key, "missing");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError(line, path + key, std::string("wrong type: ") + e.what());
  }
}

MedicationStatement statement_from_line(const std::string& raw, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorpusError(line, "<json>", e.what());
  }
  if (!j.is_object()) throw CorpusError(line, "<json>", "expected an object");

  MedicationStatement s;
  s.id = require<std::string>(j, "id", line, "");
  auto split = require<std::string>(j, "split", line, "");
  auto parsed_split = parse_split(split);
  if (!parsed_split) throw CorpusError(line, "split", "unknown split \"" + split + "\"");
  s.split = *parsed_split;
  s.text = require<std::string>(j, "text", line, "");

  auto ner = j.find("ner");
  if (ner == j.end() || !ner->is_array()) throw CorpusError(line, "ner", "missing or not an array");
  for (std::size_t i = 0; i < ner->size(); ++i) {
    const auto& a = (*ner)[i];
    const std::string p = ner_field(i) + ".";
    if (!a.is_object()) throw CorpusError(line, ner_field(i), "expected an object");
    EntityAnnotation ann;
    auto type = require<std::string>(a, "type", line, p);
    auto t = parse_entity_type(type);
    if (!t) throw CorpusError(line, p + "type", "unknown entity type \"" + type + "\"");
    ann.type = *t;
    ann.start = require<std::size_t>(a, "start", line, p);
    ann.end = require<std::size_t>(a, "end", line, p);
    ann.surface = require<std::string>(a, "text", line, p);
    ann.zero_width = require<bool>(a, "zero_width", line, p);
    if (a.contains("inferred") && !a["inferred"].is_null()) ann.inferred_value = require<std::string>(a, "inferred", line, p);
    if (a.contains("alignment")) {
      auto al = require<std::string>(a, "alignment", line, p);
      if (al == "exact") ann.alignment = Alignment::exact;
      else if (al == "boundary_inclusive") ann.alignment = Alignment::boundary_inclusive;
      else if (al == "unaligned") ann.alignment = Alignment::unaligned;
      else throw CorpusError(line, p + "alignment", "unknown alignment \"" + al + "\"");
    }
    if (a.contains("model_text")) ann.model_text = require<std::string>(a, "model_text", line, p);
    s.ner.push_back(std::move(ann));
  }

  if (auto ex = j.find("ex"); ex != j.end() && !ex->is_null()) {
    try {
      s.ex = expansion_from_json(*ex);
    } catch (const std::exception& e) {
      throw CorpusError(line, "ex", e.what());
    }
  }
  if (auto pv = j.find("provenance"); pv != j.end()) {
    try {
      s.provenance = pv->get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(line, "provenance", e.what());
    }
  }
  return s;
}

}  // namespace

Corpus read_corpus(std::istream& in) {
  Corpus out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (trim(raw).empty()) continue;
    out.push_back(statement_from_line(raw, line));
  }
  return out;
}

Corpus load_corpus(std::istream& in) {
  auto corpus = read_corpus(in);
  std::vector<Violation> all;
  for (const auto& s : corpus) {
    auto v = validate_statement(s);
    all.insert(all.end(), v.begin(), v.end());
  }
  if (!all.empty()) throw ValidationError(std::move(all));
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file " + path.string());
  return load_corpus(in);
}

void save_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& s : corpus) out << to_jsonl_line(s) << '\n';
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write corpus file " + path.string());
  save_corpus(corpus, out);
}

namespace {

// Uniform draw in [0, bound) by rejection; independent of the standard
// library's distribution implementations.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

Corpus split_corpus(Corpus corpus, const SplitRatios& r, std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("split_corpus: corpus is empty");
  if (!(r.train > 0 && r.validation > 0 && r.test > 0))
    throw std::invalid_argument("split_corpus: ratios must be positive");
  if (std::abs(r.train + r.validation + r.test - 1.0) > 1e-9)
    throw std::invalid_argument("split_corpus: ratios must sum to 1");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (corpus[a].id != corpus[b].id) return corpus[a].id < corpus[b].id;
    return corpus[a].text < corpus[b].text;
  });

  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(order[i - 1], order[j]);
  }

  const double n = static_cast<double>(corpus.size());
  const auto n_train = static_cast<std::size_t>(std::floor(r.train * n + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(r.validation * n + 1e-9));
  for (std::size_t k = 0; k < order.size(); ++k) {
    Split s = k < n_train ? Split::train : (k < n_train + n_val ? Split::validation : Split::test);
    corpus[order[k]].split = s;
  }
  return corpus;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  for (auto s : {Split::train, Split::validation, Split::test, Split::unassigned}) {
    st.per_split[s] = EntityCounts{};
    st.statements[s] = 0;
  }
  for (const auto& s : corpus) {
    ++st.statements[s.split];
    for (const auto& a : s.ner) {
      ++st.per_split[s.split][index_of(a.type)];
      ++st.total[index_of(a.type)];
    }
  }
  return st;
}

}  // namespace sigkit
