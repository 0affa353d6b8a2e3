#include "sigkit/sigparse.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "sigkit/unicode.hpp"

namespace sigkit {

namespace {

bool is_special(char32_t c) { return c == U'(' || c == U')' || c == U'[' || c == U']' || c == U'*'; }

bool is_numeric_char(char32_t c) { return is_ascii_digit(c) || c == U'.' || c == U'/' || c == U'-'; }

bool is_placeholder(std::u32string_view s) { return s.size() >= 2 && s.front() == 0xAB && s.back() == 0xBB; }

Script classify(std::u32string_view s) {
  bool alpha = false, digit = false, thai = false, other = false;
  for (char32_t c : s) {
    if (is_thai(c)) thai = true;
    else if (is_ascii_alpha(c)) alpha = true;
    else if (is_ascii_digit(c)) digit = true;
    else if (c != U'.' && c != U'-' && c != U'/' && c != U'\'') other = true;
  }
  if (thai || is_placeholder(s)) return Script::thai;
  if (alpha && digit) return Script::mixed;
  if (alpha && !other) return Script::latin;
  if (digit && !alpha && !other) return Script::digit;
  if (alpha) return Script::mixed;
  return Script::symbol;
}

struct Scan {
  std::u32string text;
  std::vector<Token> tokens;
  std::vector<bool> sep;
};

Scan scan(std::string_view utf8) {
  Scan sc;
  sc.text = decode_utf8(utf8);
  const auto& s = sc.text;
  const std::size_t n = s.size();
  sc.sep.assign(n, false);
  for (std::size_t i = 0; i < n; ++i)
    if (is_space(s[i]) || is_special(s[i])) sc.sep[i] = true;

  for (std::size_t i = 0; i < n; ++i) {
    if (s[i] != U'x' && s[i] != U'X') continue;
    if (i > 0 && !(is_ascii_digit(s[i - 1]) || is_space(s[i - 1]))) continue;
    if (i + 1 < n && !(is_ascii_digit(s[i + 1]) || is_space(s[i + 1]))) continue;
    // nearest non-space on each side
    std::size_t j = i;
    while (j > 0 && is_space(s[j - 1])) --j;
    if (j == 0 || !is_ascii_digit(s[j - 1])) continue;
    std::size_t r = j;
    while (r > 0 && !sc.sep[r - 1] && is_numeric_char(s[r - 1])) --r;
    if (r > 0 && !sc.sep[r - 1]) continue;  // numeric fragment glued to letters
    if (!is_ascii_digit(s[r])) continue;
    std::size_t k = i + 1;
    while (k < n && is_space(s[k])) ++k;
    if (k >= n || !is_ascii_digit(s[k])) continue;
    sc.sep[i] = true;
  }

  std::size_t i = 0;
  while (i < n) {
    if (sc.sep[i]) {
      ++i;
      continue;
    }
    std::size_t b = i;
    while (i < n && !sc.sep[i]) ++i;
    auto view = std::u32string_view(s).substr(b, i - b);
    sc.tokens.push_back({b, i, encode_utf8(view), classify(view)});
  }
  return sc;
}

// True when the gap between two tokens holds a numeric `x` / `*` joint.
bool joined_by_times(const Scan& sc, const Token& a, const Token& b) {
  for (std::size_t p = a.end; p < b.start; ++p) {
    char32_t c = sc.text[p];
    if (c == U'*' || c == U'x' || c == U'X') return true;
  }
  return false;
}

bool gap_has(const Scan& sc, std::size_t from, std::size_t to, char32_t c) {
  for (std::size_t p = from; p < to; ++p)
    if (sc.text[p] == c) return true;
  return false;
}

std::string slice(const Scan& sc, std::size_t b, std::size_t e) {
  return encode_utf8(std::u32string_view(sc.text).substr(b, e - b));
}

EntityAnnotation span_of(EntityType type, const Scan& sc, std::size_t b, std::size_t e) {
  EntityAnnotation a;
  a.type = type;
  a.start = b;
  a.end = e;
  a.surface = slice(sc, b, e);
  return a;
}

bool is_quantity_pair(const Scan& sc, std::size_t i) {
  const auto& t = sc.tokens;
  return i + 1 < t.size() && is_numeric_token(t[i].surface) && is_numeric_token(t[i + 1].surface) &&
         joined_by_times(sc, t[i], t[i + 1]);
}

bool is_interval_start(const Scan& sc, std::size_t i) {
  const auto& t = sc.tokens;
  return ascii_lower(t[i].surface) == "q" && i + 1 < t.size() && is_numeric_token(t[i + 1].surface);
}

}  // namespace

std::string_view to_string(Script s) {
  switch (s) {
    case Script::latin: return "latin";
    case Script::thai: return "thai";
    case Script::digit: return "digit";
    case Script::mixed: return "mixed";
    case Script::symbol: return "symbol";
  }
  return "symbol";
}

std::vector<Token> tokenize(std::string_view text) { return scan(text).tokens; }

std::vector<bool> separator_mask(std::string_view text, const std::vector<Token>& tokens) {
  std::vector<bool> mask(scalar_length(text), true);
  for (const auto& t : tokens)
    for (std::size_t p = t.start; p < t.end; ++p) mask[p] = false;
  return mask;
}

bool is_numeric_token(std::string_view s) {
  if (s.empty() || !is_ascii_digit(static_cast<unsigned char>(s.front())) ||
      !is_ascii_digit(static_cast<unsigned char>(s.back())))
    return false;
  for (char c : s)
    if (!is_numeric_char(static_cast<unsigned char>(c))) return false;
  return true;
}

std::optional<double> parse_positive_number(std::string_view s) {
  s = std::string_view(s.data(), s.size());
  if (s.empty()) return std::nullopt;
  int dots = 0;
  for (char c : s) {
    if (c == '.') ++dots;
    else if (c < '0' || c > '9') return std::nullopt;
  }
  if (dots > 1 || s.front() == '.' || s.back() == '.') return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !(v > 0)) return std::nullopt;
  return v;
}

std::optional<std::string> infer_unit(std::string_view medication_surface, std::string_view strength,
                                      const BrandMap& brand_map) {
  auto value = parse_positive_number(trim(strength));
  if (!value) return std::nullopt;
  if (const auto* entry = brand_map.find(medication_surface); entry && entry->default_unit)
    return entry->default_unit;
  if (*value <= 1000.0) return std::string("mg");
  return std::nullopt;
}

std::vector<EntityAnnotation> parse_statement(std::string_view text, const SigLexicon& lx,
                                              const BrandMap& brand_map) {
  std::vector<EntityAnnotation> out;
  Scan sc;
  try {
    sc = scan(text);
  } catch (const Utf8Error&) {
    return out;
  }
  const auto& t = sc.tokens;
  if (t.empty()) return out;

  auto name_like = [&](const Token& tok) {
    if (tok.script != Script::latin && tok.script != Script::mixed) return false;
    bool alpha = false;
    for (char c : tok.surface) alpha = alpha || is_ascii_alpha(static_cast<unsigned char>(c));
    return alpha && !lx.is_code(tok.surface);
  };

  std::size_t cursor = 0;
  while (cursor < t.size() && name_like(t[cursor])) ++cursor;
  if (cursor == 0) {
    // no medication: nothing else is anchored either
  } else {
    out.push_back(span_of(EntityType::medication, sc, t[0].start, t[cursor - 1].end));

    if (cursor < t.size() && parse_positive_number(t[cursor].surface)) {
      const auto& cand = t[cursor];
      bool parenthesized = gap_has(sc, t[cursor - 1].end, cand.start, U'(');
      bool quantity_follows = is_quantity_pair(sc, cursor);
      bool form_follows = cursor + 1 < t.size() && lx.dose_form(t[cursor + 1].surface);
      if (parenthesized || (!quantity_follows && !form_follows)) {
        out.push_back(span_of(EntityType::strength, sc, cand.start, cand.end));
        ++cursor;
        if (cursor < t.size() && lx.unit(t[cursor].surface)) {
          out.push_back(span_of(EntityType::unit, sc, t[cursor].start, t[cursor].end));
          ++cursor;
        } else if (auto unit = infer_unit(out.front().surface, cand.surface, brand_map)) {
          EntityAnnotation zw;
          zw.type = EntityType::unit;
          zw.start = zw.end = cand.end;
          zw.zero_width = true;
          zw.inferred_value = *unit;
          out.push_back(std::move(zw));
        }
      }
    }
  }

  auto dosing = [&](std::size_t i) {
    const auto& tok = t[i];
    if (tok.script == Script::thai) return false;
    return is_numeric_token(tok.surface) || lx.dose_form(tok.surface) || lx.route(tok.surface) ||
           lx.meal(tok.surface) || lx.frequency(tok.surface) || lx.is_prn(tok.surface) ||
           is_interval_start(sc, i);
  };

  for (std::size_t i = cursor; i < t.size(); ++i) {
    if (lx.route(t[i].surface)) {
      out.push_back(span_of(EntityType::mode, sc, t[i].start, t[i].end));
      break;
    }
  }
  for (std::size_t i = cursor; i < t.size(); ++i) {
    if (dosing(i)) {
      out.push_back(span_of(EntityType::instructions, sc, t[i].start, t.back().end));
      break;
    }
  }
  return out;
}

void TableRow::set(Column c, std::string_view value) {
  auto v = trim(value);
  if (v.empty()) columns[c].reset();
  else columns[c] = std::move(v);
}

nlohmann::ordered_json to_json(const TableRow& row) {
  nlohmann::ordered_json j;
  j["original_text"] = row.original_text;
  for (std::size_t c = 0; c < TableRow::kColumns; ++c)
    if (row.columns[c]) j[std::string(TableRow::kKeys[c])] = *row.columns[c];
  if (row.absent) j["absent"] = true;
  return j;
}

TableRow table_row_from_json(const nlohmann::json& j) {
  TableRow row;
  row.original_text = j.at("original_text").get<std::string>();
  for (std::size_t c = 0; c < TableRow::kColumns; ++c) {
    auto key = std::string(TableRow::kKeys[c]);
    if (j.contains(key) && !j[key].is_null()) row.set(static_cast<TableRow::Column>(c), j[key].get<std::string>());
  }
  row.absent = j.value("absent", false);
  return row;
}

std::vector<TableRow> load_table_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open table rows file " + path.string());
  std::vector<TableRow> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(table_row_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

void save_table_rows(std::span<const TableRow> rows, std::ostream& out) {
  for (const auto& r : rows) out << to_json(r).dump() << '\n';
}

TableRow to_table_row(std::string_view text, std::span<const EntityAnnotation> annotations,
                      const SigLexicon& lx) {
  TableRow row;
  row.original_text = std::string(text);

  const EntityAnnotation* instr = nullptr;
  for (const auto& a : annotations) {
    std::string value = a.alignment == Alignment::unaligned ? a.model_text
                        : a.zero_width                       ? a.inferred_value.value_or("")
                                                             : a.surface;
    TableRow::Column col{};
    switch (a.type) {
      case EntityType::medication: col = TableRow::medication; break;
      case EntityType::strength: col = TableRow::strength; break;
      case EntityType::unit: col = TableRow::unit; break;
      case EntityType::mode: col = TableRow::mode; break;
      case EntityType::instructions: col = TableRow::instructions; break;
    }
    if (!row[col]) row.set(col, value);
    if (a.type == EntityType::instructions && !instr && a.alignment != Alignment::unaligned) instr = &a;
  }
  if (!instr) return row;

  Scan sc = scan(text);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < sc.tokens.size(); ++i)
    if (sc.tokens[i].start >= instr->start && sc.tokens[i].end <= instr->end) idx.push_back(i);

  std::optional<std::string> quantity, form, meal_only, dual, freq_pattern, freq_code, interval;
  std::vector<std::string> duration;
  bool pattern = false;
  const auto& t = sc.tokens;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::size_t i = idx[k];
    const auto& s = t[i].surface;
    bool has_next = k + 1 < idx.size();
    if (has_next && is_quantity_pair(sc, i)) {
      if (!quantity) quantity = s;
      if (!freq_pattern) freq_pattern = slice(sc, t[i].start, t[i + 1].end);
      pattern = true;
      ++k;
    } else if (has_next && is_numeric_token(s) && lx.dose_form(t[i + 1].surface)) {
      if (!quantity) quantity = s;
      if (!form) form = *lx.dose_form(t[i + 1].surface);
      ++k;
    } else if (lx.dose_form(s)) {
      if (!form) form = *lx.dose_form(s);
    } else if (lx.route(s) && lx.meal(s)) {
      if (!dual) dual = s;
    } else if (lx.meal(s)) {
      if (!meal_only) meal_only = s;
    } else if (lx.frequency(s)) {
      if (!freq_code) freq_code = s;
    } else if (is_interval_start(sc, i)) {
      std::size_t last = i + 1;
      if (k + 2 < idx.size() && lx.is_interval_word(t[i + 2].surface)) last = i + 2;
      if (!interval) interval = slice(sc, t[i].start, t[last].end);
      k += last - i;
    } else if (t[i].script == Script::thai) {
      duration.push_back(s);
    } else if (ascii_lower(s) == "for" && k + 2 < idx.size() && is_numeric_token(t[i + 1].surface) &&
               lx.duration(t[i + 2].surface)) {
      duration.push_back(slice(sc, t[i].start, t[i + 2].end));
      k += 2;
    }
  }

  if (quantity) row.set(TableRow::quantity, *quantity);
  if (form) row.set(TableRow::dose_form, *form);
  else if (pattern || quantity) row.set(TableRow::dose_form, "tablet");
  if (meal_only) row.set(TableRow::timing, *meal_only);
  else if (dual) row.set(TableRow::timing, *dual);
  if (freq_pattern) row.set(TableRow::frequency, *freq_pattern);
  else if (freq_code) row.set(TableRow::frequency, *freq_code);
  else if (interval) row.set(TableRow::frequency, *interval);
  if (!duration.empty()) {
    std::string d;
    for (const auto& piece : duration) d += (d.empty() ? "" : " ") + piece;
    row.set(TableRow::duration, d);
  }
  return row;
}

std::vector<EntityAnnotation> from_table_row(const TableRow& row, std::string_view original_text) {
  std::vector<EntityAnnotation> out;
  Scan sc = scan(original_text);
  const std::size_t n = sc.text.size();

  std::vector<bool> in_token(n, false), token_edge(n + 1, false);
  for (const auto& tok : sc.tokens) {
    for (std::size_t p = tok.start; p < tok.end; ++p) in_token[p] = true;
    token_edge[tok.start] = token_edge[tok.end] = true;
  }
  auto boundary = [&](std::size_t p) {
    return p == 0 || p == n || token_edge[p] || !in_token[p - 1] || !in_token[p];
  };
  auto locate = [&](const std::u32string& value, std::size_t from) -> std::optional<std::size_t> {
    if (value.empty() || value.size() > n) return std::nullopt;
    for (std::size_t p = from; p + value.size() <= n; ++p)
      if (boundary(p) && boundary(p + value.size()) && sc.text.compare(p, value.size(), value) == 0) return p;
    return std::nullopt;
  };

  std::size_t anchor = 0;
  std::optional<std::size_t> strength_end;

  auto place = [&](EntityType type, TableRow::Column col) {
    const auto& cell = row[col];
    if (!cell) return;
    auto value = trim(*cell);
    if (value.empty()) return;
    auto v32 = decode_utf8(value);
    auto at = locate(v32, anchor);
    if (!at) at = locate(v32, 0);

    EntityAnnotation a;
    a.type = type;
    if (at) {
      a.start = *at;
      a.end = *at + v32.size();
      a.surface = value;
      a.alignment = (is_special(v32.front()) || is_special(v32.back())) ? Alignment::boundary_inclusive
                                                                       : Alignment::exact;
      if (type == EntityType::medication) anchor = a.end;
      if (type == EntityType::strength) strength_end = a.end;
    } else if (type == EntityType::unit) {
      a.start = a.end = strength_end.value_or(n);
      a.zero_width = true;
      a.inferred_value = value;
    } else {
      a.start = a.end = n;
      a.alignment = Alignment::unaligned;
      a.model_text = value;
    }
    out.push_back(std::move(a));
  };

  place(EntityType::medication, TableRow::medication);
  place(EntityType::strength, TableRow::strength);
  place(EntityType::unit, TableRow::unit);
  place(EntityType::mode, TableRow::mode);
  place(EntityType::instructions, TableRow::instructions);
  return out;
}

}  // namespace sigkit
