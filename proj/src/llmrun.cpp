#include "sigkit/llmrun.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sigkit/digest.hpp"
#include "sigkit/table_text.hpp"
#include "sigkit/unicode.hpp"

namespace sigkit {

std::string request_hash(const CompletionRequest& request) {
  std::string material = request.prompt;
  material += '\n';
  for (const auto& [k, v] : request.backend_params) {  // std::map iterates sorted
    material += k;
    material += '=';
    material += v;
    material += '\n';
  }
  return sha256_hex(material);
}

std::string complete(Backend& backend, const CompletionRequest& request) { return backend.complete(request); }

void MockBackend::add_fixture(const CompletionRequest& request, std::string response) {
  fixtures_[request_hash(request)] = std::move(response);
}

void MockBackend::add_fixture_by_hash(std::string hash, std::string response) {
  fixtures_[std::move(hash)] = std::move(response);
}

std::string MockBackend::complete(const CompletionRequest& request) {
  auto h = request_hash(request);
  auto it = fixtures_.find(h);
  if (it == fixtures_.end()) throw BackendError("mock backend has no fixture for request " + h);
  return it->second;
}

// ---------------------------------------------------------------- cassettes

Cassette::Cassette(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      entries_.push_back({j.at("request_hash").get<std::string>(), j.at("prompt_text").get<std::string>(),
                          j.at("response_text").get<std::string>(), j.value("timestamp", std::string())});
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": bad cassette entry: " + e.what());
    }
  }
}

const CassetteEntry* Cassette::find(std::string_view hash) const {
  std::lock_guard lock(mu_);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
    if (it->request_hash == hash) return &*it;
  return nullptr;
}

void Cassette::append(CassetteEntry entry) {
  std::lock_guard lock(mu_);
  if (path_) {
    nlohmann::ordered_json j;
    j["request_hash"] = entry.request_hash;
    j["prompt_text"] = entry.prompt_text;
    j["response_text"] = entry.response_text;
    j["timestamp"] = entry.timestamp;
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to cassette " + path_->string());
    out << j.dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write to cassette failed: " + path_->string());
  }
  entries_.push_back(std::move(entry));
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CassetteBackend::CassetteBackend(Cassette& cassette, CassetteMode mode, Backend* upstream, Clock clock)
    : cassette_(cassette), mode_(mode), upstream_(upstream), clock_(clock ? std::move(clock) : Clock(utc_timestamp)) {
  if (mode_ == CassetteMode::record && !upstream_) throw std::invalid_argument("record mode needs an upstream backend");
}

std::string CassetteBackend::complete(const CompletionRequest& request) {
  auto h = request_hash(request);
  if (const auto* e = cassette_.find(h)) return e->response_text;
  if (mode_ == CassetteMode::replay) throw CassetteMiss(h);
  std::string response = upstream_->complete(request);
  cassette_.append({h, request.prompt, response, clock_()});
  return response;
}

// ---------------------------------------------------------------- http

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
  if (config_.api_key.empty())
    if (const char* key = std::getenv("SIGKIT_API_KEY")) config_.api_key = key;
  if (config_.max_attempts < 1) config_.max_attempts = 1;
}

std::string HttpBackend::complete(const CompletionRequest& request) {
  nlohmann::json body;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});
  for (const auto& [k, v] : request.backend_params) {
    if (k == "temperature" || k == "top_p") {
      try {
        body[k] = std::stod(v);
      } catch (const std::exception&) {
        throw BackendError("backend parameter " + k + " is not a number: " + v);
      }
    } else {
      body[k] = v;
    }
  }
  const std::string payload = body.dump();

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  auto delay = config_.backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    auto res = client.Post(config_.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    } else {
      try {
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const std::exception& e) {
        throw BackendError(std::string("malformed completion response: ") + e.what());
      }
    }
    if (attempt < config_.max_attempts && delay.count() > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw TransportError(last_error, config_.max_attempts);
}

// ---------------------------------------------------------------- table parsing

namespace {

using Cells = std::vector<std::string>;

/// Cells of one response line; nullopt for prose.
std::optional<Cells> row_cells(const std::string& raw) {
  auto line = trim(raw);
  if (line.empty()) return std::nullopt;
  if (auto md = split_markdown_row(line)) return md;
  auto item = strip_list_marker(line);
  if (item.find(',') == std::string::npos) return std::nullopt;
  return split_csv_line(item);
}

/// Re-joins header cells split inside an unquoted parenthesis,
/// e.g. `Instructions ET (Dose`, `Frequency`, `Duration)`.
Cells merge_parenthesized(const Cells& cells) {
  Cells out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string cell = cells[i];
    while (cell.find('(') != std::string::npos && cell.find(')') == std::string::npos && i + 1 < cells.size())
      cell += ", " + cells[++i];
    out.push_back(cell);
  }
  return out;
}

constexpr std::size_t kOriginal = 100;

std::optional<std::size_t> ner_header_column(const std::string& cell) {
  auto c = ascii_lower(cell);
  if (c.find("original") != std::string::npos) return kOriginal;
  if (c.find("instruction") != std::string::npos) return TableRow::instructions;
  if (c.find("quantity") != std::string::npos) return TableRow::quantity;
  if (c.find("medication") != std::string::npos) return TableRow::medication;
  if (c.find("strength") != std::string::npos) return TableRow::strength;
  if (c.find("dose form") != std::string::npos) return TableRow::dose_form;
  if (c.find("unit") != std::string::npos) return TableRow::unit;
  if (c.find("mode") != std::string::npos) return TableRow::mode;
  if (c.find("timing") != std::string::npos) return TableRow::timing;
  if (c.find("frequency") != std::string::npos) return TableRow::frequency;
  if (c.find("duration") != std::string::npos) return TableRow::duration;
  return std::nullopt;
}

/// Column mapping when at least two cells name known columns.
std::optional<std::vector<std::optional<std::size_t>>> header_mapping(
    const Cells& cells, const std::function<std::optional<std::size_t>(const std::string&)>& classify) {
  std::vector<std::optional<std::size_t>> map;
  std::size_t hits = 0;
  for (const auto& c : cells) {
    map.push_back(classify(c));
    if (map.back()) ++hits;
  }
  if (hits < 2) return std::nullopt;
  return map;
}

/// Maps surplus cells onto the last mapped column, joined back with ", ".
Cells fit_cells(Cells cells, std::size_t width) {
  if (width == 0 || cells.size() <= width) {
    cells.resize(width);
    return cells;
  }
  std::string tail = cells[width - 1];
  for (std::size_t i = width; i < cells.size(); ++i) tail += ", " + cells[i];
  cells.resize(width);
  cells[width - 1] = tail;
  return cells;
}

}  // namespace

NerParse parse_ner_response(std::string_view text, std::size_t expected_count) {
  NerParse out;
  std::optional<std::vector<std::optional<std::size_t>>> mapping;
  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    auto cells = row_cells(raw);
    if (!cells) {
      if (!trim(raw).empty())
        out.diagnostics.push_back("line " + std::to_string(line_no) + ": not a table row, skipped");
      continue;
    }
    if (is_markdown_separator(*cells)) continue;
    if (auto h = header_mapping(merge_parenthesized(*cells), ner_header_column)) {
      mapping = std::move(h);
      continue;
    }
    TableRow row;
    if (mapping) {
      auto fitted = fit_cells(*cells, mapping->size());
      for (std::size_t i = 0; i < fitted.size(); ++i) {
        if (!(*mapping)[i]) continue;
        auto col = *(*mapping)[i];
        if (col == kOriginal) row.original_text = fitted[i];
        else if (!row.columns[col]) row.set(static_cast<TableRow::Column>(col), fitted[i]);
      }
    } else {
      auto fitted = fit_cells(*cells, TableRow::kColumns + 1);
      row.original_text = fitted[0];
      for (std::size_t c = 0; c < TableRow::kColumns; ++c) row.set(static_cast<TableRow::Column>(c), fitted[c + 1]);
    }
    if (out.rows.size() >= expected_count) {
      out.diagnostics.push_back("line " + std::to_string(line_no) + ": surplus row dropped");
      continue;
    }
    out.rows.push_back(std::move(row));
  }
  while (out.rows.size() < expected_count) {
    out.diagnostics.push_back("row " + std::to_string(out.rows.size() + 1) + ": missing, marked absent");
    TableRow absent;
    absent.absent = true;
    out.rows.push_back(std::move(absent));
  }
  return out;
}

// ---------------------------------------------------------------- expansion responses

ResponseVocabulary ResponseVocabulary::from_lexicon(const SigLexicon& lx) {
  ResponseVocabulary v;
  for (const auto& [k, val] : lx.dose_form_words) {
    v.dose_forms.insert(ascii_lower(k));
    v.dose_forms.insert(ascii_lower(val));
    v.dose_forms.insert(ascii_lower(val) + "s");
  }
  for (const auto& [k, val] : lx.route_codes) {
    v.routes.insert(ascii_lower(k));
    v.routes.insert(ascii_lower(val));
  }
  for (const char* r : {"by mouth", "per os", "orally", "subcutaneously", "subcutaneous injection"}) v.routes.insert(r);
  for (const auto& [k, val] : lx.meal_codes) {
    auto m = ascii_lower(val);
    v.meal_phrases.insert(m);
    if (m.size() > 1 && m.back() == 's') v.meal_phrases.insert(m.substr(0, m.size() - 1));
  }
  for (const char* m : {"after a meal", "before a meal", "at bedtime", "before bedtime", "bedtime"})
    v.meal_phrases.insert(m);
  for (const auto& [k, val] : lx.frequency_codes) v.frequency_phrases.insert(ascii_lower(val));
  for (const char* f : {"daily", "every day", "once a day", "twice a day", "every evening", "every week", "weekly"})
    v.frequency_phrases.insert(f);
  return v;
}

namespace {

std::vector<std::string> words_of(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string match_key(std::string_view w) {
  std::string k = ascii_lower(w);
  while (!k.empty() && (k.back() == ',' || k.back() == '.')) k.pop_back();
  return k;
}

bool is_quantity_word(const std::string& key) { return is_numeric_token(key) || key == "half"; }

const std::regex& frequency_pattern() {
  static const std::regex re(R"(^(every \d+(\.\d+)?(-\d+(\.\d+)?)? (hours?|hrs?)|\d+ times (daily|a day|per day))$)");
  return re;
}

}  // namespace

ExpansionRecord split_instructions_cell(std::string_view cell, const ResponseVocabulary& v, bool* extra_content) {
  ExpansionRecord r;
  if (extra_content) *extra_content = false;
  std::vector<std::string> segments;
  {
    std::size_t start = 0;
    for (std::size_t i = 0; i <= cell.size(); ++i) {
      if (i == cell.size() || cell[i] == ';') {
        auto seg = trim(cell.substr(start, i - start));
        if (!seg.empty()) segments.push_back(seg);
        start = i + 1;
      }
    }
  }
  if (segments.empty()) return r;

  std::vector<std::string> other;
  std::vector<std::string> residue;
  auto flush = [&] {
    if (residue.empty()) return;
    std::string s;
    for (const auto& w : residue) s += (s.empty() ? "" : " ") + w;
    other.push_back(s);
    residue.clear();
  };

  const auto words = words_of(segments.front());
  std::vector<std::string> keys;
  for (const auto& w : words) keys.push_back(match_key(w));

  for (std::size_t i = 0; i < words.size();) {
    bool matched = false;
    for (std::size_t len = std::min<std::size_t>(5, words.size() - i); len >= 1 && !matched; --len) {
      std::string phrase, surface;
      for (std::size_t k = i; k < i + len; ++k) {
        phrase += (k == i ? "" : " ") + keys[k];
        surface += (k == i ? "" : " ") + words[k];
      }
      while (!surface.empty() && (surface.back() == ',' || surface.back() == '.')) surface.pop_back();
      std::optional<std::string>* slot = nullptr;
      bool drop = false;
      if (v.meal_phrases.count(phrase)) slot = &r.relation_to_meal;
      else if (v.frequency_phrases.count(phrase) || std::regex_match(phrase, frequency_pattern())) slot = &r.frequency;
      else if (v.routes.count(phrase)) drop = true;
      else if (v.dose_forms.count(phrase)) slot = &r.dose_form;
      else if (len == 1 && is_quantity_word(phrase)) slot = &r.quantity_of_dose_form;
      if (slot && *slot) slot = nullptr;  // already filled: let it read as free text
      if (!slot && !drop) continue;
      matched = true;
      flush();
      if (slot) *slot = surface;
      i += len;
    }
    if (!matched) residue.push_back(words[i++]);
  }
  flush();

  for (std::size_t s = 1; s < segments.size(); ++s) other.push_back(segments[s]);
  if (segments.size() > 1 && extra_content) *extra_content = true;
  if (!other.empty()) {
    std::string o;
    for (const auto& p : other) o += (o.empty() ? "" : "; ") + p;
    r.other = o;
  }
  return r;
}

namespace {

enum ExColumn : std::size_t { ex_ingredients, ex_unit, ex_mode, ex_instructions };

std::optional<std::size_t> ex_header_column(const std::string& cell) {
  auto c = ascii_lower(cell);
  if (c.find("original") != std::string::npos) return kOriginal;
  bool ex = c.find(" ex") != std::string::npos || c.find("(ex)") != std::string::npos;
  if (!ex) return std::nullopt;
  if (c.find("ingredient") != std::string::npos) return ex_ingredients;
  if (c.find("instruction") != std::string::npos) return ex_instructions;
  if (c.find("unit") != std::string::npos) return ex_unit;
  if (c.find("mode") != std::string::npos) return ex_mode;
  return std::nullopt;
}

/// "Key: value" item as used in the worked examples; nullopt for anything else.
std::optional<std::pair<std::size_t, std::string>> keyed_item(const std::string& raw) {
  auto item = strip_list_marker(raw);
  auto colon = item.find(':');
  if (colon == std::string::npos) return std::nullopt;
  auto key = trim(std::string_view(item).substr(0, colon));
  int depth = 0;
  for (char c : key) {
    if (c == '(') ++depth;
    else if (c == ')' && depth > 0) --depth;
    else if (c == ',' && depth == 0) return std::nullopt;  // a CSV row that happens to hold a colon
  }
  auto col = ex_header_column(key);
  if (!col) {
    auto k = ascii_lower(key);
    if (k.find("original") != std::string::npos) col = kOriginal;
    else if (k.find(" et") != std::string::npos) return std::pair<std::size_t, std::string>{kOriginal + 1, ""};
    else return std::nullopt;
  }
  return std::pair<std::size_t, std::string>{*col, trim(std::string_view(item).substr(colon + 1))};
}

void fill_ex(ExpansionRecord& r, bool& extra, std::size_t col, const std::string& value, const ResponseVocabulary& v) {
  switch (col) {
    case ex_ingredients: {
      std::size_t start = 0;
      for (std::size_t i = 0; i <= value.size(); ++i) {
        if (i == value.size() || value[i] == ';') {
          auto name = trim(std::string_view(value).substr(start, i - start));
          if (!name.empty()) r.active_ingredients.push_back(name);
          start = i + 1;
        }
      }
      break;
    }
    case ex_unit:
      if (!trim(value).empty()) r.unit = trim(value);
      break;
    case ex_mode:
      if (!trim(value).empty()) r.mode = trim(value);
      break;
    case ex_instructions: {
      auto parts = split_instructions_cell(value, v, &extra);
      r.quantity_of_dose_form = parts.quantity_of_dose_form;
      r.dose_form = parts.dose_form;
      r.relation_to_meal = parts.relation_to_meal;
      r.frequency = parts.frequency;
      r.other = parts.other;
      break;
    }
    default:
      break;
  }
}

}  // namespace

ExParse parse_ex_response(std::string_view text, std::size_t expected_count, const ResponseVocabulary& v) {
  ExParse out;
  std::optional<std::vector<std::optional<std::size_t>>> mapping;

  auto push = [&](ExpansionRecord r, bool extra, std::size_t line_no) {
    if (out.records.size() >= expected_count) {
      out.diagnostics.push_back("line " + std::to_string(line_no) + ": surplus row dropped");
      return;
    }
    out.records.push_back(std::move(r));
    out.extra_content.push_back(extra);
  };

  // keyed-item block state
  std::optional<ExpansionRecord> block;
  bool block_extra = false;
  std::set<std::size_t> block_keys;
  std::size_t block_line = 0;
  auto close_block = [&] {
    if (block) push(std::move(*block), block_extra, block_line);
    block.reset();
    block_extra = false;
    block_keys.clear();
  };

  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    if (trim(raw).empty()) continue;

    if (!split_markdown_row(raw)) {
      if (auto kv = keyed_item(raw)) {
        auto [col, value] = *kv;
        if (col == kOriginal || (col < kOriginal && block_keys.count(col))) close_block();
        if (!block) {
          block.emplace();
          block_line = line_no;
        }
        if (col <= kOriginal) block_keys.insert(col);
        if (col < kOriginal) fill_ex(*block, block_extra, col, value, v);
        continue;
      }
    }

    auto cells = row_cells(raw);
    if (!cells) {
      // "- Xarator (40) 1/2x1 opc:" style block titles carry no data
      auto item = strip_list_marker(raw);
      if (!(item.size() > 1 && item.back() == ':'))
        out.diagnostics.push_back("line " + std::to_string(line_no) + ": not a table row, skipped");
      continue;
    }
    close_block();
    if (is_markdown_separator(*cells)) continue;
    if (auto h = header_mapping(merge_parenthesized(*cells), ex_header_column)) {
      mapping = std::move(h);
      continue;
    }

    ExpansionRecord r;
    bool extra = false;
    std::vector<std::pair<std::size_t, std::string>> assigned;
    if (mapping) {
      auto fitted = fit_cells(*cells, mapping->size());
      for (std::size_t i = 0; i < fitted.size(); ++i)
        if ((*mapping)[i] && *(*mapping)[i] < kOriginal) assigned.emplace_back(*(*mapping)[i], fitted[i]);
    } else {
      const auto& c = *cells;
      std::size_t first = 0;
      if (c.size() >= 9) first = 5;
      else if (c.size() == 5) first = 1;
      else if (c.size() == 4) first = 0;
      else {
        out.diagnostics.push_back("line " + std::to_string(line_no) + ": " + std::to_string(c.size()) +
                                  " cells, expected 4, 5 or 9; skipped");
        continue;
      }
      for (std::size_t k = 0; k < 4 && first + k < c.size(); ++k) {
        std::string cell = c[first + k];
        // surplus cells past the ninth belong to the instructions text
        if (k == 3)
          for (std::size_t extra_i = first + 4; extra_i < c.size(); ++extra_i) cell += ", " + c[extra_i];
        assigned.emplace_back(k, cell);
      }
    }
    for (const auto& [col, value] : assigned) fill_ex(r, extra, col, value, v);
    push(std::move(r), extra, line_no);
  }
  close_block();

  while (out.records.size() < expected_count) {
    out.diagnostics.push_back("row " + std::to_string(out.records.size() + 1) + ": missing, left empty");
    out.records.emplace_back();
    out.extra_content.push_back(false);
  }
  return out;
}

}  // namespace sigkit
