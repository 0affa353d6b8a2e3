#include "sigkit/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "sigkit/corpus.hpp"
#include "sigkit/digest.hpp"
#include "sigkit/evalkit.hpp"
#include "sigkit/expand.hpp"
#include "sigkit/lexicon.hpp"
#include "sigkit/llmrun.hpp"
#include "sigkit/prompts.hpp"
#include "sigkit/report.hpp"
#include "sigkit/sigparse.hpp"
#include "sigkit/table_text.hpp"
#include "sigkit/unicode.hpp"

#ifndef SIGKIT_DEFAULT_DATA_DIR
#define SIGKIT_DEFAULT_DATA_DIR "data"
#endif
#ifndef SIGKIT_VERSION
#define SIGKIT_VERSION "0.0.0"
#endif

namespace sigkit::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- configuration

struct Config {
  fs::path data_dir = SIGKIT_DEFAULT_DATA_DIR;
  std::optional<fs::path> lexicon, brand_map, equivalence, worked_examples;
  std::uint64_t seed = 42;
  std::map<std::string, std::string> backend_params;
  HttpConfig http;
  std::string digest = sha256_hex("{}");

  fs::path lexicon_path() const { return lexicon.value_or(data_dir / "lexicon.json"); }
  fs::path brand_map_path() const { return brand_map.value_or(data_dir / "brand_map.json"); }
  fs::path equivalence_path() const { return equivalence.value_or(data_dir / "equivalence.json"); }
  fs::path worked_examples_path() const { return worked_examples.value_or(data_dir / "ex_worked_examples.jsonl"); }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Config load_config(const std::string& path) {
  Config c;
  if (path.empty()) return c;
  auto text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw IoError("config " + path + ": " + e.what());
  }
  c.digest = sha256_hex(j.dump());
  auto base = fs::path(path).parent_path();
  auto rel = [&](const std::string& v) { return fs::path(v).is_absolute() ? fs::path(v) : base / v; };
  try {
    if (j.contains("data_dir")) c.data_dir = rel(j["data_dir"].get<std::string>());
    if (j.contains("lexicon")) c.lexicon = rel(j["lexicon"].get<std::string>());
    if (j.contains("brand_map")) c.brand_map = rel(j["brand_map"].get<std::string>());
    if (j.contains("equivalence")) c.equivalence = rel(j["equivalence"].get<std::string>());
    if (j.contains("worked_examples")) c.worked_examples = rel(j["worked_examples"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("backend_params"))
      for (const auto& [k, v] : j["backend_params"].items())
        c.backend_params[k] = v.is_string() ? v.get<std::string>() : v.dump();
    if (j.contains("http")) {
      const auto& h = j["http"];
      c.http.base_url = h.value("base_url", c.http.base_url);
      c.http.path = h.value("path", c.http.path);
      c.http.max_attempts = h.value("max_attempts", c.http.max_attempts);
      c.http.backoff = std::chrono::milliseconds(h.value("backoff_ms", static_cast<int>(c.http.backoff.count())));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config " + path + ": " + e.what());
  }
  return c;
}

template <class F>
auto load_or_fail(const fs::path& p, const char* what, F loader) {
  if (!fs::exists(p)) throw IoError(std::string(what) + " not found: " + p.string());
  try {
    return loader(p);
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(std::string(what) + " " + p.string() + ": " + e.what());
  }
}

SigLexicon lexicon_at(const fs::path& p) {
  return load_or_fail(p, "lexicon", [](const fs::path& x) { return SigLexicon::load(x); });
}
BrandMap brand_map_at(const fs::path& p) {
  return load_or_fail(p, "brand map", [](const fs::path& x) { return BrandMap::load(x); });
}
EquivalenceLexicon equivalence_at(const fs::path& p) {
  return load_or_fail(p, "equivalence lexicon", [](const fs::path& x) { return EquivalenceLexicon::load(x); });
}

/// Gold corpora are validated; prediction files only need to parse.
Corpus corpus_at(const fs::path& p, bool validate) {
  if (!fs::exists(p)) throw IoError("corpus not found: " + p.string());
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  try {
    return validate ? load_corpus(in) : read_corpus(in);
  } catch (const CorpusError& e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- outputs

/// Writes through a sibling temp file and renames it into place.
void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

std::string corpus_text(const Corpus& c) {
  std::ostringstream s;
  save_corpus(c, s);
  return s.str();
}

class Outputs {
 public:
  Outputs(std::string command, const Config& config) : command_(std::move(command)), config_digest_(config.digest) {}

  void input(const fs::path& p) { inputs_.emplace_back(p.string(), sha256_file(p)); }
  void write(const fs::path& p, const std::string& content) {
    write_atomic(p, content);
    outputs_.push_back(p.string());
  }
  /// Manifest path: next to the first output.
  void finish(const fs::path& manifest_path) {
    nlohmann::ordered_json m;
    m["command"] = command_;
    m["config_digest"] = config_digest_;
    m["input_digests"] = nlohmann::ordered_json::array();
    for (const auto& [path, digest] : inputs_) m["input_digests"].push_back({{"path", path}, {"sha256", digest}});
    m["tool_version"] = SIGKIT_VERSION;
    m["outputs"] = outputs_;
    write_atomic(manifest_path, m.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string config_digest_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::string> outputs_;
};

fs::path manifest_for(const fs::path& output) {
  auto m = output;
  m += ".manifest.json";
  return m;
}

std::string join_args(const std::vector<std::string>& args) {
  std::string s = "sigkit";
  for (const auto& a : args) s += " " + a;
  return s;
}

// ---------------------------------------------------------------- shared pieces

Corpus select_payload(const Corpus& corpus, const std::string& payload) {
  if (payload == "all") return corpus;
  auto split = parse_split(payload);
  if (!split) throw UsageError("payload must be a split name (train, validation, test, unassigned) or \"all\"");
  Corpus out;
  for (const auto& s : corpus)
    if (s.split == *split) out.push_back(s);
  return out;
}

std::vector<std::string> ids_of(const Corpus& c) {
  std::vector<std::string> ids;
  for (const auto& s : c) ids.push_back(s.id);
  return ids;
}

PromptSpec spec_for(Task task, const std::string& variant) {
  auto spec = variant_spec(task, variant);
  if (!spec) {
    std::string names;
    for (auto n : variant_names(task)) names += (names.empty() ? "" : ", ") + std::string(n);
    throw UsageError("unknown " + std::string(to_string(task)) + " prompt variant \"" + variant + "\" (expected " +
                     names + ")");
  }
  return *spec;
}

/// Instruction text as a model would phrase it, used for oracle fixtures.
std::string instructions_phrase(const ExpansionRecord& r) {
  std::string s;
  for (const auto* f : {&r.quantity_of_dose_form, &r.dose_form, &r.relation_to_meal, &r.frequency})
    if (*f) s += (s.empty() ? "" : " ") + **f;
  if (r.other) {
    std::string other = *r.other;
    std::replace(other.begin(), other.end(), ';', ',');
    s += (s.empty() ? "" : " ") + other;
  }
  return s;
}

std::string join_ingredients(const std::vector<std::string>& xs) {
  std::string s;
  for (const auto& x : xs) s += (s.empty() ? "" : "; ") + x;
  return s;
}

std::string ner_oracle_response(const Corpus& payload, const SigLexicon& lx, const BrandMap& bm) {
  std::string out = "Original Text";
  for (auto h : TableRow::kHeaders) out += "," + csv_quote(std::string(h));
  out += "\n";
  for (const auto& s : payload) {
    auto row = to_table_row(s.text, parse_statement(s.text, lx, bm), lx);
    std::string line = csv_quote(row.original_text);
    for (const auto& c : row.columns) line += "," + csv_quote(c.value_or(""));
    out += line + "\n";
  }
  return out;
}

std::string ex_oracle_response(const Corpus& payload, const SigLexicon& lx, const BrandMap& bm) {
  std::string out = "Original Text,Active Ingredient EX,Unit EX,Mode EX,\"Instructions (Dose, Frequency, Duration) EX\"\n";
  for (const auto& s : payload) {
    auto r = expand_statement(s.ner, s.text, lx, bm);
    out += csv_quote(s.text) + "," + csv_quote(join_ingredients(r.active_ingredients)) + "," +
           csv_quote(r.unit.value_or("")) + "," + csv_quote(r.mode.value_or("")) + "," +
           csv_quote(instructions_phrase(r)) + "\n";
  }
  return out;
}

Report ner_report(const Corpus& gold, const Corpus& pred, const std::string& title) {
  auto strict = score_corpus_ner(gold, pred, MatchMode::strict);
  auto partial = score_corpus_ner(gold, pred, MatchMode::partial);
  Report r;
  r.tables.push_back(ner_table(title, strict, partial));
  for (EntityType t : kEntityTypes) {
    const auto& c = strict[index_of(t)];
    if (c.tp + c.fn > 0) r.intervals.push_back(make_ci(std::string(to_string(t)) + " strict recall", c.tp, c.tp + c.fn));
  }
  return r;
}

Report ex_report(const Corpus& gold, const Corpus& pred, const EquivalenceLexicon& eq, const std::string& title) {
  auto counts = score_corpus_ex(gold, pred, eq);
  Report r;
  r.tables.push_back(ex_table(title, counts));
  for (ExCategory c : kExCategories) {
    const auto& m = counts[static_cast<std::size_t>(c)];
    if (m.tp + m.fn > 0) r.intervals.push_back(make_ci(std::string(display_name(c)) + " recall", m.tp, m.tp + m.fn));
  }
  return r;
}

std::unique_ptr<Backend> make_http(const Config& cfg) { return std::make_unique<HttpBackend>(cfg.http); }

// ---------------------------------------------------------------- commands

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

int cmd_validate(const std::string& corpus_path, std::ostream& out) {
  std::ifstream in(corpus_path, std::ios::binary);
  if (!in) throw IoError("cannot read " + corpus_path);
  Corpus c;
  try {
    c = read_corpus(in);
  } catch (const CorpusError& e) {
    throw IoError(corpus_path + ": " + e.what());
  }
  std::size_t n = 0;
  for (const auto& s : c)
    for (const auto& v : validate_statement(s)) {
      out << v.describe() << "\n";
      ++n;
    }
  out << c.size() << " statements, " << n << " violation" << (n == 1 ? "" : "s") << "\n";
  return n == 0 ? kExitOk : kExitValidation;
}

SplitRatios parse_ratios(const std::string& s) {
  std::vector<double> xs;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      xs.push_back(std::stod(part, &used));
      if (trim(part.substr(used)).size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("bad ratio \"" + part + "\"");
    }
  }
  if (xs.size() != 3) throw UsageError("--ratios needs three comma-separated values");
  return {xs[0], xs[1], xs[2]};
}

int cmd_split(const Config& cfg, const std::string& command, const std::string& corpus_path,
              const std::string& out_path, const std::string& ratios) {
  auto corpus = corpus_at(corpus_path, true);
  Corpus split;
  try {
    split = split_corpus(corpus, parse_ratios(ratios), cfg.seed);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  Outputs o(command, cfg);
  o.input(corpus_path);
  o.write(out_path, corpus_text(split));
  o.finish(manifest_for(out_path));
  return kExitOk;
}

int cmd_stats(const std::string& corpus_path, bool as_json, std::ostream& out) {
  auto corpus = corpus_at(corpus_path, true);
  auto st = corpus_stats(corpus);
  if (as_json) {
    nlohmann::ordered_json j;
    auto row = [](const EntityCounts& c) {
      nlohmann::ordered_json r;
      for (EntityType t : kEntityTypes) r[std::string(to_string(t))] = c[index_of(t)];
      return r;
    };
    for (const auto& [split, counts] : st.per_split) {
      auto r = row(counts);
      r["statements"] = st.statements.at(split);
      j["splits"][std::string(to_string(split))] = r;
    }
    j["total"] = row(st.total);
    j["total"]["statements"] = corpus.size();
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %10s %10s %10s %10s %10s %12s\n", "split", "Medication", "Strength", "Unit",
                "Mode", "Instr.", "statements");
  out << buf;
  auto line = [&](const std::string& name, const EntityCounts& c, std::size_t n) {
    std::snprintf(buf, sizeof buf, "%-12s %10zu %10zu %10zu %10zu %10zu %12zu\n", name.c_str(), c[0], c[1], c[2], c[3],
                  c[4], n);
    out << buf;
  };
  for (const auto& [split, counts] : st.per_split) line(std::string(to_string(split)), counts, st.statements.at(split));
  line("total", st.total, corpus.size());
  return kExitOk;
}

int cmd_parse(const Config& cfg, const std::string& command, const std::string& corpus_path,
              const std::string& out_path) {
  auto lx = lexicon_at(cfg.lexicon_path());
  auto bm = brand_map_at(cfg.brand_map_path());
  auto corpus = corpus_at(corpus_path, false);
  Corpus pred;
  for (const auto& s : corpus) {
    MedicationStatement p;
    p.id = s.id;
    p.split = s.split;
    p.text = s.text;
    p.ner = parse_statement(s.text, lx, bm);
    pred.push_back(std::move(p));
  }
  Outputs o(command, cfg);
  o.input(corpus_path);
  o.input(cfg.lexicon_path());
  o.input(cfg.brand_map_path());
  o.write(out_path, corpus_text(pred));
  o.finish(manifest_for(out_path));
  return kExitOk;
}

int cmd_expand(const Config& cfg, const std::string& command, const std::string& corpus_path,
               const std::string& out_path) {
  auto lx = lexicon_at(cfg.lexicon_path());
  auto bm = brand_map_at(cfg.brand_map_path());
  auto corpus = corpus_at(corpus_path, false);
  Corpus pred;
  for (const auto& s : corpus) {
    MedicationStatement p;
    p.id = s.id;
    p.split = s.split;
    p.text = s.text;
    p.ner = s.ner;
    auto r = expand_statement(s.ner, s.text, lx, bm, &p.provenance);
    if (!r.empty()) p.ex = std::move(r);
    pred.push_back(std::move(p));
  }
  Outputs o(command, cfg);
  o.input(corpus_path);
  o.input(cfg.lexicon_path());
  o.input(cfg.brand_map_path());
  o.write(out_path, corpus_text(pred));
  o.finish(manifest_for(out_path));
  return kExitOk;
}

/// Table rows for an EX payload: either a prepared NER rows file, or the NER
/// annotations of the given statements.
std::vector<TableRow> ex_rows_for(const Corpus& payload, const SigLexicon& lx) {
  std::vector<TableRow> rows;
  for (const auto& s : payload) rows.push_back(to_table_row(s.text, s.ner, lx));
  return rows;
}

int cmd_prompt_build(const Config& cfg, const std::string& task_name, const std::string& variant,
                     const std::string& payload, const std::string& corpus_path, const std::string& ner_rows_path,
                     std::ostream& out) {
  auto task = parse_task(task_name);
  if (!task) throw UsageError("--task must be ner or ex");
  auto spec = spec_for(*task, variant);
  auto lx = lexicon_at(cfg.lexicon_path());
  if (*task == Task::ner) {
    auto corpus = corpus_at(corpus_path, true);
    if (payload != "none") spec.payload_ids = ids_of(select_payload(corpus, payload));
    out << build_ner_prompt(spec, corpus, lx).text;
    return kExitOk;
  }
  auto examples = load_or_fail(cfg.worked_examples_path(), "worked examples",
                               [](const fs::path& p) { return load_worked_examples(p); });
  std::vector<TableRow> rows;
  if (!ner_rows_path.empty()) {
    rows = load_or_fail(fs::path(ner_rows_path), "NER rows", [](const fs::path& p) { return load_table_rows(p); });
  } else if (payload != "none") {
    auto corpus = corpus_at(corpus_path, false);
    auto selected = select_payload(corpus, payload);
    spec.payload_ids = ids_of(selected);
    rows = ex_rows_for(selected, lx);
  }
  out << build_ex_prompt(spec, examples, rows).text;
  return kExitOk;
}

struct RunOptions {
  std::string task = "ner";
  std::string variant;
  std::string payload = "validation";
  std::string corpus;
  std::string ner_pred;
  std::string backend = "mock";
  std::string cassette;
  bool record = false;
  std::string out_dir;
};

int cmd_run(const Config& cfg, const std::string& command, const RunOptions& o, std::ostream& out) {
  auto task = parse_task(o.task);
  if (!task) throw UsageError("--task must be ner or ex");
  auto spec = spec_for(*task, o.variant);
  auto lx = lexicon_at(cfg.lexicon_path());
  auto bm = brand_map_at(cfg.brand_map_path());
  auto gold = corpus_at(o.corpus, true);
  auto payload = select_payload(gold, o.payload);
  spec.payload_ids = ids_of(payload);

  Outputs outs(command, cfg);
  outs.input(o.corpus);
  outs.input(cfg.lexicon_path());
  outs.input(cfg.brand_map_path());

  // Prompt
  PromptText prompt;
  Corpus ner_input;  // EX only: statements carrying the NER predictions
  if (*task == Task::ner) {
    prompt = build_ner_prompt(spec, gold, lx);
  } else {
    if (o.ner_pred.empty()) throw UsageError("--task ex needs --ner-pred (NER predictions for the payload)");
    auto pred = corpus_at(o.ner_pred, false);
    outs.input(o.ner_pred);
    std::map<std::string, const MedicationStatement*> by_id;
    for (const auto& s : pred) by_id[s.id] = &s;
    for (const auto& s : payload) {
      MedicationStatement m = s;
      auto it = by_id.find(s.id);
      m.ner = it == by_id.end() ? std::vector<EntityAnnotation>{} : it->second->ner;
      ner_input.push_back(std::move(m));
    }
    auto examples = load_or_fail(cfg.worked_examples_path(), "worked examples",
                                 [](const fs::path& p) { return load_worked_examples(p); });
    outs.input(cfg.worked_examples_path());
    prompt = build_ex_prompt(spec, examples, ex_rows_for(ner_input, lx));
  }

  CompletionRequest request{prompt.text, cfg.backend_params};

  // Backend
  std::unique_ptr<Backend> upstream;
  std::unique_ptr<Cassette> cassette;
  std::unique_ptr<Backend> backend;
  if (o.backend == "mock") {
    auto mock = std::make_unique<MockBackend>();
    mock->add_fixture(request, *task == Task::ner ? ner_oracle_response(payload, lx, bm)
                                                  : ex_oracle_response(ner_input, lx, bm));
    backend = std::move(mock);
  } else if (o.backend == "cassette" || o.backend == "http") {
    if (o.backend == "http") upstream = make_http(cfg);
    if (o.cassette.empty()) {
      if (o.backend == "cassette") throw UsageError("--backend cassette needs --cassette <path>");
      backend = std::move(upstream);
    } else {
      cassette = std::make_unique<Cassette>(fs::path(o.cassette));
      bool record = o.backend == "http" || o.record;
      if (record && !upstream) throw UsageError("--record needs a live upstream (--backend http)");
      backend = std::make_unique<CassetteBackend>(*cassette, record ? CassetteMode::record : CassetteMode::replay,
                                                  upstream.get());
    }
  } else {
    throw UsageError("--backend must be mock, cassette or http");
  }

  std::string response;
  try {
    response = complete(*backend, request);
  } catch (const BackendError& e) {
    throw IoError(e.what());
  }

  const fs::path dir = o.out_dir;
  std::string diagnostics;
  Corpus pred;
  Report report;
  if (*task == Task::ner) {
    auto parsed = parse_ner_response(response, payload.size());
    for (const auto& d : parsed.diagnostics) diagnostics += d + "\n";
    for (std::size_t i = 0; i < payload.size(); ++i) {
      MedicationStatement p;
      p.id = payload[i].id;
      p.split = payload[i].split;
      p.text = payload[i].text;
      if (!parsed.rows[i].absent) p.ner = from_table_row(parsed.rows[i], payload[i].text);
      pred.push_back(std::move(p));
    }
    report = ner_report(payload, pred, "NER prompt " + o.variant);
  } else {
    auto eq = equivalence_at(cfg.equivalence_path());
    outs.input(cfg.equivalence_path());
    auto parsed = parse_ex_response(response, payload.size(), ResponseVocabulary::from_lexicon(lx));
    for (const auto& d : parsed.diagnostics) diagnostics += d + "\n";
    for (std::size_t i = 0; i < payload.size(); ++i) {
      MedicationStatement p = ner_input[i];
      p.ex.reset();
      p.provenance.clear();
      if (!parsed.records[i].empty()) p.ex = parsed.records[i];
      if (parsed.extra_content[i]) p.provenance["extra_content"] = "true";
      pred.push_back(std::move(p));
    }
    std::size_t no_gold = 0;
    for (const auto& g : payload) no_gold += !g.ex.has_value();
    if (no_gold > 0)
      diagnostics += std::to_string(no_gold) + " of " + std::to_string(payload.size()) +
                     " payload statements have no EX gold and are not scored\n";
    report = ex_report(payload, pred, eq, "EX prompt " + o.variant);
  }
  report.title = "sigkit run " + std::string(to_string(*task)) + " " + o.variant;

  outs.write(dir / "prompt.txt", prompt.text);
  outs.write(dir / "response.txt", response);
  outs.write(dir / "predictions.jsonl", corpus_text(pred));
  outs.write(dir / "diagnostics.txt", diagnostics);
  auto text = render_text(report);
  outs.write(dir / "report.txt", text);
  outs.write(dir / "report.json", render_json(report).dump(2) + "\n");
  outs.finish(dir / "manifest.json");
  out << text;
  return kExitOk;
}

int cmd_score(const Config& cfg, const std::string& command, const std::string& what, const std::string& gold_path,
              const std::string& pred_path, const std::string& mode_name, const std::string& equiv_path,
              const std::string& out_path, std::ostream& out) {
  auto gold = corpus_at(gold_path, true);
  auto pred = corpus_at(pred_path, false);
  Report report;
  Outputs o(command, cfg);
  o.input(gold_path);
  o.input(pred_path);
  if (what == "ner") {
    auto mode = parse_match_mode(mode_name);
    if (!mode) throw UsageError("--mode must be strict or partial");
    auto counts = score_corpus_ner(gold, pred, *mode);
    MetricTable t;
    t.title = "NER (" + std::string(to_string(*mode)) + " matching)";
    t.groups = {*mode == MatchMode::strict ? "Strict" : "Partial"};
    for (EntityType type : kEntityTypes)
      t.add_row(std::string(to_string(type)), {prf(counts[index_of(type)])}, {counts[index_of(type)]});
    report.tables.push_back(std::move(t));
    for (EntityType type : kEntityTypes) {
      const auto& c = counts[index_of(type)];
      if (c.tp + c.fn > 0) report.intervals.push_back(make_ci(std::string(to_string(type)) + " recall", c.tp, c.tp + c.fn));
    }
  } else {
    fs::path eq_path = equiv_path.empty() ? cfg.equivalence_path() : fs::path(equiv_path);
    auto eq = equivalence_at(eq_path);
    o.input(eq_path);
    report = ex_report(gold, pred, eq, "Text expansion (equivalence)");
  }
  auto text = render_text(report);
  out << text;
  if (!out_path.empty()) {
    o.write(out_path, render_json(report).dump(2) + "\n");
    o.finish(manifest_for(out_path));
  }
  return kExitOk;
}

int cmd_report(const Config& cfg, const std::string& command, const std::string& gold_path,
               const std::string& ner_pred, const std::string& ex_pred, const std::string& out_path,
               std::ostream& out) {
  if (ner_pred.empty() && ex_pred.empty()) throw UsageError("report needs --ner-pred and/or --ex-pred");
  auto gold = corpus_at(gold_path, true);
  Outputs o(command, cfg);
  o.input(gold_path);
  Report report;
  if (!ner_pred.empty()) {
    o.input(ner_pred);
    auto r = ner_report(gold, corpus_at(ner_pred, false), "Named entity recognition");
    report.tables.insert(report.tables.end(), r.tables.begin(), r.tables.end());
    report.intervals.insert(report.intervals.end(), r.intervals.begin(), r.intervals.end());
  }
  if (!ex_pred.empty()) {
    o.input(ex_pred);
    o.input(cfg.equivalence_path());
    auto r = ex_report(gold, corpus_at(ex_pred, false), equivalence_at(cfg.equivalence_path()), "Text expansion");
    report.tables.insert(report.tables.end(), r.tables.begin(), r.tables.end());
    report.intervals.insert(report.intervals.end(), r.intervals.begin(), r.intervals.end());
  }
  auto text = render_text(report);
  fs::path base = out_path;
  if (base.extension() == ".txt" || base.extension() == ".json") base.replace_extension();
  fs::path txt = base, json = base;
  txt += ".txt";
  json += ".json";
  o.write(txt, text);
  o.write(json, render_json(report).dump(2) + "\n");
  o.finish(manifest_for(base));
  out << text;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structure, expand and score free-text medication statements", "sigkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SIGKIT_VERSION);
  Globals g;
  app.add_option("--config", g.config_path, "JSON configuration file");
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");

  // corpus
  auto* corpus = app.add_subcommand("corpus", "Validate, split and count corpora");
  corpus->require_subcommand(1);
  std::string c_path, c_out, c_ratios = "0.25,0.25,0.5";
  bool c_json = false;
  auto* validate = corpus->add_subcommand("validate", "Check every statement invariant");
  validate->add_option("corpus", c_path, "Corpus JSONL")->required();
  auto* split = corpus->add_subcommand("split", "Assign train/validation/test labels");
  split->add_option("corpus", c_path, "Corpus JSONL")->required();
  split->add_option("--out", c_out, "Output corpus")->required();
  split->add_option("--ratios", c_ratios, "train,validation,test")->capture_default_str();
  auto* stats = corpus->add_subcommand("stats", "Entity counts per split");
  stats->add_option("corpus", c_path, "Corpus JSONL")->required();
  stats->add_flag("--json", c_json, "Machine-readable output");

  // parse / expand
  std::string p_corpus, p_out, p_lexicon, p_brand;
  auto* parse = app.add_subcommand("parse", "Rule-based NER over a corpus");
  parse->add_option("--corpus", p_corpus)->required();
  parse->add_option("--out", p_out)->required();
  parse->add_option("--lexicon", p_lexicon);
  parse->add_option("--brand-map", p_brand);
  auto* expand = app.add_subcommand("expand", "Expand the NER annotations of a corpus");
  expand->add_option("--corpus", p_corpus, "Statements whose ner annotations are expanded")->required();
  expand->add_option("--out", p_out)->required();
  expand->add_option("--lexicon", p_lexicon);
  expand->add_option("--brand-map", p_brand);

  // prompt build
  std::string pr_task = "ner", pr_variant, pr_payload = "none", pr_corpus, pr_rows;
  auto* prompt = app.add_subcommand("prompt", "Prompt rendering");
  prompt->require_subcommand(1);
  auto* build = prompt->add_subcommand("build", "Print a prompt variant");
  build->add_option("--task", pr_task)->capture_default_str();
  build->add_option("--variant", pr_variant)->required();
  build->add_option("--payload", pr_payload, "Split to append, \"all\" or \"none\"")->capture_default_str();
  build->add_option("--corpus", pr_corpus, "Corpus holding example and payload statements");
  build->add_option("--ner-rows", pr_rows, "EX only: NER table rows (JSONL) used as payload");

  // run
  RunOptions ro;
  auto* runc = app.add_subcommand("run", "Prompt a backend, parse the answer and score it");
  runc->add_option("--task", ro.task)->capture_default_str();
  runc->add_option("--variant", ro.variant)->required();
  runc->add_option("--payload", ro.payload)->capture_default_str();
  runc->add_option("--corpus", ro.corpus);
  runc->add_option("--ner-pred", ro.ner_pred, "EX only: NER predictions for the payload");
  runc->add_option("--backend", ro.backend)->capture_default_str();
  runc->add_option("--cassette", ro.cassette);
  runc->add_flag("--record", ro.record, "Record cassette misses through the live backend");
  runc->add_option("--out-dir", ro.out_dir)->required();

  // score
  std::string s_gold, s_pred, s_mode = "strict", s_equiv, s_out;
  auto* score = app.add_subcommand("score", "Score predictions against gold");
  score->require_subcommand(1);
  auto* sner = score->add_subcommand("ner", "Entity matching");
  sner->add_option("--gold", s_gold)->required();
  sner->add_option("--pred", s_pred)->required();
  sner->add_option("--mode", s_mode)->capture_default_str();
  sner->add_option("--out", s_out, "Write the JSON report here");
  auto* sex = score->add_subcommand("ex", "Expansion equivalence");
  sex->add_option("--gold", s_gold)->required();
  sex->add_option("--pred", s_pred)->required();
  sex->add_option("--equiv", s_equiv);
  sex->add_option("--out", s_out, "Write the JSON report here");

  // report
  std::string r_gold, r_ner, r_ex, r_out;
  auto* report = app.add_subcommand("report", "Text and JSON report for NER and/or EX predictions");
  report->add_option("--gold", r_gold)->required();
  report->add_option("--ner-pred", r_ner);
  report->add_option("--ex-pred", r_ex);
  report->add_option("--out", r_out, "report.txt / report.json base path")->required();

  std::vector<std::string> argv_store{"sigkit"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string command = join_args(args);
  try {
    Config cfg = load_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    if (!p_lexicon.empty()) cfg.lexicon = p_lexicon;
    if (!p_brand.empty()) cfg.brand_map = p_brand;
    auto default_corpus = [&](std::string& p) {
      if (p.empty()) p = (cfg.data_dir / "seed_corpus.jsonl").string();
    };

    if (validate->parsed()) return cmd_validate(c_path, out);
    if (split->parsed()) return cmd_split(cfg, command, c_path, c_out, c_ratios);
    if (stats->parsed()) return cmd_stats(c_path, c_json, out);
    if (parse->parsed()) return cmd_parse(cfg, command, p_corpus, p_out);
    if (expand->parsed()) return cmd_expand(cfg, command, p_corpus, p_out);
    if (build->parsed()) {
      default_corpus(pr_corpus);
      return cmd_prompt_build(cfg, pr_task, pr_variant, pr_payload, pr_corpus, pr_rows, out);
    }
    if (runc->parsed()) {
      default_corpus(ro.corpus);
      return cmd_run(cfg, command, ro, out);
    }
    if (sner->parsed()) return cmd_score(cfg, command, "ner", s_gold, s_pred, s_mode, "", s_out, out);
    if (sex->parsed()) return cmd_score(cfg, command, "ex", s_gold, s_pred, "", s_equiv, s_out, out);
    if (report->parsed()) return cmd_report(cfg, command, r_gold, r_ner, r_ex, r_out, out);
  } catch (const ValidationError& e) {
    err << "sigkit: " << e.what() << "\n";
    for (const auto& v : e.violations()) err << "  " << v.describe() << "\n";
    return kExitValidation;
  } catch (const UsageError& e) {
    err << "sigkit: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PromptError& e) {
    err << "sigkit: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "sigkit: " << e.what() << "\n";
    return kExitUsage;
  }
  err << "sigkit: no command given\n";
  return kExitUsage;
}

}  // namespace sigkit::cli
