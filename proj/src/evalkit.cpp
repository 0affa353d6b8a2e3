#include "sigkit/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <boost/math/special_functions/beta.hpp>

#include "sigkit/unicode.hpp"

namespace sigkit {

std::string_view to_string(MatchMode m) { return m == MatchMode::strict ? "strict" : "partial"; }

std::optional<MatchMode> parse_match_mode(std::string_view s) {
  if (s == "strict") return MatchMode::strict;
  if (s == "partial") return MatchMode::partial;
  return std::nullopt;
}

namespace {

bool not_in_text(const EntityAnnotation& a) { return a.zero_width || a.alignment == Alignment::unaligned; }

std::string carried_value(const EntityAnnotation& a) {
  if (a.zero_width) return ascii_lower(trim(a.inferred_value.value_or("")));
  if (a.alignment == Alignment::unaligned) return ascii_lower(trim(a.model_text));
  return {};
}

bool same_span(const EntityAnnotation& g, const EntityAnnotation& p) {
  if (g.zero_width) return not_in_text(p) && carried_value(g) == carried_value(p) && !carried_value(g).empty();
  if (not_in_text(p)) return false;
  return g.start == p.start && g.end == p.end;
}

bool overlaps(const EntityAnnotation& g, const EntityAnnotation& p) {
  if (g.zero_width || not_in_text(p)) return same_span(g, p);
  return std::max(g.start, p.start) < std::min(g.end, p.end);
}

template <class Pred>
void greedy(const std::vector<const EntityAnnotation*>& gold, const std::vector<const EntityAnnotation*>& pred,
            std::vector<bool>& gold_used, std::vector<bool>& pred_used, MatchCounts& c, Pred accept) {
  for (std::size_t g = 0; g < gold.size(); ++g) {
    if (gold_used[g]) continue;
    std::optional<std::size_t> best;
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (pred_used[p] || !accept(*gold[g], *pred[p])) continue;
      if (!best) {
        best = p;
        continue;
      }
      const auto& a = *pred[p];
      const auto& b = *pred[*best];
      if (a.start < b.start || (a.start == b.start && a.end - a.start > b.end - b.start)) best = p;
    }
    if (best) {
      gold_used[g] = true;
      pred_used[*best] = true;
      ++c.tp;
    }
  }
}

std::vector<const EntityAnnotation*> of_type(std::span<const EntityAnnotation> xs, EntityType t) {
  std::vector<const EntityAnnotation*> out;
  for (const auto& a : xs)
    if (a.type == t) out.push_back(&a);
  std::stable_sort(out.begin(), out.end(), [](auto* a, auto* b) {
    return a->start != b->start ? a->start < b->start : a->end > b->end;
  });
  return out;
}

}  // namespace

TypeCounts match_entities(std::span<const EntityAnnotation> gold, std::span<const EntityAnnotation> pred,
                          MatchMode mode) {
  TypeCounts out{};
  for (EntityType t : kEntityTypes) {
    auto g = of_type(gold, t);
    auto p = of_type(pred, t);
    std::vector<bool> gu(g.size(), false), pu(p.size(), false);
    auto& c = out[index_of(t)];
    greedy(g, p, gu, pu, c, same_span);
    if (mode == MatchMode::partial) greedy(g, p, gu, pu, c, overlaps);
    c.fn = g.size() - c.tp;
    c.fp = p.size() - c.tp;
  }
  return out;
}

double harmonic(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

Metrics prf(const MatchCounts& c) {
  Metrics m;
  m.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  m.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.f1 = harmonic(m.precision, m.recall);
  return m;
}

Metrics aggregate(std::span<const Metrics> per_type) {
  if (per_type.empty()) throw std::invalid_argument("aggregate of no metrics");
  Metrics m;
  for (const auto& x : per_type) {
    m.precision += x.precision;
    m.recall += x.recall;
  }
  m.precision /= static_cast<double>(per_type.size());
  m.recall /= static_cast<double>(per_type.size());
  m.f1 = harmonic(m.precision, m.recall);
  return m;
}

Metrics aggregate(const std::map<std::string, Metrics>& per_type) {
  std::vector<Metrics> v;
  for (const auto& [_, m] : per_type) v.push_back(m);
  return aggregate(v);
}

EquivalenceLexicon EquivalenceLexicon::identity() {
  EquivalenceLexicon e;
  e.fold_ = false;
  return e;
}

EquivalenceLexicon EquivalenceLexicon::from_json(const nlohmann::json& j) {
  EquivalenceLexicon e;
  if (j.contains("word_forms"))
    for (const auto& [k, v] : j.at("word_forms").items())
      e.word_forms_[ascii_lower(trim(k))] = ascii_lower(trim(v.get<std::string>()));
  if (j.contains("classes")) {
    for (const auto& cls : j.at("classes")) {
      if (!cls.is_array() || cls.empty()) throw std::runtime_error("equivalence class must be a non-empty array");
      std::string rep = e.normalize(cls.front().get<std::string>());
      for (const auto& member : cls) {
        auto key = e.normalize(member.get<std::string>());
        auto [it, inserted] = e.representative_.emplace(key, rep);
        if (!inserted && it->second != rep)
          throw std::runtime_error("equivalence classes overlap on \"" + key + "\"");
      }
      ++e.class_count_;
    }
  }
  return e;
}

EquivalenceLexicon EquivalenceLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open equivalence lexicon " + path.string());
  return from_json(nlohmann::json::parse(in));
}

std::string EquivalenceLexicon::normalize(std::string_view s) const {
  if (!fold_) return trim(s);
  std::string squeezed = squeeze_spaces(ascii_lower(trim(s)));
  if (word_forms_.empty()) return squeezed;
  std::string out;
  std::size_t i = 0;
  while (i <= squeezed.size()) {
    auto sp = squeezed.find(' ', i);
    if (sp == std::string::npos) sp = squeezed.size();
    std::string word = squeezed.substr(i, sp - i);
    if (auto it = word_forms_.find(word); it != word_forms_.end()) word = it->second;
    if (!out.empty()) out += ' ';
    out += word;
    i = sp + 1;
  }
  return out;
}

std::string EquivalenceLexicon::canonical(std::string_view s) const {
  auto n = normalize(s);
  if (auto it = representative_.find(n); it != representative_.end()) return it->second;
  return n;
}

CategoryCounts score_expansion(const ExpansionRecord& gold, const ExpansionRecord& pred,
                               const EquivalenceLexicon& eq) {
  CategoryCounts out{};
  auto decide = [](MatchCounts& c, bool g, bool p, bool same) {
    if (g && p && same) {
      ++c.tp;
      return;
    }
    if (p) ++c.fp;
    if (g) ++c.fn;
  };
  for (ExCategory cat : kExCategories) {
    auto& c = out[static_cast<std::size_t>(cat)];
    if (cat == ExCategory::active_ingredients) {
      std::set<std::string> gs, ps;
      for (const auto& x : gold.active_ingredients) gs.insert(eq.canonical(x));
      for (const auto& x : pred.active_ingredients) ps.insert(eq.canonical(x));
      decide(c, !gs.empty(), !ps.empty(), gs == ps);
      continue;
    }
    const auto& g = *field(gold, cat);
    const auto& p = *field(pred, cat);
    decide(c, g.has_value(), p.has_value(), g && p && eq.equivalent(*g, *p));
  }
  return out;
}

Interval clopper_pearson(std::size_t successes, std::size_t n, double confidence) {
  if (n == 0) throw std::invalid_argument("clopper_pearson: n must be at least 1");
  if (successes > n) throw std::invalid_argument("clopper_pearson: successes exceed n");
  if (!(confidence > 0 && confidence < 1)) throw std::invalid_argument("clopper_pearson: confidence outside (0,1)");
  const double alpha = 1 - confidence;
  const double x = static_cast<double>(successes);
  const double nn = static_cast<double>(n);
  Interval iv;
  iv.confidence = confidence;
  iv.low = successes == 0 ? 0.0 : boost::math::ibeta_inv(x, nn - x + 1, alpha / 2);
  iv.high = successes == n ? 1.0 : boost::math::ibeta_inv(x + 1, nn - x, 1 - alpha / 2);
  return iv;
}

TypeCounts score_corpus_ner(const Corpus& gold, const Corpus& pred, MatchMode mode) {
  std::unordered_map<std::string, const MedicationStatement*> by_id;
  for (const auto& s : pred) by_id.emplace(s.id, &s);
  TypeCounts total{};
  for (const auto& g : gold) {
    auto it = by_id.find(g.id);
    std::span<const EntityAnnotation> p;
    if (it != by_id.end()) p = it->second->ner;
    auto c = match_entities(g.ner, p, mode);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += c[i];
  }
  return total;
}

CategoryCounts score_corpus_ex(const Corpus& gold, const Corpus& pred, const EquivalenceLexicon& eq) {
  std::unordered_map<std::string, const MedicationStatement*> by_id;
  for (const auto& s : pred) by_id.emplace(s.id, &s);
  CategoryCounts total{};
  for (const auto& g : gold) {
    if (!g.ex) continue;
    ExpansionRecord empty;
    const ExpansionRecord* p = &empty;
    if (auto it = by_id.find(g.id); it != by_id.end() && it->second->ex) p = &*it->second->ex;
    auto c = score_expansion(*g.ex, *p, eq);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += c[i];
  }
  return total;
}

}  // namespace sigkit
