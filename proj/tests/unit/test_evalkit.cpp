#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sigkit/evalkit.hpp"
#include "sigkit/unicode.hpp"

using namespace sigkit;

namespace {

EntityAnnotation ann(EntityType t, std::size_t s, std::size_t e, std::string surface = "x") {
  EntityAnnotation a;
  a.type = t;
  a.start = s;
  a.end = e;
  a.surface = std::move(surface);
  return a;
}

EntityAnnotation zero(EntityType t, std::size_t at, std::string value) {
  EntityAnnotation a;
  a.type = t;
  a.start = a.end = at;
  a.zero_width = true;
  a.inferred_value = std::move(value);
  return a;
}

constexpr auto M = EntityType::medication;
constexpr auto S = EntityType::strength;
constexpr auto U = EntityType::unit;

std::vector<EntityAnnotation> perturb(const std::vector<EntityAnnotation>& gold, std::size_t len, std::mt19937_64& rng) {
  std::vector<EntityAnnotation> out;
  for (const auto& g : gold) {
    switch (rng() % 5) {
      case 0:
        break;  // dropped
      case 1:
        out.push_back(g);
        break;
      default: {
        auto a = g;
        if (!a.zero_width) {
          std::int64_t ds = static_cast<std::int64_t>(rng() % 5) - 2;
          std::int64_t de = static_cast<std::int64_t>(rng() % 5) - 2;
          auto s = std::clamp<std::int64_t>(static_cast<std::int64_t>(a.start) + ds, 0, static_cast<std::int64_t>(len));
          auto e = std::clamp<std::int64_t>(static_cast<std::int64_t>(a.end) + de, s + 1, static_cast<std::int64_t>(len) + 1);
          a.start = static_cast<std::size_t>(s);
          a.end = static_cast<std::size_t>(e);
        }
        out.push_back(a);
      }
    }
  }
  if (rng() % 3 == 0 && len > 1) {
    auto s = rng() % (len - 1);
    out.push_back(ann(kEntityTypes[rng() % 5], s, s + 1 + rng() % (len - s - 1 + 1)));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

TEST_CASE("prf uses the zero convention") {
  CHECK(prf({0, 0, 0}) == Metrics{0, 0, 0});
  CHECK(prf({0, 3, 0}) == Metrics{0, 0, 0});
  auto m = prf({39, 10, 11});
  CHECK(m.precision == doctest::Approx(39.0 / 49));
  CHECK(m.recall == doctest::Approx(39.0 / 50));
  CHECK(m.f1 == doctest::Approx(78.0 / 99));
  CHECK(harmonic(0, 0) == 0);
}

TEST_CASE("strict needs identical spans, partial needs overlap") {
  // "Simvas(40) 1x1": gold Medication [0,6), predicted "Simvas(40)" [0,10)
  std::vector<EntityAnnotation> gold{ann(M, 0, 6, "Simvas"), ann(S, 7, 9, "40")};
  std::vector<EntityAnnotation> pred{ann(M, 0, 10, "Simvas(40)")};
  pred[0].alignment = Alignment::boundary_inclusive;
  auto strict = match_entities(gold, pred, MatchMode::strict);
  auto partial = match_entities(gold, pred, MatchMode::partial);
  CHECK(strict[index_of(M)] == MatchCounts{0, 1, 1});
  CHECK(partial[index_of(M)] == MatchCounts{1, 0, 0});
  CHECK(strict[index_of(S)] == MatchCounts{0, 0, 1});
}

TEST_CASE("matching is one-to-one") {
  std::vector<EntityAnnotation> gold{ann(M, 0, 4)};
  std::vector<EntityAnnotation> pred{ann(M, 0, 4), ann(M, 0, 4), ann(M, 2, 6)};
  CHECK(match_entities(gold, pred, MatchMode::partial)[0] == MatchCounts{1, 2, 0});
  std::vector<EntityAnnotation> gold2{ann(M, 0, 3), ann(M, 3, 6)};
  std::vector<EntityAnnotation> pred2{ann(M, 1, 5)};
  CHECK(match_entities(gold2, pred2, MatchMode::partial)[0] == MatchCounts{1, 0, 1});
}

TEST_CASE("leftmost then longest candidate wins") {
  std::vector<EntityAnnotation> gold{ann(M, 2, 8), ann(M, 7, 12)};
  std::vector<EntityAnnotation> pred{ann(M, 6, 9), ann(M, 1, 3)};
  // gold[0] takes [1,3) (leftmost); gold[1] still has [6,9).
  CHECK(match_entities(gold, pred, MatchMode::partial)[0] == MatchCounts{2, 0, 0});
}

TEST_CASE("exact spans are paired before overlaps") {
  std::vector<EntityAnnotation> gold{ann(M, 0, 4), ann(M, 4, 8)};
  std::vector<EntityAnnotation> pred{ann(M, 3, 5), ann(M, 0, 4)};
  auto c = match_entities(gold, pred, MatchMode::partial)[0];
  CHECK(c == MatchCounts{2, 0, 0});
}

TEST_CASE("zero-width gold matches a not-in-text prediction with the same value") {
  std::vector<EntityAnnotation> gold{zero(U, 10, "mg")};
  std::vector<EntityAnnotation> same{zero(U, 3, "MG")};
  EntityAnnotation unaligned;
  unaligned.type = U;
  unaligned.start = unaligned.end = 14;
  unaligned.alignment = Alignment::unaligned;
  unaligned.model_text = "mg";
  std::vector<EntityAnnotation> other{zero(U, 10, "mcg")};
  std::vector<EntityAnnotation> in_text{ann(U, 9, 11, "mg")};
  for (auto mode : {MatchMode::strict, MatchMode::partial}) {
    CHECK(match_entities(gold, same, mode)[index_of(U)].tp == 1);
    CHECK(match_entities(gold, std::vector{unaligned}, mode)[index_of(U)].tp == 1);
    CHECK(match_entities(gold, other, mode)[index_of(U)] == MatchCounts{0, 1, 1});
    CHECK(match_entities(gold, in_text, mode)[index_of(U)] == MatchCounts{0, 1, 1});
  }
}

TEST_CASE("unaligned predictions are false positives against in-text gold") {
  std::vector<EntityAnnotation> gold{ann(EntityType::mode, 0, 2, "po")};
  EntityAnnotation p;
  p.type = EntityType::mode;
  p.start = p.end = 20;
  p.alignment = Alignment::unaligned;
  p.model_text = "oral";
  CHECK(match_entities(gold, std::vector{p}, MatchMode::partial)[index_of(EntityType::mode)] == MatchCounts{0, 1, 1});
}

TEST_CASE("strict tp never exceeds partial tp, and swapping gold and pred swaps fp and fn") {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 300; ++round) {
    for (const auto& s : fixtures::seed()) {
      auto len = scalar_length(s.text);
      auto pred = perturb(s.ner, len, rng);
      auto st = match_entities(s.ner, pred, MatchMode::strict);
      auto pa = match_entities(s.ner, pred, MatchMode::partial);
      auto sw = match_entities(pred, s.ner, MatchMode::strict);
      for (std::size_t t = 0; t < 5; ++t) {
        CHECK(st[t].tp <= pa[t].tp);
        CHECK(st[t].tp + st[t].fn == pa[t].tp + pa[t].fn);
        CHECK(sw[t].tp == st[t].tp);
        CHECK(sw[t].fp == st[t].fn);
        CHECK(sw[t].fn == st[t].fp);
      }
    }
  }
}

TEST_CASE("aggregate: mean P and R, harmonic F1, order-free") {
  std::vector<Metrics> rows{{0.80, 0.78, 0}, {0.96, 0.98, 0}, {0.81, 0.38, 0}, {0.95, 0.96, 0}, {0.67, 0.66, 0}};
  auto a = aggregate(rows);
  CHECK(a.precision == doctest::Approx(0.838));
  CHECK(a.recall == doctest::Approx(0.752));
  CHECK(a.f1 == doctest::Approx(harmonic(0.838, 0.752)));
  std::mt19937 rng(1);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(rows.begin(), rows.end(), rng);
    auto b = aggregate(rows);
    CHECK(b.precision == doctest::Approx(a.precision));
    CHECK(b.recall == doctest::Approx(a.recall));
  }
  std::map<std::string, Metrics> named{{"x", {1, 0.5, 0}}, {"y", {0.5, 1, 0}}};
  CHECK(aggregate(named).f1 == doctest::Approx(0.75));
  CHECK_THROWS_AS(aggregate(std::vector<Metrics>{}), std::invalid_argument);
}

TEST_CASE("Clopper-Pearson against the bisection oracle") {
  for (std::size_t n : {1u, 2u, 7u, 25u, 50u, 100u})
    for (std::size_t x = 0; x <= n; ++x) {
      auto ci = clopper_pearson(x, n);
      auto [lo, hi] = oracles::clopper_pearson(x, n);
      CAPTURE(x);
      CAPTURE(n);
      CHECK(std::abs(ci.low - lo) < 1e-6);
      CHECK(std::abs(ci.high - hi) < 1e-6);
      CHECK(ci.low <= static_cast<double>(x) / n);
      CHECK(ci.high >= static_cast<double>(x) / n);
    }
}

TEST_CASE("Clopper-Pearson intervals nest with confidence") {
  for (std::size_t x : {0u, 3u, 19u, 39u, 50u}) {
    auto narrow = clopper_pearson(x, 50, 0.80);
    auto mid = clopper_pearson(x, 50, 0.95);
    auto wide = clopper_pearson(x, 50, 0.99);
    CHECK(wide.low <= mid.low);
    CHECK(mid.low <= narrow.low);
    CHECK(narrow.high <= mid.high);
    CHECK(mid.high <= wide.high);
  }
  CHECK(clopper_pearson(0, 10).low == 0);
  CHECK(clopper_pearson(10, 10).high == 1);
  CHECK_THROWS_AS(clopper_pearson(3, 2), std::invalid_argument);
  CHECK_THROWS_AS(clopper_pearson(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(clopper_pearson(1, 2, 1.0), std::invalid_argument);
}

TEST_CASE("equivalence lexicon") {
  auto eq = EquivalenceLexicon::load(fixtures::data("equivalence.json"));
  CHECK(eq.equivalent("by mouth", "Oral"));
  CHECK(eq.equivalent(" after  a meal", "after meals"));
  CHECK(eq.equivalent("for three months", "for 3 mos."));
  CHECK(eq.equivalent("0.5", "1/2"));
  CHECK_FALSE(eq.equivalent("before meal", "after meal"));
  CHECK(eq.class_count() > 10);

  auto id = EquivalenceLexicon::identity();
  CHECK(id.equivalent(" oral ", "oral"));
  CHECK_FALSE(id.equivalent("oral", "Oral"));

  CHECK_THROWS(EquivalenceLexicon::from_json(nlohmann::json::parse(R"({"classes":[["a","b"],["b","c"]]})")));
}

TEST_CASE("expansion scoring per category") {
  auto eq = EquivalenceLexicon::load(fixtures::data("equivalence.json"));
  ExpansionRecord gold;
  gold.active_ingredients = {"Simvastatin"};
  gold.mode = "oral";
  gold.quantity_of_dose_form = "0.5";
  gold.dose_form = "tablet";
  gold.relation_to_meal = "before bed";
  gold.frequency = "once daily";

  ExpansionRecord pred = gold;
  pred.mode = "by mouth";
  pred.relation_to_meal = "at bedtime";
  pred.unit = "milligram";  // not in gold
  pred.frequency.reset();   // missed
  pred.active_ingredients = {"simvastatin"};

  auto c = score_expansion(gold, pred, eq);
  CHECK(c[static_cast<std::size_t>(ExCategory::active_ingredients)] == MatchCounts{1, 0, 0});
  CHECK(c[static_cast<std::size_t>(ExCategory::mode)] == MatchCounts{1, 0, 0});
  CHECK(c[static_cast<std::size_t>(ExCategory::relation_to_meal)] == MatchCounts{1, 0, 0});
  CHECK(c[static_cast<std::size_t>(ExCategory::unit)] == MatchCounts{0, 1, 0});
  CHECK(c[static_cast<std::size_t>(ExCategory::frequency)] == MatchCounts{0, 0, 1});
  CHECK(c[static_cast<std::size_t>(ExCategory::other)] == MatchCounts{0, 0, 0});

  pred.dose_form = "capsule";
  CHECK(score_expansion(gold, pred, eq)[static_cast<std::size_t>(ExCategory::dose_form)] == MatchCounts{0, 1, 1});

  ExpansionRecord two = gold;
  two.active_ingredients = {"sulfamethoxazole", "trimethoprim"};
  ExpansionRecord two_pred = two;
  std::reverse(two_pred.active_ingredients.begin(), two_pred.active_ingredients.end());
  CHECK(score_expansion(two, two_pred, eq)[0] == MatchCounts{1, 0, 0});
  two_pred.active_ingredients.pop_back();
  CHECK(score_expansion(two, two_pred, eq)[0] == MatchCounts{0, 1, 1});
}

TEST_CASE("corpus scoring pairs by id and charges missing predictions") {
  const auto& gold = fixtures::seed();
  auto perfect = match_entities(gold[0].ner, gold[0].ner, MatchMode::strict);
  CHECK(perfect[0] == MatchCounts{1, 0, 0});

  Corpus reversed(gold.rbegin(), gold.rend());
  auto c = score_corpus_ner(gold, reversed, MatchMode::strict);
  for (const auto& m : c) {
    CHECK(m.fp == 0);
    CHECK(m.fn == 0);
  }
  Corpus partial(gold.begin(), gold.begin() + 10);
  auto d = score_corpus_ner(gold, partial, MatchMode::strict);
  std::size_t fn = 0;
  for (const auto& m : d) fn += m.fn;
  CHECK(fn > 0);

  auto eq = EquivalenceLexicon::load(fixtures::data("equivalence.json"));
  auto e = score_corpus_ex(gold, gold, eq);
  for (const auto& m : e) {
    CHECK(m.fp == 0);
    CHECK(m.fn == 0);
  }
}
