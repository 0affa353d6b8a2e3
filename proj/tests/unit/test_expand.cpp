#include <doctest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "sigkit/expand.hpp"
#include "sigkit/sigparse.hpp"

using namespace sigkit;

namespace {

ExpansionRecord expand_text(std::string_view text, const BrandMap& bm) {
  const auto& lx = fixtures::lexicon();
  return expand_statement(parse_statement(text, lx, bm), text, lx, bm);
}

/// Every string a lexicon or brand map could legitimately produce.
std::set<std::string> lexicon_values(const SigLexicon& lx, const BrandMap& bm) {
  std::set<std::string> v;
  for (const auto* m : {&lx.route_codes, &lx.meal_codes, &lx.frequency_codes, &lx.dose_form_words, &lx.thai_tokens,
                        &lx.unit_codes, &lx.duration_words})
    for (const auto& [k, val] : *m) v.insert(val);
  for (const auto& [k, e] : bm.entries()) v.insert(e.ingredients.begin(), e.ingredients.end());
  return v;
}

}  // namespace

TEST_CASE("ingredient resolution") {
  const auto& bm = fixtures::brands();
  CHECK(resolve_ingredient("Thyrosit", bm) == Resolution{ResolutionStatus::resolved, {"levothyroxine"}});
  CHECK(resolve_ingredient("Hidil Cap", bm).values == std::vector<std::string>{"gemfibrozil"});
  auto combo = resolve_ingredient("Sulfamethoxazole/Trimethoprim", bm);
  CHECK(combo.status == ResolutionStatus::resolved);
  CHECK(combo.values.size() == 2);

  auto held_out = bm;
  held_out.erase("hidil");
  CHECK(resolve_ingredient("HIDIL", held_out) == Resolution{ResolutionStatus::passthrough, {"HIDIL"}});
  CHECK(resolve_ingredient("Unknownol", bm) == Resolution{ResolutionStatus::passthrough, {"Unknownol"}});
}

TEST_CASE("unit and mode expansion") {
  const auto& lx = fixtures::lexicon();
  CHECK(expand_unit("mg", lx) == "milligram");
  CHECK(expand_unit("m.g.", lx) == "milligram");
  CHECK(expand_unit("mcg", lx) == "microgram");
  CHECK(expand_unit("µg", lx) == "microgram");
  CHECK_FALSE(expand_unit("widget", lx));
  for (auto m : {"po", "o", "opc", "oac", "po ac", "po pc"}) CHECK(expand_mode(m, lx) == "oral");
  CHECK(expand_mode("sc", lx) == "subcutaneous");
  CHECK_FALSE(expand_mode("zz", lx));
}

TEST_CASE("daily frequency wording") {
  CHECK(daily_frequency(1) == "once daily");
  CHECK(daily_frequency(2) == "twice daily");
  CHECK(daily_frequency(3) == "three times daily");
  CHECK(daily_frequency(4) == "four times daily");
  CHECK(daily_frequency(6) == "6 times daily");
}

TEST_CASE("instruction expansion") {
  const auto& lx = fixtures::lexicon();

  auto a = expand_instructions("1*1 po pc", lx);
  CHECK(a == InstructionFields{"1", "tablet", "after meals", "once daily", std::nullopt});

  auto b = expand_instructions("1 tab po prn q 4-6 hr", lx);
  CHECK(b.quantity_of_dose_form == "1");
  CHECK(b.dose_form == "tablet");
  CHECK(b.frequency == "every 4-6 hours");
  CHECK(b.other == "as needed (prn)");
  CHECK_FALSE(b.relation_to_meal);

  CHECK(expand_instructions("", lx) == InstructionFields{});

  auto c = expand_instructions("0.5x1 po hs", lx);
  CHECK(c == InstructionFields{"0.5", "tablet", "before bed", "once daily", std::nullopt});

  auto d = expand_instructions("2 tabs po prn constipation hs", lx);
  CHECK(d.quantity_of_dose_form == "2");
  CHECK(d.relation_to_meal == "before bed");
  CHECK(d.other == "as needed (prn) for constipation");

  CHECK(expand_instructions("sc od start day 3-12", lx).other == "start day 3-12");
  CHECK(expand_instructions("1x1 po pc for 3 mos.", lx).other == "for 3 months");
  CHECK(expand_instructions("0.5x1 o ac «TH:mon-fri»", lx).other == "Monday to Friday");
  CHECK(expand_instructions("weekly", lx).frequency == "once weekly");
  CHECK(expand_instructions("1x2 opc", lx).relation_to_meal == "after meals");
}

TEST_CASE("no trigger token, no field") {
  const auto& lx = fixtures::lexicon();
  auto r = expand_instructions("po", lx);
  CHECK(r == InstructionFields{});
  auto only_words = expand_instructions("shake well", lx);
  CHECK_FALSE(only_words.quantity_of_dose_form);
  CHECK_FALSE(only_words.dose_form);
  CHECK_FALSE(only_words.frequency);
  CHECK(only_words.other == "shake well");
}

TEST_CASE("statement expansion") {
  const auto& s = fixtures::statement("p01");
  std::map<std::string, std::string> prov;
  auto r = expand_statement(s.ner, s.text, fixtures::lexicon(), fixtures::brands(), &prov);
  CHECK(r.active_ingredients == std::vector<std::string>{"simvastatin"});
  CHECK(r.unit == "milligram");
  CHECK(r.mode == "oral");
  CHECK(r.quantity_of_dose_form == "1");
  CHECK(r.dose_form == "tablet");
  CHECK(r.relation_to_meal == "after meals");
  CHECK(r.frequency == "once daily");
  CHECK(r.other == "for 3 months");
  CHECK(prov[std::string(kIngredientProvenanceKey)] == "resolved");

  CHECK(expand_statement({}, "anything", fixtures::lexicon(), fixtures::brands()).empty());
}

TEST_CASE("passthrough is flagged in provenance") {
  std::map<std::string, std::string> prov;
  const std::string text = "ORS";
  auto anns = parse_statement(text, fixtures::lexicon(), fixtures::brands());
  auto r = expand_statement(anns, text, fixtures::lexicon(), fixtures::brands(), &prov);
  CHECK(r.active_ingredients == std::vector<std::string>{"ORS"});
  CHECK(prov[std::string(kIngredientProvenanceKey)] == "passthrough");
}

TEST_CASE("non-hallucination: ablated brand map passes every name through") {
  BrandMap empty;
  for (const auto& s : fixtures::seed()) {
    auto r = expand_statement(s.ner, s.text, fixtures::lexicon(), empty);
    std::string med;
    for (const auto& a : s.ner)
      if (a.type == EntityType::medication) med = a.surface;
    CAPTURE(s.id);
    if (med.empty())
      CHECK(r.active_ingredients.empty());
    else
      CHECK(r.active_ingredients == std::vector<std::string>{med});
  }
}

TEST_CASE("non-hallucination: output words come from the lexicon, the text or templates") {
  const auto& lx = fixtures::lexicon();
  const auto& bm = fixtures::brands();
  auto allowed = lexicon_values(lx, bm);
  std::set<std::string> allowed_words = {"as",    "needed", "(prn)", "for",  "every", "hours",
                                          "times", "daily",  "once",  "twice", "three", "four"};
  for (const auto& v : allowed)
    for (const auto& w : tokenize(v)) allowed_words.insert(w.surface);
  allowed_words.insert("(prn)");
  for (const auto& s : fixtures::seed()) {
    std::set<std::string> text_words;
    for (const auto& t : tokenize(s.text)) text_words.insert(t.surface);
    auto r = expand_statement(s.ner, s.text, lx, bm);
    for (auto c : kExCategories) {
      std::vector<std::string> values;
      if (c == ExCategory::active_ingredients)
        values = r.active_ingredients;
      else if (auto f = field(r, c); f && *f)
        values.push_back(**f);
      for (const auto& v : values) {
        if (allowed.count(v)) continue;
        for (const auto& w : tokenize(v)) {
          CAPTURE(s.id);
          CAPTURE(v);
          CAPTURE(w.surface);
          CHECK((allowed_words.count(w.surface) || text_words.count(w.surface) || w.script == Script::digit ||
                 w.surface.find(';') != std::string::npos));
        }
      }
    }
  }
}

TEST_CASE("monotonicity: growing the brand map keeps resolved ingredients and fields") {
  const auto& lx = fixtures::lexicon();
  BrandMap small;
  std::mt19937 rng(5);
  std::vector<std::pair<std::string, BrandEntry>> entries(fixtures::brands().entries().begin(),
                                                          fixtures::brands().entries().end());
  std::shuffle(entries.begin(), entries.end(), rng);
  std::vector<ExpansionRecord> before;
  for (const auto& s : fixtures::seed()) before.push_back(expand_statement(s.ner, s.text, lx, small));
  for (const auto& [name, entry] : entries) {
    BrandMap bigger = small;
    bigger.insert(name, entry);
    std::size_t i = 0;
    for (const auto& s : fixtures::seed()) {
      std::map<std::string, std::string> prov_small;
      expand_statement(s.ner, s.text, lx, small, &prov_small);
      auto after = expand_statement(s.ner, s.text, lx, bigger);
      if (prov_small[std::string(kIngredientProvenanceKey)] == "resolved")
        CHECK(after.active_ingredients == before[i].active_ingredients);
      for (auto c : kExCategories)
        if (auto f = field(before[i], c); f && *f) CHECK(field(after, c)->has_value());
      before[i] = after;
      ++i;
    }
    small = bigger;
  }
}

TEST_CASE("idempotence: canonical values never turn into different values") {
  const auto& lx = fixtures::lexicon();
  for (const auto& [code, unit] : lx.unit_codes) {
    auto again = expand_unit(unit, lx);
    CHECK((!again || *again == unit));
  }
  for (const auto& [code, mode] : lx.route_codes) {
    auto again = expand_mode(mode, lx);
    CHECK((!again || *again == mode));
  }
  for (const auto& [code, ingredients] : fixtures::brands().entries())
    for (const auto& ing : ingredients.ingredients) {
      auto again = resolve_ingredient(ing, fixtures::brands());
      CHECK((again.values == std::vector<std::string>{ing}));
    }
}
