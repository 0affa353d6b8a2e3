#include "sigkit/expand.hpp"

#include "sigkit/sigparse.hpp"
#include "sigkit/unicode.hpp"

namespace sigkit {

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

std::optional<unsigned> small_count(std::string_view s) {
  if (s.empty() || s.size() > 3) return std::nullopt;
  unsigned v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  return v == 0 ? std::nullopt : std::optional<unsigned>(v);
}

}  // namespace

Resolution resolve_ingredient(std::string_view name, const BrandMap& brand_map) {
  if (const auto* entry = brand_map.find(name)) return {ResolutionStatus::resolved, entry->ingredients};
  return {ResolutionStatus::passthrough, {std::string(name)}};
}

std::optional<std::string> expand_unit(std::string_view unit, const SigLexicon& lexicon) {
  if (const auto* v = lexicon.unit(trim(unit))) return *v;
  return std::nullopt;
}

std::optional<std::string> expand_mode(std::string_view mode_surface, const SigLexicon& lexicon) {
  for (const auto& tok : tokenize(mode_surface))
    if (const auto* v = lexicon.route(tok.surface)) return *v;
  return std::nullopt;
}

std::string daily_frequency(unsigned times) {
  switch (times) {
    case 1: return "once daily";
    case 2: return "twice daily";
    case 3: return "three times daily";
    case 4: return "four times daily";
    default: return std::to_string(times) + " times daily";
  }
}

InstructionFields expand_instructions(std::string_view instructions, const SigLexicon& lx) {
  InstructionFields f;
  std::vector<Token> t;
  try {
    t = tokenize(instructions);
  } catch (const Utf8Error&) {
    return f;
  }
  const auto text = decode_utf8(instructions);
  auto between = [&](std::size_t a, std::size_t b) {
    return encode_utf8(std::u32string_view(text).substr(a, b - a));
  };
  auto times_joint = [&](std::size_t i) {
    if (i + 1 >= t.size() || !is_numeric_token(t[i].surface) || !is_numeric_token(t[i + 1].surface)) return false;
    for (std::size_t p = t[i].end; p < t[i + 1].start; ++p)
      if (text[p] == U'x' || text[p] == U'X' || text[p] == U'*') return true;
    return false;
  };
  auto is_trigger = [&](std::size_t i) {
    const auto& s = t[i].surface;
    return is_numeric_token(s) || lx.dose_form(s) || lx.route(s) || lx.meal(s) || lx.frequency(s) ||
           lx.is_prn(s) || lx.thai(s) || (ascii_lower(s) == "q" && i + 1 < t.size());
  };

  std::vector<std::string> other;
  std::vector<std::string> residue;
  auto flush = [&] {
    if (!residue.empty()) other.push_back(join(residue, " "));
    residue.clear();
  };
  bool pattern = false;

  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& s = t[i].surface;
    const auto lower = ascii_lower(s);
    if (times_joint(i)) {
      flush();
      if (!f.quantity_of_dose_form) f.quantity_of_dose_form = s;
      if (auto n = small_count(t[i + 1].surface); n && !f.frequency) f.frequency = daily_frequency(*n);
      pattern = true;
      ++i;
    } else if (is_numeric_token(s) && i + 1 < t.size() && lx.dose_form(t[i + 1].surface)) {
      flush();
      if (!f.quantity_of_dose_form) f.quantity_of_dose_form = s;
      if (!f.dose_form) f.dose_form = *lx.dose_form(t[i + 1].surface);
      ++i;
    } else if (const auto* form = lx.dose_form(s)) {
      flush();
      if (!f.dose_form) f.dose_form = *form;
    } else if (const auto* meal = lx.meal(s)) {
      flush();
      if (!f.relation_to_meal) f.relation_to_meal = *meal;
    } else if (lx.route(s)) {
      flush();  // route is expanded from the Mode entity
    } else if (const auto* freq = lx.frequency(s)) {
      flush();
      if (!f.frequency) f.frequency = *freq;
    } else if (lower == "q" && i + 1 < t.size() && is_numeric_token(t[i + 1].surface)) {
      flush();
      if (!f.frequency) f.frequency = "every " + t[i + 1].surface + " hours";
      i += (i + 2 < t.size() && lx.is_interval_word(t[i + 2].surface)) ? 2 : 1;
    } else if (lx.is_prn(s)) {
      flush();
      std::size_t j = i + 1;
      if (j < t.size() && ascii_lower(t[j].surface) == "for") ++j;
      std::size_t cond_begin = j;
      while (j < t.size() && !is_trigger(j)) ++j;
      std::string piece = "as needed (prn)";
      if (j > cond_begin) piece += " for " + between(t[cond_begin].start, t[j - 1].end);
      other.push_back(piece);
      i = j - 1;
    } else if (const auto* meaning = lx.thai(s)) {
      flush();
      other.push_back(*meaning);
    } else if (lower == "for" && i + 2 < t.size() && is_numeric_token(t[i + 1].surface) &&
               lx.duration(t[i + 2].surface)) {
      flush();
      other.push_back("for " + t[i + 1].surface + " " + *lx.duration(t[i + 2].surface));
      i += 2;
    } else {
      residue.push_back(s);
    }
  }
  flush();

  if (!f.dose_form && pattern) f.dose_form = "tablet";
  if (!other.empty()) f.other = join(other, "; ");
  return f;
}

ExpansionRecord expand_statement(std::span<const EntityAnnotation> annotations, std::string_view,
                                 const SigLexicon& lexicon, const BrandMap& brand_map,
                                 std::map<std::string, std::string>* provenance) {
  ExpansionRecord r;
  auto value_of = [](const EntityAnnotation& a) -> std::string {
    if (a.alignment == Alignment::unaligned) return a.model_text;
    if (a.zero_width) return a.inferred_value.value_or("");
    return a.surface;
  };
  auto first = [&](EntityType type) -> const EntityAnnotation* {
    for (const auto& a : annotations)
      if (a.type == type) return &a;
    return nullptr;
  };

  if (const auto* med = first(EntityType::medication)) {
    auto name = trim(value_of(*med));
    if (!name.empty()) {
      auto res = resolve_ingredient(name, brand_map);
      r.active_ingredients = res.values;
      if (provenance)
        (*provenance)[std::string(kIngredientProvenanceKey)] =
            res.status == ResolutionStatus::resolved ? "resolved" : "passthrough";
    }
  }
  if (const auto* unit = first(EntityType::unit)) r.unit = expand_unit(value_of(*unit), lexicon);
  if (const auto* mode = first(EntityType::mode)) r.mode = expand_mode(value_of(*mode), lexicon);
  if (const auto* instr = first(EntityType::instructions)) {
    auto f = expand_instructions(value_of(*instr), lexicon);
    r.quantity_of_dose_form = f.quantity_of_dose_form;
    r.dose_form = f.dose_form;
    r.relation_to_meal = f.relation_to_meal;
    r.frequency = f.frequency;
    r.other = f.other;
  }
  return r;
}

}  // namespace sigkit
