#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigkit/corpus.hpp"
#include "sigkit/lexicon.hpp"

namespace sigkit {

enum class ResolutionStatus { resolved, passthrough };

struct Resolution {
  ResolutionStatus status = ResolutionStatus::passthrough;
  std::vector<std::string> values;

  bool operator==(const Resolution&) const = default;
};

/// Brand-map lookup. A miss returns the surface unchanged; nothing is guessed.
Resolution resolve_ingredient(std::string_view name, const BrandMap& brand_map);

std::optional<std::string> expand_unit(std::string_view unit, const SigLexicon& lexicon);

/// Uses the first route code found in the surface ("po pc" -> oral).
std::optional<std::string> expand_mode(std::string_view mode_surface, const SigLexicon& lexicon);

struct InstructionFields {
  std::optional<std::string> quantity_of_dose_form;
  std::optional<std::string> dose_form;
  std::optional<std::string> relation_to_meal;
  std::optional<std::string> frequency;
  std::optional<std::string> other;

  bool operator==(const InstructionFields&) const = default;
};

/// "every day" wording for a times-per-day count: 1 -> "once daily", 5 -> "5 times daily".
std::string daily_frequency(unsigned times);

InstructionFields expand_instructions(std::string_view instructions, const SigLexicon& lexicon);

/// Provenance key written by expand_statement; value "resolved" or "passthrough".
inline constexpr std::string_view kIngredientProvenanceKey = "ingredient_resolution";

ExpansionRecord expand_statement(std::span<const EntityAnnotation> annotations, std::string_view text,
                                 const SigLexicon& lexicon, const BrandMap& brand_map,
                                 std::map<std::string, std::string>* provenance = nullptr);

}  // namespace sigkit
