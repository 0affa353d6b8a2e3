#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sigkit/corpus.hpp"
#include "sigkit/lexicon.hpp"
#include "sigkit/sigparse.hpp"

namespace sigkit {

enum class Task { ner, ex };

std::string_view to_string(Task t);
std::optional<Task> parse_task(std::string_view s);

struct PromptSpec {
  Task task = Task::ner;
  bool persona = false;
  bool template_pattern = false;
  std::size_t shots = 0;
  std::vector<std::string> example_ids;
  std::vector<std::string> payload_ids;

  bool operator==(const PromptSpec&) const = default;
};

struct PromptText {
  std::string text;
  PromptSpec rendered_from;
};

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NER variants "A".."F" and EX variants "1".."3" with their default example ids.
std::optional<PromptSpec> variant_spec(Task task, std::string_view variant);
std::vector<std::string_view> variant_names(Task task);

/// One solved expansion example as shown in the EX few-shot block.
struct WorkedExample {
  std::string id;
  std::string original_text;
  std::string medication_et;
  std::string unit_et;
  std::string mode_et;
  std::string instructions_et;
  std::string active_ingredient_ex;
  std::string unit_ex;
  std::string mode_ex;
  std::string instructions_ex;
};

std::vector<WorkedExample> load_worked_examples(const std::filesystem::path& path);

/// "<original>, <10 cells>" with trailing blanks trimmed.
std::string format_ner_row(const TableRow& row);
/// "<original>: <medication>, <unit>, <mode>, <instructions>".
std::string format_ex_payload_row(const TableRow& row);

/// Example rows come from the gold annotations of `corpus` via to_table_row.
/// Payload statements (if any) follow as one original text per line.
PromptText build_ner_prompt(const PromptSpec& spec, const Corpus& corpus, const SigLexicon& lexicon);

/// `ner_rows` holds one NER table row per payload statement (EX consumes NER output).
PromptText build_ex_prompt(const PromptSpec& spec, std::span<const WorkedExample> examples,
                           std::span<const TableRow> ner_rows);

}  // namespace sigkit
