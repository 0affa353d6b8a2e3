#include "sigkit/prompts.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "sigkit/unicode.hpp"

namespace sigkit {

namespace {

constexpr std::string_view kNerPersona = "You are now a Named Entity Recognition Model. ";
constexpr std::string_view kNerTemplate =
    "I will give you a list of narrative drug prescriptions. Please slice the narrative text based on the Entity "
    "Types you detect and organize it as a table record with the columns: Medication ET, Strength ET, Unit ET, "
    "Quantity of Dose Form per intake ET, Dose Form ET, Mode ET, Timing ET, Frequency ET, Duration ET, "
    "Instructions ET (Dose, Frequency, Duration) without changing anything in the narrative prescription. For "
    "missing values, leave the cell blank.";
constexpr std::string_view kNerExamplesIntro = "Here are some examples that you can study with:";

constexpr std::string_view kExPersona = "You are now a medication interpretator. ";
constexpr std::string_view kExPlain =
    "I will give you a table of medication data in csv format.\n"
    "Please translate and expand the information in columns named Medication ET, Unit ET, Mode ET, Instruction ET "
    "(Dose,Frequency,Duration)\n"
    "\n"
    "Here is the table that I want you to translate and expand: ";
constexpr std::string_view kExTemplateHead =
    "I will give you a table of medication data in csv format.\n"
    "Please normalize the information in columns named Medication ET, Unit ET, Mode ET, Instruction ET (Dose, "
    "Frequency, Duration) based on the following instructions:\n"
    "\n"
    "Original Text: This is the original narrative text of the medication prescription.\n"
    "Medication ET: This is the medication entity type. Please interpret and put the results in a new table named "
    "\"Active Ingredients EX\". In case of multiple possible entries in the fields of Active Ingredients, separate "
    "the entries by \";\" in the same cell.\n";
constexpr std::string_view kExUnitLine =
    "Unit ET: This is a unit entity type. Please interpret this and put the result in a new table named \"Unit EX\".";
constexpr std::string_view kExUnitHint = " For example, \"mg\" should be \"milligram.\"";
constexpr std::string_view kExModeLine =
    "Mode ET: This is an intake route entitype type of the medication. Please interpret this and put the result in "
    "\"Mode EX\" column.";
constexpr std::string_view kExModeHint = " For example, \"po\" should be \"oral.\"";
constexpr std::string_view kExInstructionsLine =
    "Instructions ET (Dose,Frequency,Duration): This is an instruction entity type. Please interpret this and put "
    "the result in \"Instructions (Dose,Frequency,Duration) EX\" column.";
constexpr std::string_view kExInstructionsHint =
    " For example, \"1*1 po pc\" should be translated into \"1 tablet oral after meal once daily\"";
constexpr std::string_view kExTableIntro = "Here is the table that I want you to transform:\n";
constexpr std::string_view kExHeader =
    "Original Text,Medication ET,Unit ET,Mode ET,\"Instructions ET (Dose, Frequency, Duration)\"";
constexpr std::string_view kExExamplesIntro = "Here are some examples that you can look up to:";
constexpr std::string_view kExExamplesHeader =
    ",Active Ingredient EX,Unit EX,Mode EX,\"Instructions (Dose, Frequency, Duration) EX\"";
constexpr std::string_view kExClosing = "The end output should compile all results into one unified table.";

std::string rstrip(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
  return s;
}

/// Every line right-trimmed, single trailing newline.
std::string finish(const std::string& text) {
  std::string out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    out += rstrip(text.substr(start, nl - start));
    out += '\n';
    start = nl + 1;
  }
  while (out.size() >= 2 && out[out.size() - 1] == '\n' && out[out.size() - 2] == '\n') out.pop_back();
  return out;
}

void check_shots(const PromptSpec& spec) {
  if (spec.shots != spec.example_ids.size())
    throw PromptError("prompt spec asks for " + std::to_string(spec.shots) + " examples but lists " +
                      std::to_string(spec.example_ids.size()) + " example ids");
}

std::vector<std::string> numbered_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 1; i <= n; ++i) ids.push_back((i < 10 ? "a0" : "a") + std::to_string(i));
  return ids;
}

}  // namespace

std::string_view to_string(Task t) { return t == Task::ner ? "ner" : "ex"; }

std::optional<Task> parse_task(std::string_view s) {
  auto l = ascii_lower(s);
  if (l == "ner") return Task::ner;
  if (l == "ex") return Task::ex;
  return std::nullopt;
}

std::vector<std::string_view> variant_names(Task task) {
  if (task == Task::ner) return {"A", "B", "C", "D", "E", "F"};
  return {"1", "2", "3"};
}

std::optional<PromptSpec> variant_spec(Task task, std::string_view variant) {
  struct Shape {
    bool persona, templ;
    std::size_t shots;
  };
  static const std::map<std::string, Shape, std::less<>> ner = {
      {"A", {true, true, 0}},  {"B", {false, true, 0}}, {"C", {false, true, 5}},
      {"D", {true, true, 5}},  {"E", {false, true, 10}}, {"F", {true, true, 10}}};
  static const std::map<std::string, Shape, std::less<>> ex = {
      {"1", {false, false, 0}}, {"2", {true, true, 0}}, {"3", {true, true, 5}}};
  const auto& table = task == Task::ner ? ner : ex;
  std::string key(variant);
  for (auto& c : key) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  auto it = table.find(key);
  if (it == table.end()) return std::nullopt;
  PromptSpec spec;
  spec.task = task;
  spec.persona = it->second.persona;
  spec.template_pattern = it->second.templ;
  spec.shots = it->second.shots;
  spec.example_ids = numbered_ids(spec.shots);
  return spec;
}

std::vector<WorkedExample> load_worked_examples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open worked examples " + path.string());
  std::vector<WorkedExample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto s = [&](const char* k) { return j.at(k).get<std::string>(); };
      out.push_back({s("id"), s("original_text"), s("medication_et"), s("unit_et"), s("mode_et"),
                     s("instructions_et"), s("active_ingredient_ex"), s("unit_ex"), s("mode_ex"),
                     s("instructions_ex")});
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string format_ner_row(const TableRow& row) {
  std::string line = row.original_text;
  for (const auto& cell : row.columns) line += ", " + cell.value_or("");
  return rstrip(line);
}

std::string format_ex_payload_row(const TableRow& row) {
  auto cell = [&](TableRow::Column c) { return row[c].value_or(""); };
  return rstrip(row.original_text + ": " + cell(TableRow::medication) + ", " + cell(TableRow::unit) + ", " +
                cell(TableRow::mode) + ", " + cell(TableRow::instructions));
}

PromptText build_ner_prompt(const PromptSpec& spec, const Corpus& corpus, const SigLexicon& lexicon) {
  if (spec.task != Task::ner) throw PromptError("build_ner_prompt needs an NER spec");
  if (!spec.template_pattern) throw PromptError("every NER prompt uses the table template");
  check_shots(spec);

  auto lookup = [&](const std::string& id) -> const MedicationStatement& {
    for (const auto& s : corpus)
      if (s.id == id) return s;
    throw PromptError("unknown statement id \"" + id + "\"");
  };

  std::string text;
  if (spec.persona) text += kNerPersona;
  text += kNerTemplate;
  text += '\n';
  if (spec.shots > 0) {
    text += "\n";
    text += kNerExamplesIntro;
    text += "\n\n";
    for (const auto& id : spec.example_ids) {
      const auto& s = lookup(id);
      text += "- " + format_ner_row(to_table_row(s.text, s.ner, lexicon)) + "\n";
    }
  }
  if (!spec.payload_ids.empty()) {
    text += "\n";
    for (const auto& id : spec.payload_ids) text += lookup(id).text + "\n";
  }
  return {finish(text), spec};
}

PromptText build_ex_prompt(const PromptSpec& spec, std::span<const WorkedExample> examples,
                           std::span<const TableRow> ner_rows) {
  if (spec.task != Task::ex) throw PromptError("build_ex_prompt needs an EX spec");
  check_shots(spec);
  if (!spec.payload_ids.empty() && spec.payload_ids.size() != ner_rows.size())
    throw PromptError("payload lists " + std::to_string(spec.payload_ids.size()) + " statements but " +
                      std::to_string(ner_rows.size()) + " NER rows were supplied");
  std::vector<const WorkedExample*> shown;
  for (const auto& id : spec.example_ids) {
    const WorkedExample* found = nullptr;
    for (const auto& e : examples)
      if (e.id == id) found = &e;
    if (!found) throw PromptError("unknown worked example id \"" + id + "\"");
    shown.push_back(found);
  }
  const bool hints = spec.shots > 0;

  std::string text;
  if (spec.persona) text += kExPersona;
  if (spec.template_pattern) {
    text += kExTemplateHead;
    text += std::string(kExUnitLine) + (hints ? std::string(kExUnitHint) : "") + "\n";
    text += std::string(kExModeLine) + (hints ? std::string(kExModeHint) : "") + "\n";
    text += std::string(kExInstructionsLine) + (hints ? std::string(kExInstructionsHint) : "") + "\n";
    text += "\n";
    text += kExTableIntro;
  } else {
    text += kExPlain;
  }
  text += kExHeader;
  text += "\n";
  if (!ner_rows.empty()) {
    text += "\n";
    for (const auto& row : ner_rows) text += "- " + format_ex_payload_row(row) + "\n";
  }
  if (!shown.empty()) {
    text += "\n";
    text += kExExamplesIntro;
    text += "\n";
    text += std::string(kExHeader) + std::string(kExExamplesHeader) + "\n";
    for (const auto* e : shown) {
      text += "\n- " + e->original_text + ":\n";
      auto item = [&](std::string_view key, const std::string& value) {
        text += "    - " + std::string(key) + ": " + value + "\n";
      };
      item("Original Text", e->original_text);
      item("Medication ET", e->medication_et);
      item("Unit ET", e->unit_et);
      item("Mode ET", e->mode_et);
      item("Instructions ET (Dose, Frequency, Duration)", e->instructions_et);
      item("Active Ingredient EX", e->active_ingredient_ex);
      item("Unit EX", e->unit_ex);
      item("Mode EX", e->mode_ex);
      item("Instructions (Dose, Frequency, Duration) EX", e->instructions_ex);
    }
  }
  if (spec.template_pattern) {
    text += "\n";
    text += kExClosing;
    text += "\n";
  }
  return {finish(text), spec};
}

}  // namespace sigkit
