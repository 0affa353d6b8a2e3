#include "sigkit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace sigkit {

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

Metrics metrics_from(const nlohmann::json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

}  // namespace

void MetricTable::add_row(std::string name, std::vector<Metrics> metrics,
                          std::vector<std::optional<MatchCounts>> raw) {
  raw.resize(metrics.size());
  row_names.push_back(std::move(name));
  cells.push_back(std::move(metrics));
  counts.push_back(std::move(raw));
}

std::optional<Metrics> MetricTable::average(std::size_t group) const {
  if (cells.empty()) return std::nullopt;
  std::vector<Metrics> column;
  for (const auto& row : cells) column.push_back(row.at(group));
  return aggregate(column);
}

CiAnnotation make_ci(std::string label, std::size_t successes, std::size_t n, double confidence) {
  return {std::move(label), successes, n, clopper_pearson(successes, n, confidence)};
}

MetricTable ner_table(std::string title, const TypeCounts& strict, const TypeCounts& partial) {
  MetricTable t;
  t.title = std::move(title);
  t.groups = {"Strict", "Partial"};
  for (EntityType type : kEntityTypes) {
    auto i = index_of(type);
    t.add_row(std::string(to_string(type)), {prf(strict[i]), prf(partial[i])}, {strict[i], partial[i]});
  }
  return t;
}

MetricTable ex_table(std::string title, const CategoryCounts& counts) {
  MetricTable t;
  t.title = std::move(title);
  t.row_heading = "Category";
  t.groups = {"Equivalence"};
  for (ExCategory c : kExCategories) {
    const auto& mc = counts[static_cast<std::size_t>(c)];
    t.add_row(std::string(display_name(c)), {prf(mc)}, {mc});
  }
  return t;
}

std::string render_text(const Report& report) {
  std::ostringstream out;
  out << report.title << '\n';
  for (const auto& t : report.tables) {
    std::size_t name_w = std::max<std::size_t>(t.row_heading.size(), 7);
    for (const auto& n : t.row_names) name_w = std::max(name_w, n.size());
    name_w += 2;
    constexpr std::size_t kCell = 6;

    out << '\n' << t.title << '\n';
    std::string line = pad(t.row_heading, name_w);
    for (const auto& g : t.groups) line += "| " + pad(g, 3 * kCell);
    out << line << '\n';
    line = pad("", name_w);
    for (std::size_t g = 0; g < t.groups.size(); ++g) line += "| " + pad("P", kCell) + pad("R", kCell) + pad("F1", kCell);
    out << line << '\n';

    auto emit = [&](const std::string& name, auto cell) {
      std::string row = pad(name, name_w);
      for (std::size_t g = 0; g < t.groups.size(); ++g) {
        Metrics m = cell(g);
        row += "| " + pad(fixed2(m.precision), kCell) + pad(fixed2(m.recall), kCell) + pad(fixed2(m.f1), kCell);
      }
      while (!row.empty() && row.back() == ' ') row.pop_back();
      out << row << '\n';
    };
    for (std::size_t r = 0; r < t.row_names.size(); ++r) emit(t.row_names[r], [&](std::size_t g) { return t.cells[r][g]; });
    if (!t.cells.empty()) emit("Average", [&](std::size_t g) { return *t.average(g); });
  }
  if (!report.intervals.empty()) {
    out << "\nConfidence intervals\n";
    for (const auto& ci : report.intervals) {
      double p = static_cast<double>(ci.successes) / static_cast<double>(ci.n);
      out << ci.label << ": " << fixed2(p) << " [" << fixed2(ci.interval.low) << ", " << fixed2(ci.interval.high)
          << "] (" << ci.successes << "/" << ci.n << ")\n";
    }
  }
  std::string s = out.str();
  std::string trimmed;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) {
    while (!l.empty() && l.back() == ' ') l.pop_back();
    trimmed += l + '\n';
  }
  return trimmed;
}

nlohmann::ordered_json render_json(const Report& report) {
  nlohmann::ordered_json j;
  j["title"] = report.title;
  j["tables"] = nlohmann::ordered_json::array();
  for (const auto& t : report.tables) {
    nlohmann::ordered_json tj;
    tj["title"] = t.title;
    tj["row_heading"] = t.row_heading;
    tj["groups"] = t.groups;
    tj["rows"] = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < t.row_names.size(); ++r) {
      nlohmann::ordered_json rj;
      rj["name"] = t.row_names[r];
      rj["cells"] = nlohmann::ordered_json::array();
      for (std::size_t g = 0; g < t.groups.size(); ++g) {
        auto cj = metrics_json(t.cells[r][g]);
        if (r < t.counts.size() && g < t.counts[r].size() && t.counts[r][g]) {
          const auto& c = *t.counts[r][g];
          cj["tp"] = c.tp;
          cj["fp"] = c.fp;
          cj["fn"] = c.fn;
        }
        rj["cells"].push_back(cj);
      }
      tj["rows"].push_back(rj);
    }
    tj["average"] = nlohmann::ordered_json::array();
    for (std::size_t g = 0; g < t.groups.size(); ++g)
      if (auto avg = t.average(g)) tj["average"].push_back(metrics_json(*avg));
    j["tables"].push_back(tj);
  }
  j["intervals"] = nlohmann::ordered_json::array();
  for (const auto& ci : report.intervals)
    j["intervals"].push_back({{"label", ci.label},
                              {"successes", ci.successes},
                              {"n", ci.n},
                              {"confidence", ci.interval.confidence},
                              {"low", ci.interval.low},
                              {"high", ci.interval.high}});
  return j;
}

Report report_from_json(const nlohmann::json& j) {
  Report r;
  r.title = j.value("title", r.title);
  for (const auto& tj : j.value("tables", nlohmann::json::array())) {
    MetricTable t;
    t.title = tj.at("title").get<std::string>();
    t.row_heading = tj.value("row_heading", t.row_heading);
    t.groups = tj.at("groups").get<std::vector<std::string>>();
    for (const auto& rj : tj.at("rows")) {
      std::vector<Metrics> ms;
      std::vector<std::optional<MatchCounts>> cs;
      for (const auto& cj : rj.at("cells")) {
        ms.push_back(metrics_from(cj));
        if (cj.contains("tp"))
          cs.push_back(MatchCounts{cj["tp"].get<std::size_t>(), cj["fp"].get<std::size_t>(), cj["fn"].get<std::size_t>()});
        else
          cs.push_back(std::nullopt);
      }
      t.add_row(rj.at("name").get<std::string>(), std::move(ms), std::move(cs));
    }
    r.tables.push_back(std::move(t));
  }
  for (const auto& cj : j.value("intervals", nlohmann::json::array())) {
    CiAnnotation ci;
    ci.label = cj.at("label").get<std::string>();
    ci.successes = cj.at("successes").get<std::size_t>();
    ci.n = cj.at("n").get<std::size_t>();
    ci.interval = {cj.at("low").get<double>(), cj.at("high").get<double>(), cj.at("confidence").get<double>()};
    r.intervals.push_back(ci);
  }
  return r;
}

}  // namespace sigkit
