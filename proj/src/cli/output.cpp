#include "ibp/cli/output.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ibp/cli/config.hpp"
#include "ibp/error.hpp"

namespace ibp::cli {

using nlohmann::json;

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
  require(static_cast<bool>(out_), ErrorCode::kIo, "cannot write '" + path + "'");
  for (const auto& h : header) cell(h);
  end_row();
}

void CsvWriter::sep() {
  if (row_started_) out_ << ',';
  row_started_ = true;
}

CsvWriter& CsvWriter::cell(double x) {
  sep();
  out_ << fmt(x);
  return *this;
}

CsvWriter& CsvWriter::cell(std::uint64_t x) {
  sep();
  out_ << x;
  return *this;
}

CsvWriter& CsvWriter::cell(const std::string& x) {
  sep();
  out_ << x;
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  row_started_ = false;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
}

namespace {

json flat(const std::vector<AgentState>& states) {
  json out = json::array();
  for (const auto& s : states) {
    out.push_back(s.s);
    out.push_back(s.v);
  }
  return out;
}

std::vector<AgentState> unflat(const json& j, const std::string& where) {
  require(j.is_array() && j.size() % 2 == 0, ErrorCode::kConfig, where + " must be a flat [s, v, ...] array");
  std::vector<AgentState> out;
  for (std::size_t i = 0; i < j.size(); i += 2) {
    require(j[i].is_number() && j[i + 1].is_number(), ErrorCode::kConfig, where + " must hold numbers");
    out.push_back({j[i].get<double>(), j[i + 1].get<double>()});
  }
  return out;
}

}  // namespace

json dataset_to_json(const std::vector<DatasetItem>& items) {
  json arr = json::array();
  for (const auto& it : items) {
    arr.push_back({{"id", it.id},
                   {"scenario", scenario_to_json(it.scenario)},
                   {"truth_human", flat(it.truth_human.states)},
                   {"truth_robot", flat(it.truth_robot.states)}});
  }
  return arr;
}

std::vector<DatasetItem> dataset_from_json(const json& j) {
  require(j.is_array(), ErrorCode::kConfig, "dataset items must be an array");
  std::vector<DatasetItem> items;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = "dataset item " + std::to_string(i);
    const auto& e = j[i];
    require(e.is_object() && e.contains("id") && e["id"].is_number_unsigned() && e.contains("scenario") &&
                e.contains("truth_human") && e.contains("truth_robot"),
            ErrorCode::kConfig, where + " needs id, scenario, truth_human, truth_robot");
    DatasetItem item;
    item.id = e["id"].get<std::uint64_t>();
    item.scenario = scenario_from_json(e["scenario"], where + ".scenario");
    item.truth_human.states = unflat(e["truth_human"], where + ".truth_human");
    item.truth_robot.states = unflat(e["truth_robot"], where + ".truth_robot");
    try {
      item.scenario.validate();
      validate_plan(item.truth_robot, item.scenario);
    } catch (const Error& err) {
      fail(ErrorCode::kConfig, where + ": " + err.what());
    }
    require(item.truth_human.horizon() == item.scenario.horizon && item.truth_human.states.front() == item.scenario.human0,
            ErrorCode::kConfig, where + ": truth_human does not match the scenario");
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<DatasetItem> load_dataset(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kConfig, "cannot open dataset '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, "dataset '" + path + "' is not valid JSON at byte " + std::to_string(e.byte));
  }
  require(j.is_object() && j.contains("items"), ErrorCode::kConfig, "dataset '" + path + "' has no items");
  return dataset_from_json(j["items"]);
}

RobotPlan load_plan_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kConfig, "cannot open plan '" + path + "'");
  std::string line;
  std::getline(in, line);
  require(line == "t,s,v", ErrorCode::kConfig, "plan '" + path + "' must start with header t,s,v");
  RobotPlan plan;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int t = 0;
    AgentState st;
    char c1 = 0, c2 = 0;
    row >> t >> c1 >> st.s >> c2 >> st.v;
    require(row && c1 == ',' && c2 == ',' && t == plan.horizon() + 1, ErrorCode::kConfig,
            "plan '" + path + "': malformed row '" + line + "'");
    plan.states.push_back(st);
  }
  return plan;
}

json report_to_json(const ShapleyReport& r) {
  json stats = json::object();
  for (const auto& [metric, segs] : r.stats) {
    json arr = json::array();
    for (const auto& s : segs) arr.push_back({{"mean", s.mean}, {"std", s.std}});
    stats[std::string(to_string(metric))] = std::move(arr);
  }
  json scenarios = json::array();
  for (const auto& sc : r.scenarios) {
    json phi = json::object();
    json nu = json::object();
    for (const auto& [metric, v] : sc.phi) phi[std::string(to_string(metric))] = v;
    for (const auto& [metric, v] : sc.nu) nu[std::string(to_string(metric))] = v;
    scenarios.push_back({{"id", sc.id}, {"phi", phi}, {"nu", nu}});
  }
  json failures = json::array();
  for (const auto& f : r.failures) failures.push_back({{"id", f.id}, {"message", f.message}});
  json gated = json::array();
  for (auto g : r.options.gated) gated.push_back(std::string(to_string(g)));
  return {{"predictor", r.predictor},
          {"verdict", std::string(to_string(r.verdict))},
          {"violations", r.violations},
          {"epsilon", r.options.epsilon},
          {"gated", gated},
          {"cuts", r.options.scheme.cuts},
          {"k", r.options.k},
          {"common_random_numbers", r.options.common_random_numbers},
          {"stats", stats},
          {"scenarios", scenarios},
          {"failures", failures}};
}

std::string format_table(const ShapleyReport& r) {
  const int m = r.options.scheme.segments();
  std::ostringstream out;
  out << "predictor: " << r.predictor << "  scenarios: " << r.scenarios.size() << "  K: " << r.options.k
      << "  cuts:";
  for (int c : r.options.scheme.cuts) out << ' ' << c;
  out << '\n';
  char cell[96];
  std::snprintf(cell, sizeof cell, "%-9s", "metric");
  out << cell;
  for (int j = 1; j <= m; ++j) {
    std::snprintf(cell, sizeof cell, "  %-20s", ("phi_" + std::to_string(j)).c_str());
    out << cell;
  }
  out << '\n';
  for (const auto& [metric, segs] : r.stats) {
    std::snprintf(cell, sizeof cell, "%-9s", std::string(to_string(metric)).c_str());
    out << cell;
    for (const auto& s : segs) {
      char value[64];
      std::snprintf(value, sizeof value, "%.4f ± %.4f", s.mean, s.std);
      // the plus-minus sign is two bytes but one column
      std::snprintf(cell, sizeof cell, "  %-21s", value);
      out << cell;
    }
    out << '\n';
  }
  out << "verdict: " << to_string(r.verdict) << " (epsilon " << fmt(r.options.epsilon) << " m, gated";
  for (auto g : r.options.gated) out << ' ' << to_string(g);
  out << ")\n";
  for (const auto& v : r.violations) out << "  violation: " << v << '\n';
  if (!r.failures.empty()) out << "  predictor failures: " << r.failures.size() << " scenario(s)\n";
  return out.str();
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace

std::string render_histogram_svg(const std::string& title, const std::string& x_label,
                                 const std::vector<double>& edges, const std::vector<SvgSeries>& series) {
  require(edges.size() >= 2, ErrorCode::kInvalidBins, "histogram plot needs at least one bin");
  constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  const double x0 = edges.front();
  const double x1 = edges.back();
  double ymax = 0.0;
  for (const auto& s : series) {
    for (double m : s.masses) ymax = std::max(ymax, m);
  }
  if (ymax <= 0.0) ymax = 1.0;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + ph - y / ymax * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(kW / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
      << num(kTop + ph) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
      << num(kTop + ph) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double x = x0 + (x1 - x0) * i / 5.0;
    const double y = ymax * i / 5.0;
    out << "<text x=\"" << num(sx(x)) << "\" y=\"" << num(kTop + ph + 16) << "\" text-anchor=\"middle\">" << tick(x)
        << "</text>\n";
    out << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(sy(y) + 4) << "\" text-anchor=\"end\">" << tick(y)
        << "</text>\n";
  }
  out << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kH - 10) << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"14\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << num(kTop + ph / 2) << ")\">mass</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    require(s.masses.size() + 1 == edges.size(), ErrorCode::kInvalidBins, "series '" + s.name + "' has wrong bin count");
    out << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << escape(s.color) << "\" points=\"";
    out << num(sx(edges.front())) << ',' << num(sy(0));
    for (std::size_t b = 0; b < s.masses.size(); ++b) {
      out << ' ' << num(sx(edges[b])) << ',' << num(sy(s.masses[b])) << ' ' << num(sx(edges[b + 1])) << ','
          << num(sy(s.masses[b]));
    }
    out << ' ' << num(sx(edges.back())) << ',' << num(sy(0)) << "\"/>\n";
    const double ly = kTop + 14 + 16.0 * k;
    out << "<line x1=\"" << num(kLeft + pw - 150) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(kLeft + pw - 130)
        << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << escape(s.color) << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(kLeft + pw - 125) << "\" y=\"" << num(ly) << "\">" << escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace ibp::cli
