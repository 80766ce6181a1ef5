#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "ibp/shapley.hpp"
#include "json.hpp"

namespace ibp::cli {

// Shortest decimal text that parses back to the same double.
std::string fmt(double x);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  CsvWriter& cell(double x);
  CsvWriter& cell(std::uint64_t x);
  CsvWriter& cell(int x) { return cell(static_cast<std::uint64_t>(x)); }
  CsvWriter& cell(const std::string& x);
  void end_row();

 private:
  void sep();
  std::ofstream out_;
  bool row_started_ = false;
};

void write_text(const std::string& path, const std::string& text);

nlohmann::json dataset_to_json(const std::vector<DatasetItem>& items);
std::vector<DatasetItem> dataset_from_json(const nlohmann::json& j);
std::vector<DatasetItem> load_dataset(const std::string& path);

// Robot plan from a CSV with header t,s,v.
RobotPlan load_plan_csv(const std::string& path);

nlohmann::json report_to_json(const ShapleyReport& report);

// Attribution table: one row per metric, "mean ± std" per segment.
std::string format_table(const ShapleyReport& report);

struct SvgSeries {
  std::string name;
  std::string color;
  std::vector<double> masses;  // one per bin
};

// Overlaid step histograms on shared bin edges. Output has no timestamps,
// so it is as reproducible as the data.
std::string render_histogram_svg(const std::string& title, const std::string& x_label,
                                 const std::vector<double>& edges, const std::vector<SvgSeries>& series);

}  // namespace ibp::cli
