#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "adml/dataset.hpp"
#include "adml/simulation.hpp"

namespace adml::cli {

// 17 significant digits, enough to recover every double exactly.
std::string format_number(double value);

std::vector<std::string> split_csv_line(std::string_view line);

// Header W1..Wd,A,Y. Throws UsageError naming the first offending row.
Dataset read_dataset(std::istream& in);
Dataset read_dataset_file(const std::string& path);
void write_dataset(std::ostream& out, const Dataset& data);

inline constexpr std::string_view kMetricsHeader =
    "estimator,n,gamma,outcome_form,perturbed,bias,se,rmse,coverage,mean_ci_width,R,failures";
void write_metrics_row(std::ostream& out, const sim::MetricsRow& row);

struct MetricsCsv {
  std::vector<sim::MetricsRow> rows;
};
// Parses the output of write_metrics_row under kMetricsHeader.
MetricsCsv read_metrics(std::istream& in);

}  // namespace adml::cli
