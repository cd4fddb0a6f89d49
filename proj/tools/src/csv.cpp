#include "adml/cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "adml/cli/config.hpp"
#include "adml/errors.hpp"

namespace adml::cli {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

bool parse_double(const std::string& text, double& value) {
  if (text.empty()) return false;
  const char* first = text.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, text.data() + text.size(), value);
  return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

bool parse_size(const std::string& text, std::size_t& value) {
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  return !text.empty() && res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

}  // namespace

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw UsageError("dataset: empty input, expected a header W1..Wd,A,Y");
  const auto header = split_csv_line(line);
  const std::size_t columns = header.size();
  if (columns < 3 || header[columns - 2] != "A" || header[columns - 1] != "Y") {
    throw UsageError("dataset row 1: header must be W1,...,Wd,A,Y");
  }
  for (std::size_t j = 0; j + 2 < columns; ++j) {
    if (header[j] != "W" + std::to_string(j + 1)) {
      throw UsageError("dataset row 1: expected column W" + std::to_string(j + 1) + ", got '" + header[j] + "'");
    }
  }
  const std::size_t d = columns - 2;
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != columns) {
      throw UsageError("dataset row " + std::to_string(line_number) + ": expected " + std::to_string(columns) +
                       " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < columns; ++j) {
      double v = 0.0;
      if (!parse_double(fields[j], v) || !std::isfinite(v)) {
        throw UsageError("dataset row " + std::to_string(line_number) + ": column " + header[j] +
                         " is not a finite number: '" + fields[j] + "'");
      }
      if (j == d && v != 0.0 && v != 1.0) {
        throw UsageError("dataset row " + std::to_string(line_number) + ": A must be 0 or 1, got '" + fields[j] + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw UsageError("dataset: no data rows");
  Dataset data;
  data.W.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  data.A.resize(static_cast<Eigen::Index>(rows));
  data.Y.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < d; ++j) data.W(r, static_cast<Eigen::Index>(j)) = values[i * columns + j];
    data.A[r] = values[i * columns + d];
    data.Y[r] = values[i * columns + d + 1];
  }
  return data;
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  for (Eigen::Index j = 0; j < data.dimension(); ++j) out << 'W' << (j + 1) << ',';
  out << "A,Y\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dimension(); ++j) out << format_number(data.W(i, j)) << ',';
    out << (data.A[i] != 0.0 ? 1 : 0) << ',' << format_number(data.Y[i]) << '\n';
  }
}

void write_metrics_row(std::ostream& out, const sim::MetricsRow& row) {
  out << estimators::to_string(row.estimator) << ',' << row.n << ',' << format_number(row.gamma) << ','
      << sim::to_string(row.outcome_form) << ',' << (row.perturbed ? "true" : "false") << ','
      << format_number(row.bias) << ',' << format_number(row.se) << ',' << format_number(row.rmse) << ','
      << format_number(row.coverage) << ',' << format_number(row.mean_ci_width) << ',' << row.replications
      << ',' << row.failures << '\n';
}

MetricsCsv read_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kMetricsHeader) {
    throw UsageError("metrics: missing header");
  }
  MetricsCsv csv;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    const auto bad = [&](const std::string& what) {
      return UsageError("metrics row " + std::to_string(line_number) + ": " + what);
    };
    if (f.size() != 12) throw bad("expected 12 fields");
    sim::MetricsRow row;
    const auto estimator = estimators::parse_estimator(f[0]);
    const auto form = sim::parse_outcome_form(f[3]);
    if (!estimator) throw bad("unknown estimator '" + f[0] + "'");
    if (!form) throw bad("unknown outcome form '" + f[3] + "'");
    if (f[4] != "true" && f[4] != "false") throw bad("perturbed must be true or false");
    row.estimator = *estimator;
    row.outcome_form = *form;
    row.perturbed = f[4] == "true";
    if (!parse_size(f[1], row.n) || !parse_double(f[2], row.gamma) || !parse_double(f[5], row.bias) ||
        !parse_double(f[6], row.se) || !parse_double(f[7], row.rmse) || !parse_double(f[8], row.coverage) ||
        !parse_double(f[9], row.mean_ci_width) || !parse_size(f[10], row.replications) ||
        !parse_size(f[11], row.failures)) {
      throw bad("malformed number");
    }
    csv.rows.push_back(row);
  }
  return csv;
}

}  // namespace adml::cli
