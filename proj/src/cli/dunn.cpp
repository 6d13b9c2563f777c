#include "adaaug/dunn.hpp"

#include "adaaug/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace adaaug::cli {

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

template <typename T>
T parse_field(std::string_view field, int line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  T v{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw FormatError("line " + std::to_string(line) + ": cannot parse '" + std::string(field) + "'");
  }
  return v;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

double dunn_index(const std::vector<std::vector<double>>& points, const std::vector<int>& labels) {
  if (points.size() != labels.size()) {
    throw ContractError("dunn: " + std::to_string(points.size()) + " embeddings but " + std::to_string(labels.size()) +
                        " labels");
  }
  if (points.empty()) throw ContractError("dunn: no embeddings");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw ContractError("dunn: embeddings differ in dimension");
    for (double v : p)
      if (!std::isfinite(v)) throw ContractError("dunn: non-finite embedding value");
  }
  const int max_label = *std::max_element(labels.begin(), labels.end());
  if (*std::min_element(labels.begin(), labels.end()) < 0) throw ContractError("dunn: negative label");
  std::vector<std::vector<std::size_t>> clusters(static_cast<std::size_t>(max_label) + 1);
  for (std::size_t i = 0; i < labels.size(); ++i) clusters[static_cast<std::size_t>(labels[i])].push_back(i);
  if (clusters.size() < 2) throw ContractError("dunn: need at least two clusters");
  for (std::size_t c = 0; c < clusters.size(); ++c)
    if (clusters[c].empty()) throw ContractError("dunn: cluster " + std::to_string(c) + " is empty");

  double max_spread = 0.0;
  for (const auto& members : clusters) {
    if (members.size() < 2) continue;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b, ++pairs) sum += distance(points[members[a]], points[members[b]]);
    max_spread = std::max(max_spread, sum / static_cast<double>(pairs));
  }
  if (max_spread == 0.0) throw DegenerateInputError("dunn: every cluster has zero compactness");

  double min_sep = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < clusters.size(); ++i)
    for (std::size_t j = i + 1; j < clusters.size(); ++j)
      for (auto a : clusters[i])
        for (auto b : clusters[j]) min_sep = std::min(min_sep, distance(points[a], points[b]));
  return min_sep / max_spread;
}

std::vector<std::vector<double>> read_embeddings(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (blank(line)) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(parse_field<double>(field, n));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<int> read_labels(std::istream& in) {
  std::vector<int> labels;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!blank(line)) labels.push_back(parse_field<int>(line, n));
  }
  return labels;
}

double dunn_index_files(const std::filesystem::path& embeddings, const std::filesystem::path& labels) {
  std::ifstream e(embeddings), l(labels);
  if (!e) throw FormatError("cannot open " + embeddings.string());
  if (!l) throw FormatError("cannot open " + labels.string());
  return dunn_index(read_embeddings(e), read_labels(l));
}

}  // namespace adaaug::cli
