#pragma once

// Dunn index of labelled embeddings:
//   DI = min_{i != j} delta(C_i, C_j) / max_k Delta(C_k)
// delta: smallest Euclidean distance between members of two clusters.
// Delta: mean pairwise Euclidean distance inside a cluster (0 for a singleton).

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace adaaug::cli {

class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rows of `points` must share one dimension; labels index clusters.
/// Fewer than two distinct labels -> ContractError; every cluster compactness 0 -> DegenerateInputError.
double dunn_index(const std::vector<std::vector<double>>& points, const std::vector<int>& labels);

/// One comma-separated row of reals per line; blank lines ignored.
std::vector<std::vector<double>> read_embeddings(std::istream& in);
/// One integer per line; blank lines ignored.
std::vector<int> read_labels(std::istream& in);

double dunn_index_files(const std::filesystem::path& embeddings, const std::filesystem::path& labels);

}  // namespace adaaug::cli
