#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gedfn/graph.hpp"
#include "gedfn/synthgen.hpp"

namespace gedfn {

namespace fs = std::filesystem;

/// Samples x features table read from delimited text: header row of feature
/// names, first column sample ids. Comma or tab delimited (detected from the
/// header). With `transposed` the file holds features as rows instead.
struct ExpressionTable {
  std::vector<std::string> sample_ids;
  std::vector<std::string> feature_names;
  Eigen::MatrixXd values;  // samples x features
};

ExpressionTable read_expression(const fs::path& path, bool transposed = false);

/// Two columns (sample id, label); an optional header line is skipped when
/// its label field is not a valid label. Without `positive_label` labels must
/// be 0/1; with it, that value maps to 1 and exactly one other value to 0.
std::map<std::string, int> read_labels(const fs::path& path,
                                       const std::optional<std::string>& positive_label = {});

/// One edge per line, two whitespace-separated identifiers; a line with a
/// single identifier declares an isolated vertex. Identifiers get dense
/// 0-based indices in first-appearance order. Self-loops and repeated edges
/// are skipped; '#' starts a comment.
struct NamedEdgeList {
  std::vector<std::string> names;
  std::vector<Edge> edges;
};

NamedEdgeList read_edge_list(const fs::path& path);

struct IngestedDataset {
  Eigen::MatrixXd X;
  std::vector<int> y;
  std::vector<std::string> feature_names;  // lexicographic
  std::vector<std::string> sample_ids;     // lexicographic
  std::map<std::string, int> feature_index;

  std::size_t expression_features = 0;  // before the graph screen
  std::size_t graph_vertices = 0;
  std::size_t unlabeled_samples = 0;
};

struct Ingested {
  IngestedDataset data;
  FeatureGraph graph;  // over data.feature_names, same order
};

struct IngestOptions {
  bool transposed = false;
  std::optional<std::string> positive_label;
};

/// Keeps the features present in both the expression table and the graph,
/// ordered by name, and the samples that have labels, ordered by id.
Ingested ingest(const fs::path& expression_path, const fs::path& labels_path,
                const fs::path& edgelist_path, const IngestOptions& options = {});

/// Expression + labels restricted to the given features, in that order (no
/// graph screen). Throws IngestionError if a feature is missing. Samples
/// without a label are dropped; with no labels path every sample is kept
/// with label 0.
IngestedDataset ingest_for_features(const fs::path& expression_path,
                                    const std::optional<fs::path>& labels_path,
                                    const std::vector<std::string>& features,
                                    const IngestOptions& options = {});

struct ZScoreResult {
  Eigen::MatrixXd X;
  std::vector<int> kept;     // original column indices
  std::vector<int> dropped;  // constant columns
};

/// Per-column (x - mean) / sd with the n-1 denominator. Constant columns are
/// dropped.
ZScoreResult zscore(const Eigen::MatrixXd& X);

/// Z-scores `ingested` in place, dropping constant features from both the
/// matrix and the graph. Returns the names of the dropped features.
std::vector<std::string> standardize(Ingested& ingested);

// ---------------------------------------------------------------------------

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
double parse_double(std::string_view text);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);
/// FNV-1a of the file bytes as 16 hex digits.
std::string file_hash(const fs::path& path);
std::string hex64(std::uint64_t value);

void write_expression(const fs::path& path, const Eigen::MatrixXd& X,
                      const std::vector<std::string>& sample_ids,
                      const std::vector<std::string>& feature_names);
void write_labels(const fs::path& path, const std::vector<std::string>& sample_ids,
                  const std::vector<int>& y);
void write_edge_list(const fs::path& path, const FeatureGraph& graph,
                     const std::vector<std::string>& names);

/// Zero-padded identifiers ("f0007") whose lexicographic order is numeric.
std::vector<std::string> numbered_names(std::string_view prefix, int count);

/// Writes expression.csv, labels.csv, edges.txt and predictors.csv for a
/// synthetic dataset, using numbered_names("f"/"s") identifiers.
void export_dataset(const fs::path& directory, const SyntheticDataset& dataset);

/// Flat "key = value" text; '#' and ';' start comments.
std::map<std::string, std::string> read_key_values(const fs::path& path);

}  // namespace gedfn
