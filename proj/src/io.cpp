#include "gedfn/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gedfn/errors.hpp"
#include "gedfn/hash.hpp"

namespace gedfn {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    out.emplace_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

char detect_delimiter(std::string_view header) {
  return header.find('\t') != std::string_view::npos ? '\t' : ',';
}

template <typename T>
void check_unique(const std::vector<T>& items, const std::string& what, const fs::path& path) {
  std::unordered_set<T> seen;
  for (const auto& item : items) {
    if (!seen.insert(item).second) {
      throw IngestionError("duplicate " + what + " '" + item + "' in " + path.string());
    }
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return {buf, end};
}

double parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw IngestionError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

ExpressionTable read_expression(const fs::path& path, bool transposed) {
  auto lines = read_lines(path);
  lines.erase(std::remove_if(lines.begin(), lines.end(),
                             [](const std::string& l) { return trim(l).empty(); }),
              lines.end());
  if (lines.size() < 2) throw IngestionError("expression file has no data rows: " + path.string());
  const char delim = detect_delimiter(lines.front());
  auto header = split_fields(lines.front(), delim);
  std::vector<std::string> column_ids(header.begin() + 1, header.end());
  std::vector<std::string> row_ids;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(lines.size() - 1),
                         static_cast<Eigen::Index>(column_ids.size()));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto fields = split_fields(lines[r], delim);
    if (fields.size() != header.size()) {
      throw IngestionError(path.string() + ": line " + std::to_string(r + 1) + " has " +
                           std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(header.size()));
    }
    row_ids.push_back(fields[0]);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      try {
        values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - 1)) =
            parse_double(fields[c]);
      } catch (const IngestionError& e) {
        throw IngestionError(path.string() + ": line " + std::to_string(r + 1) + ": " + e.what());
      }
    }
  }
  ExpressionTable t;
  if (transposed) {
    t.feature_names = std::move(row_ids);
    t.sample_ids = std::move(column_ids);
    t.values = values.transpose();
  } else {
    t.feature_names = std::move(column_ids);
    t.sample_ids = std::move(row_ids);
    t.values = std::move(values);
  }
  check_unique(t.feature_names, "feature name", path);
  check_unique(t.sample_ids, "sample id", path);
  return t;
}

std::map<std::string, int> read_labels(const fs::path& path,
                                       const std::optional<std::string>& positive_label) {
  auto lines = read_lines(path);
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& line : lines) {
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, detect_delimiter(line));
    if (fields.size() != 2) {
      throw IngestionError(path.string() + ": expected 2 fields per line, got '" + line + "'");
    }
    rows.emplace_back(fields[0], fields[1]);
  }
  auto is_label = [&](const std::string& v) {
    return positive_label ? true : (v == "0" || v == "1");
  };
  // Header: first row whose label is not a usable label (numeric mode), or
  // literally named "label" (positive-label mode).
  if (!rows.empty() && (!is_label(rows.front().second) || rows.front().second == "label")) {
    rows.erase(rows.begin());
  }

  std::map<std::string, int> labels;
  std::set<std::string> offending;
  std::set<std::string> others;
  for (const auto& [id, value] : rows) {
    int mapped = 0;
    if (positive_label) {
      if (value == *positive_label) {
        mapped = 1;
      } else {
        others.insert(value);
      }
    } else if (value == "1") {
      mapped = 1;
    } else if (value != "0") {
      offending.insert(value);
      continue;
    }
    if (!labels.emplace(id, mapped).second) {
      throw IngestionError("duplicate sample id '" + id + "' in " + path.string());
    }
  }
  if (positive_label && others.size() > 1) offending = others;
  if (!offending.empty()) {
    std::string list;
    for (const auto& v : offending) list += (list.empty() ? "" : ", ") + v;
    throw IngestionError("unmappable labels in " + path.string() + ": " + list);
  }
  return labels;
}

NamedEdgeList read_edge_list(const fs::path& path) {
  NamedEdgeList out;
  std::unordered_map<std::string, int> index;
  std::set<Edge> seen;
  auto id_of = [&](const std::string& name) {
    auto [it, inserted] = index.emplace(name, static_cast<int>(out.names.size()));
    if (inserted) out.names.push_back(name);
    return it->second;
  };
  int line_no = 0;
  for (const auto& raw : read_lines(path)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() == 1) {
      id_of(tokens[0]);  // isolated vertex
      continue;
    }
    if (tokens.size() != 2) {
      throw IngestionError(path.string() + ": line " + std::to_string(line_no) +
                           " must hold one or two vertex identifiers");
    }
    int u = id_of(tokens[0]);
    int v = id_of(tokens[1]);
    if (u == v) continue;
    Edge e = u < v ? Edge{u, v} : Edge{v, u};
    if (seen.insert(e).second) out.edges.push_back(e);
  }
  return out;
}

Ingested ingest(const fs::path& expression_path, const fs::path& labels_path,
                const fs::path& edgelist_path, const IngestOptions& options) {
  auto table = read_expression(expression_path, options.transposed);
  auto labels = read_labels(labels_path, options.positive_label);
  auto edges = read_edge_list(edgelist_path);

  std::unordered_map<std::string, int> vertex;
  for (std::size_t k = 0; k < edges.names.size(); ++k) vertex.emplace(edges.names[k], static_cast<int>(k));

  std::vector<std::pair<std::string, int>> features;  // name, expression column
  for (std::size_t c = 0; c < table.feature_names.size(); ++c) {
    if (vertex.count(table.feature_names[c])) features.emplace_back(table.feature_names[c], static_cast<int>(c));
  }
  if (features.empty()) {
    throw IngestionError("no features of " + expression_path.string() + " appear in the graph " +
                         edgelist_path.string());
  }
  std::sort(features.begin(), features.end());

  std::vector<std::pair<std::string, int>> samples;  // id, expression row
  std::size_t unlabeled = 0;
  for (std::size_t r = 0; r < table.sample_ids.size(); ++r) {
    if (labels.count(table.sample_ids[r])) {
      samples.emplace_back(table.sample_ids[r], static_cast<int>(r));
    } else {
      ++unlabeled;
    }
  }
  if (samples.empty()) throw IngestionError("no expression samples have labels");
  std::sort(samples.begin(), samples.end());

  Ingested out;
  auto& d = out.data;
  d.expression_features = table.feature_names.size();
  d.graph_vertices = edges.names.size();
  d.unlabeled_samples = unlabeled;
  d.X.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t r = 0; r < samples.size(); ++r) {
    d.sample_ids.push_back(samples[r].first);
    d.y.push_back(labels.at(samples[r].first));
    for (std::size_t c = 0; c < features.size(); ++c) {
      d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          table.values(samples[r].second, features[c].second);
    }
  }
  std::vector<int> keep;
  for (std::size_t c = 0; c < features.size(); ++c) {
    d.feature_names.push_back(features[c].first);
    d.feature_index.emplace(features[c].first, static_cast<int>(c));
    keep.push_back(vertex.at(features[c].first));
  }
  FeatureGraph full(static_cast<int>(edges.names.size()), edges.edges);
  out.graph = full.induced(keep);
  return out;
}

IngestedDataset ingest_for_features(const fs::path& expression_path,
                                    const std::optional<fs::path>& labels_path,
                                    const std::vector<std::string>& features,
                                    const IngestOptions& options) {
  auto table = read_expression(expression_path, options.transposed);
  std::map<std::string, int> labels;
  if (labels_path) labels = read_labels(*labels_path, options.positive_label);

  std::unordered_map<std::string, int> column;
  for (std::size_t c = 0; c < table.feature_names.size(); ++c) column.emplace(table.feature_names[c], static_cast<int>(c));
  std::vector<int> cols;
  for (const auto& f : features) {
    auto it = column.find(f);
    if (it == column.end()) {
      throw IngestionError("feature '" + f + "' missing from " + expression_path.string());
    }
    cols.push_back(it->second);
  }

  std::vector<std::pair<std::string, int>> samples;
  IngestedDataset d;
  for (std::size_t r = 0; r < table.sample_ids.size(); ++r) {
    if (!labels_path || labels.count(table.sample_ids[r])) {
      samples.emplace_back(table.sample_ids[r], static_cast<int>(r));
    } else {
      ++d.unlabeled_samples;
    }
  }
  if (samples.empty()) throw IngestionError("no usable samples in " + expression_path.string());
  std::sort(samples.begin(), samples.end());

  d.expression_features = table.feature_names.size();
  d.feature_names = features;
  for (std::size_t c = 0; c < features.size(); ++c) d.feature_index.emplace(features[c], static_cast<int>(c));
  d.X.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < samples.size(); ++r) {
    d.sample_ids.push_back(samples[r].first);
    d.y.push_back(labels_path ? labels.at(samples[r].first) : 0);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = table.values(samples[r].second, cols[c]);
    }
  }
  return d;
}

ZScoreResult zscore(const Eigen::MatrixXd& X) {
  ZScoreResult out;
  const auto n = X.rows();
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const auto col = X.col(c);
    if (n < 2 || (col.array() == col(0)).all()) {
      out.dropped.push_back(static_cast<int>(c));
    } else {
      out.kept.push_back(static_cast<int>(c));
    }
  }
  out.X.resize(n, static_cast<Eigen::Index>(out.kept.size()));
  for (std::size_t k = 0; k < out.kept.size(); ++k) {
    const auto col = X.col(out.kept[k]);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n - 1));
    out.X.col(static_cast<Eigen::Index>(k)) = (col.array() - mean) / sd;
  }
  return out;
}

std::vector<std::string> standardize(Ingested& ingested) {
  auto& d = ingested.data;
  auto z = zscore(d.X);
  std::vector<std::string> dropped;
  for (int c : z.dropped) dropped.push_back(d.feature_names[c]);
  if (!z.dropped.empty()) {
    std::vector<std::string> names;
    d.feature_index.clear();
    for (int c : z.kept) {
      d.feature_index.emplace(d.feature_names[c], static_cast<int>(names.size()));
      names.push_back(d.feature_names[c]);
    }
    d.feature_names = std::move(names);
    ingested.graph = ingested.graph.induced(z.kept);
  }
  if (d.feature_names.empty()) throw IngestionError("every feature is constant");
  d.X = std::move(z.X);
  return dropped;
}

// ---------------------------------------------------------------------------

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestionError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IngestionError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

std::string file_hash(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

void write_expression(const fs::path& path, const Eigen::MatrixXd& X,
                      const std::vector<std::string>& sample_ids,
                      const std::vector<std::string>& feature_names) {
  std::string out = "sample_id";
  for (const auto& f : feature_names) out += "," + f;
  out += "\n";
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    out += sample_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      out += ',';
      out += format_double(X(r, c));
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_labels(const fs::path& path, const std::vector<std::string>& sample_ids,
                  const std::vector<int>& y) {
  std::string out = "sample_id,label\n";
  for (std::size_t i = 0; i < y.size(); ++i) out += sample_ids[i] + "," + std::to_string(y[i]) + "\n";
  write_file_atomic(path, out);
}

void write_edge_list(const fs::path& path, const FeatureGraph& graph,
                     const std::vector<std::string>& names) {
  std::string out;
  for (const auto& [u, v] : graph.edges()) out += names[u] + "\t" + names[v] + "\n";
  for (int v = 0; v < graph.vertex_count(); ++v) {
    if (graph.degree(v) == 0) out += names[v] + "\n";
  }
  for (int v = 0; v < graph.vertex_count(); ++v) {
    if (graph.degree(v) == 0) out += names[v] + "\n";
  }
  write_file_atomic(path, out);
}

std::vector<std::string> numbered_names(std::string_view prefix, int count) {
  const int width = std::max<int>(1, static_cast<int>(std::to_string(std::max(0, count - 1)).size()));
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::ostringstream os;
    os << prefix << std::setw(width) << std::setfill('0') << i;
    names.push_back(os.str());
  }
  return names;
}

void export_dataset(const fs::path& directory, const SyntheticDataset& dataset) {
  const auto features = numbered_names("f", dataset.p());
  const auto samples = numbered_names("s", dataset.n());
  write_expression(directory / "expression.csv", dataset.X, samples, features);
  write_labels(directory / "labels.csv", samples, dataset.y);
  write_edge_list(directory / "edges.txt", dataset.graph, features);
  std::string pred = "feature,role,beta\n";
  auto row = [&](int v, const char* role) {
    pred += features[v] + "," + role + "," + format_double(dataset.outcome.beta(v)) + "\n";
  };
  for (int v : dataset.predictors.cores) row(v, "core");
  for (std::size_t k = dataset.predictors.cores.size(); k < dataset.predictors.clique_members.size(); ++k) {
    row(dataset.predictors.clique_members[k], "clique");
  }
  for (int v : dataset.predictors.singletons) row(v, "singleton");
  write_file_atomic(directory / "predictors.csv", pred);
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::map<std::string, std::string> kv;
  int line_no = 0;
  for (const auto& raw : read_lines(path)) {
    ++line_no;
    std::string_view line = raw;
    if (auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw IngestionError(path.string() + ": line " + std::to_string(line_no) + " is not key=value");
    }
    std::string value(trim(line.substr(eq + 1)));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    kv[std::string(trim(line.substr(0, eq)))] = value;
  }
  return kv;
}

}  // namespace gedfn
