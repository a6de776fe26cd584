#include "icgnn/dataset_io.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "icgnn/errors.hpp"

namespace fs = std::filesystem;

namespace icgnn {

namespace {

[[noreturn]] void fail(const std::string& file, std::size_t line, const std::string& what) {
  throw DataError(file + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_or_throw(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  return in;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

long parse_long(std::string_view tok, const std::string& file, std::size_t line) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    fail(file, line, "expected an integer, got '" + std::string(tok) + "'");
  return v;
}

double parse_double(std::string_view tok, const std::string& file, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    fail(file, line, "expected a number, got '" + std::string(tok) + "'");
  return v;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw DataError("dataset directory not found: " + dir);
  for (const char* name : {"edges.txt", "features.csv", "labels.txt", "meta.txt"})
    if (!fs::exists(root / name)) throw DataError("missing dataset file: " + (root / name).string());

  Dataset ds;
  ds.name = root.filename().string();

  // meta.txt
  long n_nodes = -1, n_classes = -1, n_features = -1;
  {
    const std::string file = (root / "meta.txt").string();
    auto in = open_or_throw(root / "meta.txt");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string_view::npos) fail(file, lineno, "expected key=value");
      const auto key = trim(t.substr(0, eq));
      const long val = parse_long(trim(t.substr(eq + 1)), file, lineno);
      if (key == "n_nodes") n_nodes = val;
      else if (key == "n_classes") n_classes = val;
      else if (key == "n_features") n_features = val;
      else fail(file, lineno, "unknown meta key '" + std::string(key) + "'");
    }
    if (n_nodes < 1 || n_classes < 2 || n_features < 1)
      throw DataError(file + ": incomplete or invalid meta (need n_nodes, n_classes, n_features)");
  }
  ds.graph.n_nodes = static_cast<int>(n_nodes);
  ds.graph.n_classes = static_cast<int>(n_classes);

  // edges.txt
  {
    const std::string file = (root / "edges.txt").string();
    auto in = open_or_throw(root / "edges.txt");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = trim(line);
      if (t.empty()) continue;
      std::istringstream ss{std::string(t)};
      std::string a, b, extra;
      if (!(ss >> a >> b) || (ss >> extra))
        fail(file, lineno, "expected two node ids");
      const long u = parse_long(a, file, lineno);
      const long v = parse_long(b, file, lineno);
      if (u < 0 || u >= n_nodes || v < 0 || v >= n_nodes)
        fail(file, lineno, "edge endpoint outside [0," + std::to_string(n_nodes) + ")");
      ds.graph.edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
  }

  // features.csv
  {
    const std::string file = (root / "features.csv").string();
    auto in = open_or_throw(root / "features.csv");
    ds.graph.features = Matrix(static_cast<std::size_t>(n_nodes), static_cast<std::size_t>(n_features));
    std::string line;
    std::size_t lineno = 0, row = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = trim(line);
      if (t.empty()) continue;
      if (row >= static_cast<std::size_t>(n_nodes)) fail(file, lineno, "more feature rows than n_nodes");
      std::size_t col = 0, start = 0;
      const std::string s(t);
      while (true) {
        const auto comma = s.find(',', start);
        const auto tok = trim(std::string_view(s).substr(start, comma == std::string::npos
                                                                    ? std::string::npos
                                                                    : comma - start));
        if (col >= static_cast<std::size_t>(n_features)) fail(file, lineno, "too many feature columns");
        ds.graph.features(row, col) = parse_double(tok, file, lineno);
        ++col;
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (col != static_cast<std::size_t>(n_features))
        fail(file, lineno, "expected " + std::to_string(n_features) + " features, got " + std::to_string(col));
      ++row;
    }
    if (row != static_cast<std::size_t>(n_nodes))
      throw DataError(file + ": expected " + std::to_string(n_nodes) + " rows, got " + std::to_string(row));
  }

  // labels.txt
  {
    const std::string file = (root / "labels.txt").string();
    auto in = open_or_throw(root / "labels.txt");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = trim(line);
      if (t.empty()) continue;
      const long y = parse_long(t, file, lineno);
      if (y < 0 || y >= n_classes)
        fail(file, lineno, "label outside [0," + std::to_string(n_classes) + ")");
      ds.labels.push_back(static_cast<int>(y));
    }
    if (ds.labels.size() != static_cast<std::size_t>(n_nodes))
      throw DataError(file + ": expected " + std::to_string(n_nodes) + " labels, got " +
                      std::to_string(ds.labels.size()));
  }

  ds.graph.validate();
  return ds;
}

void write_dataset(const std::string& dir, const Graph& graph, const std::vector<int>& labels) {
  graph.validate();
  if (labels.size() != static_cast<std::size_t>(graph.n_nodes))
    throw DataError("write_dataset: label count mismatch");
  fs::create_directories(dir);
  const fs::path root(dir);

  {
    std::string out;
    for (const auto& [a, b] : graph.edges)
      out += std::to_string(a) + " " + std::to_string(b) + "\n";
    atomic_write((root / "edges.txt").string(), out);
  }
  {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < graph.features.rows; ++i) {
      for (std::size_t j = 0; j < graph.features.cols; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", graph.features(i, j));
        if (j) out += ',';
        out += buf;
      }
      out += '\n';
    }
    atomic_write((root / "features.csv").string(), out);
  }
  {
    std::string out;
    for (int y : labels) out += std::to_string(y) + "\n";
    atomic_write((root / "labels.txt").string(), out);
  }
  {
    std::string out = "n_nodes=" + std::to_string(graph.n_nodes) + "\n" +
                      "n_classes=" + std::to_string(graph.n_classes) + "\n" +
                      "n_features=" + std::to_string(graph.feature_dim()) + "\n";
    atomic_write((root / "meta.txt").string(), out);
  }
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write to " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace icgnn
