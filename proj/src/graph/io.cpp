#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "nsbm/error.hpp"
#include "nsbm/graph.hpp"

namespace nsbm {
namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_index(std::string_view s, std::uint64_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

std::unordered_map<std::string, NodeId> id_lookup(const Graph& g) {
  std::unordered_map<std::string, NodeId> m;
  for (NodeId v = 0; v < g.num_nodes(); ++v) m.emplace(g.id_of(v), v);
  return m;
}

}  // namespace

Graph parse_edge_list(std::istream& in, bool directed, bool weighted) {
  struct Raw {
    std::string src, dst;
    double weight;
    std::size_t line;
  };
  std::vector<Raw> raw;
  std::size_t declared = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      s.remove_prefix(1);
      s = trim(s);
      if (s.rfind("nodes:", 0) == 0) {
        std::uint64_t n = 0;
        if (!parse_index(trim(s.substr(6)), n)) throw ParseError("bad node-count comment", lineno);
        declared = n;
      }
      continue;
    }
    auto cols = split(s, '\t');
    if (cols.size() < 2 || cols.size() > 3) {
      throw ParseError("expected 2 or 3 tab-separated columns, got " + std::to_string(cols.size()), lineno);
    }
    const auto a = trim(cols[0]);
    const auto b = trim(cols[1]);
    if (a.empty() || b.empty()) throw ParseError("empty node id", lineno);
    if (a == b) throw ParseError("self-loop on node '" + std::string(a) + "'", lineno);
    double w = 1.0;
    if (cols.size() == 3 && weighted) {
      if (!parse_double(cols[2], w) || !std::isfinite(w)) {
        throw ParseError("non-numeric weight '" + std::string(cols[2]) + "'", lineno);
      }
    }
    raw.push_back({std::string(a), std::string(b), w, lineno});
  }
  if (raw.empty() && declared == 0) throw ParseError("edge list is empty", lineno == 0 ? 1 : lineno);

  std::vector<std::string> names;
  for (std::size_t i = 0; i < declared; ++i) names.push_back(std::to_string(i));
  for (const auto& r : raw) {
    names.push_back(r.src);
    names.push_back(r.dst);
  }
  bool numeric = true;
  for (const auto& n : names) {
    std::uint64_t x;
    if (!parse_index(n, x)) {
      numeric = false;
      break;
    }
  }
  std::sort(names.begin(), names.end(), [numeric](const std::string& a, const std::string& b) {
    if (numeric && a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::unordered_map<std::string, NodeId> index;
  for (std::size_t i = 0; i < names.size(); ++i) index.emplace(names[i], static_cast<NodeId>(i));

  std::vector<Edge> edges;
  edges.reserve(raw.size());
  for (const auto& r : raw) edges.push_back({index.at(r.src), index.at(r.dst), r.weight});
  if (!weighted) {
    // Unweighted input keeps unit weights: repeated lines are the same edge.
    for (auto& e : edges)
      if (!directed && e.src > e.dst) std::swap(e.src, e.dst);
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
      return x.src != y.src ? x.src < y.src : x.dst < y.dst;
    });
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const Edge& x, const Edge& y) { return x.src == y.src && x.dst == y.dst; }),
                edges.end());
  }
  Graph g(names.size(), std::move(edges), directed);
  g.ids = std::move(names);
  return g;
}

Graph load_edge_list(const std::string& path, bool directed, bool weighted) {
  auto in = open_in(path);
  return parse_edge_list(in, directed, weighted);
}

void write_edge_list(const Graph& g, std::ostream& out, bool weighted) {
  out << std::setprecision(17);
  bool numeric_dense = true;
  for (NodeId v = 0; v < g.num_nodes() && numeric_dense; ++v) numeric_dense = g.id_of(v) == std::to_string(v);
  if (numeric_dense) out << "# nodes: " << g.num_nodes() << '\n';
  for (const auto& e : g.edges()) {
    out << g.id_of(e.src) << '\t' << g.id_of(e.dst);
    if (weighted) out << '\t' << e.weight;
    out << '\n';
  }
}

void save_edge_list(const Graph& g, const std::string& path, bool weighted) {
  auto out = open_out(path);
  write_edge_list(g, out, weighted);
}

void load_labels(Graph& g, const std::string& path) {
  auto in = open_in(path);
  auto lookup = id_lookup(g);
  g.labels.assign(g.num_nodes(), {});
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto cols = split(s, '\t');
    if (cols.size() != 2) throw ParseError("expected node<TAB>labels", lineno);
    auto it = lookup.find(std::string(trim(cols[0])));
    if (it == lookup.end()) throw ParseError("unknown node '" + std::string(cols[0]) + "'", lineno);
    auto& ls = g.labels[it->second];
    for (auto tok : split(trim(cols[1]), ',')) {
      std::uint64_t l = 0;
      if (!parse_index(trim(tok), l) || l > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
        throw ParseError("bad label '" + std::string(tok) + "'", lineno);
      }
      ls.push_back(static_cast<int>(l));
    }
  }
}

void save_labels(const Graph& g, const std::string& path) {
  auto out = open_out(path);
  for (NodeId v = 0; v < g.labels.size(); ++v) {
    if (g.labels[v].empty()) continue;
    out << g.id_of(v) << '\t';
    for (std::size_t i = 0; i < g.labels[v].size(); ++i) out << (i ? "," : "") << g.labels[v][i];
    out << '\n';
  }
}

void load_features(Graph& g, const std::string& path) {
  auto in = open_in(path);
  auto lookup = id_lookup(g);
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  Tensor f;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = trim(line);
    if (s.empty()) continue;
    auto cols = split(s, ',');
    if (lineno == 1) {
      if (cols.size() < 2) throw ParseError("feature header needs a node column and features", lineno);
      dim = cols.size() - 1;
      f = Tensor(g.num_nodes(), dim, std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    if (cols.size() != dim + 1) throw ParseError("expected " + std::to_string(dim + 1) + " columns", lineno);
    auto it = lookup.find(std::string(trim(cols[0])));
    if (it == lookup.end()) throw ParseError("unknown node '" + std::string(cols[0]) + "'", lineno);
    for (std::size_t c = 0; c < dim; ++c) {
      if (!parse_double(cols[c + 1], f(it->second, c))) {
        throw ParseError("non-numeric feature '" + std::string(cols[c + 1]) + "'", lineno);
      }
    }
  }
  if (lineno == 0) throw ParseError("feature file is empty", 1);
  g.features = std::move(f);
}

void save_features(const Graph& g, const std::string& path) {
  if (!g.features) throw Error("graph has no features to save");
  auto out = open_out(path);
  out << "node";
  for (std::size_t c = 0; c < g.features->cols(); ++c) out << ",f" << c;
  out << '\n';
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    out << g.id_of(v);
    for (double x : g.features->row(v)) out << ',' << x;
    out << '\n';
  }
}

std::pair<Tensor, std::vector<std::string>> load_matrix_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::string> header;
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0, rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = trim(line);
    if (s.empty()) continue;
    auto cols = split(s, ',');
    if (header.empty()) {
      for (auto c : cols) header.emplace_back(trim(c));
      continue;
    }
    if (cols.size() != header.size()) throw ParseError("expected " + std::to_string(header.size()) + " columns", lineno);
    for (auto c : cols) {
      double x;
      if (!parse_double(c, x)) throw ParseError("non-numeric value '" + std::string(c) + "'", lineno);
      values.push_back(x);
    }
    ++rows;
  }
  if (header.empty()) throw ParseError("matrix file is empty", 1);
  return {Tensor(rows, header.size(), std::move(values)), std::move(header)};
}

void save_matrix_csv(const Tensor& m, const std::vector<std::string>& header, const std::string& path) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    out << (c ? "," : "") << (c < header.size() ? header[c] : "f" + std::to_string(c));
  }
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

}  // namespace nsbm
