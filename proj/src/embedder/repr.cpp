#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "nsbm/embedder.hpp"
#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"

namespace nsbm {
namespace {

double jaccard(const Graph& g, NodeId a, NodeId b) {
  auto na = g.neighbors(a);
  auto nb = g.neighbors(b);
  std::size_t i = 0, j = 0, common = 0;
  while (i < na.size() && j < nb.size()) {
    if (na[i].node == nb[j].node) {
      ++common;
      ++i;
      ++j;
    } else if (na[i].node < nb[j].node) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = na.size() + nb.size() - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

}  // namespace

NodeRepr build_repr(const Graph& g, NodeId v, std::size_t m, ReprKey key) {
  if (m == 0) throw ConfigError("build_repr: m must be >= 1");
  struct Cand {
    double key;
    NodeId node;
  };
  std::vector<Cand> cands;
  const auto dv = static_cast<double>(g.degree(v));
  for (const auto& nb : g.neighbors(v)) {
    double k = 0.0;
    switch (key) {
      case ReprKey::degree_difference:
        k = std::abs(static_cast<double>(g.degree(nb.node)) - dv);
        break;
      case ReprKey::jaccard:
        k = -jaccard(g, v, nb.node);
        break;
      case ReprKey::weight:
        k = -nb.weight;
        break;
    }
    cands.push_back({k, nb.node});
  }
  std::sort(cands.begin(), cands.end(),
            [](const Cand& a, const Cand& b) { return a.key != b.key ? a.key < b.key : a.node < b.node; });
  NodeRepr r;
  r.nodes.push_back(v);
  for (std::size_t i = 0; i < cands.size() && r.nodes.size() < m; ++i) r.nodes.push_back(cands[i].node);
  return r;
}

std::vector<NodeRepr> build_all_repr(const Graph& g, std::size_t m, ReprKey key) {
  std::vector<NodeRepr> out;
  out.reserve(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) out.push_back(build_repr(g, v, m, key));
  return out;
}

NodeRepr sample_walk(const Graph& g, NodeId v, std::size_t length, double p, double q, Rng& rng) {
  if (length == 0) throw ConfigError("sample_walk: length must be >= 1");
  if (!(p > 0.0) || !(q > 0.0)) throw ConfigError("sample_walk: p and q must be positive");
  NodeRepr r;
  r.source = ReprSource::walk;
  r.nodes.push_back(v);
  std::vector<double> w;
  while (r.nodes.size() < length) {
    const NodeId cur = r.nodes.back();
    auto nb = g.neighbors(cur);
    if (nb.empty()) break;
    w.resize(nb.size());
    double total = 0.0;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      double bias = 1.0;
      if (r.nodes.size() >= 2) {
        const NodeId prev = r.nodes[r.nodes.size() - 2];
        if (nb[i].node == prev) bias = 1.0 / p;
        else if (!g.has_edge(prev, nb[i].node)) bias = 1.0 / q;
      }
      w[i] = nb[i].weight * bias;
      total += w[i];
    }
    double u = rng.uniform() * total;
    std::size_t pick = nb.size() - 1;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (u < w[i]) {
        pick = i;
        break;
      }
      u -= w[i];
    }
    r.nodes.push_back(nb[pick].node);
  }
  return r;
}

namespace {

constexpr std::uint32_t kPad = 0xFFFFFFFFu;

template <class T>
void put_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw ParseError("walk cache truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_walks(const std::vector<NodeRepr>& walks, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  std::uint64_t length = 0;
  for (const auto& w : walks) length = std::max<std::uint64_t>(length, w.nodes.size());
  put_le<std::uint64_t>(out, walks.size());
  put_le<std::uint64_t>(out, length);
  for (const auto& w : walks) {
    for (std::uint64_t i = 0; i < length; ++i) put_le<std::uint32_t>(out, i < w.nodes.size() ? w.nodes[i] : kPad);
  }
}

std::vector<NodeRepr> load_walks(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  const auto count = get_le<std::uint64_t>(in);
  const auto length = get_le<std::uint64_t>(in);
  std::vector<NodeRepr> walks(count);
  for (auto& w : walks) {
    w.source = ReprSource::walk;
    for (std::uint64_t i = 0; i < length; ++i) {
      const auto id = get_le<std::uint32_t>(in);
      if (id != kPad) w.nodes.push_back(id);
    }
    if (w.nodes.empty()) throw ParseError("walk cache holds an empty walk");
  }
  return walks;
}

}  // namespace nsbm
