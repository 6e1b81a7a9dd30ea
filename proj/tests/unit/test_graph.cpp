#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "nsbm/attributes.hpp"
#include "nsbm/error.hpp"
#include "nsbm/graph.hpp"
#include "nsbm/rng.hpp"

using namespace nsbm;

namespace {

Graph parse(const std::string& text, bool directed = false, bool weighted = false) {
  std::istringstream in(text);
  return parse_edge_list(in, directed, weighted);
}

std::string tmp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "nsbm_test_graph";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

Graph random_graph(Rng& rng, std::size_t n, double p, bool weighted) {
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) edges.push_back({u, v, weighted ? rng.uniform(0.1, 3.0) : 1.0});
  return Graph(n, std::move(edges));
}

std::map<std::pair<std::string, std::string>, double> edge_multiset(const Graph& g) {
  std::map<std::pair<std::string, std::string>, double> m;
  for (const auto& e : g.edges()) m[{g.id_of(e.src), g.id_of(e.dst)}] += e.weight;
  return m;
}

}  // namespace

TEST_CASE("path of two edges") {
  Graph g = parse("0\t1\n1\t2\n");
  CHECK(g.num_nodes() == 3);
  CHECK(g.degree(0) == 1);
  CHECK(g.degree(1) == 2);
  CHECK(g.degree(2) == 1);
  for (const auto& e : g.edges()) CHECK(e.weight == 1.0);
}

TEST_CASE("duplicate weighted edges collapse by summing") {
  Graph g = parse("0\t1\t2.0\n0\t1\t2.0\n", false, true);
  REQUIRE(g.num_edges() == 1);
  CHECK(g.edges()[0].weight == 4.0);
  CHECK(g.edge_weight(1, 0) == 4.0);
}

TEST_CASE("neighbor lists on a 4-node graph") {
  Graph g = parse("0\t1\n2\t3\n0\t2\n");
  auto nb = g.neighbors(0);
  REQUIRE(nb.size() == 2);
  CHECK(nb[0].node == 1);
  CHECK(nb[1].node == 2);
  CHECK(g.has_edge(2, 0));
  CHECK_FALSE(g.has_edge(1, 3));
}

TEST_CASE("parse errors carry line numbers") {
  try {
    parse("# header\n0\t1\tabc\n", false, true);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  try {
    parse("0\t1\n3\t3\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("# only a comment\n"), ParseError);
  CHECK_THROWS_AS(parse("0 1\n"), ParseError);
}

TEST_CASE("string ids map lexicographically, numeric ids numerically") {
  Graph g = parse("10\t2\n2\t9\n");
  CHECK(g.ids == std::vector<std::string>{"2", "9", "10"});
  Graph h = parse("bob\talice\nalice\tcarol\n");
  CHECK(h.ids == std::vector<std::string>{"alice", "bob", "carol"});
  CHECK(h.degree(0) == 2);
}

TEST_CASE("declared node count keeps isolated nodes") {
  Graph g = parse("# nodes: 5\n0\t1\n");
  CHECK(g.num_nodes() == 5);
  CHECK(g.degree(4) == 0);
}

TEST_CASE("directed graphs index both directions") {
  Graph g = parse("0\t1\n1\t2\n2\t1\n", true);
  CHECK(g.num_edges() == 3);
  CHECK(g.degree(0) == 1);
  CHECK(g.in_neighbors(0).empty());
  CHECK(g.in_neighbors(1).size() == 2);
  CHECK(g.edge_weight(1, 0) == 0.0);
}

TEST_CASE("load then save then load keeps the edge multiset") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const bool weighted = trial % 2 == 0;
    Graph g = random_graph(rng, 3 + rng.below(30), rng.uniform(0.0, 0.5), weighted);
    const auto path = tmp_path("roundtrip.tsv");
    save_edge_list(g, path, weighted);
    Graph h = load_edge_list(path, false, weighted);
    CHECK(h.num_nodes() == g.num_nodes());
    CHECK(edge_multiset(h) == edge_multiset(g));
  }
}

TEST_CASE("degree equals list length and degrees sum to twice the edge count") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g = random_graph(rng, 1 + rng.below(40), rng.uniform(), false);
    std::size_t total = 0;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      CHECK(g.degree(v) == g.neighbors(v).size());
      total += g.degree(v);
      for (const auto& nb : g.neighbors(v)) CHECK(g.has_edge(nb.node, v));
    }
    CHECK(total == 2 * g.num_edges());
  }
}

TEST_CASE("constructor rejects self-loops and bad ids") {
  CHECK_THROWS_AS(Graph(2, {{0, 0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(Graph(2, {{0, 2, 1.0}}), ConfigError);
  CHECK_THROWS_AS(Graph(2, {{0, 1, NAN}}), ConfigError);
}

TEST_CASE("adjacency and induced subgraphs") {
  Graph g = parse("0\t1\n1\t2\n2\t3\n0\t3\n");
  const NodeId nodes[] = {3, 0, 1};
  Tensor a = g.adjacency(nodes);
  CHECK(a == Tensor::from_rows({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}));
  Graph sub = g.induced(nodes);
  CHECK(sub.num_nodes() == 3);
  CHECK(sub.num_edges() == 2);
  CHECK(sub.ids == std::vector<std::string>{"0", "1", "3"});
}

TEST_CASE("labels and features round trip") {
  Graph g = parse("a\tb\nb\tc\n");
  g.labels = {{0}, {1, 2}, {}};
  g.features = Tensor::from_rows({{1.5, -2}, {0, 1e-3}, {7, 8}});
  save_labels(g, tmp_path("labels.tsv"));
  save_features(g, tmp_path("features.csv"));
  Graph h = parse("a\tb\nb\tc\n");
  load_labels(h, tmp_path("labels.tsv"));
  load_features(h, tmp_path("features.csv"));
  CHECK(h.labels == g.labels);
  CHECK(*h.features == *g.features);
  CHECK(h.num_labels() == 3);
}

TEST_CASE("matrix csv round trip") {
  Tensor m = Tensor::from_rows({{1, 2, 3}, {4.25, -5, 6e-9}});
  save_matrix_csv(m, {"x", "y", "z"}, tmp_path("m.csv"));
  auto [back, header] = load_matrix_csv(tmp_path("m.csv"));
  CHECK(back == m);
  CHECK(header == std::vector<std::string>{"x", "y", "z"});
}

TEST_CASE("free-only encoder is the trainable table itself") {
  Graph g(4, {{0, 1, 1.0}});
  ParameterStore store;
  Rng rng(1);
  AttributeEncoder enc(g, {0, 0, 8}, store, rng);
  REQUIRE(enc.free_table() != nullptr);
  CHECK(enc.values() == enc.free_table()->value);
  CHECK(enc.dim() == 8);
}

TEST_CASE("a repeated single token fills one bucket") {
  Graph g(1, {});
  g.tokens = {{"apple", "apple"}};
  ParameterStore store;
  Rng rng(1);
  AttributeEncoder enc(g, {4, 0, 0}, store, rng);
  Tensor v = enc.values();
  int full = 0;
  for (double x : v.values()) {
    if (x == 1.0) ++full;
    else CHECK(x == 0.0);
  }
  CHECK(full == 1);
}

TEST_CASE("disjoint token sets in distinct buckets are orthogonal") {
  const std::size_t buckets = 64;
  // Pick tokens whose buckets differ so the expectation is exact.
  std::vector<std::string> left = {"red", "green"};
  std::vector<std::string> right;
  for (int i = 0; right.size() < 2; ++i) {
    std::string t = "tok" + std::to_string(i);
    const auto b = fnv1a(t) % buckets;
    if (b != fnv1a("red") % buckets && b != fnv1a("green") % buckets) right.push_back(t);
  }
  Graph g(2, {});
  g.tokens = {left, right};
  ParameterStore store;
  Rng rng(1);
  AttributeEncoder enc(g, {buckets, 0, 0}, store, rng);
  Tensor v = enc.values();
  double dot = 0;
  for (std::size_t c = 0; c < buckets; ++c) dot += v(0, c) * v(1, c);
  CHECK(dot == 0.0);
}

TEST_CASE("missing attributes name the node") {
  Graph g = parse("a\tb\n");
  ParameterStore store;
  Rng rng(1);
  g.tokens = {{"x"}, {}};
  try {
    AttributeEncoder enc(g, {4, 0, 0}, store, rng);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  g.features = Tensor::from_rows({{1.0}, {NAN}});
  CHECK_THROWS_AS(AttributeEncoder(g, {0, 1, 0}, store, rng), ConfigError);
  CHECK_THROWS_AS(AttributeEncoder(g, {0, 0, 0}, store, rng), ConfigError);
}

TEST_CASE("numeric features pass through after the token block") {
  Graph g(2, {{0, 1, 1.0}});
  g.features = Tensor::from_rows({{3, 4, 9}, {5, 6, 9}});
  ParameterStore store;
  Rng rng(1);
  AttributeEncoder enc(g, {0, 2, 3}, store, rng);
  Tensor v = enc.values();
  CHECK(v.cols() == 5);
  CHECK(v(1, 0) == 5);
  CHECK(v(1, 1) == 6);
  CHECK(std::abs(v(0, 4)) < 0.1);
}
