#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "nsbm/checkpoint.hpp"
#include "nsbm/datagen.hpp"
#include "nsbm/error.hpp"
#include "nsbm/gradcheck.hpp"
#include "nsbm/model.hpp"

using namespace nsbm;

namespace {

Graph small_planted(std::uint64_t seed) {
  PlantedPartitionSpec ps;
  ps.K = 3;
  ps.community_size = 4;
  ps.p_in = 0.9;
  ps.p_out = 0.1;
  ps.attribute_dim = 4;
  ps.seed = seed;
  return planted_partition(ps);
}

ModelConfig small_config() {
  ModelConfig mc;
  mc.K = 3;
  mc.attributes = {0, 4, 2};
  mc.embedder.width = 6;
  mc.embedder.max_len = 6;
  mc.link_dim = 5;
  mc.attention_hidden = 4;
  mc.alpha = 4.0;
  return mc;
}

struct Setup {
  Graph g;
  ParameterStore store;
  GraphView view;
  NsbmModel model;

  explicit Setup(std::uint64_t seed, ModelConfig mc = small_config()) : g(small_planted(seed)) {
    Rng rng(seed, 11);
    view = make_view(g, mc, store, rng);
    model = NsbmModel(view.encoder.dim(), mc, store, rng);
  }
};

std::vector<NodeId> all_nodes(const Graph& g) {
  std::vector<NodeId> v(g.num_nodes());
  std::iota(v.begin(), v.end(), NodeId{0});
  return v;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nsbm_test_" + name)).string();
}

std::vector<double> flatten(const ParameterStore& store) {
  std::vector<double> out;
  for (const auto& p : store) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  return out;
}

}  // namespace

TEST_CASE("joint loss total is the sum of its parts") {
  Setup s(3);
  const auto batch = all_nodes(s.g);
  for (bool labels : {false, true}) {
    Tape tape;
    Var total;
    Rng rng(5);
    const auto r = s.model.joint_loss(tape, s.view, batch, LossWeights{}, 5, rng, labels, total);
    double expect = r.sbm + r.entropy + r.link;
    if (labels) {
      REQUIRE(r.labels.has_value());
      expect += *r.labels;
    } else {
      CHECK_FALSE(r.labels.has_value());
    }
    CHECK(r.total == expect);
    CHECK(total.item() == r.total);
  }
}

TEST_CASE("joint loss with every weight zero is zero") {
  Setup s(4);
  Tape tape;
  Var total;
  Rng rng(5);
  const auto r = s.model.joint_loss(tape, s.view, all_nodes(s.g), LossWeights{0, 0, 0, 0}, 5, rng, true, total);
  CHECK(r.total == 0.0);
  CHECK(r.sbm == 0.0);
  CHECK(r.entropy == 0.0);
  CHECK(r.link == 0.0);
}

TEST_CASE("joint loss gradients match finite differences") {
  for (SbmScale scale : {SbmScale::density, SbmScale::batch}) {
    ModelConfig mc = small_config();
    mc.sbm_scale = scale;
    Setup s(6, mc);
    const auto batch = all_nodes(s.g);
    auto build = [&](Tape& tape) {
      Var total;
      Rng rng(9);
      s.model.joint_loss(tape, s.view, batch, LossWeights{}, 3, rng, true, total);
      return total;
    };
    GradCheckOptions opt;
    opt.tolerance = 1e-4;
    opt.max_entries = 12;
    const auto report = finite_difference_check(build, s.store, opt);
    INFO(report.summary());
    CHECK(report.passed);
  }
}

TEST_CASE("200 steps on a 12-node planted graph lower the moving average of the loss") {
  Setup s(1);
  TrainConfig tc;
  tc.batch_size = 12;
  tc.c = 3;
  tc.lr = 1e-2;
  tc.epochs = 200;
  tc.seed = 1;
  Trainer t(s.model, s.view, s.store, tc);
  REQUIRE(t.total_steps() == 200);
  std::vector<double> totals;
  t.run([&](const StepRecord& r) { totals.push_back(r.loss.total); });
  REQUIRE(totals.size() == 200);
  auto window = [&](std::size_t end) {
    return std::accumulate(totals.begin() + static_cast<long>(end - 10), totals.begin() + static_cast<long>(end), 0.0) /
           10.0;
  };
  // Windows ending at steps 10, 50, 100, 150, 200.
  const std::size_t ends[] = {10, 50, 100, 150, 200};
  for (std::size_t i = 1; i < std::size(ends); ++i) {
    INFO("window ending at " << ends[i]);
    CHECK(window(ends[i]) < window(ends[i - 1]));
  }
}

TEST_CASE("trainer rejects bad configuration") {
  Setup s(2);
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS_AS(Trainer(s.model, s.view, s.store, tc), ConfigError);
  tc.batch_size = 4;
  tc.c = 0;
  CHECK_THROWS_AS(Trainer(s.model, s.view, s.store, tc), ConfigError);
}

TEST_CASE("steps per epoch round up") {
  Setup s(2);
  TrainConfig tc;
  tc.batch_size = 5;
  tc.epochs = 3;
  Trainer t(s.model, s.view, s.store, tc);
  CHECK(t.steps_per_epoch() == 3);
  CHECK(t.total_steps() == 9);
}

TEST_CASE("non-finite loss names the step") {
  Setup s(2);
  s.store.get("member.W").value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.batch_size = 12;
  tc.c = 4;
  Trainer t(s.model, s.view, s.store, tc);
  try {
    t.step();
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    INFO(std::string(e.what()));
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip restores parameters and optimizer state") {
  Setup a(7);
  TrainConfig tc;
  tc.batch_size = 6;
  tc.epochs = 2;
  tc.seed = 3;
  Trainer ta(a.model, a.view, a.store, tc);
  ta.run();
  const std::string path = temp_path("roundtrip.ckpt");
  save_checkpoint(path, a.store, &ta.optimizer(), {{"trainer", ta.state()}, {"note", "x"}});

  Setup b(7);
  Adam opt;
  const auto meta = load_checkpoint(path, b.store, &opt);
  CHECK(meta.at("note") == "x");
  CHECK(flatten(b.store) == flatten(a.store));
  CHECK(opt.step_count() == ta.optimizer().step_count());
  REQUIRE(opt.moments().size() == ta.optimizer().moments().size());
  for (std::size_t i = 0; i < opt.moments().size(); ++i) {
    CHECK(std::ranges::equal(opt.moments()[i].m.values(), ta.optimizer().moments()[i].m.values()));
    CHECK(std::ranges::equal(opt.moments()[i].v.values(), ta.optimizer().moments()[i].v.values()));
  }
  const auto manifest = read_checkpoint_manifest(path);
  CHECK(manifest.at("params").size() == a.store.size());
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint without optimizer state") {
  Setup a(8);
  const std::string path = temp_path("noadam.ckpt");
  save_checkpoint(path, a.store, nullptr, nlohmann::json::object());
  CHECK(read_checkpoint_manifest(path).at("adam").is_null());
  Setup b(9);
  load_checkpoint(path, b.store, nullptr);
  CHECK(flatten(b.store) == flatten(a.store));
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint shape mismatch lists every differing parameter") {
  Setup a(8);
  const std::string path = temp_path("mismatch.ckpt");
  save_checkpoint(path, a.store, nullptr, nlohmann::json::object());
  ModelConfig wide = small_config();
  wide.embedder.width = 7;
  Setup b(8, wide);
  const auto before = flatten(b.store);
  try {
    load_checkpoint(path, b.store, nullptr);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("member.W") != std::string::npos);
    CHECK(msg.find("link1.W") != std::string::npos);
    CHECK(msg.find("link2.W") != std::string::npos);
  }
  CHECK(flatten(b.store) == before);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects foreign and truncated files") {
  const std::string path = temp_path("bad.ckpt");
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOPE\n{}\n";
  }
  Setup a(8);
  CHECK_THROWS_AS(load_checkpoint(path, a.store, nullptr), Error);
  save_checkpoint(path, a.store, nullptr, nlohmann::json::object());
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_THROWS_AS(load_checkpoint(path, a.store, nullptr), Error);
  std::filesystem::remove(path);
}

TEST_CASE("resumed training continues identically") {
  TrainConfig tc;
  tc.batch_size = 6;
  tc.epochs = 4;
  tc.seed = 21;

  Setup full(5);
  Trainer tf(full.model, full.view, full.store, tc);
  tf.run();

  Setup first(5);
  Trainer t1(first.model, first.view, first.store, tc);
  for (int i = 0; i < 3; ++i) t1.step();
  const std::string path = temp_path("resume.ckpt");
  save_checkpoint(path, first.store, &t1.optimizer(), {{"trainer", t1.state()}});

  Setup second(5);
  Trainer t2(second.model, second.view, second.store, tc);
  const auto meta = load_checkpoint(path, second.store, &t2.optimizer());
  t2.restore(meta.at("trainer"));
  CHECK(t2.step_count() == 3);
  t2.run();
  CHECK(t2.step_count() == tf.step_count());
  CHECK(flatten(second.store) == flatten(full.store));
  CHECK(t2.assignments() == tf.assignments());
  std::filesystem::remove(path);
}

TEST_CASE("cluster initialisation makes Z follow the nearest centroid") {
  Setup s(10);
  const Tensor X = s.model.embeddings(s.view);
  std::vector<int> labels(X.rows());
  for (std::size_t v = 0; v < X.rows(); ++v) labels[v] = X(v, 0) > X(v, 1) ? 0 : (X(v, 2) > 0 ? 1 : 2);
  init_membership_from_clusters(s.model, s.view, labels, 2.0);

  // Oracle: squared distances to the label means.
  const std::size_t K = 3, d = X.cols();
  Tensor mu(K, d);
  std::vector<double> cnt(K, 0.0);
  for (std::size_t v = 0; v < X.rows(); ++v) {
    cnt[labels[v]] += 1;
    for (std::size_t c = 0; c < d; ++c) mu(labels[v], c) += X(v, c);
  }
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t c = 0; c < d; ++c) mu(k, c) /= std::max(1.0, cnt[k]);
  const Tensor Z = s.model.memberships(s.view);
  REQUIRE(Z.cols() == K + 1);
  for (std::size_t v = 0; v < X.rows(); ++v) {
    std::size_t nearest = 0, top = 0;
    double best = INFINITY;
    for (std::size_t k = 0; k < K; ++k) {
      double dist = 0;
      for (std::size_t c = 0; c < d; ++c) dist += (X(v, c) - mu(k, c)) * (X(v, c) - mu(k, c));
      if (dist < best) best = dist, nearest = k;
    }
    for (std::size_t k = 1; k < Z.cols(); ++k)
      if (Z(v, k) > Z(v, top)) top = k;
    CHECK(top == nearest);
  }
  CHECK_THROWS_AS(init_membership_from_clusters(s.model, s.view, std::vector<int>(X.rows(), 3)), ConfigError);
  CHECK_THROWS_AS(init_membership_from_clusters(s.model, s.view, std::vector<int>(2, 0)), ShapeError);
}

TEST_CASE("loss csv rows") {
  CHECK(loss_csv_header() == "step,sbm,entropy,link,labels,total");
  StepRecord r;
  r.step = 4;
  r.loss.sbm = 0.5;
  r.loss.entropy = 0.25;
  r.loss.link = 1;
  r.loss.total = 1.75;
  CHECK(loss_csv_row(r) == "4,0.5,0.25,1,,1.75");
  r.loss.labels = 2;
  CHECK(loss_csv_row(r) == "4,0.5,0.25,1,2,1.75");
}
