#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "nsbm/anomaly.hpp"
#include "nsbm/detector.hpp"
#include "nsbm/error.hpp"
#include "nsbm/gradcheck.hpp"
#include "nsbm/rng.hpp"

#ifdef NSBM_HAVE_EIGEN
#include <Eigen/Eigenvalues>
#endif

using namespace nsbm;

namespace {

Tensor noise_window(Rng& rng, std::size_t samples, std::size_t features) {
  Tensor w(samples, features);
  for (auto& v : w.values()) v = rng.normal();
  return w;
}

// Correlation matrix of random data: a valid PSD unit-diagonal matrix.
Tensor random_correlation(Rng& rng, std::size_t m) {
  Tensor w(3 * m, m);
  const double mix = rng.uniform(0.0, 0.9);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double f = rng.normal();
    for (std::size_t c = 0; c < m; ++c) w(r, c) = std::sqrt(mix) * f + std::sqrt(1 - mix) * rng.normal();
  }
  return pearson_correlation(w);
}

std::vector<double> random_unit(Rng& rng, std::size_t m) {
  std::vector<double> v(m);
  double n = 0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

Tensor ones(std::size_t m) { return Tensor(m, m, 1.0); }

Tensor identity(std::size_t m) {
  Tensor t(m, m);
  for (std::size_t i = 0; i < m; ++i) t(i, i) = 1.0;
  return t;
}

}  // namespace

TEST_CASE("duplicated feature correlates 1 and survives clipping") {
  Rng rng(1);
  Tensor w = noise_window(rng, 50, 3);
  for (std::size_t r = 0; r < 50; ++r) w(r, 2) = w(r, 0);
  const auto cg = clipped_correlation(w, 0.99);
  CHECK(cg.corr(0, 2) == doctest::Approx(1.0));
  CHECK(cg.corr(2, 0) == doctest::Approx(1.0));
  CHECK(cg.corr(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("negated feature is clipped to zero") {
  Rng rng(2);
  Tensor w = noise_window(rng, 40, 2);
  for (std::size_t r = 0; r < 40; ++r) w(r, 1) = -w(r, 0);
  CHECK(pearson_correlation(w)(0, 1) == doctest::Approx(-1.0));
  CHECK(clipped_correlation(w, 0.01).corr(0, 1) == 0.0);
}

TEST_CASE("independent noise at threshold 0.3 and 500 samples is almost all clipped") {
  Rng rng(3);
  const auto cg = clipped_correlation(noise_window(rng, 500, 80), 0.3);
  std::size_t zero = 0, total = 0;
  for (std::size_t i = 0; i < 80; ++i)
    for (std::size_t j = 0; j < 80; ++j) {
      if (i == j) continue;
      ++total;
      zero += cg.corr(i, j) == 0.0 ? 1 : 0;
      const double c = cg.corr(i, j);
      CHECK((c == 0.0 || (c >= 0.3 && c <= 1.0)));
    }
  CHECK(static_cast<double>(zero) >= 0.99 * static_cast<double>(total));
  CHECK(cg.graph().num_edges() == (total - zero) / 2);
}

TEST_CASE("zero-variance features correlate zero and short windows are rejected") {
  Rng rng(4);
  Tensor w = noise_window(rng, 20, 3);
  for (std::size_t r = 0; r < 20; ++r) w(r, 1) = 5.0;
  const Tensor c = pearson_correlation(w);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(c(1, j) == 0.0);
    CHECK(c(j, 1) == 0.0);
  }
  CHECK_THROWS_AS(pearson_correlation(Tensor(1, 3)), ConfigError);
}

TEST_CASE("standardized columns have zero mean and unit sample variance") {
  Rng rng(5);
  Tensor w = noise_window(rng, 30, 4);
  for (auto& v : w.values()) v = 3 * v + 1;
  const Tensor s = standardize_columns(w);
  for (std::size_t c = 0; c < 4; ++c) {
    double m = 0, v = 0;
    for (std::size_t r = 0; r < 30; ++r) m += s(r, c);
    m /= 30;
    for (std::size_t r = 0; r < 30; ++r) v += (s(r, c) - m) * (s(r, c) - m);
    CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(v / 29 == doctest::Approx(1.0));
  }
}

TEST_CASE("calibrated threshold is factor times mean absolute off-diagonal correlation") {
  Tensor w(4, 3);
  const double data[4][3] = {{1, 2, 0}, {2, 1, 1}, {3, 4, 0}, {4, 3, 1}};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) w(r, c) = data[r][c];
  const Tensor c = pearson_correlation(w);
  const double mean = (std::abs(c(0, 1)) + std::abs(c(0, 2)) + std::abs(c(1, 2))) / 3;
  CHECK(calibrate_threshold(w, 1.5) == doctest::Approx(1.5 * mean));
  // Columns 0 and 1: x = 1..4, y = 2,1,4,3 -> r = 0.6.
  CHECK(c(0, 1) == doctest::Approx(0.6));
}

TEST_CASE("exact principal score reference values") {
  for (std::size_t m : {1u, 2u, 5u, 12u}) {
    CHECK(exact_principal_score(ones(m)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(exact_principal_score(identity(m)) == doctest::Approx(1.0 / static_cast<double>(m)).epsilon(1e-9));
  }
  Tensor p(2, 2, 0.8);
  p(0, 0) = p(1, 1) = 1.0;
  CHECK(exact_principal_score(p) == doctest::Approx(0.9).epsilon(1e-9));
  const PowerResult pr = power_iteration(p);
  CHECK(std::abs(pr.vector[0]) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
  CHECK(pr.residual < 1e-4);
}

TEST_CASE("power iteration reports non-convergence with its residual") {
  Rng rng(6);
  const Tensor c = random_correlation(rng, 8);
  try {
    power_iteration(c, 1e-15, 1);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
}

TEST_CASE("approximate principal score reference values") {
  const std::size_t m = 6;
  std::vector<double> flat(m, 1.0 / std::sqrt(static_cast<double>(m)));
  CHECK(*approx_principal_score(flat, ones(m)) == doctest::Approx(1.0));
  Rng rng(7);
  CHECK(*approx_principal_score(random_unit(rng, m), identity(m)) == doctest::Approx(1.0 / m));
  // Scaling alpha does not matter.
  std::vector<double> big(m, 3.0);
  CHECK(*approx_principal_score(big, ones(m)) == doctest::Approx(1.0));
  CHECK_FALSE(approx_principal_score(std::vector<double>{}, Tensor(0, 0)).has_value());
  CHECK_FALSE(approx_principal_score(std::vector<double>(m, 0.0), ones(m)).has_value());
  CHECK_THROWS_AS(approx_principal_score(flat, ones(m + 1)), ShapeError);
}

TEST_CASE("Rayleigh bound on random correlation matrices") {
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const Tensor c = random_correlation(rng, 10);
    const double exact = exact_principal_score(c);
    CHECK(exact > 0.0);
    CHECK(exact <= 1.0 + 1e-12);
    const double approx = *approx_principal_score(random_unit(rng, 10), c);
    CHECK(approx <= exact + 1e-12);
#ifdef NSBM_HAVE_EIGEN
    Eigen::MatrixXd e(10, 10);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) e(i, j) = c(i, j);
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e).eigenvalues().maxCoeff();
    CHECK(exact == doctest::Approx(top / 10).epsilon(1e-8));
#endif
  }
}

TEST_CASE("window principal component agrees with the full correlation matrix") {
  Rng rng(9);
  for (auto [n, d] : {std::pair<std::size_t, std::size_t>{10, 40}, {60, 12}}) {
    Tensor w = noise_window(rng, n, d);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < 5; ++c) w(r, c) += 2 * w(r, 5);
    const PrincipalComponent pc = window_principal_component(w);
    const Tensor corr = pearson_correlation(w);
    CHECK(pc.score == doctest::Approx(exact_principal_score(corr)).epsilon(1e-7));
    // The loading vector is an eigenvector: corr v = lambda v.
    const double lambda = pc.score * static_cast<double>(d);
    double resid = 0;
    for (std::size_t i = 0; i < d; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < d; ++j) row += corr(i, j) * pc.loadings[j];
      resid = std::max(resid, std::abs(row - lambda * pc.loadings[i]));
    }
    CHECK(resid < 1e-4);
  }
}

TEST_CASE("attention weights: zero parameters, equal rows, gradients") {
  ParameterStore store;
  Rng rng(10);
  auto att = CommunityAttention::create(store, 4, 3, rng, "catt");
  Rng data_rng(11);
  Tensor X(5, 4);
  for (auto& v : X.values()) v = data_rng.normal();
  for (std::size_t c = 0; c < 4; ++c) X(3, c) = X(1, c);
  {
    Tape tape;
    const Tensor a = attention_weights(tape, tape.constant(X), att).value();
    CHECK(a(1, 0) == a(3, 0));
  }
  const auto report = finite_difference_check(
      [&](Tape& tape) {
        Var a = attention_weights(tape, tape.constant(X), att);
        return ops::sum(ops::square(ops::add_scalar(a, 0.3)));
      },
      store);
  INFO(report.summary());
  CHECK(report.passed);
  for (auto& p : store) p->value.fill(0.0);
  Tape tape;
  for (double v : attention_weights(tape, tape.constant(X), att).value().values()) CHECK(v == 0.0);
}

TEST_CASE("pca loss reference values and gradient") {
  Rng rng(12);
  Tensor w = noise_window(rng, 200, 2);
  for (std::size_t r = 0; r < 200; ++r) w(r, 1) = 0.8 * w(r, 0) + 0.6 * w(r, 1);
  const Tensor s = standardize_columns(w);
  const Tensor corr = pearson_correlation(w);
  {
    Tape tape;
    Tensor a(2, 1);
    a(0, 0) = 0.6, a(1, 0) = 0.8;
    const double quad = corr(0, 0) * 0.36 + 2 * corr(0, 1) * 0.48 + corr(1, 1) * 0.64;
    CHECK(pca_loss(tape, s, tape.constant(a)).item() == doctest::Approx(-quad));
  }
  {
    Tape tape;
    CHECK(pca_loss(tape, s, tape.constant(Tensor(2, 1))).item() == doctest::Approx(50.0));
    CHECK(pca_loss(tape, Tensor(1, 2), tape.constant(Tensor(2, 1))).item() == doctest::Approx(50.0));
  }
  ParameterStore store;
  Parameter& alpha = store.add("alpha", Tensor(2, 1));
  alpha.value(0, 0) = 0.9, alpha.value(1, 0) = -0.2;
  const auto report = finite_difference_check([&](Tape& t) { return pca_loss(t, s, t.param(alpha)); }, store);
  INFO(report.summary());
  CHECK(report.passed);
}

TEST_CASE("pca loss optimisation closes the gap to the top eigenvalue on a 0.8 pair") {
  // Exact correlation 0.8 pair: columns built so the sample correlation is exactly 0.8.
  Tensor w(4, 2);
  const double u[4] = {1, -1, 1, -1}, v[4] = {1, 1, -1, -1};
  for (std::size_t r = 0; r < 4; ++r) {
    w(r, 0) = u[r];
    w(r, 1) = 0.8 * u[r] + 0.6 * v[r];
  }
  const Tensor corr = pearson_correlation(w);
  REQUIRE(corr(0, 1) == doctest::Approx(0.8));
  const Tensor s = standardize_columns(w);
  ParameterStore store;
  Parameter& alpha = store.add("alpha", Tensor(2, 1));
  alpha.value(0, 0) = 0.9, alpha.value(1, 0) = 0.1;
  Adam adam(AdamConfig{1e-2});
  for (int it = 0; it < 3000; ++it) {
    evaluate_with_gradients([&](Tape& t) { return pca_loss(t, s, t.param(alpha)); }, store);
    adam.step(store);
  }
  const std::vector<double> a(alpha.value.values().begin(), alpha.value.values().end());
  // The penalty settles at |alpha|^2 = 1 + 1.8/100; the unit-normalized form is the eigenvalue.
  double quad = 0, norm2 = a[0] * a[0] + a[1] * a[1];
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) quad += a[i] * corr(i, j) * a[j];
  CHECK(norm2 == doctest::Approx(1.018).epsilon(1e-3));
  CHECK(quad / norm2 == doctest::Approx(1.8).epsilon(1e-6));
  CHECK(std::abs(*approx_principal_score(a, corr) - 0.9) <= 0.02);
  CHECK(*approx_principal_score(a, corr) <= exact_principal_score(corr) + 1e-12);
}

TEST_CASE("correlation node features on a small graph") {
  CorrelationGraph cg;
  cg.corr = identity(4);
  cg.corr(0, 1) = cg.corr(1, 0) = 0.8;
  cg.corr(0, 2) = cg.corr(2, 0) = 0.4;
  const Tensor f = correlation_node_features(cg);
  REQUIRE(f.cols() == kCorrelationFeatureDim);
  CHECK(f(0, 0) == doctest::Approx(2.0 / 3));
  CHECK(f(0, 1) == doctest::Approx(0.6));
  CHECK(f(0, 2) == doctest::Approx(0.8));
  CHECK(f(0, 3) == doctest::Approx(1.2 / 5));
  CHECK(f(0, 4) == doctest::Approx(std::log(2.0) / std::log(4.0)));
  CHECK(f(0, 5) == doctest::Approx(std::log(2.0) / std::log(4.0)));
  for (std::size_t c = 0; c < kCorrelationFeatureDim; ++c) CHECK(f(3, c) == 0.0);
}

TEST_CASE("PCA baseline finds a dominant set and stays quiet on noise") {
  AnomalyScenario sc = AnomalyScenario::preset(ScenarioKind::large);
  sc.seed = 13;
  const AnomalyWindow hit = synth_window(sc, 0, true);
  const AnomalyReport r = pca_baseline(hit.data);
  REQUIRE(r.sets.size() == 1);
  CHECK(r.alarmed());
  const auto& planted = hit.sets[0];
  std::size_t overlap = 0;
  for (std::size_t f : r.detected()) overlap += std::binary_search(planted.begin(), planted.end(), f) ? 1 : 0;
  CHECK(static_cast<double>(overlap) >= 0.9 * static_cast<double>(r.detected().size()));
  const AnomalyWindow clean = synth_window(sc, 1, false);
  CHECK_FALSE(pca_baseline(clean.data).alarmed());
  CHECK_THROWS_AS(pca_baseline(clean.data, 0.7, 0.0), ConfigError);
}

TEST_CASE("trained detector flags a planted set and ignores noise") {
  AnomalyScenario train = AnomalyScenario::preset(ScenarioKind::small);
  train.set_sizes = {30};
  train.num_windows = 10;
  train.injection_rate = 0.5;
  train.seed = 21;
  const auto windows = synth_anomaly_windows(train);

  ParameterStore store;
  Rng rng(3, 1);
  AnomalyDetector det(DetectorConfig{}, store, rng);
  DetectorTrainConfig tc;
  tc.steps = 120;
  tc.seed = 2;
  CHECK(train_detector(det, store, windows, tc) == 120);
  CHECK(det.theta_corr() > 0.0);

  AnomalyScenario eval = train;
  eval.seed = 99;
  eval.strength = 1.0;
  const AnomalyWindow hit = synth_window(eval, 0, true);
  const AnomalyReport r = det.monitor(hit.data, true);
  REQUIRE(r.sets.size() == 2);
  CHECK(r.alarmed());
  for (const auto& s : r.sets) {
    if (!s.alarm) continue;
    CHECK(*s.approx >= 0.9);
    CHECK(*s.approx <= *s.exact + 1e-12);
    for (std::size_t f : s.members) CHECK(std::binary_search(hit.sets[0].begin(), hit.sets[0].end(), f));
  }
  const AnomalyReport again = det.monitor(hit.data, true);
  CHECK(again.labels == r.labels);
  CHECK(again.detected() == r.detected());

  Rng noise_rng(5);
  const AnomalyReport quiet = det.monitor(noise_window(noise_rng, eval.samples, eval.num_features));
  CHECK_FALSE(quiet.alarmed());
  for (int l : quiet.labels) CHECK(l == 2);

  DetectorConfig strict;
  strict.theta_anomaly = 1.0;
  ParameterStore store2;
  Rng rng2(3, 1);
  AnomalyDetector ceiling(strict, store2, rng2);
  for (const auto& p : store) store2.get(p->name).value = p->value;
  ceiling.set_theta_corr(det.theta_corr());
  CHECK_FALSE(ceiling.monitor(hit.data).alarmed());
}
