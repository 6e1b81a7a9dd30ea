#include <cmath>

#include "doctest.h"
#include "nsbm/error.hpp"
#include "nsbm/optim.hpp"

using namespace nsbm;

TEST_CASE("zero gradient leaves parameters unchanged") {
  ParameterStore store;
  Parameter& x = store.add("x", Tensor::from_rows({{1.5, -2.0}}));
  Adam adam;
  for (int i = 0; i < 10; ++i) {
    store.zero_grad();
    adam.step(store);
  }
  CHECK(x.value == Tensor::from_rows({{1.5, -2.0}}));
  CHECK(adam.step_count() == 10);
}

TEST_CASE("constant gradient moves the parameter against its sign") {
  ParameterStore store;
  Parameter& x = store.add("x", Tensor::scalar(0.0));
  Adam adam;
  for (int i = 0; i < 100; ++i) {
    x.grad = Tensor::scalar(0.3);
    adam.step(store);
  }
  CHECK(x.value.item() < 0.0);
  Parameter& y = store.add("y", Tensor::scalar(0.0));
  for (int i = 0; i < 100; ++i) {
    x.grad = Tensor::scalar(0.0);
    y.grad = Tensor::scalar(-2.0);
    adam.step(store);
  }
  CHECK(y.value.item() > 0.0);
}

TEST_CASE("quadratic bowl converges") {
  ParameterStore store;
  Parameter& x = store.add("x", Tensor::scalar(0.0));
  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam adam(cfg);
  for (int i = 0; i < 500; ++i) {
    evaluate_with_gradients(
        [&](Tape& t) { return ops::square(ops::add_scalar(t.param(x), -2.0)); }, store);
    adam.step(store);
  }
  CHECK(std::abs(x.value.item() - 2.0) <= 1e-2);
}

TEST_CASE("NaN gradient aborts the step and names the parameter") {
  ParameterStore store;
  Parameter& a = store.add("alpha", Tensor::scalar(1.0));
  Parameter& b = store.add("beta", Tensor::scalar(1.0));
  a.grad = Tensor::scalar(1.0);
  b.grad = Tensor::scalar(std::nan(""));
  Adam adam;
  try {
    adam.step(store);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }
  CHECK(a.value.item() == 1.0);
  CHECK(adam.step_count() == 0);
}

TEST_CASE("moment shapes follow parameter shapes") {
  ParameterStore store;
  store.add("w", Tensor(3, 2));
  store.add("b", Tensor(1, 2));
  Adam adam;
  adam.step(store);
  REQUIRE(adam.moments().size() == 2);
  CHECK(adam.moments()[0].m.shape_string() == "[3x2]");
  CHECK(adam.moments()[1].v.shape_string() == "[1x2]");
}
