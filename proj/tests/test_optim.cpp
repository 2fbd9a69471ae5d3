#include <doctest.h>

#include <cmath>

#include "patchtriage/optim.hpp"

using namespace patchtriage;

namespace {

BasicModelParams<double> two_tensors(double w, double b) {
  BasicModelParams<double> p;
  p.add("w", {3}, true, w);
  p.add("b", {2}, false, b);
  return p;
}

}  // namespace

TEST_CASE("zero gradient from zero state leaves params unchanged") {
  auto p = two_tensors(0.7, -0.2);
  const auto before = p;
  AdamState<double> state;
  for (int i = 0; i < 5; ++i) adam_step(p, p.zeros_like(), state, 0.1);
  CHECK(p == before);
  CHECK(state.step == 5);
}

TEST_CASE("constant gradient steps approach the learning rate") {
  auto p = two_tensors(0.0, 0.0);
  auto g = two_tensors(0.37, -2.0);
  AdamState<double> state;
  const double lr = 1e-3;
  double last_w = 0.0;
  for (int i = 0; i < 2000; ++i) {
    adam_step(p, g, state, lr);
    const double step = std::abs(p.find("w").values[0] - last_w);
    last_w = p.find("w").values[0];
    if (i == 0 || i > 1000) CHECK(step == doctest::Approx(lr).epsilon(1e-4));
  }
  CHECK(p.find("b").values[0] > 0.0);  // moves against the gradient sign
}

TEST_CASE("weight decay touches regularized tensors only") {
  auto p = two_tensors(1.0, 1.0);
  AdamState<double> state;
  adam_step(p, p.zeros_like(), state, 0.01, 0.5);
  CHECK(p.find("w").values[0] < 1.0);
  CHECK(p.find("b").values[0] == 1.0);
}

TEST_CASE("identical inputs give identical trajectories") {
  auto run = [] {
    auto p = two_tensors(0.3, 0.1);
    AdamState<double> state;
    for (int i = 0; i < 50; ++i) {
      auto g = p;  // gradient of |p|^2 / 2
      adam_step(p, g, state, 0.05, 1e-3);
    }
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("adam rejects bad input") {
  auto p = two_tensors(0.0, 0.0);
  AdamState<double> state;
  BasicModelParams<double> wrong;
  wrong.add("w", {4}, true);
  CHECK_THROWS_AS(adam_step(p, wrong, state, 0.1), InvalidArgument);
  CHECK_THROWS_AS(adam_step(p, p, state, 0.0), InvalidArgument);
}
