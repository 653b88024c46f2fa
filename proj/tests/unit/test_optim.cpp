#include <doctest.h>

#include <cmath>
#include <random>

#include "condet/optim.hpp"

using namespace condet;

TEST_CASE("single Adam step on a scalar with g = 1 moves by about -lr") {
  std::vector<double> p = {0.5};
  const std::vector<double> g = {1.0};
  AdamState s = AdamState::zeros(1);
  AdamOptions o;
  o.learning_rate = 1e-3;
  adam_step(p, g, s, o);
  // m_hat = 1, v_hat = 1 -> delta = -lr * 1 / (1 + eps)
  CHECK(p[0] == doctest::Approx(0.5 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(s.step == 1);
  CHECK(s.m[0] == doctest::Approx(0.1));
  CHECK(s.v[0] == doctest::Approx(0.001));
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  std::vector<double> p = {0.1, -2.0, 3.5};
  const auto before = p;
  AdamState s = AdamState::zeros(3);
  for (int i = 0; i < 5; ++i) adam_step(p, std::vector<double>(3, 0.0), s, AdamOptions{});
  CHECK(p == before);
}

TEST_CASE("lr = 0 leaves parameters bit-identical") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> p(50), g(50);
  for (auto& v : p) v = u(gen);
  const auto before = p;
  AdamState s = AdamState::zeros(50);
  AdamOptions o;
  o.learning_rate = 0.0;
  o.weight_decay = 0.1;
  for (int i = 0; i < 10; ++i) {
    for (auto& v : g) v = u(gen);
    adam_step(p, g, s, o);
  }
  CHECK(p == before);
  CHECK(s.step == 10);
}

TEST_CASE("constant gradient: bounded steps in the -sign(g) direction") {
  std::vector<double> p = {0.0, 0.0};
  const std::vector<double> g = {0.3, -7.0};
  AdamState s = AdamState::zeros(2);
  AdamOptions o;
  o.learning_rate = 0.01;
  for (int i = 0; i < 200; ++i) {
    const auto before = p;
    adam_step(p, g, s, o);
    CHECK(p[0] - before[0] < 0.0);
    CHECK(p[1] - before[1] > 0.0);
    CHECK(std::abs(p[0] - before[0]) <= o.learning_rate * (1 + 1e-6));
    CHECK(std::abs(p[1] - before[1]) <= o.learning_rate * (1 + 1e-6));
  }
}

TEST_CASE("decoupled weight decay shrinks parameters") {
  std::vector<double> p = {2.0};
  AdamState s = AdamState::zeros(1);
  AdamOptions o;
  o.learning_rate = 0.1;
  o.weight_decay = 0.5;
  adam_step(p, std::vector<double>{0.0}, s, o);
  CHECK(p[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
}
