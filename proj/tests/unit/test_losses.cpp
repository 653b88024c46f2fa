#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <numbers>

#include "condet/error.hpp"
#include "condet/losses.hpp"
#include "condet/random.hpp"
#include "oracles.hpp"

using namespace condet;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (auto& x : m.data()) x = rng.uniform(-scale, scale);
  return m;
}

// Central-difference gradient of f with respect to every entry of m.
template <class F>
Matrix numeric_grad(Matrix m, F f, double h = 1e-5) {
  Matrix g(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    const double keep = m.data()[i];
    m.data()[i] = keep + h;
    const double up = f(m);
    m.data()[i] = keep - h;
    const double down = f(m);
    m.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

void check_close(const Matrix& a, const Matrix& b, double tol) {
  REQUIRE(a.data().size() == b.data().size());
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(tol).scale(1.0));
  }
}

}  // namespace

TEST_CASE("ce_loss hand values") {
  const std::vector<double> half{0.5, 0.5};
  const std::vector<int> labels{1, 0};
  CHECK(ce_loss(half, labels, 1e-7) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));

  const std::vector<double> p{0.9, 0.2, 0.6};
  const std::vector<int> y{1, 0, 1};
  const double expected = -(std::log(0.9) + std::log(0.8) + std::log(0.6)) / 3.0;
  CHECK(ce_loss(p, y, 1e-7) == doctest::Approx(expected).epsilon(1e-14));

  std::vector<double> d(3);
  ce_loss(p, y, 1e-7, d);
  CHECK(d[0] == doctest::Approx(-1.0 / (3 * 0.9)));
  CHECK(d[1] == doctest::Approx(1.0 / (3 * 0.8)));
  CHECK(d[2] == doctest::Approx(-1.0 / (3 * 0.6)));
}

TEST_CASE("ce_loss clamps saturated probabilities") {
  const std::vector<double> p{0.0, 1.0};
  const std::vector<int> y{1, 0};
  const double eps = 1e-7;
  CHECK(ce_loss(p, y, eps) == doctest::Approx(-std::log(eps)).epsilon(1e-9));
  std::vector<double> d(2, 99.0);
  ce_loss(p, y, eps, d);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 0.0);
  CHECK_THROWS_AS(ce_loss(p, std::vector<int>{1}, eps), Error);
}

TEST_CASE("ntxent is zero for a single pair") {
  Rng rng(1);
  const Matrix a = random_matrix(rng, 1, 4), p = random_matrix(rng, 1, 4);
  Matrix da, dp;
  CHECK(ntxent(a, p, {}, &da, &dp) == 0.0);
  for (double g : da.data()) CHECK(g == 0.0);
}

TEST_CASE("ntxent two orthogonal pairs") {
  // a1 = p1 = e1, a2 = p2 = e2, t = 0.5: each view sees its partner at cosine
  // 1 and two negatives at cosine 0.
  const Matrix a = Matrix::from_rows({{1, 0}, {0, 1}});
  ContrastiveOptions options;
  options.temperature = 0.5;
  const double e2 = std::exp(2.0);
  const double expected = -std::log(e2 / (e2 + 2.0));
  CHECK(ntxent(a, a, options) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.2395).epsilon(1e-3));
}

TEST_CASE("ntxent matches enumeration oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 2 + rng.index(5), d = 1 + rng.index(8);
    const Matrix a = random_matrix(rng, b, d), p = random_matrix(rng, b, d);
    ContrastiveOptions options;
    options.temperature = rng.uniform(0.1, 2.0);
    CHECK(std::abs(ntxent(a, p, options) - oracle::ntxent(a, p, options.temperature)) < 1e-9);

    options.orientation = ContrastiveOrientation::anchor_only;
    CHECK(std::abs(ntxent(a, p, options) - oracle::ntxent(a, p, options.temperature, true)) < 1e-9);
    options.reduction = ContrastiveReduction::sum;
    CHECK(std::abs(ntxent(a, p, options) -
                   oracle::ntxent(a, p, options.temperature, true, true)) < 1e-9);
  }
}

TEST_CASE("ntxent invariances") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t b = 2 + rng.index(5), d = 2 + rng.index(7);
    const Matrix a = random_matrix(rng, b, d), p = random_matrix(rng, b, d);
    const double base = ntxent(a, p, {});

    std::vector<std::size_t> perm(b);
    for (std::size_t i = 0; i < b; ++i) perm[i] = i;
    rng.shuffle(perm);
    Matrix ap(b, d), pp(b, d);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        ap(i, c) = a(perm[i], c);
        pp(i, c) = p(perm[i], c);
      }
    CHECK(std::abs(ntxent(ap, pp, {}) - base) < 1e-9);

    // Rotation in a random coordinate plane.
    const std::size_t i0 = rng.index(d);
    const std::size_t i1 = (i0 + 1 + rng.index(d - 1)) % d;
    const double th = rng.uniform(0, 2 * std::numbers::pi);
    auto rotate = [&](Matrix m) {
      for (std::size_t r = 0; r < b; ++r) {
        const double x = m(r, i0), y = m(r, i1);
        m(r, i0) = std::cos(th) * x - std::sin(th) * y;
        m(r, i1) = std::sin(th) * x + std::cos(th) * y;
      }
      return m;
    };
    CHECK(std::abs(ntxent(rotate(a), rotate(p), {}) - base) < 1e-9);

    Matrix scaled = a;
    for (std::size_t c = 0; c < d; ++c) scaled(0, c) *= 3.5;
    CHECK(std::abs(ntxent(scaled, p, {}) - base) < 1e-9);

    // Swapping the roles of anchors and positives changes nothing in the
    // symmetric orientation.
    CHECK(std::abs(ntxent(p, a, {}) - base) < 1e-12);
  }
}

TEST_CASE("ntxent gradient matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t b = 2 + rng.index(3), d = 2 + rng.index(4);
    const Matrix a = random_matrix(rng, b, d), p = random_matrix(rng, b, d);
    ContrastiveOptions options;
    options.temperature = 0.5;
    Matrix da, dp;
    ntxent(a, p, options, &da, &dp);
    check_close(da, numeric_grad(a, [&](const Matrix& m) { return ntxent(m, p, options); }), 1e-6);
    check_close(dp, numeric_grad(p, [&](const Matrix& m) { return ntxent(a, m, options); }), 1e-6);
  }
}

TEST_CASE("mmd linear hand value") {
  // Means (0,0) and (1,0): squared MMD with a linear kernel is |mean diff|^2.
  const Matrix s = Matrix::from_rows({{1, 0}, {-1, 0}});
  const Matrix t = Matrix::from_rows({{1, 1}, {1, -1}});
  KernelSpec linear{KernelKind::linear, std::nullopt};
  CHECK(mmd(s, t, linear) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mmd(s, s, linear) == 0.0);
}

TEST_CASE("mmd matches triple loop oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(8), m = 1 + rng.index(8), d = 1 + rng.index(5);
    const Matrix x = random_matrix(rng, n, d), y = random_matrix(rng, m, d);
    KernelSpec linear{KernelKind::linear, std::nullopt};
    CHECK(std::abs(mmd(x, y, linear) - oracle::mmd(x, y, false, 0)) < 1e-10);

    const double bw = rng.uniform(0.3, 3.0);
    KernelSpec fixed{KernelKind::rbf, bw};
    CHECK(std::abs(mmd(x, y, fixed) - oracle::mmd(x, y, true, bw * bw)) < 1e-10);

    KernelSpec median{KernelKind::rbf, std::nullopt};
    const double bw2 = oracle::median_bw2(x, y);
    CHECK(rbf_bandwidth_sq(x, y, median) == doctest::Approx(bw2).epsilon(1e-14));
    CHECK(std::abs(mmd(x, y, median) - oracle::mmd(x, y, true, bw2)) < 1e-10);

    for (const auto& k : {linear, fixed, median}) {
      CHECK(mmd(x, y, k) == mmd(y, x, k));
      CHECK(mmd(x, x, k) <= 1e-12);
    }
  }
}

TEST_CASE("median bandwidth falls back to one on identical points") {
  const Matrix x = Matrix::from_rows({{2, 2}, {2, 2}});
  CHECK(rbf_bandwidth_sq(x, x, KernelSpec{}) == 1.0);
}

TEST_CASE("mmd gradient matches finite differences") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.index(3), d = 1 + rng.index(4);
    const Matrix x = random_matrix(rng, n, d), y = random_matrix(rng, n, d, 2.0);
    for (const auto& k : {KernelSpec{KernelKind::linear, std::nullopt},
                          KernelSpec{KernelKind::rbf, 0.8}, KernelSpec{}}) {
      Matrix dx, dy;
      mmd(x, y, k, &dx, &dy);
      check_close(dx, numeric_grad(x, [&](const Matrix& m) { return mmd(m, y, k); }), 1e-6);
      check_close(dy, numeric_grad(y, [&](const Matrix& m) { return mmd(x, m, k); }), 1e-6);
    }
  }
}

TEST_CASE("combined objective weights") {
  BatchEmbeddings batch;
  batch.source = Matrix::from_rows({{1, 0}});
  batch.source_pert = batch.source;
  batch.target = batch.source;
  batch.target_pert = batch.source;
  batch.probs = {0.5};
  batch.probs_pert = {0.5};
  batch.labels = {1};
  LossConfig config;
  const auto loss = combined_objective(batch, config);
  CHECK(loss.total == doctest::Approx(0.5 * std::numbers::ln2).epsilon(1e-14));
  CHECK(loss.ctr_s == 0.0);
  CHECK(loss.mmd == 0.0);

  Rng rng(3);
  batch.source = random_matrix(rng, 3, 4);
  batch.source_pert = random_matrix(rng, 3, 4);
  batch.target = random_matrix(rng, 3, 4);
  batch.target_pert = random_matrix(rng, 3, 4);
  batch.probs = {0.3, 0.8, 0.6};
  batch.probs_pert = {0.4, 0.7, 0.1};
  batch.labels = {0, 1, 1};
  config.lambda1 = 0.0;
  config.lambda2 = 0.7;
  const auto l0 = combined_objective(batch, config);
  CHECK(l0.total == doctest::Approx((l0.ce + l0.ce_pert) / 2 + 0.7 * l0.mmd).epsilon(1e-14));

  config.lambda1 = 0.3;
  const auto full = combined_objective(batch, config);
  CHECK(full.total == doctest::Approx(0.35 * (full.ce + full.ce_pert) +
                                      0.15 * (full.ctr_s + full.ctr_t) + 0.7 * full.mmd)
                          .epsilon(1e-14));

  const auto no_ce = combined_objective(batch, config, Ablation::no_ce);
  CHECK(no_ce.ce == 0.0);
  CHECK(no_ce.total == doctest::Approx(full.total - 0.35 * (full.ce + full.ce_pert)).epsilon(1e-12));
  const auto no_ctr = combined_objective(batch, config, Ablation::no_contrast);
  CHECK(no_ctr.ctr_s == 0.0);
  CHECK(no_ctr.ctr_t == 0.0);
  const auto no_mmd = combined_objective(batch, config, Ablation::no_mmd);
  CHECK(no_mmd.mmd == 0.0);
  const auto so = ObjectiveWeights::from(config, Ablation::source_only);
  CHECK(so.contrastive == 0.0);
  CHECK(so.mmd == 0.0);
  CHECK(so.ce == doctest::Approx(0.35));
}

TEST_CASE("loss breakdown json line") {
  LossBreakdown l{1.5, 0.25, 0.5, 1.0, 2.0, 0.04};
  const auto j = nlohmann::json::parse(l.to_json_line(7));
  CHECK(j["step"] == 7);
  CHECK(j["total"] == 1.5);
  CHECK(j["mmd"] == 0.04);
  CHECK(l.mmd_norm() == doctest::Approx(0.2));
  CHECK(l.to_json_line(7).find('\n') == std::string::npos);
}

TEST_CASE("loss config validation and names") {
  CHECK(parse_ablation("no_mmd") == Ablation::no_mmd);
  CHECK(to_string(Ablation::source_only) == "source_only");
  CHECK_THROWS_AS(parse_ablation("bogus"), UsageError);
  CHECK(parse_kernel_kind("linear") == KernelKind::linear);
  LossConfig c;
  c.temperature = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}
