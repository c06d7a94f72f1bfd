#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lmdnn/errors.hpp"
#include "lmdnn/loss.hpp"
#include "lmdnn/rng.hpp"
#include "support.hpp"

using namespace lmdnn;

namespace {

std::vector<double> random_outputs(int k, double scale, lmdnn::rng::Engine& eng) {
  std::vector<double> out(static_cast<std::size_t>(k));
  for (double& v : out) v = lmdnn::rng::uniform(eng, -scale, scale);
  return out;
}

// forward-only finite differences of the scalar loss in output space
std::vector<double> fd_output_gradient(const LossKind& kind, std::vector<double> outputs,
                                       int label, double step) {
  std::vector<double> grad(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double keep = outputs[i];
    outputs[i] = keep + step;
    const double up = loss_and_grad(kind, outputs, label).first.total;
    outputs[i] = keep - step;
    const double down = loss_and_grad(kind, outputs, label).first.total;
    outputs[i] = keep;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace

TEST_CASE("softmax of a constant vector is uniform") {
  const double t[] = {0.0, 0.0, 0.0};
  const auto p = softmax(t);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("softmax of (ln 2, 0) is (2/3, 1/3)") {
  const double t[] = {std::log(2.0), 0.0};
  const auto p = softmax(t);
  CHECK(p[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant and sums to one") {
  lmdnn::rng::Engine eng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_outputs(5, 1000.0, eng);
    auto shifted = t;
    for (double& v : shifted) v += 123.456;
    const auto p = softmax(t);
    const auto q = softmax(shifted);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-9));
      CHECK(p[i] >= 0.0);
      sum += p[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax survives huge magnitudes") {
  const double t[] = {1e4, -1e4, 0.0};
  const auto p = softmax(t);
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isfinite(p[1]));
  CHECK(std::isfinite(p[2]));
}

TEST_CASE("cross entropy examples") {
  const double uniform3[] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(cross_entropy(uniform3, 2) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  const double sure[] = {1.0 - 1e-9, 1e-9};
  CHECK(cross_entropy(sure, 1) == doctest::Approx(1e-9).epsilon(1e-3));

  const double p[] = {0.5, 0.3, 0.2};
  CHECK(cross_entropy(p, 1) == doctest::Approx(0.693147180559945309).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy(p, 0), ConfigError);
  CHECK_THROWS_AS(cross_entropy(p, 4), ConfigError);
}

TEST_CASE("cross entropy stays finite when the true class gets zero mass") {
  const double p[] = {0.0, 1.0};
  const double value = cross_entropy(p, 1);
  CHECK(std::isfinite(value));
  CHECK(value == doctest::Approx(-std::log(1e-300)).epsilon(1e-12));
}

TEST_CASE("first margin penalty on the worked example") {
  const double p[] = {0.5, 0.3, 0.2};
  CHECK(penalty_c1(p, 1, 1.0) == doctest::Approx(0.64).epsilon(1e-12));
  CHECK(penalty_c1(p, 1, 0.0) == 0.0);
  CHECK(penalty_c1(p, 1, 2.5) == doctest::Approx(2.5 * 0.64).epsilon(1e-12));

  const double uniform2[] = {0.5, 0.5};
  CHECK(penalty_c1(uniform2, 1, 2.0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("second margin penalty on the worked example") {
  const double p[] = {0.5, 0.3, 0.2};
  // pairwise gaps 0.2 and 0.3: ((0.8)^2 + (0.7)^2) / 2
  CHECK(penalty_c2(p, 1, 1.0) == doctest::Approx(0.565).epsilon(1e-12));
  CHECK(penalty_c2(p, 1, 0.0) == 0.0);

  const double two[] = {0.7, 0.3};
  CHECK(penalty_c2(two, 1, 1.3) == doctest::Approx(penalty_c1(two, 1, 1.3)).epsilon(1e-12));
}

TEST_CASE("penalties sandwich each other") {
  lmdnn::rng::Engine eng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 3 + static_cast<int>(eng() % 6);
    const auto t = random_outputs(k, 3.0, eng);
    const auto p = softmax(t);
    const int y = static_cast<int>(eng() % k) + 1;
    const double c1 = penalty_c1(p, y, 1.0);
    const double c2 = penalty_c2(p, y, 1.0);
    CHECK(c1 >= 0.0);
    CHECK(c2 >= 0.0);
    CHECK(c2 <= c1 + 1e-12);
    CHECK(c1 <= (k - 1) * c2 + 1e-12);
  }
}

TEST_CASE("loss kinds parse and print") {
  CHECK(LossKind::parse("c") == LossKind::cross_entropy());
  CHECK(LossKind::parse("c1:0.5") == LossKind::c1(0.5));
  CHECK(LossKind::parse("c2:2") == LossKind::c2(2.0));
  CHECK(LossKind::parse(LossKind::c1(0.25).to_string()) == LossKind::c1(0.25));
  CHECK(LossKind::cross_entropy().to_string() == "c");
  CHECK_THROWS_AS(LossKind::parse("c3:1"), ConfigError);
  CHECK_THROWS_AS(LossKind::parse("c1"), ConfigError);
  CHECK_THROWS_AS(LossKind::parse("c1:-1"), ConfigError);
  CHECK_THROWS_AS(LossKind::c1(-0.5).validate(), ConfigError);
}

TEST_CASE("plain cross-entropy gradient on symmetric outputs") {
  const double t[] = {0.0, 0.0};
  const auto [value, grad] = loss_and_grad(LossKind::cross_entropy(), t, 1);
  CHECK(value.total == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(value.penalty == 0.0);
  CHECK(grad[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(grad[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("zero lambda penalized losses reduce to plain cross entropy") {
  lmdnn::rng::Engine eng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = random_outputs(4, 2.0, eng);
    const int y = static_cast<int>(eng() % 4) + 1;
    const auto base = loss_and_grad(LossKind::cross_entropy(), t, y);
    for (auto kind : {LossKind::c1(0.0), LossKind::c2(0.0)}) {
      const auto same = loss_and_grad(kind, t, y);
      CHECK(same.first.total == base.first.total);  // bit-identical code path
      CHECK(same.second == base.second);
    }
  }
}

TEST_CASE("penalized losses never undercut the base cross entropy") {
  lmdnn::rng::Engine eng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = random_outputs(5, 2.0, eng);
    const int y = static_cast<int>(eng() % 5) + 1;
    const auto base = loss_and_grad(LossKind::cross_entropy(), t, y).first;
    for (auto kind : {LossKind::c1(0.7), LossKind::c2(0.7)}) {
      const auto v = loss_and_grad(kind, t, y).first;
      CHECK(v.total >= base.total - 1e-12);
      CHECK(v.total == doctest::Approx(v.base_ce + v.penalty).epsilon(1e-12));
      CHECK(v.base_ce == doctest::Approx(base.total).epsilon(1e-12));
      CHECK(v.penalty >= 0.0);
    }
  }
}

TEST_CASE("analytic output gradients match finite differences") {
  lmdnn::rng::Engine eng(21);
  const LossKind kinds[] = {LossKind::cross_entropy(), LossKind::c1(0.5), LossKind::c2(1.5)};
  for (const auto& kind : kinds) {
    for (int k : {2, 3, 10}) {
      for (int trial = 0; trial < 10; ++trial) {
        const auto t = random_outputs(k, 2.0, eng);
        const int y = static_cast<int>(eng() % k) + 1;
        const auto analytic = loss_and_grad(kind, t, y).second;
        const auto fd = fd_output_gradient(kind, t, y, 1e-6);
        CHECK(testsupport::max_rel_gradient_gap(analytic, fd) < 1e-6);
      }
    }
  }
}

TEST_CASE("raw-space penalty variant differentiates cleanly too") {
  LossKind kind = LossKind::c1(0.8);
  kind.penalty_on_raw = true;
  lmdnn::rng::Engine eng(23);
  const auto t = random_outputs(4, 1.5, eng);
  const auto analytic = loss_and_grad(kind, t, 2).second;
  const auto fd = fd_output_gradient(kind, t, 2, 1e-6);
  CHECK(testsupport::max_rel_gradient_gap(analytic, fd) < 1e-6);
}

TEST_CASE("competitor ties break toward the lowest index") {
  // both wrong classes tie; the subgradient must pick class 2, not class 3
  const double t[] = {0.3, 0.1, 0.1};
  const auto grad_tie = loss_and_grad(LossKind::c1(1.0), t, 1).second;
  const double t2[] = {0.3, 0.1, 0.1 - 1e-9};
  const auto grad_near = loss_and_grad(LossKind::c1(1.0), t2, 1).second;
  CHECK(grad_tie[1] == doctest::Approx(grad_near[1]).epsilon(1e-6));
  CHECK(std::abs(grad_tie[1] - grad_near[1]) < 1e-6);
}

TEST_CASE("batch loss is the mean of per-sample losses") {
  const auto outputs = Matrix::from_rows({{0.2, -0.1, 0.4}, {1.0, 0.0, -1.0}, {0.0, 0.0, 0.0}});
  const std::vector<int> labels = {1, 2, 3};
  const auto kind = LossKind::c2(0.9);
  const auto [value, grads] = batch_loss_and_grad(kind, outputs, labels);

  double total = 0.0, ce = 0.0, pen = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto single = loss_and_grad(kind, outputs.row(static_cast<std::size_t>(i)),
                                      labels[static_cast<std::size_t>(i)]);
    total += single.first.total;
    ce += single.first.base_ce;
    pen += single.first.penalty;
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(grads(static_cast<std::size_t>(i), j) ==
            doctest::Approx(single.second[j] / 3.0).epsilon(1e-12));
    }
  }
  CHECK(value.total == doctest::Approx(total / 3.0).epsilon(1e-12));
  CHECK(value.base_ce == doctest::Approx(ce / 3.0).epsilon(1e-12));
  CHECK(value.penalty == doctest::Approx(pen / 3.0).epsilon(1e-12));
}

TEST_CASE("batch loss rejects label shape mismatches") {
  const auto outputs = Matrix::from_rows({{0.1, 0.2}});
  const std::vector<int> labels = {1, 2};
  CHECK_THROWS_AS(batch_loss_and_grad(LossKind::cross_entropy(), outputs, labels), ShapeError);
}
