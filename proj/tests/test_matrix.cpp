#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>

#include "doctest.h"
#include "lmdnn/errors.hpp"
#include "lmdnn/matrix.hpp"
#include "lmdnn/rng.hpp"
#include "support.hpp"

using lmdnn::Matrix;

namespace {

// textbook triple loop; the oracle for the BLAS-backed helpers
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  lmdnn::rng::Engine eng(seed);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = lmdnn::rng::uniform(eng, -2.0, 2.0);
  }
  return m;
}

}  // namespace

TEST_CASE("construction and indexing") {
  Matrix m(2, 3, 0.5);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.size() == 6);
  CHECK(m(1, 2) == 0.5);
  m(0, 1) = -1.25;
  CHECK(m(0, 1) == -1.25);
  CHECK(m.row(0).size() == 3);
  CHECK(m.row(0)[1] == -1.25);

  Matrix empty;
  CHECK(empty.empty());
  CHECK(empty.rows() == 0);
}

TEST_CASE("from_rows lays rows out in order") {
  const auto m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 2);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(2, 1) == 6.0);
  CHECK(m.data()[3] == 4.0);  // row-major storage
}

TEST_CASE("from_rows rejects ragged rows") {
  CHECK_THROWS_AS(Matrix::from_rows({{1.0, 2.0}, {3.0}}), lmdnn::ShapeError);
}

TEST_CASE("matmul matches a hand-computed product") {
  const auto a = Matrix::from_rows({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
  const auto b = Matrix::from_rows({{7.0, 8.0}, {9.0, 10.0}, {11.0, 12.0}});
  const auto c = lmdnn::matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 2);
  CHECK(c(0, 0) == doctest::Approx(58.0).epsilon(1e-12));
  CHECK(c(0, 1) == doctest::Approx(64.0).epsilon(1e-12));
  CHECK(c(1, 0) == doctest::Approx(139.0).epsilon(1e-12));
  CHECK(c(1, 1) == doctest::Approx(154.0).epsilon(1e-12));
}

TEST_CASE("matmul agrees with the naive triple loop on random inputs") {
  const auto a = random_matrix(7, 5, 11);
  const auto b = random_matrix(5, 9, 12);
  const auto fast = lmdnn::matmul(a, b);
  const auto slow = naive_matmul(a, b);
  for (std::size_t i = 0; i < fast.rows(); ++i) {
    for (std::size_t j = 0; j < fast.cols(); ++j) {
      CHECK(testsupport::rel_close(fast(i, j), slow(i, j), 1e-12));
    }
  }
}

TEST_CASE("matmul_tn and matmul_nt match explicit transposition") {
  const auto a = random_matrix(6, 4, 21);
  const auto b = random_matrix(6, 3, 22);
  const auto tn = lmdnn::matmul_tn(a, b);  // (4x6)(6x3)
  const auto tn_ref = naive_matmul(transpose(a), b);
  REQUIRE(tn.rows() == 4);
  REQUIRE(tn.cols() == 3);
  for (std::size_t i = 0; i < tn.rows(); ++i) {
    for (std::size_t j = 0; j < tn.cols(); ++j) {
      CHECK(testsupport::rel_close(tn(i, j), tn_ref(i, j), 1e-12));
    }
  }

  const auto c = random_matrix(5, 4, 23);
  const auto d = random_matrix(7, 4, 24);
  const auto nt = lmdnn::matmul_nt(c, d);  // (5x4)(4x7)
  const auto nt_ref = naive_matmul(c, transpose(d));
  REQUIRE(nt.rows() == 5);
  REQUIRE(nt.cols() == 7);
  for (std::size_t i = 0; i < nt.rows(); ++i) {
    for (std::size_t j = 0; j < nt.cols(); ++j) {
      CHECK(testsupport::rel_close(nt(i, j), nt_ref(i, j), 1e-12));
    }
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  const Matrix a(2, 3);
  const Matrix b(4, 2);
  CHECK_THROWS_AS(lmdnn::matmul(a, b), lmdnn::ShapeError);
}

TEST_CASE("matmul is reproducible call to call") {
  const auto a = random_matrix(16, 32, 31);
  const auto b = random_matrix(32, 8, 32);
  CHECK(lmdnn::matmul(a, b) == lmdnn::matmul(a, b));
}

TEST_CASE("finiteness checking") {
  auto m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  CHECK(m.all_finite());
  CHECK_NOTHROW(m.ensure_finite("unit test"));

  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(m.all_finite());
  CHECK_THROWS_AS(m.ensure_finite("unit test"), lmdnn::NumericError);

  m(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(m.all_finite());
  CHECK_THROWS_WITH_AS(m.ensure_finite("after product"),
                       doctest::Contains("after product"), lmdnn::NumericError);
}

TEST_CASE("products with a non-finite operand are caught") {
  auto a = Matrix::from_rows({{1.0, std::numeric_limits<double>::infinity()}});
  const auto b = Matrix::from_rows({{1.0}, {1.0}});
  CHECK_THROWS_AS(lmdnn::matmul(a, b), lmdnn::NumericError);
}
