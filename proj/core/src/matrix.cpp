#include "lmdnn/matrix.hpp"

#include <cblas.h>

#include <cmath>
#include <mutex>
#include <string>

#include "lmdnn/errors.hpp"

extern "C" void openblas_set_num_threads(int);

namespace lmdnn {

namespace {

// Multi-threaded BLAS can reorder accumulation between runs with different
// thread counts; one thread keeps every product bit-reproducible.
void pin_blas_threads() {
  static std::once_flag flag;
  std::call_once(flag, [] { openblas_set_num_threads(1); });
}

void check_inner(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string("matmul: inner dimensions disagree in ") + what + ": " +
                     std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != m.cols()) throw ShapeError("from_rows: ragged row lengths");
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Matrix::ensure_finite(const char* context) const {
  if (!all_finite()) {
    throw NumericError(std::string("non-finite value in ") + context);
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  pin_blas_threads();
  check_inner(a.cols(), b.rows(), "a*b");
  Matrix c(a.rows(), b.cols());
  if (c.empty()) return c;
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(a.rows()),
              static_cast<int>(b.cols()), static_cast<int>(a.cols()), 1.0, a.data(),
              static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()), 0.0, c.data(),
              static_cast<int>(c.cols()));
  c.ensure_finite("matmul");
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  pin_blas_threads();
  check_inner(a.rows(), b.rows(), "a'*b");
  Matrix c(a.cols(), b.cols());
  if (c.empty()) return c;
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(a.cols()),
              static_cast<int>(b.cols()), static_cast<int>(a.rows()), 1.0, a.data(),
              static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()), 0.0, c.data(),
              static_cast<int>(c.cols()));
  c.ensure_finite("matmul_tn");
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  pin_blas_threads();
  check_inner(a.cols(), b.cols(), "a*b'");
  Matrix c(a.rows(), b.rows());
  if (c.empty()) return c;
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(a.rows()),
              static_cast<int>(b.rows()), static_cast<int>(a.cols()), 1.0, a.data(),
              static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()), 0.0, c.data(),
              static_cast<int>(c.cols()));
  c.ensure_finite("matmul_nt");
  return c;
}

}  // namespace lmdnn
