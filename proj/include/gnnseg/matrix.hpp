#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gnnseg/errors.hpp"

namespace gnnseg {

// Dense row-major matrix of doubles. All model arithmetic runs in double
// precision so the tight normalization tolerances in the tests are meaningful.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

  std::size_t size() const { return v.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }

  // NaN/Inf anywhere is a hard error.
  void validate_finite(const std::string& where) const {
    if (!all_finite()) throw NumericError("non-finite value in " + where);
  }

  static Matrix zeros_like(const Matrix& o) { return Matrix(o.rows, o.cols); }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows_in) {
    if (rows_in.empty()) return Matrix();
    Matrix m(static_cast<int>(rows_in.size()), static_cast<int>(rows_in[0].size()));
    for (int r = 0; r < m.rows; ++r) {
      if (static_cast<int>(rows_in[r].size()) != m.cols)
        throw ValidationError("ragged rows in Matrix::from_rows");
      for (int c = 0; c < m.cols; ++c) m(r, c) = rows_in[r][c];
    }
    return m;
  }
};

}  // namespace gnnseg
