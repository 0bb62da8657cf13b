#ifndef FCG_SMALLMAT_HPP
#define FCG_SMALLMAT_HPP

#include <array>
#include <cmath>
#include <cstddef>

#include "fcg/dual.hpp"
#include "fcg/error.hpp"

namespace fcg {

// Fixed-size vectors/matrices over an arbitrary scalar (double or nested
// duals).  Eigen stays on the plain-double side of the code; these carry
// the differentiated paths.
template <class S, std::size_t N>
using Vec = std::array<S, N>;

template <class S, std::size_t N>
using Mat = std::array<std::array<S, N>, N>;

template <class S, std::size_t N>
Vec<S, N> vzero() {
  Vec<S, N> v;
  for (auto& x : v) x = S(0.0);
  return v;
}

template <class S, std::size_t N>
Vec<S, N> operator+(const Vec<S, N>& a, const Vec<S, N>& b) {
  Vec<S, N> r;
  for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + b[i];
  return r;
}
template <class S, std::size_t N>
Vec<S, N> operator-(const Vec<S, N>& a, const Vec<S, N>& b) {
  Vec<S, N> r;
  for (std::size_t i = 0; i < N; ++i) r[i] = a[i] - b[i];
  return r;
}
template <class S, std::size_t N>
Vec<S, N> scaled(const Vec<S, N>& a, double s) {
  Vec<S, N> r;
  for (std::size_t i = 0; i < N; ++i) r[i] = a[i] * s;
  return r;
}

template <class S, std::size_t N>
S dot(const Vec<S, N>& a, const Vec<S, N>& b) {
  S s = a[0] * b[0];
  for (std::size_t i = 1; i < N; ++i) s += a[i] * b[i];
  return s;
}

template <class S, std::size_t N>
S norm2(const Vec<S, N>& a) {
  return dot(a, a);
}

// Solves A x = b by Gaussian elimination with partial pivoting on |value|.
template <class S, std::size_t N>
Vec<S, N> solve(Mat<S, N> A, Vec<S, N> b) {
  const int n = static_cast<int>(N);
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(value_of(A[k][k]));
    for (int i = k + 1; i < n; ++i) {
      double m = std::abs(value_of(A[i][k]));
      if (m > best) { best = m; piv = i; }
    }
    if (best == 0.0) fail(ErrorCode::DegenerateTensor, "singular matrix in solve");
    if (piv != k) { std::swap(A[piv], A[k]); std::swap(b[piv], b[k]); }
    S ipiv = S(1.0) / A[k][k];
    for (int i = k + 1; i < n; ++i) {
      S f = A[i][k] * ipiv;
      for (int j = k; j < n; ++j) A[i][j] -= f * A[k][j];
      b[i] -= f * b[k];
    }
  }
  Vec<S, N> x = vzero<S, N>();
  for (int k = n - 1; k >= 0; --k) {
    S s = b[k];
    for (int j = k + 1; j < n; ++j) s -= A[k][j] * x[j];
    x[k] = s / A[k][k];
  }
  return x;
}

template <class S, std::size_t N>
double value_norm(const Vec<S, N>& a) {
  double s = 0;
  for (std::size_t i = 0; i < N; ++i) s += value_of(a[i]) * value_of(a[i]);
  return std::sqrt(s);
}

}  // namespace fcg

#endif
