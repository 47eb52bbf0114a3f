#pragma once

// Small fixed-size linear algebra, error types and a deterministic
// parallel-for used across the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nlc {

using index_t = std::int64_t;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <std::size_t D>
using Vec = std::array<double, D>;

template <std::size_t D>
using Mat = std::array<std::array<double, D>, D>;

template <std::size_t D>
inline Vec<D> vec_zero() {
  Vec<D> v{};
  return v;
}

template <std::size_t D>
inline double dot(const Vec<D>& a, const Vec<D>& b) {
  double s = 0;
  for (std::size_t i = 0; i < D; ++i) s += a[i] * b[i];
  return s;
}

template <std::size_t D>
inline double norm(const Vec<D>& a) {
  return std::sqrt(dot(a, a));
}

template <std::size_t D>
inline Vec<D> operator+(const Vec<D>& a, const Vec<D>& b) {
  Vec<D> r;
  for (std::size_t i = 0; i < D; ++i) r[i] = a[i] + b[i];
  return r;
}

template <std::size_t D>
inline Vec<D> operator-(const Vec<D>& a, const Vec<D>& b) {
  Vec<D> r;
  for (std::size_t i = 0; i < D; ++i) r[i] = a[i] - b[i];
  return r;
}

template <std::size_t D>
inline Vec<D> operator*(double c, const Vec<D>& a) {
  Vec<D> r;
  for (std::size_t i = 0; i < D; ++i) r[i] = c * a[i];
  return r;
}

template <std::size_t D>
inline Vec<D> normalized(const Vec<D>& a) {
  double n = norm(a);
  if (n == 0.0) throw NumericalError("normalized: zero vector");
  return (1.0 / n) * a;
}

template <std::size_t D>
inline Mat<D> mat_zero() {
  Mat<D> m{};
  return m;
}

template <std::size_t D>
inline Mat<D> identity() {
  Mat<D> m{};
  for (std::size_t i = 0; i < D; ++i) m[i][i] = 1.0;
  return m;
}

template <std::size_t D>
inline Mat<D> outer(const Vec<D>& a, const Vec<D>& b) {
  Mat<D> m;
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) m[i][j] = a[i] * b[j];
  return m;
}

template <std::size_t D>
inline double frob(const Mat<D>& a, const Mat<D>& b) {
  double s = 0;
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) s += a[i][j] * b[i][j];
  return s;
}

template <std::size_t D>
inline double frob_norm(const Mat<D>& a) {
  return std::sqrt(frob(a, a));
}

template <std::size_t D>
inline double trace(const Mat<D>& a) {
  double s = 0;
  for (std::size_t i = 0; i < D; ++i) s += a[i][i];
  return s;
}

template <std::size_t D>
inline Mat<D> operator+(const Mat<D>& a, const Mat<D>& b) {
  Mat<D> r;
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) r[i][j] = a[i][j] + b[i][j];
  return r;
}

template <std::size_t D>
inline Mat<D> operator-(const Mat<D>& a, const Mat<D>& b) {
  Mat<D> r;
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) r[i][j] = a[i][j] - b[i][j];
  return r;
}

template <std::size_t D>
inline Mat<D> operator*(double c, const Mat<D>& a) {
  Mat<D> r;
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) r[i][j] = c * a[i][j];
  return r;
}

template <std::size_t D>
inline Vec<D> matvec(const Mat<D>& a, const Vec<D>& x) {
  Vec<D> r{};
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) r[i] += a[i][j] * x[j];
  return r;
}

template <std::size_t D>
inline Mat<D> matmul(const Mat<D>& a, const Mat<D>& b) {
  Mat<D> r{};
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j)
      for (std::size_t k = 0; k < D; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

// Symmetric eigen decomposition by cyclic Jacobi sweeps. Exact enough
// for the 2x2 / 3x3 nodal tensors used here.
template <std::size_t D>
inline void sym_eigen(const Mat<D>& a, std::array<double, D>& eval,
                      Mat<D>& evec /* columns */) {
  Mat<D> m = a;
  Mat<D> v = identity<D>();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < D; ++p)
      for (std::size_t q = p + 1; q < D; ++q) off += m[p][q] * m[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < D; ++p) {
      for (std::size_t q = p + 1; q < D; ++q) {
        if (std::abs(m[p][q]) < 1e-300) continue;
        double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < D; ++k) {
          double mkp = m[k][p], mkq = m[k][q];
          m[k][p] = c * mkp - s * mkq;
          m[k][q] = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < D; ++k) {
          double mpk = m[p][k], mqk = m[q][k];
          m[p][k] = c * mpk - s * mqk;
          m[q][k] = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < D; ++k) {
          double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  for (std::size_t i = 0; i < D; ++i) eval[i] = m[i][i];
  evec = v;
}

// ---------------------------------------------------------------------------
// Deterministic parallel-for. Work is split into fixed-size chunks so that
// per-chunk results (and any ordered merge done by the caller) do not depend
// on the thread count. Thread count comes from NLC_THREADS (default 1).

inline int thread_count() {
  static int n = [] {
    if (const char* e = std::getenv("NLC_THREADS")) {
      int v = std::atoi(e);
      if (v > 0) return v;
    }
    return 1;
  }();
  return n;
}

template <class Body>
void parallel_for(index_t count, const Body& body) {
  int nt = thread_count();
  if (nt <= 1 || count < 2) {
    body(0, count);
    return;
  }
  index_t chunk = (count + nt - 1) / nt;
  std::vector<std::thread> pool;
  for (index_t b = 0; b < count; b += chunk) {
    index_t e = std::min(count, b + chunk);
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& t : pool) t.join();
}

inline double sq(double x) { return x * x; }

}  // namespace nlc
