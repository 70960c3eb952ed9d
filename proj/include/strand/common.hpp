#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace strand {

using cplx = std::complex<double>;
inline constexpr double kPi = 3.14159265358979323846;

// Typed errors. Flow drivers translate these into process exit codes.
struct dimension_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct positivity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct nan_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct convergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG (splitmix64). Distributions are hand-rolled so that
// identical seeds give bit-identical streams on every platform.
// ---------------------------------------------------------------------------
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed = 0x9e3779b97f4a7c15ull) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  // uniform in [0,1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  // uniform in [-1,1)
  double sym() { return 2.0 * uniform() - 1.0; }
};

// ---------------------------------------------------------------------------
// parallel_for: data-parallel maps over grid points. Worker count is capped
// by the STRAND_THREADS environment variable. Reductions stay serial so that
// results are bit-reproducible.
// ---------------------------------------------------------------------------
inline int worker_count() {
  static const int n = [] {
    int hw = int(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("STRAND_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1 && cap < hw) hw = cap;
    }
    return hw;
  }();
  return n;
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const int nw = worker_count();
  if (nw <= 1 || count < 4096) {
    fn(std::size_t(0), count);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + nw - 1) / nw;
  for (int w = 0; w < nw; ++w) {
    std::size_t lo = std::size_t(w) * chunk;
    if (lo >= count) break;
    std::size_t hi = std::min(count, lo + chunk);
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Small dense matrices (runtime dim <= 8) used pointwise: metric blocks,
// Hermitian reductions, the block metric G.
// ---------------------------------------------------------------------------
template <class T>
struct SmallMat {
  static constexpr int kMax = 8;
  int n = 0;
  std::array<T, kMax * kMax> a{};

  SmallMat() = default;
  explicit SmallMat(int dim) : n(dim) { a.fill(T(0)); }

  T& operator()(int i, int j) { return a[std::size_t(i) * kMax + j]; }
  const T& operator()(int i, int j) const { return a[std::size_t(i) * kMax + j]; }

  static SmallMat identity(int dim) {
    SmallMat m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = T(1);
    return m;
  }

  SmallMat operator+(const SmallMat& o) const {
    SmallMat r(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) = (*this)(i, j) + o(i, j);
    return r;
  }
  SmallMat operator-(const SmallMat& o) const {
    SmallMat r(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) = (*this)(i, j) - o(i, j);
    return r;
  }
  SmallMat operator*(const SmallMat& o) const {
    SmallMat r(n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        T aik = (*this)(i, k);
        for (int j = 0; j < n; ++j) r(i, j) += aik * o(k, j);
      }
    return r;
  }
  SmallMat operator*(T s) const {
    SmallMat r(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) = (*this)(i, j) * s;
    return r;
  }

  SmallMat transpose() const {
    SmallMat r(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) = (*this)(j, i);
    return r;
  }

  SmallMat adjoint() const {  // conjugate transpose
    SmallMat r(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if constexpr (std::is_same_v<T, cplx>)
          r(i, j) = std::conj((*this)(j, i));
        else
          r(i, j) = (*this)(j, i);
      }
    return r;
  }

  T trace() const {
    T s(0);
    for (int i = 0; i < n; ++i) s += (*this)(i, i);
    return s;
  }

  // Gauss-Jordan with partial pivoting.
  SmallMat inverse() const {
    SmallMat m = *this;
    SmallMat inv = identity(n);
    for (int col = 0; col < n; ++col) {
      int piv = col;
      double best = std::abs(m(col, col));
      for (int r = col + 1; r < n; ++r)
        if (std::abs(m(r, col)) > best) {
          best = std::abs(m(r, col));
          piv = r;
        }
      if (best < 1e-300) throw positivity_error("singular matrix in SmallMat::inverse");
      if (piv != col)
        for (int j = 0; j < n; ++j) {
          std::swap(m(piv, j), m(col, j));
          std::swap(inv(piv, j), inv(col, j));
        }
      T d = T(1) / m(col, col);
      for (int j = 0; j < n; ++j) {
        m(col, j) *= d;
        inv(col, j) *= d;
      }
      for (int r = 0; r < n; ++r) {
        if (r == col) continue;
        T f = m(r, col);
        if (f == T(0)) continue;
        for (int j = 0; j < n; ++j) {
          m(r, j) -= f * m(col, j);
          inv(r, j) -= f * inv(col, j);
        }
      }
    }
    return inv;
  }

  T det() const {
    SmallMat m = *this;
    T d(1);
    for (int col = 0; col < n; ++col) {
      int piv = col;
      double best = std::abs(m(col, col));
      for (int r = col + 1; r < n; ++r)
        if (std::abs(m(r, col)) > best) {
          best = std::abs(m(r, col));
          piv = r;
        }
      if (best == 0.0) return T(0);
      if (piv != col) {
        for (int j = 0; j < n; ++j) std::swap(m(piv, j), m(col, j));
        d = -d;
      }
      d *= m(col, col);
      T inv = T(1) / m(col, col);
      for (int r = col + 1; r < n; ++r) {
        T f = m(r, col) * inv;
        if (f == T(0)) continue;
        for (int j = col; j < n; ++j) m(r, j) -= f * m(col, j);
      }
    }
    return d;
  }
};

using MatR = SmallMat<double>;
using MatC = SmallMat<cplx>;

// Eigenvalues of a real symmetric / complex Hermitian matrix by cyclic
// Jacobi rotations. Returns ascending eigenvalues; optionally the
// eigenvectors as columns of V.
inline std::vector<double> hermitian_eigenvalues(const MatC& m0, MatC* vecs = nullptr) {
  MatC m = m0;
  const int n = m.n;
  MatC v = MatC::identity(n);
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += std::norm(m(p, q));
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        cplx apq = m(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double app = m(p, p).real(), aqq = m(q, q).real();
        // unitary 2x2 diagonalization: phase then rotation
        cplx phase = apq / std::abs(apq);
        double g = std::abs(apq);
        double theta = 0.5 * std::atan2(2 * g, aqq - app);
        double c = std::cos(theta), s = std::sin(theta);
        // columns p,q update: [p', q'] = [p, q] * U with
        // U = [[c, s*conj(phase)], [-s*phase, c*?]] -- apply directly
        for (int i = 0; i < n; ++i) {
          cplx mip = m(i, p), miq = m(i, q);
          m(i, p) = c * mip - s * std::conj(phase) * miq;
          m(i, q) = s * phase * mip + c * miq;
        }
        for (int j = 0; j < n; ++j) {
          cplx mpj = m(p, j), mqj = m(q, j);
          m(p, j) = c * mpj - s * phase * mqj;
          m(q, j) = s * std::conj(phase) * mpj + c * mqj;
        }
        for (int i = 0; i < n; ++i) {
          cplx vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * std::conj(phase) * viq;
          v(i, q) = s * phase * vip + c * viq;
        }
      }
  }
  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = m(i, i).real();
  // keep eigenvector columns matched while sorting
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (ev[order[j]] < ev[order[i]]) std::swap(order[i], order[j]);
  std::vector<double> sorted(n);
  MatC vs(n);
  for (int i = 0; i < n; ++i) {
    sorted[i] = ev[order[i]];
    for (int r = 0; r < n; ++r) vs(r, i) = v(r, order[i]);
  }
  if (vecs) *vecs = vs;
  return sorted;
}

inline std::vector<double> symmetric_eigenvalues(const MatR& m) {
  MatC c(m.n);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) c(i, j) = m(i, j);
  return hermitian_eigenvalues(c);
}

// Hermitian functional calculus for positive matrices (log, exp, sqrt).
inline MatC hermitian_apply(const MatC& m, const std::function<double(double)>& f) {
  MatC v;
  auto ev = hermitian_eigenvalues(m, &v);
  MatC d(m.n);
  for (int i = 0; i < m.n; ++i) d(i, i) = f(ev[i]);
  return v * d * v.adjoint();
}

inline MatC hermitian_exp(const MatC& m) {
  return hermitian_apply(m, [](double x) { return std::exp(x); });
}
inline MatC hermitian_log(const MatC& m) {
  return hermitian_apply(m, [](double x) {
    if (x <= 0) throw positivity_error("hermitian_log of non-positive matrix");
    return std::log(x);
  });
}

}  // namespace strand
