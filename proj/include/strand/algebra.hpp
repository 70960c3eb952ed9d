#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "strand/common.hpp"

namespace strand {

// A quadratic Lie algebra: structure constants c[i][j][k] with
// [x_i, x_j] = sum_k c[i][j][k] x_k, and an ad-invariant symmetric pairing
// kappa of arbitrary signature. Values are coordinate vectors in the fixed
// basis; everything is immutable after construction.
struct QuadraticLieAlgebra {
  std::string name;
  int dim = 0;
  std::vector<double> c;  // dim^3, c[(i*dim + j)*dim + k]
  MatR kappa;
  std::pair<int, int> signature{0, 0};  // (n_plus, n_minus)

  double cc(int i, int j, int k) const { return c[std::size_t(i * dim + j) * dim + k]; }
  double& cc(int i, int j, int k) { return c[std::size_t(i * dim + j) * dim + k]; }

  bool abelian() const {
    for (double x : c)
      if (x != 0.0) return false;
    return true;
  }

  // [x, y] in basis coordinates. Looping i<j keeps the result bit-identical
  // under swap-with-negation.
  void bracket_into(const double* x, const double* y, double* out) const {
    for (int k = 0; k < dim; ++k) out[k] = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) {
        double w = x[i] * y[j] - x[j] * y[i];
        if (w == 0.0) continue;
        for (int k = 0; k < dim; ++k) out[k] += cc(i, j, k) * w;
      }
  }
  template <class T>
  void bracket_into_t(const T* x, const T* y, T* out) const {
    for (int k = 0; k < dim; ++k) out[k] = T(0);
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) {
        T w = x[i] * y[j] - x[j] * y[i];
        for (int k = 0; k < dim; ++k) out[k] += cc(i, j, k) * w;
      }
  }

  std::vector<double> bracket(const std::vector<double>& x, const std::vector<double>& y) const {
    if (int(x.size()) != dim || int(y.size()) != dim)
      throw dimension_error("bracket: coordinate length does not match algebra dimension");
    std::vector<double> out(dim);
    bracket_into(x.data(), y.data(), out.data());
    return out;
  }

  template <class T>
  T pair_values(const T* x, const T* y) const {
    T s(0);
    for (int i = 0; i < dim; ++i) {
      s += kappa(i, i) * (x[i] * y[i]);
      for (int j = i + 1; j < dim; ++j) s += kappa(i, j) * (x[i] * y[j] + x[j] * y[i]);
    }
    return s;
  }

  double pair(const std::vector<double>& x, const std::vector<double>& y) const {
    if (int(x.size()) != dim || int(y.size()) != dim)
      throw dimension_error("pair: coordinate length does not match algebra dimension");
    return pair_values(x.data(), y.data());
  }

  // Full index-sum norm of the Cartan 3-form H_K(u,v,w) = g_K([u,v],w) in a
  // g_K-orthonormal basis, where g_K = diag(weights) extends -kappa. Only
  // meaningful (and only requested) for positive definite g_K.
  double cartan_norm_sq(const std::vector<double>& g_K_weights) const {
    if (int(g_K_weights.size()) != dim)
      throw dimension_error("cartan_norm_sq: weight count does not match algebra dimension");
    for (double w : g_K_weights)
      if (!(w > 0)) throw positivity_error("cartan_norm_sq: g_K must be positive definite");
    double total = 0.0;
    std::vector<double> br(dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        if (i == j) continue;
        for (int k = 0; k < dim; ++k) br[k] = cc(i, j, k);
        for (int k = 0; k < dim; ++k) {
          // g_K([u_i,u_j], u_k) = -kappa([u_i,u_j], u_k) when g_K extends -kappa;
          // with diagonal weights the extension acts on the bracket value itself,
          // i.e. H_K components against the unnormalized basis are -<[u_i,u_j],u_k>.
          double h = 0.0;
          for (int l = 0; l < dim; ++l) h += -kappa(l, k) * br[l];
          double comp = h / std::sqrt(g_K_weights[i] * g_K_weights[j] * g_K_weights[k]);
          total += comp * comp;
        }
      }
    return total;
  }

  double jacobi_residual() const {
    double worst = 0.0;
    std::vector<double> x(dim), y(dim), z(dim), t1(dim), t2(dim), t3(dim), u(dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        for (int k = 0; k < dim; ++k) {
          std::fill(x.begin(), x.end(), 0.0);
          std::fill(y.begin(), y.end(), 0.0);
          std::fill(z.begin(), z.end(), 0.0);
          x[i] = y[j] = z[k] = 1.0;
          bracket_into(y.data(), z.data(), u.data());
          bracket_into(x.data(), u.data(), t1.data());
          bracket_into(z.data(), x.data(), u.data());
          bracket_into(y.data(), u.data(), t2.data());
          bracket_into(x.data(), y.data(), u.data());
          bracket_into(z.data(), u.data(), t3.data());
          for (int l = 0; l < dim; ++l) worst = std::max(worst, std::abs(t1[l] + t2[l] + t3[l]));
        }
    return worst;
  }

  double ad_invariance_residual() const {
    double worst = 0.0;
    std::vector<double> x(dim), y(dim), z(dim), u(dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        for (int k = 0; k < dim; ++k) {
          std::fill(x.begin(), x.end(), 0.0);
          std::fill(y.begin(), y.end(), 0.0);
          std::fill(z.begin(), z.end(), 0.0);
          x[i] = y[j] = z[k] = 1.0;
          bracket_into(x.data(), y.data(), u.data());
          double a = pair_values(u.data(), z.data());
          bracket_into(x.data(), z.data(), u.data());
          double b = pair_values(y.data(), u.data());
          worst = std::max(worst, std::abs(a + b));
        }
    return worst;
  }

  void validate() const {
    if (std::abs(kappa.det()) <= 1e-12) throw positivity_error("pairing is degenerate");
    if (jacobi_residual() > 1e-13) throw config_error("Jacobi identity violated");
    if (ad_invariance_residual() > 1e-13) throw config_error("pairing is not ad-invariant");
    auto ev = symmetric_eigenvalues(kappa);
    int np = 0, nm = 0;
    for (double e : ev) (e > 0 ? np : nm)++;
    if (np != signature.first || nm != signature.second)
      throw config_error("declared signature does not match pairing eigenvalues");
  }
};

// u(1)^m with kappa = diag(weights); weights may carry either sign.
inline QuadraticLieAlgebra make_u1(const std::vector<double>& weights) {
  QuadraticLieAlgebra alg;
  alg.dim = int(weights.size());
  if (alg.dim < 1 || alg.dim > 4) throw config_error("u(1)^m supported for 1 <= m <= 4");
  alg.name = "u1^" + std::to_string(alg.dim);
  alg.c.assign(std::size_t(alg.dim) * alg.dim * alg.dim, 0.0);
  alg.kappa = MatR(alg.dim);
  int np = 0, nm = 0;
  for (int i = 0; i < alg.dim; ++i) {
    alg.kappa(i, i) = weights[i];
    (weights[i] > 0 ? np : nm)++;
  }
  alg.signature = {np, nm};
  alg.validate();
  return alg;
}

// su(2) with cyclic structure constants c[1][2][3] = 1 and
// kappa = -scale * Id (the Killing-normalized trace pairing).
inline QuadraticLieAlgebra make_su2(double scale = 1.0) {
  if (!(scale > 0)) throw config_error("su(2) pairing scale must be positive");
  QuadraticLieAlgebra alg;
  alg.dim = 3;
  alg.name = "su2";
  alg.c.assign(27, 0.0);
  alg.cc(0, 1, 2) = 1.0;
  alg.cc(1, 0, 2) = -1.0;
  alg.cc(1, 2, 0) = 1.0;
  alg.cc(2, 1, 0) = -1.0;
  alg.cc(2, 0, 1) = 1.0;
  alg.cc(0, 2, 1) = -1.0;
  alg.kappa = MatR(3);
  for (int i = 0; i < 3; ++i) alg.kappa(i, i) = -scale;
  alg.signature = {0, 3};
  alg.validate();
  return alg;
}

inline QuadraticLieAlgebra make_algebra(const std::string& name, const std::vector<double>& params) {
  if (name == "su2") return make_su2(params.empty() ? 1.0 : params[0]);
  if (name.rfind("u1", 0) == 0) {
    if (params.empty()) throw config_error("u(1)^m algebra needs pairing weights");
    return make_u1(params);
  }
  throw config_error("unknown algebra: " + name);
}

}  // namespace strand
