#pragma once

#include "strand/calculus.hpp"

namespace strand {

// Coordinate-formula Riemannian quantities on the flat-chart torus:
// Christoffel symbols by central differences, curvature by differences of
// Christoffel fields.
struct RiemannData {
  const PeriodicGrid* grid = nullptr;
  const MetricData* md = nullptr;
  // gamma[((i*d + j)*d + k)] with j<=k collapsed: store full cube for simplicity
  std::vector<std::vector<double>> dg;     // dg[a] = derivative of g along axis a (pair-major)
  std::vector<std::vector<double>> gamma;  // gamma[(i*d+j)*d+k][p], symmetric in (j,k)

  explicit RiemannData(const MetricData& m) : grid(m.grid), md(&m) {
    const PeriodicGrid& g = *grid;
    const int dd = g.dim();
    const int npair = Sym2Field::npairs(dd);
    dg.assign(dd, std::vector<double>(std::size_t(npair) * g.npts));
    for (int a = 0; a < dd; ++a)
      for (int pr = 0; pr < npair; ++pr)
        deriv_axis(g, m.g.data.data() + std::size_t(pr) * g.npts,
                   dg[a].data() + std::size_t(pr) * g.npts, a, 1);
    gamma.assign(std::size_t(dd) * dd * dd, std::vector<double>(g.npts));
    parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t p = lo; p < hi; ++p)
        for (int j = 0; j < dd; ++j)
          for (int k = j; k < dd; ++k) {
            for (int i = 0; i < dd; ++i) {
              double s = 0;
              for (int l = 0; l < dd; ++l) {
                double t = dgat(j, l, k, p) + dgat(k, l, j, p) - dgat(l, j, k, p);
                s += 0.5 * m.ginv.at(i, l, p) * t;
              }
              gamma[idx(i, j, k)][p] = s;
              gamma[idx(i, k, j)][p] = s;
            }
          }
    });
  }

  int idx(int i, int j, int k) const {
    const int dd = grid->dim();
    return (i * dd + j) * dd + k;
  }
  // (d_a g)_{jk}
  double dgat(int a, int j, int k, std::size_t p) const {
    return dg[a][std::size_t(Sym2Field::pair_index(j, k, grid->dim())) * grid->npts + p];
  }

  // Rc_{jk} = d_i Gamma^i_{jk} - d_j Gamma^i_{ik} + G^i_{ip} G^p_{jk} - G^i_{jp} G^p_{ik}
  Sym2Field ricci() const {
    const PeriodicGrid& g = *grid;
    const int dd = g.dim();
    Sym2Field out(g);
    std::vector<double> t(g.npts);
    // derivative terms
    for (int j = 0; j < dd; ++j)
      for (int k = j; k < dd; ++k) {
        double* dst = out.comp(j, k);
        for (int i = 0; i < dd; ++i) {
          deriv_axis(g, gamma[idx(i, j, k)].data(), t.data(), i, 1);
          for (std::size_t p = 0; p < g.npts; ++p) dst[p] += t[p];
          deriv_axis(g, gamma[idx(i, i, k)].data(), t.data(), j, 1);
          for (std::size_t p = 0; p < g.npts; ++p) dst[p] -= t[p];
        }
      }
    // quadratic terms
    parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t p = lo; p < hi; ++p)
        for (int j = 0; j < dd; ++j)
          for (int k = j; k < dd; ++k) {
            double acc = 0;
            for (int i = 0; i < dd; ++i)
              for (int q = 0; q < dd; ++q)
                acc += gamma[idx(i, i, q)][p] * gamma[idx(q, j, k)][p] -
                       gamma[idx(i, j, q)][p] * gamma[idx(q, i, k)][p];
            out.at(j, k, p) += acc;
          }
    });
    return out;
  }

  RForm scalar_curvature(const Sym2Field& rc) const {
    const PeriodicGrid& g = *grid;
    RForm out(g, 0, 1);
    parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t p = lo; p < hi; ++p) {
        double s = 0;
        for (int i = 0; i < g.dim(); ++i)
          for (int j = 0; j < g.dim(); ++j) s += md->ginv.at(i, j, p) * rc.at(i, j, p);
        out.at(0, p) = s;
      }
    });
    return out;
  }

  // Levi-Civita Hessian of a scalar: Hess(a,b) = d_a d_b phi - Gamma^c_{ab} d_c phi.
  // The torsion part of grad^+ dphi is antisymmetric and assembled by callers
  // as -(1/2) i_{phi-sharp-of-dphi} H.
  Sym2Field hessian(const RForm& phi) const {
    const PeriodicGrid& g = *grid;
    const int dd = g.dim();
    RForm dphi = d(phi);
    Sym2Field out(g);
    std::vector<double> t(g.npts);
    for (int a = 0; a < dd; ++a)
      for (int b = a; b < dd; ++b) {
        deriv_axis(g, dphi.comp(b), t.data(), a, 1);
        double* dst = out.comp(a, b);
        for (std::size_t p = 0; p < g.npts; ++p) dst[p] = t[p];
      }
    parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t p = lo; p < hi; ++p)
        for (int a = 0; a < dd; ++a)
          for (int b = a; b < dd; ++b) {
            double acc = out.at(a, b, p);
            for (int c = 0; c < dd; ++c) acc -= gamma[idx(c, a, b)][p] * dphi.at(c, p);
            out.at(a, b, p) = acc;
          }
    });
    return out;
  }
};

// L_X g by coordinate formula.
inline Sym2Field lie_derivative_metric(const VecField& X, const MetricData& md) {
  const PeriodicGrid& g = *md.grid;
  const int dd = g.dim();
  Sym2Field out(g);
  std::vector<double> t(g.npts);
  // X^i d_i g_jk
  for (int j = 0; j < dd; ++j)
    for (int k = j; k < dd; ++k) {
      double* dst = out.comp(j, k);
      for (int i = 0; i < dd; ++i) {
        deriv_axis(g, md.g.comp(std::min(j, k), std::max(j, k)), t.data(), i, 1);
        for (std::size_t p = 0; p < g.npts; ++p) dst[p] += X.comp[i][p] * t[p];
      }
    }
  // g_ik d_j X^i + g_ji d_k X^i
  std::vector<std::vector<double>> dX(std::size_t(dd) * dd, std::vector<double>(g.npts));
  for (int i = 0; i < dd; ++i)
    for (int a = 0; a < dd; ++a) deriv_axis(g, X.comp[i].data(), dX[std::size_t(i) * dd + a].data(), a, 1);
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p)
      for (int j = 0; j < dd; ++j)
        for (int k = j; k < dd; ++k) {
          double acc = 0;
          for (int i = 0; i < dd; ++i)
            acc += md.g.at(i, k, p) * dX[std::size_t(i) * dd + j][p] +
                   md.g.at(j, i, p) * dX[std::size_t(i) * dd + k][p];
          out.at(j, k, p) += acc;
        }
  });
  return out;
}

// Yang-Mills codifferential d_A* F = d*F - g^{ab} [a_a, F_{b .}] for a
// trivialized flat background (A = a).
inline RForm ym_codifferential(const RForm& F, const RForm& a, const MetricData& md,
                               const QuadraticLieAlgebra& alg) {
  RForm out = codifferential(F, md);
  if (alg.abelian()) return out;
  const PeriodicGrid& g = *F.grid;
  const int dd = g.dim();
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> Fa(std::size_t(dd) * dd * alg.dim);
    std::array<double, 4> br{};
    for (std::size_t p = lo; p < hi; ++p) {
      auto at3 = [&](int i, int j, int l) -> double& { return Fa[std::size_t((i * dd + j) * alg.dim + l)]; };
      std::fill(Fa.begin(), Fa.end(), 0.0);
      for (int c = 0; c < g.ncomps(2); ++c) {
        unsigned M = g.comps[2][c];
        int idxv[2], t = 0;
        for (int ax = 0; ax < dd; ++ax)
          if (M & (1u << ax)) idxv[t++] = ax;
        for (int l = 0; l < alg.dim; ++l) {
          at3(idxv[0], idxv[1], l) = F.at(c, p, l);
          at3(idxv[1], idxv[0], l) = -F.at(c, p, l);
        }
      }
      for (int mu = 0; mu < dd; ++mu) {
        for (int aax = 0; aax < dd; ++aax)
          for (int bax = 0; bax < dd; ++bax) {
            double raise = md.ginv.at(aax, bax, p);
            if (raise == 0.0) continue;
            alg.bracket_into(&a.at(aax, p, 0), &at3(bax, mu, 0), br.data());
            for (int l = 0; l < alg.dim; ++l) out.at(mu, p, l) -= raise * br[l];
          }
      }
    }
  });
  return out;
}

// Laplace-Beltrami on scalars: Delta f = -d* d f.
inline RForm laplace_beltrami(const RForm& f, const MetricData& md) {
  RForm df = d(f);
  RForm out = codifferential(df, md);
  out *= -1.0;
  return out;
}

}  // namespace strand
