#pragma once

#include "strand/algebra.hpp"
#include "strand/grid.hpp"

namespace strand {

// ---------------------------------------------------------------------------
// Exterior derivative. Commuting difference stencils give d(d(a)) = 0 to
// roundoff on every grid.
// ---------------------------------------------------------------------------
template <class T>
Field<T> d(const Field<T>& a) {
  const PeriodicGrid& g = *a.grid;
  if (a.degree >= g.dim()) throw dimension_error("d: input already has top degree");
  Field<T> out(g, a.degree + 1, a.ldim);
  std::vector<T> tmp(g.npts * std::size_t(a.ldim));
  for (int cin = 0; cin < g.ncomps(a.degree); ++cin) {
    unsigned I = g.comps[a.degree][cin];
    for (int axis = 0; axis < g.dim(); ++axis) {
      unsigned bit = 1u << axis;
      if (I & bit) continue;
      int sign = merge_sign(bit, I);
      int cout = g.comp_index[I | bit];
      deriv_axis(g, a.comp(cin), tmp.data(), axis, a.ldim);
      T* dst = out.comp(cout);
      const double s = double(sign);
      for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] += s * tmp[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wedge products. The value combiner decides how coefficients multiply:
// plain scalar product, pairing through kappa, or the Lie bracket.
// ---------------------------------------------------------------------------
template <class TA, class TB, class TO, class Combine>
Field<TO> wedge_with(const Field<TA>& a, const Field<TB>& b, int out_ldim, Combine&& combine) {
  const PeriodicGrid& g = *a.grid;
  if (!g.same_shape(*b.grid)) throw dimension_error("wedge: mismatched grids");
  if (a.degree + b.degree > g.dim()) throw dimension_error("wedge: degree overflow");
  Field<TO> out(g, a.degree + b.degree, out_ldim);
  for (int ca = 0; ca < g.ncomps(a.degree); ++ca) {
    unsigned I = g.comps[a.degree][ca];
    for (int cb = 0; cb < g.ncomps(b.degree); ++cb) {
      unsigned J = g.comps[b.degree][cb];
      int sign = merge_sign(I, J);
      if (sign == 0) continue;
      int co = g.comp_index[I | J];
      const TA* pa = a.comp(ca);
      const TB* pb = b.comp(cb);
      TO* po = out.comp(co);
      const std::size_t np = g.npts;
      parallel_for(np, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p)
          combine(double(sign), pa + p * a.ldim, pb + p * b.ldim, po + p * out.ldim);
      });
    }
  }
  return out;
}

// scalar ^ scalar (either may carry a Lie index on one side only)
template <class T>
Field<T> wedge(const Field<T>& a, const Field<T>& b) {
  if (a.ldim != 1 && b.ldim != 1)
    throw dimension_error("wedge: both factors Lie-valued; use a contraction");
  int ld = std::max(a.ldim, b.ldim);
  return wedge_with<T, T, T>(a, b, ld, [la = a.ldim, lb = b.ldim, ld](double s, const T* x, const T* y, T* o) {
    for (int l = 0; l < ld; ++l) o[l] += s * x[la == 1 ? 0 : l] * y[lb == 1 ? 0 : l];
  });
}

// <a ^ b>_kappa : both Lie-valued over the same algebra, scalar output
template <class T>
Field<T> wedge_pair(const Field<T>& a, const Field<T>& b, const QuadraticLieAlgebra& alg) {
  if (a.ldim != alg.dim || b.ldim != alg.dim) throw dimension_error("wedge_pair: algebra mismatch");
  return wedge_with<T, T, T>(a, b, 1, [&alg](double s, const T* x, const T* y, T* o) {
    o[0] += s * alg.pair_values(x, y);
  });
}

// [a ^ b] : Lie-valued output via the bracket
template <class T>
Field<T> wedge_bracket(const Field<T>& a, const Field<T>& b, const QuadraticLieAlgebra& alg) {
  if (a.ldim != alg.dim || b.ldim != alg.dim) throw dimension_error("wedge_bracket: algebra mismatch");
  return wedge_with<T, T, T>(a, b, alg.dim, [&alg](double s, const T* x, const T* y, T* o) {
    std::array<T, 4> br{};
    alg.bracket_into_t(x, y, br.data());
    for (int l = 0; l < alg.dim; ++l) o[l] += s * br[l];
  });
}

// d_A = d + [a ^ .] for Lie-valued forms against a flat trivialized background.
template <class T>
Field<T> d_conn(const Field<T>& w, const Field<T>& a, const QuadraticLieAlgebra& alg) {
  Field<T> out = d(w);
  if (!alg.abelian()) out += wedge_bracket(a, w, alg);
  return out;
}

// Interior product with a vector field.
template <class T>
Field<T> interior(const VecField& X, const Field<T>& a) {
  const PeriodicGrid& g = *a.grid;
  if (a.degree == 0) throw dimension_error("interior: degree-0 input");
  Field<T> out(g, a.degree - 1, a.ldim);
  if (g.ncomps(a.degree) == 0) return out;  // empty high-degree form
  for (int co = 0; co < g.ncomps(a.degree - 1); ++co) {
    unsigned J = g.comps[a.degree - 1][co];
    for (int axis = 0; axis < g.dim(); ++axis) {
      unsigned bit = 1u << axis;
      if (J & bit) continue;
      int sign = merge_sign(bit, J);
      int ci = g.comp_index[J | bit];
      const T* pa = a.comp(ci);
      const double* px = X.comp[axis].data();
      T* po = out.comp(co);
      for (std::size_t p = 0; p < g.npts; ++p)
        for (int l = 0; l < a.ldim; ++l) po[p * a.ldim + l] += double(sign) * px[p] * pa[p * a.ldim + l];
    }
  }
  return out;
}

// Lie bracket of vector fields and Cartan's formula.
inline VecField vec_bracket(const VecField& X, const VecField& Y) {
  const PeriodicGrid& g = *X.grid;
  VecField out(g);
  std::vector<double> tmp(g.npts);
  for (int nu = 0; nu < g.dim(); ++nu)
    for (int mu = 0; mu < g.dim(); ++mu) {
      deriv_axis(g, Y.comp[nu].data(), tmp.data(), mu, 1);
      for (std::size_t p = 0; p < g.npts; ++p) out.comp[nu][p] += X.comp[mu][p] * tmp[p];
      deriv_axis(g, X.comp[nu].data(), tmp.data(), mu, 1);
      for (std::size_t p = 0; p < g.npts; ++p) out.comp[nu][p] -= Y.comp[mu][p] * tmp[p];
    }
  return out;
}

template <class T>
Field<T> lie_derivative(const VecField& X, const Field<T>& a) {
  if (a.degree == 0) {
    Field<T> out(*a.grid, 0, a.ldim);
    std::vector<T> tmp(a.grid->npts * std::size_t(a.ldim));
    for (int mu = 0; mu < a.grid->dim(); ++mu) {
      deriv_axis(*a.grid, a.comp(0), tmp.data(), mu, a.ldim);
      for (std::size_t p = 0; p < a.grid->npts; ++p)
        for (int l = 0; l < a.ldim; ++l) out.at(0, p, l) += X.comp[mu][p] * tmp[p * a.ldim + l];
    }
    return out;
  }
  if (a.degree == a.grid->dim()) return d(interior(X, a));
  return interior(X, d(a)) + d(interior(X, a));
}

// ---------------------------------------------------------------------------
// Metric data: pointwise inverse, volume density, positivity guard.
// ---------------------------------------------------------------------------
struct MetricData {
  const PeriodicGrid* grid = nullptr;
  Sym2Field g;
  Sym2Field ginv;
  std::vector<double> sqrt_det;
  double min_eig = 0;

  MetricData() = default;
  explicit MetricData(const Sym2Field& metric, double eig_floor = 1e-10) {
    grid = metric.grid;
    g = metric;
    ginv = Sym2Field(*grid);
    sqrt_det.assign(grid->npts, 0.0);
    min_eig = 1e300;
    if (grid->dim() == 2) {
      // closed-form 2x2 path: this sits inside every flow right-hand side
      const double* a = g.comp(0, 0);
      const double* b = g.comp(0, 1);
      const double* c = g.comp(1, 1);
      double worst = 1e300;
      for (std::size_t p = 0; p < grid->npts; ++p) {
        double tr = a[p] + c[p];
        double det = a[p] * c[p] - b[p] * b[p];
        double disc = std::sqrt(std::max(0.0, tr * tr - 4 * det));
        double lo = 0.5 * (tr - disc);
        worst = std::min(worst, lo);
        if (lo <= eig_floor) throw positivity_error("metric lost positivity");
        sqrt_det[p] = std::sqrt(det);
        double inv = 1.0 / det;
        ginv.at(0, 0, p) = c[p] * inv;
        ginv.at(1, 1, p) = a[p] * inv;
        ginv.at(0, 1, p) = -b[p] * inv;
      }
      min_eig = worst;
      return;
    }
    for (std::size_t p = 0; p < grid->npts; ++p) {
      MatR m = g.point(p);
      auto ev = symmetric_eigenvalues(m);
      min_eig = std::min(min_eig, ev.front());
      if (ev.front() <= eig_floor) throw positivity_error("metric lost positivity");
      double det = m.det();
      sqrt_det[p] = std::sqrt(det);
      ginv.set_point(p, m.inverse());
    }
  }
};

// det of the (I rows, J cols) minor of a symmetric pointwise matrix
inline double minor_det(const Sym2Field& m, unsigned I, unsigned J, std::size_t p) {
  int rows[4], cols[4], k = 0, l = 0;
  for (int a = 0; a < m.grid->dim(); ++a) {
    if (I & (1u << a)) rows[k++] = a;
    if (J & (1u << a)) cols[l++] = a;
  }
  switch (k) {
    case 0:
      return 1.0;
    case 1:
      return m.at(rows[0], cols[0], p);
    case 2:
      return m.at(rows[0], cols[0], p) * m.at(rows[1], cols[1], p) -
             m.at(rows[0], cols[1], p) * m.at(rows[1], cols[0], p);
    case 3: {
      double d = 0;
      for (int c = 0; c < 3; ++c) {
        double sub = m.at(rows[1], cols[(c + 1) % 3], p) * m.at(rows[2], cols[(c + 2) % 3], p) -
                     m.at(rows[1], cols[(c + 2) % 3], p) * m.at(rows[2], cols[(c + 1) % 3], p);
        d += m.at(rows[0], cols[c], p) * sub;
      }
      return d;
    }
    default: {
      MatR sub(k);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) sub(i, j) = m.at(rows[i], cols[j], p);
      return sub.det();
    }
  }
}

// Hodge star with the convention  a ^ *a = (1/k!) |a|^2 dV.
template <class T>
Field<T> hodge_star(const Field<T>& a, const MetricData& md) {
  const PeriodicGrid& g = *a.grid;
  const int k = a.degree;
  Field<T> out(g, g.dim() - k, a.ldim);
  const unsigned full = (1u << g.dim()) - 1;
  const int nc = g.ncomps(k);
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p)
      for (int ci = 0; ci < nc; ++ci) {
        unsigned I = g.comps[k][ci];
        unsigned K = full & ~I;
        int eps = merge_sign(I, K);
        int co = g.comp_index[K];
        for (int cj = 0; cj < nc; ++cj) {
          unsigned J = g.comps[k][cj];
          double raise = minor_det(md.ginv, I, J, p);
          if (raise == 0.0) continue;
          double w = md.sqrt_det[p] * double(eps) * raise;
          for (int l = 0; l < a.ldim; ++l) out.at(co, p, l) += w * a.at(cj, p, l);
        }
      }
  });
  return out;
}

// d* = -*d* on an even-dimensional oriented manifold, any degree.
template <class T>
Field<T> codifferential(const Field<T>& a, const MetricData& md) {
  if (a.degree == 0) throw dimension_error("codifferential: degree-0 input");
  Field<T> s = hodge_star(a, md);
  Field<T> ds = d(s);
  Field<T> out = hodge_star(ds, md);
  out *= -1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Pointwise index contractions taken with g^{-1} (equivalently, in a
// g-orthonormal frame).
// ---------------------------------------------------------------------------

// |a|^2 = full index sum: k! * sum_{I,J incr} a_I det(ginv[I,J]) a_J
template <class T>
Field<T> tensor_norm_sq(const Field<T>& a, const MetricData& md, const QuadraticLieAlgebra* alg = nullptr,
                        double lie_sign = 1.0) {
  const PeriodicGrid& g = *a.grid;
  Field<T> out(g, 0, 1);
  double fact = 1;
  for (int i = 2; i <= a.degree; ++i) fact *= i;
  const int nc = g.ncomps(a.degree);
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      T acc(0);
      for (int ci = 0; ci < nc; ++ci)
        for (int cj = 0; cj < nc; ++cj) {
          double raise = minor_det(md.ginv, g.comps[a.degree][ci], g.comps[a.degree][cj], p);
          if (raise == 0.0) continue;
          T v(0);
          if (alg)
            v = alg->pair_values(&a.at(ci, p, 0), &a.at(cj, p, 0)) * lie_sign;
          else
            v = a.at(ci, p, 0) * a.at(cj, p, 0);
          acc += raise * v;
        }
      out.at(0, p) = fact * acc;
    }
  });
  return out;
}

// |F|^2 with the displayed sign: -sum <F_{i1 i2}, F_{i1 i2}>_kappa
template <class T>
Field<T> f_norm_sq(const Field<T>& F, const MetricData& md, const QuadraticLieAlgebra& alg) {
  return tensor_norm_sq(F, md, &alg, -1.0);
}

// H^2(X,Y) = <i_X H, i_Y H>, full contraction on the remaining slots.
inline Sym2Field sq_contract(const RForm& H, const MetricData& md) {
  const PeriodicGrid& g = *H.grid;
  if (H.degree != 3 || H.ldim != 1) throw dimension_error("sq_contract expects a scalar 3-form");
  Sym2Field out(g);
  const int d2 = g.dim();
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      // expanded components H[mu][a][b], antisymmetrized from increasing storage
      double Hc[4][4][4] = {};
      for (int c = 0; c < g.ncomps(3); ++c) {
        unsigned M = g.comps[3][c];
        int idx[3], t = 0;
        for (int a = 0; a < d2; ++a)
          if (M & (1u << a)) idx[t++] = a;
        double v = H.at(c, p);
        static const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
        static const double sg[6] = {1, 1, 1, -1, -1, -1};
        for (int q = 0; q < 6; ++q)
          Hc[idx[perms[q][0]]][idx[perms[q][1]]][idx[perms[q][2]]] = sg[q] * v;
      }
      for (int mu = 0; mu < d2; ++mu)
        for (int nu = mu; nu < d2; ++nu) {
          double acc = 0;
          for (int a = 0; a < d2; ++a)
            for (int b = 0; b < d2; ++b)
              for (int c2 = 0; c2 < d2; ++c2)
                for (int d3 = 0; d3 < d2; ++d3)
                  acc += Hc[mu][a][b] * Hc[nu][c2][d3] * md.ginv.at(a, c2, p) * md.ginv.at(b, d3, p);
          out.at(mu, nu, p) = acc;
        }
    }
  });
  return out;
}

// F^2(X,Y) = -<i_X F, i_Y F>_kappa
inline Sym2Field fsq_contract(const RForm& F, const MetricData& md, const QuadraticLieAlgebra& alg) {
  const PeriodicGrid& g = *F.grid;
  if (F.degree != 2 || F.ldim != alg.dim) throw dimension_error("fsq_contract expects a Lie 2-form");
  Sym2Field out(g);
  const int d2 = g.dim();
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> Fa(std::size_t(d2 * d2 * alg.dim));
    for (std::size_t p = lo; p < hi; ++p) {
      std::fill(Fa.begin(), Fa.end(), 0.0);
      auto at3 = [&](int i, int j, int l) -> double& { return Fa[std::size_t((i * d2 + j) * alg.dim + l)]; };
      for (int c = 0; c < g.ncomps(2); ++c) {
        unsigned M = g.comps[2][c];
        int idx[2], t = 0;
        for (int a = 0; a < d2; ++a)
          if (M & (1u << a)) idx[t++] = a;
        for (int l = 0; l < alg.dim; ++l) {
          at3(idx[0], idx[1], l) = F.at(c, p, l);
          at3(idx[1], idx[0], l) = -F.at(c, p, l);
        }
      }
      for (int mu = 0; mu < d2; ++mu)
        for (int nu = mu; nu < d2; ++nu) {
          double acc = 0;
          for (int a = 0; a < d2; ++a)
            for (int b = 0; b < d2; ++b) {
              double raise = md.ginv.at(a, b, p);
              if (raise == 0.0) continue;
              acc += raise * alg.pair_values(&at3(mu, a, 0), &at3(nu, b, 0));
            }
          out.at(mu, nu, p) = -acc;
        }
    }
  });
  return out;
}

// F .| H = sum_{i1<i2} F(v_{i1}, v_{i2}) H(v_{i1}, v_{i2}, .)
inline RForm fh_contract(const RForm& F, const RForm& H, const MetricData& md,
                         const QuadraticLieAlgebra& alg) {
  const PeriodicGrid& g = *F.grid;
  if (F.degree != 2 || H.degree != 3) throw dimension_error("fh_contract expects (2-form, 3-form)");
  RForm out(g, 1, alg.dim);
  const int d2 = g.dim();
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      double Hc[4][4][4] = {};
      for (int c = 0; c < g.ncomps(3); ++c) {
        unsigned M = g.comps[3][c];
        int idx[3], t = 0;
        for (int a = 0; a < d2; ++a)
          if (M & (1u << a)) idx[t++] = a;
        double v = H.at(c, p);
        static const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
        static const double sg[6] = {1, 1, 1, -1, -1, -1};
        for (int q = 0; q < 6; ++q)
          Hc[idx[perms[q][0]]][idx[perms[q][1]]][idx[perms[q][2]]] = sg[q] * v;
      }
      double Fc[4][4] = {};
      for (int l = 0; l < alg.dim; ++l) {
        for (int c = 0; c < g.ncomps(2); ++c) {
          unsigned M = g.comps[2][c];
          int idx[2], t = 0;
          for (int a = 0; a < d2; ++a)
            if (M & (1u << a)) idx[t++] = a;
          Fc[idx[0]][idx[1]] = F.at(c, p, l);
          Fc[idx[1]][idx[0]] = -F.at(c, p, l);
        }
        for (int mu = 0; mu < d2; ++mu) {
          double acc = 0;
          for (int a = 0; a < d2; ++a)
            for (int b = 0; b < d2; ++b)
              for (int c2 = 0; c2 < d2; ++c2)
                for (int d3 = 0; d3 < d2; ++d3)
                  acc += 0.5 * Fc[a][b] * Hc[c2][d3][mu] * md.ginv.at(a, c2, p) * md.ginv.at(b, d3, p);
          out.at(mu, p, l) = acc;
        }
      }
    }
  });
  return out;
}

// <F, z>_kappa : 2-form from a Lie 2-form and a Lie 0-form
template <class T>
Field<T> pair_form_section(const Field<T>& F, const Field<T>& z, const QuadraticLieAlgebra& alg) {
  const PeriodicGrid& g = *F.grid;
  Field<T> out(g, F.degree, 1);
  for (int c = 0; c < g.ncomps(F.degree); ++c)
    for (std::size_t p = 0; p < g.npts; ++p)
      out.at(c, p) = alg.pair_values(&F.at(c, p, 0), &z.at(0, p, 0));
  return out;
}

// Raise a 1-form to a vector field.
inline VecField sharp(const RForm& a, const MetricData& md) {
  const PeriodicGrid& g = *a.grid;
  if (a.degree != 1 || a.ldim != 1) throw dimension_error("sharp expects a scalar 1-form");
  VecField out(g);
  for (int mu = 0; mu < g.dim(); ++mu)
    for (int nu = 0; nu < g.dim(); ++nu) {
      const double* src = a.comp(nu);
      for (std::size_t p = 0; p < g.npts; ++p) out.comp[mu][p] += md.ginv.at(mu, nu, p) * src[p];
    }
  return out;
}

inline RForm flat_1form(const VecField& X, const MetricData& md) {
  const PeriodicGrid& g = *X.grid;
  RForm out(g, 1, 1);
  for (int mu = 0; mu < g.dim(); ++mu)
    for (int nu = 0; nu < g.dim(); ++nu)
      for (std::size_t p = 0; p < g.npts; ++p) out.at(mu, p) += md.g.at(mu, nu, p) * X.comp[nu][p];
  return out;
}

// ---------------------------------------------------------------------------
// Conjugate-gradient Poisson solve for the flat Laplacian (periodic grid,
// mean-zero data). Used to manufacture Bianchi-consistent fixtures.
// ---------------------------------------------------------------------------
inline std::vector<double> flat_laplacian(const PeriodicGrid& g, const std::vector<double>& u) {
  std::vector<double> out(g.npts, 0.0), t1(g.npts), t2(g.npts);
  for (int a = 0; a < g.dim(); ++a) {
    deriv_axis(g, u.data(), t1.data(), a, 1);
    deriv_axis(g, t1.data(), t2.data(), a, 1);
    for (std::size_t p = 0; p < g.npts; ++p) out[p] += t2[p];
  }
  return out;
}

inline std::vector<double> poisson_solve(const PeriodicGrid& g, std::vector<double> rhs,
                                         double tol = 1e-13, int max_iter = 20000) {
  double mean = std::accumulate(rhs.begin(), rhs.end(), 0.0) / double(g.npts);
  for (auto& v : rhs) v -= mean;
  std::vector<double> x(g.npts, 0.0), r = rhs, p = rhs, Ap;
  double rr = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
  double rhs_norm = std::sqrt(rr);
  if (rhs_norm == 0) return x;
  for (int it = 0; it < max_iter; ++it) {
    Ap = flat_laplacian(g, p);
    for (auto& v : Ap) v = -v;  // -Laplacian is SPD on mean-zero fields
    double pAp = std::inner_product(p.begin(), p.end(), Ap.begin(), 0.0);
    double alpha = rr / pAp;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    double rr_new = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
    if (std::sqrt(rr_new) < tol * rhs_norm) {
      rr = rr_new;
      break;
    }
    double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
  }
  // solve was for -Lap x = -rhs, i.e. Lap x = rhs
  for (auto& v : x) v = -v;
  double xm = std::accumulate(x.begin(), x.end(), 0.0) / double(g.npts);
  for (auto& v : x) v -= xm;
  return x;
}

}  // namespace strand
