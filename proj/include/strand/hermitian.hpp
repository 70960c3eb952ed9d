#pragma once

#include "strand/complexforms.hpp"
#include "strand/riemann.hpp"

namespace strand {

// J in coordinates: J d_{2j} = d_{2j+1}, J d_{2j+1} = -d_{2j}.
inline int J_image_axis(int axis, double& sign) {
  if (axis % 2 == 0) {
    sign = 1.0;
    return axis + 1;
  }
  sign = -1.0;
  return axis - 1;
}

// Pointwise action of J on 1-forms: (J a)(X) = -a(JX), so J dx_{2j} = dx_{2j+1}.
inline RForm j_act(const RForm& a) {
  const PeriodicGrid& g = *a.grid;
  if (a.degree != 1) throw dimension_error("j_act expects a 1-form");
  RForm out(g, 1, a.ldim);
  for (int mu = 0; mu < g.dim(); ++mu) {
    double s;
    int nu = J_image_axis(mu, s);
    // out_mu (X=d_mu): -a(J d_mu) = -s * a_nu
    const double* src = a.comp(nu);
    double* dst = out.comp(mu);
    for (std::size_t i = 0; i < g.npts * std::size_t(a.ldim); ++i) dst[i] = -s * src[i];
  }
  return out;
}

inline VecField j_act(const VecField& X) {
  const PeriodicGrid& g = *X.grid;
  VecField out(g);
  for (int mu = 0; mu < g.dim(); ++mu) {
    double s;
    int nu = J_image_axis(mu, s);
    for (std::size_t p = 0; p < g.npts; ++p) out.comp[nu][p] += s * X.comp[mu][p];
  }
  return out;
}

inline RForm omega_standard(const PeriodicGrid& g) {
  RForm w(g, 2, 1);
  for (int j = 0; j < g.n; ++j) {
    unsigned mask = (1u << (2 * j)) | (1u << (2 * j + 1));
    std::fill_n(w.comp(g.comp_index[mask]), g.npts, 1.0);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Hermitian data (omega, g, J) with the standard torus volume form
// Omega = dz_1 ^ ... ^ dz_n.
// ---------------------------------------------------------------------------
struct HermitianData {
  const PeriodicGrid* grid = nullptr;
  RForm omega;
  MetricData metric;

  explicit HermitianData(const RForm& w, bool check_type = true) : grid(w.grid), omega(w) {
    if (w.degree != 2 || w.ldim != 1) throw dimension_error("HermitianData expects a real 2-form");
    if (check_type && type_residual(w, 1, 1) > 1e-12)
      throw config_error("omega is not of type (1,1)");
    metric = MetricData(metric_from_omega(w));
  }

  // g(X,Y) = omega(X, JY)
  static Sym2Field metric_from_omega(const RForm& w) {
    const PeriodicGrid& g = *w.grid;
    Sym2Field out(g);
    for (int mu = 0; mu < g.dim(); ++mu)
      for (int nu = mu; nu < g.dim(); ++nu) {
        double s;
        int jn = J_image_axis(nu, s);
        // omega(d_mu, s*d_jn)
        if (mu == jn) continue;
        unsigned m1 = 1u << mu, m2 = 1u << jn;
        int sign = merge_sign(m1, m2);
        const double* src = w.comp(g.comp_index[m1 | m2]);
        double* dst = out.comp(mu, nu);
        for (std::size_t p = 0; p < g.npts; ++p) dst[p] = s * sign * src[p];
      }
    return out;
  }

  // Hermitian matrix field g_{j kbar} = g(d_{z_j}, d_{zbar_k})
  std::vector<CForm> hermitian_matrix() const {
    const PeriodicGrid& g = *grid;
    std::vector<CForm> out(std::size_t(g.n) * g.n, CForm(g, 0, 1));
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k) {
        CForm& f = out[std::size_t(j) * g.n + k];
        for (std::size_t p = 0; p < g.npts; ++p) {
          double re = 0.25 * (metric.g.at(2 * j, 2 * k, p) + metric.g.at(2 * j + 1, 2 * k + 1, p));
          double im = 0.25 * (metric.g.at(2 * j, 2 * k + 1, p) - metric.g.at(2 * j + 1, 2 * k, p));
          f.at(0, p) = cplx(re, im);
        }
      }
    return out;
  }

  RForm log_det_hermitian() const {
    const PeriodicGrid& g = *grid;
    auto h = hermitian_matrix();
    RForm out(g, 0, 1);
    for (std::size_t p = 0; p < g.npts; ++p) {
      MatC m(g.n);
      for (int j = 0; j < g.n; ++j)
        for (int k = 0; k < g.n; ++k) m(j, k) = h[std::size_t(j) * g.n + k].at(0, p);
      cplx det = m.det();
      if (det.real() <= 0) throw positivity_error("hermitian determinant not positive");
      out.at(0, p) = std::log(det.real());
    }
    return out;
  }
};

// Lambda_omega F via the defining identity Lambda F omega^n = n F ^ omega^{n-1}.
template <class T>
Field<T> lambda_trace(const RForm& omega, const Field<T>& F) {
  const PeriodicGrid& g = *omega.grid;
  if (F.degree != 2) throw dimension_error("lambda_trace expects a 2-form");
  RForm omega_n = omega;
  for (int k = 1; k < g.n; ++k) omega_n = wedge(omega_n, omega);
  // omega^n has a single top component
  Field<T> out(g, 0, F.ldim);
  Field<T> num = [&] {
    if (g.n == 1) return F;
    if constexpr (std::is_same_v<T, double>)
      return wedge(F, omega);
    else
      return wedge(F, complexify(omega));
  }();
  const double nn = double(g.n);
  for (std::size_t p = 0; p < g.npts; ++p) {
    double den = omega_n.at(0, p);
    if (std::abs(den) < 1e-300) throw positivity_error("omega is degenerate");
    for (int l = 0; l < F.ldim; ++l) out.at(0, p, l) = nn * num.at(0, p, l) / den;
  }
  return out;
}

// Pointwise positive scalar ||Omega||_omega from
//   ||Omega||^2 omega^n / n! = (-1)^{n(n-1)/2} i^n Omega ^ conj(Omega).
inline RForm volume_norm(const HermitianData& hd) {
  const PeriodicGrid& g = *hd.grid;
  RForm omega_n = hd.omega;
  double fact = 1;
  for (int k = 1; k < g.n; ++k) {
    omega_n = wedge(omega_n, hd.omega);
    fact *= (k + 1);
  }
  const double rhs = std::pow(2.0, g.n);  // coordinate coefficient of (-1)^... i^n Omega ^ Omegabar
  RForm out(g, 0, 1);
  for (std::size_t p = 0; p < g.npts; ++p) {
    double density = omega_n.at(0, p) / fact;
    if (density <= 0) throw positivity_error("omega^n is not positive");
    out.at(0, p) = std::sqrt(rhs / density);
  }
  return out;
}

// Lee form theta(X) = (1/2) sum_i domega(v_i, J v_i, X).
inline RForm lee_form(const HermitianData& hd) {
  const PeriodicGrid& g = *hd.grid;
  RForm out(g, 1, 1);
  if (g.n == 1) return out;  // domega is a 3-form on a surface: vanishes
  RForm dw = d(hd.omega);
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      double Hc[4][4][4] = {};
      for (int c = 0; c < g.ncomps(3); ++c) {
        unsigned M = g.comps[3][c];
        int idx[3], t = 0;
        for (int a = 0; a < g.dim(); ++a)
          if (M & (1u << a)) idx[t++] = a;
        double v = dw.at(c, p);
        static const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
        static const double sg[6] = {1, 1, 1, -1, -1, -1};
        for (int q = 0; q < 6; ++q)
          Hc[idx[perms[q][0]]][idx[perms[q][1]]][idx[perms[q][2]]] = sg[q] * v;
      }
      for (int mu = 0; mu < g.dim(); ++mu) {
        double acc = 0;
        for (int al = 0; al < g.dim(); ++al)
          for (int be = 0; be < g.dim(); ++be) {
            // sum_i v_i^al (J v_i)^be = J^be_ga g^{ga al}
            double s;
            int jb = J_image_axis(be % 2 == 0 ? be : be, s);
            (void)jb;
            double k = 0;
            for (int ga = 0; ga < g.dim(); ++ga) {
              double sj;
              int img = J_image_axis(ga, sj);
              if (img == be) k += sj * hd.metric.ginv.at(ga, al, p);
            }
            if (k != 0.0) acc += 0.5 * Hc[al][be][mu] * k;
          }
        out.at(mu, p) = acc;
      }
    }
  });
  return out;
}

// Chern torsion, lowered: T_c(Z; X, Y) = g(T(X,Y), Z) = -domega(JX, Y, Z);
// stored as T[z_axis][xy increasing pair], antisymmetric in the last two slots.
struct TorsionField {
  const PeriodicGrid* grid = nullptr;
  std::vector<RForm> rows;  // rows[z] is a 2-form in (X,Y)

  double sup_norm() const {
    double m = 0;
    for (auto& r : rows) m = std::max(m, r.sup_norm());
    return m;
  }
};

inline TorsionField chern_torsion(const HermitianData& hd) {
  const PeriodicGrid& g = *hd.grid;
  TorsionField T;
  T.grid = &g;
  T.rows.assign(g.dim(), RForm(g, 2, 1));
  if (g.n == 1) return T;  // Kahler surface: T = 0
  RForm dw = d(hd.omega);
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      double Hc[4][4][4] = {};
      for (int c = 0; c < g.ncomps(3); ++c) {
        unsigned M = g.comps[3][c];
        int idx[3], t = 0;
        for (int a = 0; a < g.dim(); ++a)
          if (M & (1u << a)) idx[t++] = a;
        double v = dw.at(c, p);
        static const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
        static const double sg[6] = {1, 1, 1, -1, -1, -1};
        for (int q = 0; q < 6; ++q)
          Hc[idx[perms[q][0]]][idx[perms[q][1]]][idx[perms[q][2]]] = sg[q] * v;
      }
      for (int z = 0; z < g.dim(); ++z)
        for (int c = 0; c < g.ncomps(2); ++c) {
          unsigned M = g.comps[2][c];
          int xy[2], t = 0;
          for (int a = 0; a < g.dim(); ++a)
            if (M & (1u << a)) xy[t++] = a;
          double s;
          int jx = J_image_axis(xy[0], s);
          // -domega(J X, Y, Z)
          T.rows[z].at(c, p) = -s * Hc[jx][xy[1]][z];
        }
    }
  });
  return T;
}

// Bismut Ricci form rho_B = -d(d* omega - d^c log ||Omega||_omega).
inline RForm bismut_ricci(const HermitianData& hd) {
  RForm dstar_w = codifferential(hd.omega, hd.metric);
  RForm logn(*hd.grid, 0, 1);
  RForm vn = volume_norm(hd);
  for (std::size_t p = 0; p < hd.grid->npts; ++p) logn.at(0, p) = std::log(vn.at(0, p));
  RForm inner = dstar_w - dc(logn);
  RForm out = d(inner);
  out *= -1.0;
  return out;
}

// Chern-Ricci oracle: -i del dbar log det(g_{j kbar}) = -(1/2) d d^c log det.
inline RForm chern_ricci_oracle(const HermitianData& hd) {
  RForm ld = hd.log_det_hermitian();
  RForm out = d(dc(ld));
  out *= -0.5;
  return out;
}

// ---------------------------------------------------------------------------
// Reductions of the (trivial) holomorphic principal bundle: Hermitian metrics
// in vector-bundle notation. Abelian factors are stored as log-scales u_j
// (h_j = e^{u_j}); su(2) as a positive Hermitian 2x2 matrix field.
// ---------------------------------------------------------------------------
struct Reduction {
  const QuadraticLieAlgebra* alg = nullptr;
  const PeriodicGrid* grid = nullptr;
  bool abelian = true;
  std::vector<std::vector<double>> u;  // abelian: m scalar fields
  std::vector<MatC> h2;                // su(2): one 2x2 matrix per point

  static Reduction identity(const PeriodicGrid& g, const QuadraticLieAlgebra& a) {
    Reduction r;
    r.alg = &a;
    r.grid = &g;
    r.abelian = a.abelian();
    if (r.abelian)
      r.u.assign(a.dim, std::vector<double>(g.npts, 0.0));
    else
      r.h2.assign(g.npts, MatC::identity(2));
    return r;
  }

  double min_eigenvalue() const {
    if (abelian) return 1.0;  // e^u is positive by construction
    double m = 1e300;
    for (const auto& h : h2) m = std::min(m, hermitian_eigenvalues(h).front());
    return m;
  }

  void check_positive() const {
    if (min_eigenvalue() <= 1e-10) throw positivity_error("reduction lost positivity");
  }
};

// su(2) basis shat_j = -(i/2) sigma_j; [shat_1, shat_2] = shat_3 cyclic.
inline std::array<MatC, 3> su2_basis() {
  const cplx I(0, 1);
  MatC s1(2), s2(2), s3(2);
  s1(0, 1) = -0.5 * I;
  s1(1, 0) = -0.5 * I;
  s2(0, 1) = -0.5;
  s2(1, 0) = 0.5;
  s3(0, 0) = -0.5 * I;
  s3(1, 1) = 0.5 * I;
  return {s1, s2, s3};
}

// coefficients of a (complexified) su(2) matrix on the shat basis
inline std::array<cplx, 3> su2_coeffs(const MatC& m) {
  auto basis = su2_basis();
  std::array<cplx, 3> c{};
  for (int j = 0; j < 3; ++j) c[j] = -2.0 * (m * basis[j]).trace();
  return c;
}

// Chern curvature F_h = dbar(h^{-1} del h) of a reduction, on the Lie basis,
// as a complex 2-form of type (1,1) up to discretization error.
inline CForm chern_connection_curvature(const Reduction& h) {
  const PeriodicGrid& g = *h.grid;
  const int m = h.alg->dim;
  CForm out(g, 2, m);
  if (h.abelian) {
    for (int j = 0; j < m; ++j) {
      RForm uj(g, 0, 1);
      std::copy(h.u[j].begin(), h.u[j].end(), uj.comp(0));
      CpqForm z = to_complex(uj);
      CForm fj = to_real_basis(dbar(del(z)));
      for (int c = 0; c < g.ncomps(2); ++c)
        for (std::size_t p = 0; p < g.npts; ++p) out.at(c, p, j) = fj.at(c, p);
    }
    return out;
  }
  h.check_positive();
  // matrix field route: A = h^{-1} del h entrywise, F = dbar A
  CForm hmat(g, 0, 4);
  for (std::size_t p = 0; p < g.npts; ++p)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) hmat.at(0, p, 2 * r + c) = h.h2[p](r, c);
  CpqForm hz = to_complex(hmat);
  CpqForm dh = del(hz);  // (1,0), 4 entries
  CpqForm A(g, 1, 4);
  for (std::size_t c = 0; c < A.keys.size(); ++c) {
    if (mask_degree(A.keys[c].first) != 1) continue;
    std::size_t src = c;
    for (std::size_t p = 0; p < g.npts; ++p) {
      MatC hp = h.h2[p];
      MatC dhp(2);
      for (int r = 0; r < 2; ++r)
        for (int cc = 0; cc < 2; ++cc) dhp(r, cc) = dh.comp[src][p * 4 + 2 * r + cc];
      MatC a = hp.inverse() * dhp;
      for (int r = 0; r < 2; ++r)
        for (int cc = 0; cc < 2; ++cc) A.comp[c][p * 4 + 2 * r + cc] = a(r, cc);
    }
  }
  CpqForm F = dbar(A);
  CForm Freal = to_real_basis(F);
  for (int c = 0; c < g.ncomps(2); ++c)
    for (std::size_t p = 0; p < g.npts; ++p) {
      MatC f(2);
      for (int r = 0; r < 2; ++r)
        for (int cc = 0; cc < 2; ++cc) f(r, cc) = Freal.at(c, p, 2 * r + cc);
      auto coef = su2_coeffs(f);
      for (int j = 0; j < 3; ++j) out.at(c, p, j) = coef[j];
    }
  return out;
}

// S^h_g = i Lambda_omega F_h; real-valued on the compact Lie basis.
inline RForm second_ricci(const HermitianData& hd, const Reduction& h) {
  CForm F = chern_connection_curvature(h);
  CForm lam = lambda_trace(hd.omega, F);
  RForm out(*hd.grid, 0, h.alg->dim);
  for (std::size_t p = 0; p < hd.grid->npts; ++p)
    for (int l = 0; l < h.alg->dim; ++l) out.at(0, p, l) = (cplx(0, 1) * lam.at(0, p, l)).real();
  return out;
}

}  // namespace strand
