#pragma once

#include "strand/algebroid.hpp"

namespace strand {

// omega^n/n! top coefficient as a scalar field (the volume density)
inline RForm volume_density(const RForm& omega) {
  const PeriodicGrid& g = *omega.grid;
  RForm top = omega;
  double fact = 1;
  for (int k = 1; k < g.n; ++k) {
    top = wedge(top, omega);
    fact *= k + 1;
  }
  RForm out(g, 0, 1);
  for (std::size_t p = 0; p < g.npts; ++p) out.at(0, p) = top.at(0, p) / fact;
  return out;
}

// M(omega) = int ||Omega||_omega omega^n / n!
inline double dilaton_functional(const HermitianData& hd) {
  const PeriodicGrid& g = *hd.grid;
  RForm vn = volume_norm(hd);
  RForm dens = volume_density(hd.omega);
  double acc = 0;
  for (std::size_t p = 0; p < g.npts; ++p) acc += vn.at(0, p) * dens.at(0, p);
  return acc * g.cell_volume();
}

// dM/dt along the one-form reduction:
//   (1/2) int ||Omega|| |theta + d log||Omega|| |^2 dV
// - (1/2) int <Lambda F, Lambda F> ||Omega|| dV,
// with the second term written through S = i Lambda F (real):
// <Lambda F, Lambda F>_kappa = <S, S>_kappa for the unitary-gauge real object.
inline double dilaton_derivative_formula(const HermitianData& hd, const Reduction& h) {
  const PeriodicGrid& g = *hd.grid;
  RForm vn = volume_norm(hd);
  RForm dens = volume_density(hd.omega);
  RForm logn(g, 0, 1);
  for (std::size_t p = 0; p < g.npts; ++p) logn.at(0, p) = std::log(vn.at(0, p));
  RForm oneform = lee_form(hd) + d(logn);
  RForm n2 = tensor_norm_sq(oneform, hd.metric);
  RForm S = second_ricci(hd, h);
  double acc = 0;
  for (std::size_t p = 0; p < g.npts; ++p) {
    double s2 = h.alg->pair_values(&S.at(0, p, 0), &S.at(0, p, 0));
    acc += (0.5 * n2.at(0, p) - 0.5 * s2) * vn.at(0, p) * dens.at(0, p);
  }
  return acc * g.cell_volume();
}

// Gauss-Legendre nodes/weights on [0,1] by Newton iteration on P_n.
inline void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1);
    nodes[n - 1 - i] = 0.5 * (x + 1);
    weights[n - 1 - i] = 1.0 / ((1 - x * x) * dp * dp);
  }
}

// interpolate the exponential geodesic between reductions
inline Reduction reduction_geodesic(const Reduction& h0, const Reduction& h1, double t) {
  Reduction out = h0;
  if (h0.abelian) {
    for (std::size_t l = 0; l < h0.u.size(); ++l)
      for (std::size_t p = 0; p < h0.grid->npts; ++p)
        out.u[l][p] = (1 - t) * h0.u[l][p] + t * h1.u[l][p];
    return out;
  }
  for (std::size_t p = 0; p < h0.grid->npts; ++p) {
    MatC step = hermitian_log(h0.h2[p].inverse() * h1.h2[p]);
    out.h2[p] = h0.h2[p] * hermitian_exp(step * cplx(t, 0));
  }
  return out;
}

// velocity h_t^{-1} hdot_t of the geodesic, on the Lie basis (complexified)
inline CForm reduction_geodesic_velocity(const Reduction& h0, const Reduction& h1, double t) {
  const PeriodicGrid& g = *h0.grid;
  CForm out(g, 0, h0.alg->dim);
  if (h0.abelian) {
    for (int l = 0; l < h0.alg->dim; ++l)
      for (std::size_t p = 0; p < g.npts; ++p) out.at(0, p, l) = h1.u[l][p] - h0.u[l][p];
    return out;
  }
  for (std::size_t p = 0; p < g.npts; ++p) {
    MatC w = hermitian_log(h0.h2[p].inverse() * h1.h2[p]);
    // h^{-1} hdot = e^{-tw} w e^{tw} = w for the commuting geodesic family
    auto coef = su2_coeffs(w);
    for (int l = 0; l < 3; ++l) out.at(0, p, l) = coef[l];
  }
  (void)t;
  return out;
}

// Bott-Chern secondary form R~(h1, h0) = i int_0^1 <h^{-1} hdot, F_{h_t}> dt.
// The representative is real in the continuum; the imaginary defect (pure
// discretization for nonabelian paths) is reported through the out-parameter.
inline RForm bott_chern(const Reduction& h1, const Reduction& h0, int path_steps,
                        double* imag_defect = nullptr) {
  const PeriodicGrid& g = *h0.grid;
  std::vector<double> nodes, weights;
  gauss_legendre_01(path_steps, nodes, weights);
  CForm acc(g, 2, 1);
  for (int q = 0; q < path_steps; ++q) {
    Reduction ht = reduction_geodesic(h0, h1, nodes[q]);
    CForm F = chern_connection_curvature(ht);
    CForm vel = reduction_geodesic_velocity(h0, h1, nodes[q]);
    for (int c = 0; c < g.ncomps(2); ++c)
      for (std::size_t p = 0; p < g.npts; ++p)
        acc.at(c, p) -= weights[q] * h0.alg->pair_values(&vel.at(0, p, 0), &F.at(c, p, 0));
  }
  // i int <h^{-1} hdot, F_{h_t}> with the hol-gauge C-bilinear pairing
  for (auto& v : acc.data) v *= cplx(0, 1);
  if (imag_defect) *imag_defect = imag_part(acc).sup_norm();
  return real_part(acc);
}

// L2 Aeppli-potential pairing (Lemma-style):
//   (1/2) int <xidot, conj(xidot)>_g ||Omega|| dV
// - (1/4) int <h^{-1}hdot, conj^h(h^{-1}hdot)>_kappa ||Omega|| dV
inline cplx aeppli_pairing(const CpqForm& xidot, const CForm& hdot_lie, const HermitianData& hd,
                           const Reduction& h) {
  const PeriodicGrid& g = *hd.grid;
  auto gh = hd.hermitian_matrix();
  RForm vn = volume_norm(hd);
  RForm dens = volume_density(hd.omega);
  cplx acc(0, 0);
  const QuadraticLieAlgebra& alg = *h.alg;
  for (std::size_t p = 0; p < g.npts; ++p) {
    MatC G(g.n);
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k) G(j, k) = gh[std::size_t(j) * g.n + k].at(0, p);
    MatC Gi = G.inverse();
    cplx xi2(0, 0);
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k) {
        int cj = xidot.find(1u << j, 0u), ck = xidot.find(1u << k, 0u);
        xi2 += xidot.comp[cj][p] * std::conj(xidot.comp[ck][p]) * Gi(k, j);
      }
    // abelian conj^h is plain conjugation on coefficients
    cplx h2c(0, 0);
    for (int l1 = 0; l1 < alg.dim; ++l1)
      for (int l2 = 0; l2 < alg.dim; ++l2)
        h2c += alg.kappa(l1, l2) * hdot_lie.at(0, p, l1) * std::conj(hdot_lie.at(0, p, l2));
    acc += (0.5 * xi2 - 0.25 * h2c) * vn.at(0, p) * dens.at(0, p);
  }
  return acc * g.cell_volume();
}

// F(g,b,A,f) = int (R - (1/12)|H|^2 - (1/2)|F|^2 + |grad f|^2) e^{-f} dV_g
inline double f_functional(const GeneralizedMetricState& st, const RForm& f) {
  const PeriodicGrid& g = *st.grid;
  MetricData md(st.g);
  RiemannData rd(md);
  RForm H = st.three_form();
  RForm F = st.connection().curvature();
  RForm V = rd.scalar_curvature(rd.ricci());
  if (g.dim() >= 3) V.axpy(-1.0 / 12.0, tensor_norm_sq(H, md));
  V.axpy(-0.5, f_norm_sq(F, md, *st.alg));
  RForm df = d(f);
  V += tensor_norm_sq(df, md);
  double acc = 0;
  for (std::size_t p = 0; p < g.npts; ++p)
    acc += V.at(0, p) * std::exp(-f.at(0, p)) * md.sqrt_det[p];
  return acc * g.cell_volume();
}

// minimum eigenvalue of -4 Lap + R - (1/12)|H|^2 - (1/2)|F|^2 + (1/6)|[.,.]|^2
// by inverse power iteration; returns (lambda, positive normalized ground
// state u with int u^2 dV = 1). f is recovered as -2 log u.
struct LambdaResult {
  double lambda;
  RForm ground_state;
};

inline LambdaResult lambda_eigen(const GeneralizedMetricState& st,
                                 const std::vector<double>& g_K_weights = {}, int max_iter = 200) {
  const PeriodicGrid& g = *st.grid;
  MetricData md(st.g);
  RiemannData rd(md);
  RForm H = st.three_form();
  RForm F = st.connection().curvature();
  RForm V = rd.scalar_curvature(rd.ricci());
  if (g.dim() >= 3) V.axpy(-1.0 / 12.0, tensor_norm_sq(H, md));
  V.axpy(-0.5, f_norm_sq(F, md, *st.alg));
  if (!g_K_weights.empty()) {
    double cart = st.alg->cartan_norm_sq(g_K_weights);
    for (std::size_t p = 0; p < g.npts; ++p) V.at(0, p) += cart / 6.0;
  } else if (!st.alg->abelian()) {
    throw config_error("lambda_eigen: nonabelian algebra needs g_K weights");
  }

  double vmin = V.data[0], vmax = V.data[0];
  for (double v : V.data) {
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  const double shift = vmin - 1.0;

  auto apply = [&](const RForm& u) {
    RForm out = laplace_beltrami(u, md) * -4.0;
    for (std::size_t p = 0; p < g.npts; ++p) out.at(0, p) += (V.at(0, p) - shift) * u.at(0, p);
    return out;
  };
  auto dot = [&](const RForm& a, const RForm& b) {
    double s = 0;
    for (std::size_t p = 0; p < g.npts; ++p) s += a.at(0, p) * b.at(0, p) * md.sqrt_det[p];
    return s * g.cell_volume();
  };
  // weighted CG solve of (L - shift) x = b
  auto solve = [&](const RForm& b) {
    RForm x(g, 0, 1), r = b, pdir = b, Ap(g, 0, 1);
    double rr = dot(r, r);
    double b_norm = std::sqrt(rr);
    for (int it = 0; it < 10000; ++it) {
      Ap = apply(pdir);
      double alpha = rr / dot(pdir, Ap);
      x.axpy(alpha, pdir);
      r.axpy(-alpha, Ap);
      double rr_new = dot(r, r);
      if (std::sqrt(rr_new) < 1e-12 * b_norm) break;
      double beta = rr_new / rr;
      rr = rr_new;
      pdir *= beta;
      pdir += r;
    }
    return x;
  };

  RForm u(g, 0, 1);
  for (std::size_t p = 0; p < g.npts; ++p) u.at(0, p) = 1.0;
  u *= 1.0 / std::sqrt(dot(u, u));
  double lambda_prev = 1e300;
  for (int it = 0; it < max_iter; ++it) {
    RForm w = solve(u);
    double nw = std::sqrt(dot(w, w));
    w *= 1.0 / nw;
    RForm Lw = apply(w);
    double lambda = dot(Lw, w) + shift;
    u = w;
    if (std::abs(lambda - lambda_prev) < 1e-10 * (1 + std::abs(lambda))) {
      // ground state is signed-definite; normalize positive
      double s = 0;
      for (std::size_t p = 0; p < g.npts; ++p) s += u.at(0, p);
      if (s < 0) u *= -1.0;
      for (std::size_t p = 0; p < g.npts; ++p)
        if (u.at(0, p) <= 0) throw convergence_error("lambda_eigen: ground state not positive");
      return {lambda, u};
    }
    lambda_prev = lambda;
  }
  throw convergence_error("lambda_eigen: power iteration did not converge");
}

// sup norms of the three steady gradient-soliton equations
struct SolitonResidual {
  double metric, three_form, gauge;
};

inline SolitonResidual soliton_residual(const GeneralizedMetricState& st, const RForm& f) {
  const PeriodicGrid& g = *st.grid;
  MetricData md(st.g);
  RiemannData rd(md);
  RForm H = st.three_form();
  RForm F = st.connection().curvature();
  VecField gradf = sharp(d(f), md);

  Sym2Field e1 = rd.ricci();
  if (g.dim() >= 3) e1.axpy(-0.25, sq_contract(H, md));
  e1.axpy(-1.0, fsq_contract(F, md, *st.alg));
  e1.axpy(0.5, lie_derivative_metric(gradf, md));

  RForm e2(g, 2, 1);
  if (g.dim() >= 3) {
    e2 = codifferential(H, md);
    e2 += interior(gradf, H);
  }

  RForm e3 = ym_codifferential(F, st.a, md, *st.alg);
  if (g.dim() >= 3) e3.axpy(-1.0, fh_contract(F, H, md, *st.alg));
  e3 += interior(gradf, F);

  return {e1.sup_norm(), e2.sup_norm(), e3.sup_norm()};
}

// sup norms of the four coupled-instanton equations, abelian reductions,
// real (unitary) description with F = -i dbar del u per factor.
struct InstantonResidual {
  double r_minus, grad_plus_F, ad_F, bianchi;
};

inline InstantonResidual instanton_residual(const HermitianData& hd, const Reduction& h) {
  const PeriodicGrid& g = *hd.grid;
  const QuadraticLieAlgebra& alg = *h.alg;
  if (!h.abelian) throw config_error("instanton_residual implemented for abelian reductions");
  const int dd = g.dim();
  MetricData md = hd.metric;
  RiemannData rd(md);

  // real curvature components F = -i dbar del u per factor
  CForm Fc = chern_connection_curvature(h);
  RForm F(g, 2, alg.dim);
  for (int c = 0; c < g.ncomps(2); ++c)
    for (std::size_t p = 0; p < g.npts; ++p)
      for (int l = 0; l < alg.dim; ++l) F.at(c, p, l) = (cplx(0, -1) * Fc.at(c, p, l)).real();

  RForm H = (g.dim() >= 3) ? dc(hd.omega) * -1.0 : RForm(g, 3, 1);

  // expanded H with indices
  auto hcomp = [&](std::size_t p, int a, int b, int c) -> double {
    if (g.dim() < 3) return 0.0;
    unsigned m = (1u << a) | (1u << b) | (1u << c);
    if (mask_degree(m) != 3) return 0.0;
    int idx[3], t = 0;
    for (int ax = 0; ax < dd; ++ax)
      if (m & (1u << ax)) idx[t++] = ax;
    double v = H.at(g.comp_index[m], p);
    // permutation sign of (a,b,c) against sorted idx
    int perm[3] = {a, b, c};
    int sgn = 1;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        if (perm[i] > perm[j]) sgn = -sgn;
    (void)idx;
    return sgn * v;
  };

  // (1) grad^{+,h} F = 0 : LC + (1/2) g^{-1} H torsion on form indices
  double res1 = 0;
  {
    const int nc = g.ncomps(2);
    std::vector<std::vector<double>> dFa(std::size_t(dd) * nc, std::vector<double>(g.npts * alg.dim));
    for (int a = 0; a < dd; ++a)
      for (int c = 0; c < nc; ++c) deriv_axis(g, F.comp(c), dFa[std::size_t(a) * nc + c].data(), a, alg.dim);
    for (std::size_t p = 0; p < g.npts; ++p) {
      // expand F indices
      double Fx[4][4][4] = {};  // [l][a][b]
      for (int c = 0; c < nc; ++c) {
        unsigned M = g.comps[2][c];
        int idx[2], t = 0;
        for (int ax = 0; ax < dd; ++ax)
          if (M & (1u << ax)) idx[t++] = ax;
        for (int l = 0; l < alg.dim; ++l) {
          Fx[l][idx[0]][idx[1]] = F.at(c, p, l);
          Fx[l][idx[1]][idx[0]] = -F.at(c, p, l);
        }
      }
      for (int l = 0; l < alg.dim; ++l)
        for (int mu = 0; mu < dd; ++mu)
          for (int a = 0; a < dd; ++a)
            for (int b = a + 1; b < dd; ++b) {
              unsigned m = (1u << a) | (1u << b);
              int c = g.comp_index[m];
              double acc = dFa[std::size_t(mu) * nc + c][p * alg.dim + l];
              for (int nu = 0; nu < dd; ++nu) {
                double ha = 0, hb = 0;
                for (int rho = 0; rho < dd; ++rho) {
                  ha += md.ginv.at(nu, rho, p) * hcomp(p, mu, a, rho);
                  hb += md.ginv.at(nu, rho, p) * hcomp(p, mu, b, rho);
                }
                double gam_a = rd.gamma[rd.idx(nu, mu, a)][p] + 0.5 * ha;
                double gam_b = rd.gamma[rd.idx(nu, mu, b)][p] + 0.5 * hb;
                acc -= gam_a * Fx[l][nu][b] + gam_b * Fx[l][a][nu];
              }
              res1 = std::max(res1, std::abs(acc));
            }
    }
  }

  // (2) R_{nabla^-} - Fdag ^ F and (3) [F_h, .] - F ^ Fdag
  double res2 = 0, res3 = 0;
  {
    // Gamma^- = Gamma - (1/2) g^{-1} H
    const int nc = dd * dd * dd;
    std::vector<std::vector<double>> gm(nc, std::vector<double>(g.npts));
    for (int i = 0; i < dd; ++i)
      for (int j = 0; j < dd; ++j)
        for (int k = 0; k < dd; ++k)
          for (std::size_t p = 0; p < g.npts; ++p) {
            double tor = 0;
            for (int rho = 0; rho < dd; ++rho) tor += md.ginv.at(i, rho, p) * hcomp(p, j, k, rho);
            gm[rd.idx(i, j, k)][p] = rd.gamma[rd.idx(i, j, k)][p] - 0.5 * tor;
          }
    // curvature R^i_{j mu nu} = d_mu G^i_{nu j} - d_nu G^i_{mu j} + G_mu G_nu - G_nu G_mu
    std::vector<std::vector<double>> dgm(std::size_t(nc) * dd, std::vector<double>(g.npts));
    for (int e = 0; e < nc; ++e)
      for (int a = 0; a < dd; ++a) deriv_axis(g, gm[e].data(), dgm[std::size_t(e) * dd + a].data(), a, 1);
    for (std::size_t p = 0; p < g.npts; ++p) {
      double Fx[4][4][4] = {};
      for (int c = 0; c < g.ncomps(2); ++c) {
        unsigned M = g.comps[2][c];
        int idx[2], t = 0;
        for (int ax = 0; ax < dd; ++ax)
          if (M & (1u << ax)) idx[t++] = ax;
        for (int l = 0; l < alg.dim; ++l) {
          Fx[l][idx[0]][idx[1]] = F.at(c, p, l);
          Fx[l][idx[1]][idx[0]] = -F.at(c, p, l);
        }
      }
      for (int mu = 0; mu < dd; ++mu)
        for (int nu = mu + 1; nu < dd; ++nu) {
          // (2): for each (i,j)
          for (int i = 0; i < dd; ++i)
            for (int j = 0; j < dd; ++j) {
              double R = dgm[std::size_t(rd.idx(i, nu, j)) * dd + mu][p] -
                         dgm[std::size_t(rd.idx(i, mu, j)) * dd + nu][p];
              for (int q = 0; q < dd; ++q)
                R += gm[rd.idx(i, mu, q)][p] * gm[rd.idx(q, nu, j)][p] -
                     gm[rd.idx(i, nu, q)][p] * gm[rd.idx(q, mu, j)][p];
              // Fdag^F (X=mu, Y=nu) acting on Z=j, output vector index i:
              // g^{-1}<i_Y F, F(X, Z)> - g^{-1}<i_X F, F(Y, Z)>
              double fdf = 0;
              for (int q = 0; q < dd; ++q) {
                double inner_y = 0, inner_x = 0;
                for (int l1 = 0; l1 < alg.dim; ++l1)
                  for (int l2 = 0; l2 < alg.dim; ++l2) {
                    inner_y += alg.kappa(l1, l2) * Fx[l1][nu][q] * Fx[l2][mu][j];
                    inner_x += alg.kappa(l1, l2) * Fx[l1][mu][q] * Fx[l2][nu][j];
                  }
                fdf += md.ginv.at(i, q, p) * (inner_y - inner_x);
              }
              res2 = std::max(res2, std::abs(R - fdf));
            }
          // (3): abelian [F,.] = 0; residual is F ^ Fdag acting on each basis r
          //   i_Y i_X (F ^ Fdag)(r) = F(Y, g^{-1}<i_X F, r>) - F(X, g^{-1}<i_Y F, r>)
          for (int l = 0; l < alg.dim; ++l)
            for (int lf = 0; lf < alg.dim; ++lf) {
              double ffd = 0;
              for (int q = 0; q < dd; ++q)
                for (int q2 = 0; q2 < dd; ++q2) {
                  double ix = 0, iy = 0;  // <i_X F, r>_q2 and <i_Y F, r>_q2
                  for (int l2 = 0; l2 < alg.dim; ++l2) {
                    ix += alg.kappa(l2, l) * Fx[l2][mu][q2];
                    iy += alg.kappa(l2, l) * Fx[l2][nu][q2];
                  }
                  ffd += md.ginv.at(q, q2, p) * (Fx[lf][nu][q] * ix - Fx[lf][mu][q] * iy);
                }
              res3 = std::max(res3, std::abs(ffd));
            }
        }
    }
  }

  // (4) Bianchi dd^c omega + <F_h ^ F_h>
  double res4 = 0;
  if (g.dim() >= 4) {
    RForm bi = d(dc(hd.omega));
    bi += wedge_pair(F, F, alg);
    res4 = bi.sup_norm();
  }
  return {res2, res1, res3, res4};
}

}  // namespace strand
