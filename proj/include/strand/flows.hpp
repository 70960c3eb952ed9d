#pragma once

#include "strand/functionals.hpp"

namespace strand {

enum class FlowKind {
  grf,
  grf_gauge_fixed,
  pcf_unitary,
  pcf_holomorphic,
  hym_G,
  dilaton_coupled,
  oneform_reduced,
};

struct FlowSpec {
  FlowKind kind = FlowKind::grf;
  double dt = 1e-3;
  double t_end = 0.1;
  double cfl_safety = 0.8;
  int monitor_stride = 10;

  void validate() const {
    if (!(dt > 0) || !(t_end > 0)) throw config_error("flow spec needs dt > 0 and t_end > 0");
    if (!(cfl_safety > 0) || cfl_safety > 1) throw config_error("cfl_safety must lie in (0,1]");
    if (monitor_stride < 1) throw config_error("monitor_stride must be positive");
  }
};

struct MonitorRecord {
  double t = 0;
  double bianchi_residual = 0;
  double min_eig_g = 0;
  double dilaton_value = std::nan("");
  double scalar_min = std::nan("");
  double sup_F = 0;
  std::array<double, 3> phi{std::nan(""), std::nan(""), std::nan("")};
  double dM_dt_formula = std::nan("");
  double dM_dt_numeric = std::nan("");
  double tr_GF = std::nan("");
  double upsilon_sq = std::nan("");
  double lambda = std::nan("");
};

// ---------------------------------------------------------------------------
// GRF on (g, b, a).
// ---------------------------------------------------------------------------
struct GrfTangent {
  Sym2Field dg;
  RForm db, da;

  GrfTangent& operator+=(const GrfTangent& o) {
    dg += o.dg;
    db += o.db;
    da += o.da;
    return *this;
  }
  GrfTangent operator*(double s) const {
    GrfTangent r = *this;
    r.dg = r.dg * s;
    r.db *= s;
    r.da *= s;
    return r;
  }
};

inline GeneralizedMetricState grf_advance(const GeneralizedMetricState& st, const GrfTangent& t,
                                          double dt) {
  GeneralizedMetricState out = st;
  out.g.axpy(dt, t.dg);
  out.b.axpy(dt, t.db);
  out.a.axpy(dt, t.da);
  return out;
}

inline GrfTangent grf_rhs(const GeneralizedMetricState& st) {
  const PeriodicGrid& g = *st.grid;
  const QuadraticLieAlgebra& alg = *st.alg;
  MetricData md(st.g);
  RiemannData rd(md);
  RForm H = st.three_form();
  RForm F = st.connection().curvature();

  GrfTangent out{Sym2Field(g), RForm(g, 2, 1), RForm(g, 1, alg.dim)};
  out.dg = rd.ricci() * -2.0;
  if (g.dim() >= 3) out.dg.axpy(0.5, sq_contract(H, md));
  out.dg.axpy(2.0, fsq_contract(F, md, alg));

  RForm ym = ym_codifferential(F, st.a, md, alg);
  if (g.dim() >= 3) ym.axpy(-1.0, fh_contract(F, H, md, alg));
  out.da = ym * -1.0;

  if (g.dim() >= 3) out.db = codifferential(H, md) * -1.0;
  out.db.axpy(-1.0, wedge_pair(st.a, ym, alg));
  return out;
}

// Gauge-fixed GRF with a supplied vector field X (Lee-form mode builds X from
// the associated Hermitian form).
inline GrfTangent grf_gauge_rhs(const GeneralizedMetricState& st, const VecField& X) {
  const PeriodicGrid& g = *st.grid;
  const QuadraticLieAlgebra& alg = *st.alg;
  MetricData md(st.g);
  RForm H = st.three_form();
  RForm F = st.connection().curvature();

  GrfTangent out = grf_rhs(st);
  out.dg += lie_derivative_metric(X, md);
  RForm iXF = interior(X, F);
  out.da += iXF;
  out.db += wedge_pair(st.a, iXF, alg);
  out.db.axpy(-1.0, d(flat_1form(X, md)));
  if (g.dim() >= 3) out.db += interior(X, H);
  return out;
}

inline VecField lee_vector_field(const GeneralizedMetricState& st) {
  // omega(X,Y) = g(JX,Y); requires a J-compatible metric
  const PeriodicGrid& g = *st.grid;
  RForm omega(g, 2, 1);
  for (int c = 0; c < g.ncomps(2); ++c) {
    unsigned M = g.comps[2][c];
    int idx[2], t = 0;
    for (int ax = 0; ax < g.dim(); ++ax)
      if (M & (1u << ax)) idx[t++] = ax;
    double s;
    int jm = J_image_axis(idx[0], s);
    for (std::size_t p = 0; p < g.npts; ++p) omega.at(c, p) = s * st.g.at(jm, idx[1], p);
  }
  HermitianData hd(omega, false);
  RForm theta = lee_form(hd);
  VecField X = sharp(theta, hd.metric);
  for (auto& c : X.comp)
    for (auto& v : c) v = -v;
  return X;
}

// ---------------------------------------------------------------------------
// Unitary-gauge pluriclosed flow on (omega, b, a).
// ---------------------------------------------------------------------------
struct PcfUnitaryState {
  const PeriodicGrid* grid = nullptr;
  const QuadraticLieAlgebra* alg = nullptr;
  RForm omega;  // real (1,1)
  RForm b;      // real 2-form
  RForm a;      // Lie 1-form
  RForm F0;     // background curvature
};

struct PcfUnitaryTangent {
  RForm domega, db, da;
  PcfUnitaryTangent& operator+=(const PcfUnitaryTangent& o) {
    domega += o.domega;
    db += o.db;
    da += o.da;
    return *this;
  }
  PcfUnitaryTangent operator*(double s) const {
    PcfUnitaryTangent r = *this;
    r.domega *= s;
    r.db *= s;
    r.da *= s;
    return r;
  }
};

inline PcfUnitaryState pcf_unitary_advance(const PcfUnitaryState& st, const PcfUnitaryTangent& t,
                                           double dt) {
  PcfUnitaryState out = st;
  out.omega.axpy(dt, t.domega);
  out.b.axpy(dt, t.db);
  out.a.axpy(dt, t.da);
  return out;
}

inline PcfUnitaryTangent pcf_unitary_rhs(const PcfUnitaryState& st) {
  const PeriodicGrid& g = *st.grid;
  const QuadraticLieAlgebra& alg = *st.alg;
  HermitianData hd(st.omega);
  ConnectionData conn{&alg, st.a, st.F0};
  RForm F = conn.curvature();
  if (type_residual(F, 1, 1) > 1e-6 * (1 + F.sup_norm()))
    throw positivity_error("pcf_unitary: (0,2)-curvature grew beyond tolerance");
  RForm lamF = lambda_trace(st.omega, F);

  PcfUnitaryTangent out{RForm(g, 2, 1), RForm(g, 2, 1), RForm(g, 1, alg.dim)};
  RForm rb = bismut_ricci(hd);
  CForm rb11 = type_project(rb, 1, 1);
  out.domega = real_part(rb11) * -1.0;
  RForm pairing = pair_form_section(F, lamF, alg);
  out.domega.axpy(-1.0, real_part(type_project(pairing, 1, 1)));

  RForm dlam = conn.d_conn_form(lamF);
  RForm jdlam = j_act(dlam);
  out.da = jdlam * 0.5;

  // b evolves as the real 2-form assembled from the displayed (1,1) and (0,2)
  // lines.
  RForm b11 = real_part(type_project(wedge_pair(st.a, jdlam, alg), 1, 1)) * 0.5;
  out.db = b11;
  if (g.n == 2) {
    CForm rb02 = type_project(rb, 0, 2);
    CForm p02 = type_project(pairing, 0, 2);
    // a^{0,1} ^ dbar^A(lam F)
    CpqForm a01 = to_complex(st.a).project(0, 1);
    CpqForm dbarlam = to_complex(complexify(dlam)).project(0, 1);
    CForm w02r = to_real_basis(cwedge_pair(a01, dbarlam, alg));
    CForm db02(g, 2, 1);
    for (std::size_t i = 0; i < db02.data.size(); ++i)
      db02.data[i] = cplx(0, -1) * rb02.data[i] + cplx(0, -1) * p02.data[i] +
                     cplx(0, 0.5) * w02r.data[i];
    // real 2-form contribution: db02 + conj(db02)
    out.db += real_part(db02) * 2.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Holomorphic-gauge pluriclosed flow on (omega, beta, h), abelian reductions.
// ---------------------------------------------------------------------------
struct PcfHolState {
  const PeriodicGrid* grid = nullptr;
  RForm omega;
  Reduction h;
  Reduction h0;   // reference for alpha
  CpqForm beta;   // (2,0); zero when n = 1
  bool has_beta = false;
};

struct PcfHolTangent {
  RForm domega;
  std::vector<std::vector<double>> du;  // per abelian factor
  CpqForm dbeta;
  bool has_beta = false;

  PcfHolTangent& operator+=(const PcfHolTangent& o) {
    domega += o.domega;
    for (std::size_t l = 0; l < du.size(); ++l)
      for (std::size_t p = 0; p < du[l].size(); ++p) du[l][p] += o.du[l][p];
    if (has_beta) dbeta += o.dbeta;
    return *this;
  }
  PcfHolTangent operator*(double s) const {
    PcfHolTangent r = *this;
    r.domega *= s;
    for (auto& ul : r.du)
      for (auto& v : ul) v *= s;
    if (has_beta) r.dbeta = r.dbeta * cplx(s, 0);
    return r;
  }
};

inline PcfHolState pcf_hol_advance(const PcfHolState& st, const PcfHolTangent& t, double dt) {
  PcfHolState out = st;
  out.omega.axpy(dt, t.domega);
  for (std::size_t l = 0; l < out.h.u.size(); ++l)
    for (std::size_t p = 0; p < out.h.u[l].size(); ++p) out.h.u[l][p] += dt * t.du[l][p];
  if (st.has_beta) out.beta += t.dbeta * cplx(dt, 0);
  return out;
}

inline PcfHolTangent pcf_hol_rhs(const PcfHolState& st) {
  const PeriodicGrid& g = *st.grid;
  const QuadraticLieAlgebra& alg = *st.h.alg;
  if (!st.h.abelian) throw config_error("pcf_holomorphic flow drives abelian reductions");
  HermitianData hd(st.omega);
  CForm F = chern_connection_curvature(st.h);
  RForm S = second_ricci(hd, st.h);

  PcfHolTangent out;
  out.domega = RForm(g, 2, 1);
  out.du.assign(alg.dim, std::vector<double>(g.npts, 0.0));
  out.has_beta = st.has_beta;
  if (st.has_beta) out.dbeta = CpqForm(g, 2, 1);

  RForm rb = bismut_ricci(hd);
  out.domega = real_part(type_project(rb, 1, 1)) * -1.0;
  // +i <S, F_h> with the hol-gauge C-bilinear pairing (-kappa on values)
  CForm Sc(g, 0, alg.dim);
  for (std::size_t p = 0; p < g.npts; ++p)
    for (int l = 0; l < alg.dim; ++l) Sc.at(0, p, l) = S.at(0, p, l);
  CForm isf(g, 2, 1);
  for (int c = 0; c < g.ncomps(2); ++c)
    for (std::size_t p = 0; p < g.npts; ++p)
      isf.at(c, p) = cplx(0, 1) * -alg.pair_values(&Sc.at(0, p, 0), &F.at(c, p, 0));
  out.domega += real_part(isf);

  for (int l = 0; l < alg.dim; ++l)
    for (std::size_t p = 0; p < g.npts; ++p) out.du[l][p] = -S.at(0, p, l);

  if (st.has_beta && g.n == 2) {
    // -rho_B^{2,0} - (i/2) <alpha ^ del^h S>
    CpqForm rbz = to_complex(rb);
    out.dbeta = rbz.project(2, 0) * cplx(-1, 0);
    auto alpha = reduction_alpha(st.h, st.h0);
    CpqForm alpha_form(g, 1, alg.dim);
    for (int j = 0; j < g.n; ++j) {
      int key = alpha_form.find(1u << j, 0u);
      for (std::size_t p = 0; p < g.npts; ++p)
        for (int l = 0; l < alg.dim; ++l)
          alpha_form.comp[key][p * alg.dim + l] = alpha[std::size_t(l) * g.n + j].at(0, p);
    }
    CpqForm Sz = to_complex(Sc);
    CpqForm delS = del(Sz);  // abelian: del^h S = del S
    CpqForm w = cwedge_pair_hol(alpha_form, delS, alg);
    out.dbeta += w.project(2, 0) * cplx(0, -0.5);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coupled HYM flow of the block metric G.
// ---------------------------------------------------------------------------
inline std::vector<CForm> extract_hermitian_block(const BlockHermitianMetric& G) {
  const PeriodicGrid& g = *G.grid;
  const int n = G.n, m = G.m;
  std::vector<CForm> out(std::size_t(n) * n, CForm(g, 0, 1));
  // The T*-block is alpha- and beta-free: it stores (1/4) g^{-1}, so the
  // metric is recovered by inverting the bottom-right block.
  for (std::size_t p = 0; p < g.npts; ++p) {
    MatC B(n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) B(j, k) = G.G[p](n + m + j, n + m + k);
    MatC gh = B.inverse() * cplx(0.25, 0);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out[std::size_t(j) * n + k].at(0, p) = gh(j, k);
  }
  return out;
}

inline RForm omega_from_block(const BlockHermitianMetric& G) {
  const PeriodicGrid& g = *G.grid;
  auto gh = extract_hermitian_block(G);
  // omega = i g_{j kbar} dz^j ^ dzbar^k as a real (1,1) form
  CpqForm wz(g, 2, 1);
  for (int j = 0; j < G.n; ++j)
    for (int k = 0; k < G.n; ++k) {
      int key = wz.find(1u << j, 1u << k);
      for (std::size_t p = 0; p < g.npts; ++p)
        wz.comp[key][p] += cplx(0, 1) * gh[std::size_t(j) * G.n + k].at(0, p);
    }
  CForm wr = to_real_basis(wz);
  return real_part(wr);
}

struct HymGTangent {
  std::vector<MatC> dG;
  HymGTangent& operator+=(const HymGTangent& o) {
    for (std::size_t p = 0; p < dG.size(); ++p) dG[p] = dG[p] + o.dG[p];
    return *this;
  }
  HymGTangent operator*(double s) const {
    HymGTangent r = *this;
    for (auto& m : r.dG) m = m * cplx(s, 0);
    return r;
  }
};

inline BlockHermitianMetric hym_advance(const BlockHermitianMetric& G, const HymGTangent& t,
                                        double dt) {
  BlockHermitianMetric out = G;
  for (std::size_t p = 0; p < out.G.size(); ++p) out.G[p] = out.G[p] + t.dG[p] * cplx(dt, 0);
  return out;
}

// Gdot = -G S_G, symmetrized; the Hermiticity defect of G S_G is the
// self-adjointness check on S_G.
inline HymGTangent hym_G_rhs(const BlockHermitianMetric& G, double* hermiticity_defect = nullptr) {
  const PeriodicGrid& g = *G.grid;
  RForm omega = omega_from_block(G);
  CForm S = second_ricci_G(omega, G);
  const int N = G.dim();
  HymGTangent out;
  out.dG.assign(g.npts, MatC(N));
  double defect = 0;
  for (std::size_t p = 0; p < g.npts; ++p) {
    MatC Sp(N);
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < N; ++c) Sp(r, c) = S.at(0, p, r * N + c);
    MatC GS = G.G[p] * Sp;
    MatC herm = (GS + GS.adjoint()) * cplx(0.5, 0);
    MatC skew = (GS - GS.adjoint()) * cplx(0.5, 0);
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < N; ++c) defect = std::max(defect, std::abs(skew(r, c)));
    out.dG[p] = herm * cplx(-1, 0);
  }
  if (hermiticity_defect) *hermiticity_defect = defect;
  return out;
}

// ---------------------------------------------------------------------------
// Coupled dilaton flow: GRF plus the dilaton heat equation.
// ---------------------------------------------------------------------------
struct DilatonState {
  GeneralizedMetricState st;
  RForm phi;
  std::vector<double> g_K_weights;
};

struct DilatonTangent {
  GrfTangent base;
  RForm dphi;
  DilatonTangent& operator+=(const DilatonTangent& o) {
    base += o.base;
    dphi += o.dphi;
    return *this;
  }
  DilatonTangent operator*(double s) const {
    DilatonTangent r = *this;
    r.base = r.base * s;
    r.dphi *= s;
    return r;
  }
};

inline DilatonState dilaton_advance(const DilatonState& s, const DilatonTangent& t, double dt) {
  DilatonState out = s;
  out.st = grf_advance(s.st, t.base, dt);
  out.phi.axpy(dt, t.dphi);
  return out;
}

inline DilatonTangent dilaton_rhs(const DilatonState& s) {
  const PeriodicGrid& g = *s.st.grid;
  MetricData md(s.st.g);
  RForm H = s.st.three_form();
  RForm F = s.st.connection().curvature();
  DilatonTangent out{grf_rhs(s.st), RForm(g, 0, 1)};
  out.dphi = laplace_beltrami(s.phi, md);
  RForm h2 = (g.dim() >= 3) ? tensor_norm_sq(H, md) : RForm(g, 0, 1);
  RForm f2 = f_norm_sq(F, md, *s.st.alg);
  double cart = s.g_K_weights.empty() ? 0.0 : s.st.alg->cartan_norm_sq(s.g_K_weights);
  for (std::size_t p = 0; p < g.npts; ++p)
    out.dphi.at(0, p) += (h2.at(0, p) + 3.0 * f2.at(0, p) + cart) / 6.0;
  return out;
}

// ---------------------------------------------------------------------------
// One-form reduction of the pluriclosed flow (CY normalization when the
// background volume is flat).
// ---------------------------------------------------------------------------
struct OneformState {
  const PeriodicGrid* grid = nullptr;
  CpqForm xi;  // (1,0)-form
  Reduction h;
  Reduction h0;
  RForm omega_hat;
  RForm omega_tilde;  // background for rho_C; flat on tori
  bool cy_normalization = true;  // i del log||Omega|| vs -(i/2) del log(w^n/wt^n)

  RForm omega() const {
    CpqForm dbxi = dbar(xi);
    CpqForm dxibar = strand::conj(dbxi);  // del(conj xi) = conj(dbar xi)
    CForm total = to_real_basis(dbxi + dxibar);
    return omega_hat + real_part(total);
  }
};

struct OneformTangent {
  CpqForm dxi;
  std::vector<std::vector<double>> du;
  RForm domega_hat;
  OneformTangent& operator+=(const OneformTangent& o) {
    dxi += o.dxi;
    for (std::size_t l = 0; l < du.size(); ++l)
      for (std::size_t p = 0; p < du[l].size(); ++p) du[l][p] += o.du[l][p];
    domega_hat += o.domega_hat;
    return *this;
  }
  OneformTangent operator*(double s) const {
    OneformTangent r = *this;
    r.dxi = r.dxi * cplx(s, 0);
    for (auto& ul : r.du)
      for (auto& v : ul) v *= s;
    r.domega_hat *= s;
    return r;
  }
};

inline OneformState oneform_advance(const OneformState& s, const OneformTangent& t, double dt) {
  OneformState out = s;
  out.xi += t.dxi * cplx(dt, 0);
  for (std::size_t l = 0; l < out.h.u.size(); ++l)
    for (std::size_t p = 0; p < out.h.u[l].size(); ++p) out.h.u[l][p] += dt * t.du[l][p];
  out.omega_hat.axpy(dt, t.domega_hat);
  return out;
}

inline OneformTangent oneform_rhs(const OneformState& s) {
  const PeriodicGrid& g = *s.grid;
  const QuadraticLieAlgebra& alg = *s.h.alg;
  RForm omega = s.omega();
  HermitianData hd(omega);
  RForm S = second_ricci(hd, s.h);
  CForm F = chern_connection_curvature(s.h);

  OneformTangent out;
  out.dxi = CpqForm(g, 1, 1);
  out.du.assign(alg.dim, std::vector<double>(g.npts, 0.0));
  out.domega_hat = RForm(g, 2, 1);

  // xi_dot = dbar*_omega omega + i del log ||Omega||_omega  (trivial canonical
  // bundle), or dbar*_omega omega - (i/2) del log(omega^n / omega~^n) against a
  // general background volume
  RForm dstar = codifferential(omega, hd.metric);
  CpqForm dstar_z = to_complex(dstar);
  out.dxi = dstar_z.project(1, 0);
  if (s.cy_normalization) {
    RForm vn = volume_norm(hd);
    RForm logn(g, 0, 1);
    for (std::size_t p = 0; p < g.npts; ++p) logn.at(0, p) = std::log(vn.at(0, p));
    CpqForm dlog = del(to_complex(logn));
    out.dxi += dlog * cplx(0, 1);
  } else {
    RForm dens = volume_density(omega);
    RForm dens_t = volume_density(s.omega_tilde);
    RForm ratio(g, 0, 1);
    for (std::size_t p = 0; p < g.npts; ++p)
      ratio.at(0, p) = std::log(dens.at(0, p) / dens_t.at(0, p));
    CpqForm dlog = del(to_complex(ratio));
    out.dxi += dlog * cplx(0, -0.5);
  }

  for (int l = 0; l < alg.dim; ++l)
    for (std::size_t p = 0; p < g.npts; ++p) out.du[l][p] = -S.at(0, p, l);

  // omega_hat_dot = -rho_C(omega_tilde) + i <S, F_h>; the background
  // first-Chern representative vanishes for the flat torus volume but is
  // computed to keep the displayed structure
  HermitianData hdt(s.omega_tilde);
  RForm rhoC = chern_ricci_oracle(hdt);
  out.domega_hat = rhoC * -1.0;
  CForm isf(g, 2, 1);
  CForm Sc(g, 0, alg.dim);
  for (std::size_t p = 0; p < g.npts; ++p)
    for (int l = 0; l < alg.dim; ++l) Sc.at(0, p, l) = S.at(0, p, l);
  for (int c = 0; c < g.ncomps(2); ++c)
    for (std::size_t p = 0; p < g.npts; ++p)
      isf.at(c, p) = cplx(0, 1) * -alg.pair_values(&Sc.at(0, p, 0), &F.at(c, p, 0));
  out.domega_hat += real_part(isf);
  return out;
}

// ---------------------------------------------------------------------------
// Classical 4-stage RK with state-specific advance maps.
// ---------------------------------------------------------------------------
template <class Tangent, class State, class Rhs, class Advance>
State rk4_step(const State& s, Rhs&& rhs, Advance&& advance, double dt) {
  Tangent k1 = rhs(s);
  Tangent k2 = rhs(advance(s, k1, 0.5 * dt));
  Tangent k3 = rhs(advance(s, k2, 0.5 * dt));
  Tangent k4 = rhs(advance(s, k3, dt));
  Tangent total = k1;
  total += k2 * 2.0;
  total += k3 * 2.0;
  total += k4;
  return advance(s, total, dt / 6.0);
}

// Time loop: classical RK4, monitors every monitor_stride steps, stops on
// t_end, positivity loss, or NaN. Monitors never mutate state.
template <class Tangent, class State, class Rhs, class Advance, class Validate, class Monitor>
std::vector<MonitorRecord> run_flow(const FlowSpec& spec, State& state, Rhs&& rhs, Advance&& advance,
                                    Validate&& validate, Monitor&& monitor) {
  spec.validate();
  std::vector<MonitorRecord> records;
  const long steps = std::lround(spec.t_end / spec.dt);
  validate(state);
  records.push_back(monitor(state, 0.0));
  for (long s = 1; s <= steps; ++s) {
    state = rk4_step<Tangent>(state, rhs, advance, spec.dt);
    double t = double(s) * spec.dt;
    validate(state);  // throws positivity_error / nan_error with the step context
    if (s % spec.monitor_stride == 0 || s == steps) records.push_back(monitor(state, t));
  }
  return records;
}

// CFL guard: dt <= safety * h_min^2 / (4 * sup diffusion), diffusion read off
// the largest eigenvalue of g^{-1}.
inline void check_cfl(const FlowSpec& spec, const PeriodicGrid& g, double sup_ginv_eig) {
  double bound = spec.cfl_safety * g.min_spacing() * g.min_spacing() / (4.0 * sup_ginv_eig);
  if (spec.dt > bound)
    throw config_error("time step violates the CFL bound: dt = " + std::to_string(spec.dt) +
                       " > " + std::to_string(bound));
}

inline double sup_inverse_metric_eig(const Sym2Field& g) {
  MetricData md(g);
  double sup = 0;
  for (std::size_t p = 0; p < g.grid->npts; ++p) {
    auto ev = symmetric_eigenvalues(md.ginv.point(p));
    sup = std::max(sup, ev.back());
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Scale-invariant C^{k+1} diagnostic of (omega, h) against a background pair,
// built from differences of Chern connections. k <= 2.
// ---------------------------------------------------------------------------
namespace detail {

struct ChernTensor {
  // complex tensor field with one upper slot (possibly none) and lower slots;
  // shape [n^slots] per point
  int n = 0;
  int slots = 0;  // total index count
  bool has_upper = false;
  std::vector<cplx> data;  // [point][multi-index]

  std::size_t words_per_point() const {
    std::size_t w = 1;
    for (int i = 0; i < slots; ++i) w *= std::size_t(n);
    return w;
  }
};

// Chern symbols of a Hermitian matrix field: Gamma^i_{jk} = g^{i lbar-inv} d_j g_{k lbar}
inline std::vector<MatC> chern_symbols(const PeriodicGrid& g, const std::vector<CForm>& gh) {
  const int n = g.n;
  CForm flat(g, 0, n * n);
  for (std::size_t p = 0; p < g.npts; ++p)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) flat.at(0, p, j * n + k) = gh[std::size_t(j) * n + k].at(0, p);
  CpqForm dz = del(to_complex(flat));
  // out[p] stacked as n matrices: Gamma[j] with (i,k) entries
  std::vector<MatC> out(g.npts * std::size_t(n), MatC(n));
  for (int j = 0; j < n; ++j) {
    int key = dz.find(1u << j, 0u);
    for (std::size_t p = 0; p < g.npts; ++p) {
      MatC G(n), dG(n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
          G(r, c) = gh[std::size_t(r) * n + c].at(0, p);
          dG(r, c) = dz.comp[key][p * std::size_t(n) * n + r * n + c];
        }
      MatC Gi = G.inverse();
      // Gamma^i_{jk} = sum_l dG(k,l) Gi-appropriate: g^{l-bar i} d_j g_{k l-bar}
      MatC Gam(n);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          cplx acc(0, 0);
          for (int l = 0; l < n; ++l) acc += Gi(l, i) * dG(k, l);
          Gam(i, k) = acc;
        }
      out[p * std::size_t(n) + j] = Gam;
    }
  }
  return out;
}

}  // namespace detail

// Phi_k(omega, omega~, h, h~) as a grid sup; abelian reductions, negative
// definite pairing.
inline double phi_k_monitor(const HermitianData& hd, const HermitianData& hdt, const Reduction& h,
                            const Reduction& ht, int k) {
  if (k > 2) throw config_error("phi_k_monitor supports k <= 2");
  const PeriodicGrid& g = *hd.grid;
  const int n = g.n;
  const QuadraticLieAlgebra& alg = *h.alg;
  if (!h.abelian) throw config_error("phi_k_monitor drives abelian reductions");
  for (int l = 0; l < alg.dim; ++l)
    if (alg.kappa(l, l) >= 0) throw config_error("phi_k_monitor expects negative definite pairing");

  auto gh = hd.hermitian_matrix();
  auto ghT = hdt.hermitian_matrix();
  auto gam = detail::chern_symbols(g, gh);
  auto gamT = detail::chern_symbols(g, ghT);

  // Upsilon_g: [i, j, k] complex; Upsilon_h: per factor [j]
  const int m = alg.dim;
  std::vector<cplx> ups_g(g.npts * std::size_t(n) * n * n);
  for (std::size_t p = 0; p < g.npts; ++p)
    for (int j = 0; j < n; ++j) {
      MatC D = gam[p * std::size_t(n) + j] - gamT[p * std::size_t(n) + j];
      for (int i = 0; i < n; ++i)
        for (int kk = 0; kk < n; ++kk)
          ups_g[((p * n + i) * n + j) * n + kk] = D(i, kk);
    }
  std::vector<cplx> ups_h(g.npts * std::size_t(m) * n);
  for (int l = 0; l < m; ++l) {
    RForm diff(g, 0, 1);
    for (std::size_t p = 0; p < g.npts; ++p) diff.at(0, p) = h.u[l][p] - ht.u[l][p];
    CpqForm dz = del(to_complex(diff));
    for (int j = 0; j < n; ++j) {
      int key = dz.find(1u << j, 0u);
      for (std::size_t p = 0; p < g.npts; ++p) ups_h[(p * m + l) * std::size_t(n) + j] = dz.comp[key][p];
    }
  }

  // covariant derivatives: slots carry a bar flag; the (1,0)-Chern derivative
  // corrects unbarred slots with Gamma, the (0,1) derivative corrects barred
  // slots with conj(Gamma). Norms contract every slot pair with g or g^{-1}.
  struct Tens {
    int rank;  // total number of slots, first slot of ups_g is the upper one
    bool upper;
    std::vector<bool> barred;  // per slot
    std::vector<cplx> v;       // [p][idx]
  };
  auto deriv = [&](const Tens& T, bool bar) {
    Tens R;
    R.rank = T.rank + 1;
    R.upper = T.upper;
    R.barred = T.barred;
    R.barred.push_back(bar);
    std::size_t win = 1;
    for (int i = 0; i < T.rank; ++i) win *= std::size_t(n);
    R.v.assign(g.npts * win * std::size_t(n), cplx(0));
    std::vector<cplx> t0(g.npts), t1(g.npts), comp(g.npts);
    for (std::size_t idx = 0; idx < win; ++idx) {
      for (std::size_t p = 0; p < g.npts; ++p) comp[p] = T.v[p * win + idx];
      for (int a = 0; a < n; ++a) {
        deriv_axis(g, comp.data(), t0.data(), 2 * a, 1);
        deriv_axis(g, comp.data(), t1.data(), 2 * a + 1, 1);
        cplx iu = bar ? cplx(0, 0.5) : cplx(0, -0.5);
        for (std::size_t p = 0; p < g.npts; ++p)
          R.v[(p * win + idx) * n + a] = 0.5 * t0[p] + iu * t1[p];
      }
    }
    for (std::size_t p = 0; p < g.npts; ++p)
      for (std::size_t idx = 0; idx < win; ++idx) {
        std::size_t rem = idx;
        std::vector<int> id(T.rank);
        for (int s2 = T.rank - 1; s2 >= 0; --s2) {
          id[s2] = int(rem % n);
          rem /= n;
        }
        for (int a = 0; a < n; ++a) {
          const MatC& Gam = gam[p * std::size_t(n) + a];
          cplx corr(0, 0);
          if (T.upper && !bar) {
            for (int mm = 0; mm < n; ++mm) {
              auto id2 = id;
              id2[0] = mm;
              std::size_t flat = 0;
              for (int s2 = 0; s2 < T.rank; ++s2) flat = flat * std::size_t(n) + id2[s2];
              corr += Gam(id[0], mm) * T.v[p * win + flat];
            }
          }
          for (int s = T.upper ? 1 : 0; s < T.rank; ++s) {
            bool slot_barred = T.barred[s];
            if (slot_barred != bar) continue;  // Gamma acts on unbarred, conj(Gamma) on barred
            for (int mm = 0; mm < n; ++mm) {
              auto id2 = id;
              id2[s] = mm;
              std::size_t flat = 0;
              for (int s2 = 0; s2 < T.rank; ++s2) flat = flat * std::size_t(n) + id2[s2];
              cplx gv = bar ? std::conj(Gam(mm, id[s])) : Gam(mm, id[s]);
              corr -= gv * T.v[p * win + flat];
            }
          }
          R.v[(p * win + idx) * n + a] += corr;
        }
      }
    return R;
  };
  auto norm_sq_at = [&](const Tens& T, std::size_t p) {
    std::size_t win = 1;
    for (int i = 0; i < T.rank; ++i) win *= std::size_t(n);
    MatC G(n), Gi(n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) G(r, c) = gh[std::size_t(r) * n + c].at(0, p);
    Gi = G.inverse();
    double acc = 0;
    std::vector<int> id(T.rank), id2(T.rank);
    for (std::size_t i1 = 0; i1 < win; ++i1)
      for (std::size_t i2 = 0; i2 < win; ++i2) {
        std::size_t rem = i1;
        for (int s = T.rank - 1; s >= 0; --s) {
          id[s] = int(rem % n);
          rem /= n;
        }
        rem = i2;
        for (int s = T.rank - 1; s >= 0; --s) {
          id2[s] = int(rem % n);
          rem /= n;
        }
        cplx w = T.v[p * win + i1] * std::conj(T.v[p * win + i2]);
        for (int s = 0; s < T.rank; ++s) {
          bool upper = T.upper && s == 0;
          w *= upper ? G(id[s], id2[s]) : Gi(id2[s], id[s]);
        }
        acc += w.real();
      }
    return acc;
  };

  Tens Tg{3, true, {false, false, false}, ups_g};
  // h-part: one rank-1 tensor per abelian factor, kappa weight folded in
  std::vector<Tens> hfactors;
  for (int l = 0; l < m; ++l) {
    Tens t{1, false, {false}, std::vector<cplx>(g.npts * std::size_t(n))};
    double w = std::sqrt(-alg.kappa(l, l));
    for (std::size_t p = 0; p < g.npts; ++p)
      for (int j = 0; j < n; ++j) t.v[p * std::size_t(n) + j] = w * ups_h[(p * m + l) * std::size_t(n) + j];
    hfactors.push_back(std::move(t));
  }

  double sup = 0;
  // build derivative levels: at level j, keep all 2^j bar-patterns as
  // separate tensors and sum their norms
  std::vector<std::vector<Tens>> gstack = {{Tg}};
  std::vector<std::vector<std::vector<Tens>>> hstack(hfactors.size());
  for (std::size_t l = 0; l < hfactors.size(); ++l) hstack[l] = {{hfactors[l]}};
  for (int j = 1; j <= k; ++j) {
    std::vector<Tens> next;
    for (auto& T : gstack.back()) {
      next.push_back(deriv(T, false));
      next.push_back(deriv(T, true));
    }
    gstack.push_back(std::move(next));
    for (std::size_t l = 0; l < hfactors.size(); ++l) {
      std::vector<Tens> nx;
      for (auto& T : hstack[l].back()) {
        nx.push_back(deriv(T, false));
        nx.push_back(deriv(T, true));
      }
      hstack[l].push_back(std::move(nx));
    }
  }
  for (std::size_t p = 0; p < g.npts; ++p) {
    double phi = 0;
    for (int j = 0; j <= k; ++j) {
      double level = 0;
      for (auto& T : gstack[j]) level += norm_sq_at(T, p);
      for (std::size_t l = 0; l < hfactors.size(); ++l)
        for (auto& T : hstack[l][j]) level += norm_sq_at(T, p);
      phi += std::pow(std::max(level, 0.0), 1.0 / (1.0 + j));
    }
    sup = std::max(sup, phi);
  }
  return sup;
}

}  // namespace strand
