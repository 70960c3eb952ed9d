#pragma once

#include "strand/flows.hpp"

namespace strand {

// ---------------------------------------------------------------------------
// Invariant tensor calculus on the total space of a principal bundle, in the
// adapted frame {horizontal coordinate lifts e_mu, vertical generators u_j}.
// Frame components are base-grid fields; fiber derivatives vanish. Structure
// functions: [e_mu, e_nu] = -F^j_{mu nu} u_j, [e_mu, u_j] = 0,
// [u_i, u_j] = c_{ij}^k u_k, where F is the curvature of the frame connection.
// ---------------------------------------------------------------------------
struct TotalFrame {
  const PeriodicGrid* grid = nullptr;
  const QuadraticLieAlgebra* alg = nullptr;
  RForm F;  // curvature of the frame connection (Lie 2-form on the base)

  int hdim() const { return grid->dim(); }
  int vdim() const { return alg->dim; }
  int dim() const { return hdim() + vdim(); }
};

// degree-k frame form with ldim Lie multiplicity, components keyed by
// (horizontal mask, vertical mask)
struct TField {
  const TotalFrame* frame = nullptr;
  int degree = 0;
  int ldim = 1;
  std::vector<std::pair<unsigned, unsigned>> keys;
  std::vector<std::vector<double>> comp;  // npts * ldim each

  TField() = default;
  TField(const TotalFrame& fr, int deg, int ld = 1) : frame(&fr), degree(deg), ldim(ld) {
    const int hd = fr.hdim(), vd = fr.vdim();
    for (unsigned hm = 0; hm < (1u << hd); ++hm)
      for (unsigned vm = 0; vm < (1u << vd); ++vm)
        if (mask_degree(hm) + mask_degree(vm) == deg) keys.emplace_back(hm, vm);
    comp.assign(keys.size(), std::vector<double>(fr.grid->npts * std::size_t(ld), 0.0));
  }

  int find(unsigned hm, unsigned vm) const {
    for (int i = 0; i < int(keys.size()); ++i)
      if (keys[i].first == hm && keys[i].second == vm) return i;
    return -1;
  }

  TField& operator+=(const TField& o) {
    for (std::size_t c = 0; c < comp.size(); ++c)
      for (std::size_t i = 0; i < comp[c].size(); ++i) comp[c][i] += o.comp[c][i];
    return *this;
  }
  TField operator+(const TField& o) const {
    TField r = *this;
    r += o;
    return r;
  }
  TField operator-(const TField& o) const {
    TField r = *this;
    for (std::size_t c = 0; c < comp.size(); ++c)
      for (std::size_t i = 0; i < comp[c].size(); ++i) r.comp[c][i] -= o.comp[c][i];
    return r;
  }
  TField operator*(double s) const {
    TField r = *this;
    for (auto& cc : r.comp)
      for (auto& v : cc) v *= s;
    return r;
  }
  void axpy(double s, const TField& o) {
    for (std::size_t c = 0; c < comp.size(); ++c)
      for (std::size_t i = 0; i < comp[c].size(); ++i) comp[c][i] += s * o.comp[c][i];
  }
  double sup_norm() const {
    double m = 0;
    for (auto& cc : comp)
      for (double v : cc) m = std::max(m, std::abs(v));
    return m;
  }
};

// pull a base form up to the frame (horizontal components only)
inline TField pullback(const TotalFrame& fr, const RForm& a) {
  TField out(fr, a.degree, a.ldim);
  const PeriodicGrid& g = *fr.grid;
  for (int c = 0; c < g.ncomps(a.degree); ++c) {
    int key = out.find(g.comps[a.degree][c], 0u);
    std::copy(a.comp(c), a.comp(c) + g.npts * std::size_t(a.ldim), out.comp[key].begin());
  }
  return out;
}

// the vertical Maurer-Cartan coframe theta = sum u^j (x) eps_j as a Lie-valued
// frame 1-form
inline TField vertical_coframe(const TotalFrame& fr) {
  TField out(fr, 1, fr.alg->dim);
  for (int j = 0; j < fr.vdim(); ++j) {
    int key = out.find(0u, 1u << j);
    for (std::size_t p = 0; p < fr.grid->npts; ++p) out.comp[key][p * fr.vdim() + j] = 1.0;
  }
  return out;
}

template <class Combine>
TField t_wedge_with(const TField& a, const TField& b, int out_ldim, Combine&& combine) {
  const TotalFrame& fr = *a.frame;
  TField out(fr, a.degree + b.degree, out_ldim);
  const std::size_t np = fr.grid->npts;
  for (std::size_t ca = 0; ca < a.keys.size(); ++ca) {
    auto [h1, v1] = a.keys[ca];
    for (std::size_t cb = 0; cb < b.keys.size(); ++cb) {
      auto [h2, v2] = b.keys[cb];
      int sh = merge_sign(h1, h2), sv = merge_sign(v1, v2);
      if (sh == 0 || sv == 0) continue;
      int hop = (mask_degree(v1) * mask_degree(h2)) % 2 ? -1 : 1;
      double sign = double(sh * sv * hop);
      int target = out.find(h1 | h2, v1 | v2);
      const auto& xa = a.comp[ca];
      const auto& xb = b.comp[cb];
      auto& dst = out.comp[target];
      for (std::size_t p = 0; p < np; ++p)
        combine(sign, &xa[p * a.ldim], &xb[p * b.ldim], &dst[p * out.ldim]);
    }
  }
  return out;
}

inline TField t_wedge(const TField& a, const TField& b) {
  if (a.ldim != 1 && b.ldim != 1) throw dimension_error("t_wedge: two Lie-valued factors");
  int ld = std::max(a.ldim, b.ldim);
  return t_wedge_with(a, b, ld, [la = a.ldim, lb = b.ldim, ld](double s, const double* x, const double* y, double* o) {
    for (int l = 0; l < ld; ++l) o[l] += s * x[la == 1 ? 0 : l] * y[lb == 1 ? 0 : l];
  });
}

inline TField t_wedge_pair(const TField& a, const TField& b, const QuadraticLieAlgebra& alg) {
  return t_wedge_with(a, b, 1, [&alg](double s, const double* x, const double* y, double* o) {
    o[0] += s * alg.pair_values(x, y);
  });
}

inline TField t_wedge_bracket(const TField& a, const TField& b, const QuadraticLieAlgebra& alg) {
  return t_wedge_with(a, b, alg.dim, [&alg](double s, const double* x, const double* y, double* o) {
    std::array<double, 4> br{};
    alg.bracket_into(x, y, br.data());
    for (int l = 0; l < alg.dim; ++l) o[l] += s * br[l];
  });
}

// interior product with a vertical frame generator u_j
inline TField t_interior_vertical(const TField& a, int j) {
  const TotalFrame& fr = *a.frame;
  TField out(fr, a.degree - 1, a.ldim);
  unsigned bit = 1u << j;
  for (std::size_t c = 0; c < a.keys.size(); ++c) {
    auto [hm, vm] = a.keys[c];
    if (!(vm & bit)) continue;
    // i_{u_j} (e^h ^ u^v): u_j hops over the horizontal block and the earlier
    // vertical covectors
    int sign = (mask_degree(hm) % 2) ? -1 : 1;
    unsigned below = vm & (bit - 1);
    if (mask_degree(below) % 2) sign = -sign;
    int target = out.find(hm, vm & ~bit);
    for (std::size_t i = 0; i < a.comp[c].size(); ++i) out.comp[target][i] += sign * a.comp[c][i];
  }
  return out;
}

// frame exterior derivative:
//   t_d = (base d on components) + sum_j F_j ^ i_{u_j} - sum_{i<j} c_{ij}^k u^i ^ u^j ^ i_{u_k}
inline TField t_d(const TField& a) {
  const TotalFrame& fr = *a.frame;
  const PeriodicGrid& g = *fr.grid;
  TField out(fr, a.degree + 1, a.ldim);
  std::vector<double> tmp(g.npts * std::size_t(a.ldim));
  for (std::size_t c = 0; c < a.keys.size(); ++c) {
    auto [hm, vm] = a.keys[c];
    for (int mu = 0; mu < fr.hdim(); ++mu) {
      unsigned bit = 1u << mu;
      if (hm & bit) continue;
      int sign = merge_sign(bit, hm);
      int target = out.find(hm | bit, vm);
      deriv_axis(g, a.comp[c].data(), tmp.data(), mu, a.ldim);
      auto& dst = out.comp[target];
      for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] += sign * tmp[i];
    }
  }
  // curvature correction
  for (int j = 0; j < fr.vdim(); ++j) {
    TField ij = t_interior_vertical(a, j);
    RForm Fj(g, 2, 1);
    for (int c = 0; c < g.ncomps(2); ++c)
      for (std::size_t p = 0; p < g.npts; ++p) Fj.at(c, p) = fr.F.at(c, p, j);
    TField Fjt = pullback(fr, Fj);
    out += t_wedge(Fjt, ij);
  }
  // algebraic (Cartan) correction
  if (!fr.alg->abelian()) {
    for (int i = 0; i < fr.vdim(); ++i)
      for (int j = i + 1; j < fr.vdim(); ++j)
        for (int k = 0; k < fr.vdim(); ++k) {
          double cijk = fr.alg->cc(i, j, k);
          if (cijk == 0.0) continue;
          TField ik = t_interior_vertical(a, k);
          TField uij(fr, 2, 1);
          int key = uij.find(0u, (1u << i) | (1u << j));
          std::fill(uij.comp[key].begin(), uij.comp[key].end(), 1.0);
          out.axpy(-cijk, t_wedge(uij, ik));
        }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frame metrics and the Koszul oracle.
// ---------------------------------------------------------------------------
struct TotalMetric {
  const TotalFrame* frame = nullptr;
  std::vector<std::vector<double>> g;  // pair-major over (a<=b), dim = hdim+vdim

  static int npairs(int d) { return d * (d + 1) / 2; }
  static int pair_index(int a, int b, int d) {
    if (a > b) std::swap(a, b);
    return a * d - a * (a - 1) / 2 + (b - a);
  }

  TotalMetric() = default;
  explicit TotalMetric(const TotalFrame& fr)
      : frame(&fr), g(npairs(fr.dim()), std::vector<double>(fr.grid->npts, 0.0)) {}

  double at(int a, int b, std::size_t p) const { return g[pair_index(a, b, frame->dim())][p]; }
  double& at(int a, int b, std::size_t p) { return g[pair_index(a, b, frame->dim())][p]; }

  MatR point(std::size_t p) const {
    const int d = frame->dim();
    MatR m(d);
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) m(a, b) = m(b, a) = at(a, b, p);
    return m;
  }
  void set_point(std::size_t p, const MatR& m) {
    const int d = frame->dim();
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) at(a, b, p) = m(a, b);
  }
};

// structure-function components gamma^c_{ab} as a pointwise array
inline void structure_functions(const TotalFrame& fr, std::size_t p, double gam[8][8][8]) {
  const int hd = fr.hdim(), vd = fr.vdim();
  const PeriodicGrid& g = *fr.grid;
  for (int a = 0; a < hd + vd; ++a)
    for (int b = 0; b < hd + vd; ++b)
      for (int c = 0; c < hd + vd; ++c) gam[a][b][c] = 0.0;
  for (int mu = 0; mu < hd; ++mu)
    for (int nu = 0; nu < hd; ++nu) {
      if (mu == nu) continue;
      unsigned m = (1u << mu) | (1u << nu);
      int comp = g.comp_index[m];
      int sgn = mu < nu ? 1 : -1;
      // components stored on increasing pairs
      for (int j = 0; j < vd; ++j) {
        double Fv = fr.F.at(comp, p, j);
        gam[mu][nu][hd + j] = -sgn * Fv;
      }
    }
  for (int i = 0; i < vd; ++i)
    for (int j = 0; j < vd; ++j)
      for (int k = 0; k < vd; ++k) gam[hd + i][hd + j][hd + k] = fr.alg->cc(i, j, k);
}

// Koszul formula with structure functions; returns Gamma^c_{ab} fields.
struct FrameChristoffel {
  const TotalFrame* frame = nullptr;
  std::vector<std::vector<double>> gamma;  // [(a*D + b)*D + c][p] for nabla_a e_b = G^c_{ab} e_c

  FrameChristoffel(const TotalFrame& fr, const TotalMetric& tm) : frame(&fr) {
    const PeriodicGrid& g = *fr.grid;
    const int D = fr.dim();
    const int hd = fr.hdim();
    gamma.assign(std::size_t(D) * D * D, std::vector<double>(g.npts, 0.0));
    // horizontal derivatives of the metric components
    std::vector<std::vector<double>> dg(std::size_t(TotalMetric::npairs(D)) * hd,
                                        std::vector<double>(g.npts));
    for (int pr = 0; pr < TotalMetric::npairs(D); ++pr)
      for (int mu = 0; mu < hd; ++mu)
        deriv_axis(g, tm.g[pr].data(), dg[std::size_t(pr) * hd + mu].data(), mu, 1);
    auto dgat = [&](int a, int b, int c, std::size_t p) -> double {
      // e_a(g_{bc}); vertical derivatives vanish
      if (a >= hd) return 0.0;
      return dg[std::size_t(TotalMetric::pair_index(b, c, D)) * hd + a][p];
    };
    parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
      double gam[8][8][8];
      for (std::size_t p = lo; p < hi; ++p) {
        structure_functions(fr, p, gam);
        MatR gp = tm.point(p);
        MatR gi = gp.inverse();
        for (int a = 0; a < D; ++a)
          for (int b = 0; b < D; ++b)
            for (int c = 0; c < D; ++c) {
              // 2 g(nabla_a e_b, e_c)
              double rhs = dgat(a, b, c, p) + dgat(b, a, c, p) - dgat(c, a, b, p);
              for (int e = 0; e < D; ++e) {
                rhs += gam[a][b][e] * gp(e, c);
                rhs -= gam[b][c][e] * gp(e, a);
                rhs += gam[c][a][e] * gp(e, b);
              }
              for (int dD = 0; dD < D; ++dD)
                gamma[(std::size_t(a) * D + b) * D + dD][p] += 0.5 * gi(dD, c) * rhs;
            }
      }
    });
  }

  double at(int a, int b, int c, std::size_t p) const {
    const int D = frame->dim();
    return gamma[(std::size_t(a) * D + b) * D + c][p];
  }
};

// Ricci tensor of the frame metric via curvature of the Koszul connection.
inline TotalMetric frame_ricci_oracle(const TotalFrame& fr, const TotalMetric& tm,
                                      std::vector<std::vector<double>>* full_ricci = nullptr) {
  const PeriodicGrid& g = *fr.grid;
  const int D = fr.dim();
  const int hd = fr.hdim();
  FrameChristoffel ch(fr, tm);
  // horizontal derivatives of Gamma
  std::vector<std::vector<double>> dgam(std::size_t(D) * D * D * hd, std::vector<double>(g.npts));
  for (int e = 0; e < D * D * D; ++e)
    for (int mu = 0; mu < hd; ++mu)
      deriv_axis(g, ch.gamma[e].data(), dgam[std::size_t(e) * hd + mu].data(), mu, 1);
  auto dgamat = [&](int a, int b, int c, int dd, std::size_t p) -> double {
    if (a >= hd) return 0.0;  // vertical derivative of invariant fields
    return dgam[(std::size_t((std::size_t(b) * D + c) * D + dd)) * hd + a][p];
  };
  TotalMetric rc(fr);
  if (full_ricci) full_ricci->assign(std::size_t(D) * D, std::vector<double>(g.npts, 0.0));
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    double gam[8][8][8];
    for (std::size_t p = lo; p < hi; ++p) {
      structure_functions(fr, p, gam);
      for (int b = 0; b < D; ++b)
        for (int c = 0; c < D; ++c) {
          // Rc_{bc} = R^a_{a b c}: R(e_a, e_b)e_c = ...
          double acc = 0;
          for (int a = 0; a < D; ++a) {
            double r = dgamat(a, b, c, a, p) - dgamat(b, a, c, a, p);
            for (int e = 0; e < D; ++e) {
              r += ch.at(a, e, a, p) * ch.at(b, c, e, p) - ch.at(b, e, a, p) * ch.at(a, c, e, p);
              r -= gam[a][b][e] * ch.at(e, c, a, p);
            }
            acc += r;
          }
          if (b <= c) rc.at(b, c, p) = acc;
          if (full_ricci) (*full_ricci)[std::size_t(b) * D + c][p] = acc;
        }
    }
  });
  return rc;
}

// ---------------------------------------------------------------------------
// Chern-Simons form and the total-space data of a state.
// ---------------------------------------------------------------------------

// CS(A) = -(1/6) <A ^ [A ^ A]> + <F_A ^ A> as frame components, A written in
// the frame of the background connection: A = a + theta.
inline TField chern_simons(const TotalFrame& fr, const RForm& a_base) {
  const QuadraticLieAlgebra& alg = *fr.alg;
  TField A = pullback(fr, a_base) + vertical_coframe(fr);
  // curvature of A in this frame equals fr.F when fr is A-adapted, but CS is
  // built from the full F_A = F0 + da + (1/2)[a^a] pulled back plus algebraic
  // parts; use t_d on A instead: F_A-frame = t_d(A) + (1/2)[A ^ A]
  TField dA = t_d(A);
  TField FA = dA;
  FA.axpy(0.5, t_wedge_bracket(A, A, alg));
  TField cs = t_wedge_pair(FA, A, alg);
  if (!alg.abelian()) cs.axpy(-1.0 / 6.0, t_wedge_pair(A, t_wedge_bracket(A, A, alg), alg));
  return cs;
}

struct TotalSpaceData {
  TotalFrame frame;  // adapted to the background connection, F = F0
  TotalMetric gbar;
  TField bbar;  // 2-form
  TField Hbar;  // 3-form
  RForm phibar;
  std::vector<double> g_K_weights;
};

// (g_K applied to Lie values) as a matrix; diagonal weights extend -kappa
inline MatR gk_matrix(const QuadraticLieAlgebra& alg, const std::vector<double>& weights) {
  MatR m(alg.dim);
  if (weights.empty()) {
    for (int i = 0; i < alg.dim; ++i)
      for (int j = 0; j < alg.dim; ++j) m(i, j) = -alg.kappa(i, j);
    return m;
  }
  for (int i = 0; i < alg.dim; ++i) m(i, i) = weights[i];
  return m;
}

inline TotalSpaceData build_total(const GeneralizedMetricState& st, const RForm& phi,
                                  const std::vector<double>& g_K_weights = {}) {
  const PeriodicGrid& g = *st.grid;
  const QuadraticLieAlgebra& alg = *st.alg;
  TotalSpaceData ts;
  ts.frame = TotalFrame{&g, &alg, st.F0};
  ts.g_K_weights = g_K_weights;
  MatR gk = gk_matrix(alg, g_K_weights);
  const int hd = g.dim(), vd = alg.dim;

  // gbar = p*g + g_K(A, A) with A = a + theta in the background frame
  ts.gbar = TotalMetric(ts.frame);
  for (std::size_t p = 0; p < g.npts; ++p) {
    for (int mu = 0; mu < hd; ++mu)
      for (int nu = mu; nu < hd; ++nu) {
        double acc = st.g.at(mu, nu, p);
        for (int i = 0; i < vd; ++i)
          for (int j = 0; j < vd; ++j) acc += gk(i, j) * st.a.at(mu, p, i) * st.a.at(nu, p, j);
        ts.gbar.at(mu, nu, p) = acc;
      }
    for (int mu = 0; mu < hd; ++mu)
      for (int j = 0; j < vd; ++j) {
        double acc = 0;
        for (int i = 0; i < vd; ++i) acc += gk(i, j) * st.a.at(mu, p, i);
        ts.gbar.at(mu, hd + j, p) = acc;
      }
    for (int i = 0; i < vd; ++i)
      for (int j = i; j < vd; ++j) ts.gbar.at(hd + i, hd + j, p) = gk(i, j);
  }

  // bbar = p*b - <a ^ A>
  TField A = pullback(ts.frame, st.a) + vertical_coframe(ts.frame);
  ts.bbar = pullback(ts.frame, st.b);
  ts.bbar.axpy(-1.0, t_wedge_pair(pullback(ts.frame, st.a), A, alg));

  // Hbar = p*H - CS(A)
  ts.Hbar = pullback(ts.frame, st.three_form());
  ts.Hbar.axpy(-1.0, chern_simons(ts.frame, st.a));

  ts.phibar = phi;
  return ts;
}

// full (possibly nonsymmetric) weighted Bismut-Ricci tensor of the total
// space, computed from frame data only:
//   Rc - (1/4) Hbar^2 - (1/2) d*Hbar + nabla^+ d phibar
struct FrameTensor2 {
  const TotalFrame* frame = nullptr;
  std::vector<std::vector<double>> v;  // [a*D+b][p]

  double at(int a, int b, std::size_t p) const { return v[std::size_t(a) * frame->dim() + b][p]; }
  double sup_norm() const {
    double m = 0;
    for (auto& c : v)
      for (double x : c) m = std::max(m, std::abs(x));
    return m;
  }
};

inline FrameTensor2 frame_weighted_ricci_oracle(const TotalSpaceData& ts) {
  const TotalFrame& fr = ts.frame;
  const PeriodicGrid& g = *fr.grid;
  const int D = fr.dim(), hd = fr.hdim();
  std::vector<std::vector<double>> rc_full;
  frame_ricci_oracle(fr, ts.gbar, &rc_full);
  FrameChristoffel ch(fr, ts.gbar);

  FrameTensor2 out;
  out.frame = &fr;
  out.v.assign(std::size_t(D) * D, std::vector<double>(g.npts, 0.0));

  // expand Hbar to full components and take covariant pieces pointwise
  // d phibar in the frame: horizontal components only
  RForm dphi = d(ts.phibar);
  std::vector<std::vector<double>> dH(std::size_t(ts.Hbar.keys.size()) * hd,
                                      std::vector<double>(g.npts));
  for (std::size_t c = 0; c < ts.Hbar.keys.size(); ++c)
    for (int mu = 0; mu < hd; ++mu)
      deriv_axis(g, ts.Hbar.comp[c].data(), dH[c * hd + mu].data(), mu, 1);
  std::vector<std::vector<double>> ddphi(std::size_t(hd) * hd, std::vector<double>(g.npts));
  for (int mu = 0; mu < hd; ++mu)
    for (int nu = 0; nu < hd; ++nu)
      deriv_axis(g, dphi.comp(nu), ddphi[std::size_t(mu) * hd + nu].data(), mu, 1);

  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      MatR gp = ts.gbar.point(p);
      MatR gi = gp.inverse();
      // full H components
      double Hc[8][8][8] = {};
      for (std::size_t c = 0; c < ts.Hbar.keys.size(); ++c) {
        auto [hm, vm] = ts.Hbar.keys[c];
        int idx[3], t = 0;
        for (int mu = 0; mu < hd; ++mu)
          if (hm & (1u << mu)) idx[t++] = mu;
        for (int j = 0; j < fr.vdim(); ++j)
          if (vm & (1u << j)) idx[t++] = hd + j;
        double val = ts.Hbar.comp[c][p];
        static const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
        static const double sg[6] = {1, 1, 1, -1, -1, -1};
        for (int q = 0; q < 6; ++q)
          Hc[idx[perms[q][0]]][idx[perms[q][1]]][idx[perms[q][2]]] = sg[q] * val;
      }
      // derivative of full H components along horizontal frame directions
      auto dHc = [&](int mu, int a, int b, int c) -> double {
        int arr[3] = {a, b, c};
        int sorted[3] = {a, b, c};
        std::sort(sorted, sorted + 3);
        if (sorted[0] == sorted[1] || sorted[1] == sorted[2]) return 0.0;
        int sgn = 1;
        for (int i = 0; i < 3; ++i)
          for (int j = i + 1; j < 3; ++j)
            if (arr[i] > arr[j]) sgn = -sgn;
        unsigned hm = 0, vm = 0;
        for (int i = 0; i < 3; ++i) {
          if (sorted[i] < hd)
            hm |= 1u << sorted[i];
          else
            vm |= 1u << (sorted[i] - hd);
        }
        int key = ts.Hbar.find(hm, vm);
        return sgn * dH[std::size_t(key) * hd + mu][p];
      };

      // d* Hbar (a,b) = -g^{cd} (nabla_c H)(d, a, b)
      for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b) {
          double h2 = 0;
          for (int c = 0; c < D; ++c)
            for (int d2 = 0; d2 < D; ++d2)
              for (int e = 0; e < D; ++e)
                for (int f = 0; f < D; ++f)
                  h2 += Hc[a][c][d2] * Hc[b][e][f] * gi(c, e) * gi(d2, f);
          double dstar = 0;
          for (int c = 0; c < D; ++c)
            for (int d2 = 0; d2 < D; ++d2) {
              double nabla = (c < hd) ? dHc(c, d2, a, b) : 0.0;
              for (int e = 0; e < D; ++e) {
                nabla -= ch.at(c, d2, e, p) * Hc[e][a][b];
                nabla -= ch.at(c, a, e, p) * Hc[d2][e][b];
                nabla -= ch.at(c, b, e, p) * Hc[d2][a][e];
              }
              dstar -= gi(c, d2) * nabla;
            }
          // nabla^+ d phibar: phibar is a pullback, d phi horizontal
          double ndphi = 0;
          if (a < hd && b < hd) ndphi += ddphi[std::size_t(a) * hd + b][p];
          for (int e = 0; e < D; ++e) {
            double gamp = ch.at(a, b, e, p);
            double tor = 0;
            for (int f = 0; f < D; ++f) tor += gi(e, f) * Hc[f][a][b];
            gamp += 0.5 * tor;
            if (e < hd) ndphi -= gamp * dphi.at(e, p);
          }
          out.v[std::size_t(a) * D + b][p] =
              rc_full[std::size_t(a) * D + b][p] - 0.25 * h2 - 0.5 * dstar + ndphi;
        }
    }
  });
  return out;
}

// the displayed four blocks of Rc^{Hbar, phibar} built from base data
inline FrameTensor2 weighted_bismut_ricci_components(const TotalSpaceData& ts,
                                                     const GeneralizedMetricState& st) {
  const TotalFrame& fr = ts.frame;
  const PeriodicGrid& g = *fr.grid;
  const QuadraticLieAlgebra& alg = *st.alg;
  const int D = fr.dim(), hd = fr.hdim();
  MetricData md(st.g);
  RiemannData rd(md);
  RForm H = st.three_form();
  RForm F = st.connection().curvature();

  Sym2Field sym = rd.ricci();
  if (g.dim() >= 3) sym.axpy(-0.25, sq_contract(H, md));
  sym.axpy(-1.0, fsq_contract(F, md, alg));
  sym += rd.hessian(ts.phibar);
  RForm dphi = d(ts.phibar);
  VecField gradphi = sharp(dphi, md);

  RForm skew = (g.dim() >= 3) ? codifferential(H, md) * -0.5 : RForm(g, 2, 1);
  if (g.dim() >= 3) skew.axpy(-0.5, interior(gradphi, H));

  RForm gauge = ym_codifferential(F, st.a, md, alg);
  if (g.dim() >= 3) gauge.axpy(-1.0, fh_contract(F, H, md, alg));
  gauge += interior(gradphi, F);

  FrameTensor2 out;
  out.frame = &fr;
  out.v.assign(std::size_t(D) * D, std::vector<double>(g.npts, 0.0));
  for (std::size_t p = 0; p < g.npts; ++p) {
    for (int a = 0; a < hd; ++a)
      for (int b = 0; b < hd; ++b) {
        double val = sym.at(a, b, p);
        if (a != b) {
          unsigned m1 = 1u << a, m2 = 1u << b;
          int s = merge_sign(std::min(m1, m2), std::max(m1, m2));
          double v = skew.at(g.comp_index[m1 | m2], p);
          val += (a < b ? s * v : -s * v);
        }
        out.v[std::size_t(a) * D + b][p] = val;
      }
    // (U, X) block: -<i_X(d_A* F - F .| H + i_{grad phi} F), U>_kappa
    for (int j = 0; j < fr.vdim(); ++j)
      for (int b = 0; b < hd; ++b) {
        double acc = 0;
        for (int l = 0; l < alg.dim; ++l) acc -= alg.kappa(j, l) * gauge.at(b, p, l);
        out.v[std::size_t(hd + j) * D + b][p] = acc;
      }
    // (X, U) and (U, V) blocks vanish
  }
  return out;
}

// |Hbar|^2 and R^{Hbar, phibar} from base data, plus the direct frame sums
struct TotalNorms {
  RForm hbar_sq_formula;  // |H|^2 + 3|F|^2 + |[.,.]|^2
  RForm hbar_sq_direct;
  RForm scalar_formula;  // R_g - (1/12)|H|^2 - (1/2)|F|^2 + (1/6)|[.,.]|^2 + 2 Lap phi - |dphi|^2
  RForm scalar_direct;
};

inline RForm frame_three_form_norm(const TotalSpaceData& ts) {
  const TotalFrame& fr = ts.frame;
  const PeriodicGrid& g = *fr.grid;
  const int D = fr.dim(), hd = fr.hdim();
  RForm out(g, 0, 1);
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      MatR gi = ts.gbar.point(p).inverse();
      double Hc[8][8][8] = {};
      for (std::size_t c = 0; c < ts.Hbar.keys.size(); ++c) {
        auto [hm, vm] = ts.Hbar.keys[c];
        int idx[3], t = 0;
        for (int mu = 0; mu < hd; ++mu)
          if (hm & (1u << mu)) idx[t++] = mu;
        for (int j = 0; j < fr.vdim(); ++j)
          if (vm & (1u << j)) idx[t++] = hd + j;
        double val = ts.Hbar.comp[c][p];
        static const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
        static const double sg[6] = {1, 1, 1, -1, -1, -1};
        for (int q = 0; q < 6; ++q)
          Hc[idx[perms[q][0]]][idx[perms[q][1]]][idx[perms[q][2]]] = sg[q] * val;
      }
      double acc = 0;
      for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b)
          for (int c = 0; c < D; ++c)
            for (int a2 = 0; a2 < D; ++a2)
              for (int b2 = 0; b2 < D; ++b2)
                for (int c2 = 0; c2 < D; ++c2)
                  acc += Hc[a][b][c] * Hc[a2][b2][c2] * gi(a, a2) * gi(b, b2) * gi(c, c2);
      out.at(0, p) = acc;
    }
  });
  return out;
}

inline TotalNorms total_norms(const TotalSpaceData& ts, const GeneralizedMetricState& st) {
  const PeriodicGrid& g = *st.grid;
  MetricData md(st.g);
  RiemannData rd(md);
  RForm H = st.three_form();
  RForm F = st.connection().curvature();
  double cart = 0.0;
  if (!st.alg->abelian()) {
    std::vector<double> w = ts.g_K_weights;
    if (w.empty()) {
      w.resize(st.alg->dim);
      for (int i = 0; i < st.alg->dim; ++i) w[i] = -st.alg->kappa(i, i);
    }
    cart = st.alg->cartan_norm_sq(w);
  }

  TotalNorms out;
  out.hbar_sq_formula = (g.dim() >= 3) ? tensor_norm_sq(H, md) : RForm(g, 0, 1);
  RForm f2 = f_norm_sq(F, md, *st.alg);
  for (std::size_t p = 0; p < g.npts; ++p)
    out.hbar_sq_formula.at(0, p) += 3.0 * f2.at(0, p) + cart;
  out.hbar_sq_direct = frame_three_form_norm(ts);

  out.scalar_formula = rd.scalar_curvature(rd.ricci());
  if (g.dim() >= 3) out.scalar_formula.axpy(-1.0 / 12.0, tensor_norm_sq(H, md));
  out.scalar_formula.axpy(-0.5, f2);
  out.scalar_formula.axpy(2.0, laplace_beltrami(ts.phibar, md));
  RForm dphi = d(ts.phibar);
  out.scalar_formula.axpy(-1.0, tensor_norm_sq(dphi, md));
  for (std::size_t p = 0; p < g.npts; ++p) out.scalar_formula.at(0, p) += cart / 6.0;

  // direct: R_gbar - (1/12)|Hbar|^2 + 2 Lap phibar - |d phibar|^2 with the
  // frame oracle trace
  TotalMetric rc = frame_ricci_oracle(ts.frame, ts.gbar);
  out.scalar_direct = RForm(g, 0, 1);
  const int D = ts.frame.dim();
  for (std::size_t p = 0; p < g.npts; ++p) {
    MatR gi = ts.gbar.point(p).inverse();
    double r = 0;
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) r += gi(a, b) * rc.at(std::min(a, b), std::max(a, b), p);
    out.scalar_direct.at(0, p) = r - out.hbar_sq_direct.at(0, p) / 12.0;
  }
  // phi terms: Lap_gbar phibar = Lap_g phi and |grad phibar| = |grad phi|
  RForm lap = laplace_beltrami(ts.phibar, md);
  RForm dphi2 = tensor_norm_sq(dphi, md);
  for (std::size_t p = 0; p < g.npts; ++p)
    out.scalar_direct.at(0, p) += 2.0 * lap.at(0, p) - dphi2.at(0, p);
  return out;
}

// ---------------------------------------------------------------------------
// GRF flow-line correspondence: base flow then lift, against the exact-Courant
// GRF on (gbar, bbar) integrated in the frame.
// ---------------------------------------------------------------------------
struct FrameGrfState {
  TotalFrame frame;
  TotalMetric gbar;
  TField bbar;
  TField Hbar0;  // background: Hbar at t=0 minus t_d(bbar at t=0)
};

struct FrameGrfTangent {
  std::vector<std::vector<double>> dg;  // pair-major
  TField db;
  FrameGrfTangent& operator+=(const FrameGrfTangent& o) {
    for (std::size_t i = 0; i < dg.size(); ++i)
      for (std::size_t p = 0; p < dg[i].size(); ++p) dg[i][p] += o.dg[i][p];
    db += o.db;
    return *this;
  }
  FrameGrfTangent operator*(double s) const {
    FrameGrfTangent r = *this;
    for (auto& c : r.dg)
      for (auto& v : c) v *= s;
    r.db = r.db * s;
    return r;
  }
};

inline FrameGrfState frame_grf_advance(const FrameGrfState& s, const FrameGrfTangent& t, double dt) {
  FrameGrfState out = s;
  for (std::size_t i = 0; i < out.gbar.g.size(); ++i)
    for (std::size_t p = 0; p < out.gbar.g[i].size(); ++p) out.gbar.g[i][p] += dt * t.dg[i][p];
  out.bbar.axpy(dt, t.db);
  return out;
}

inline FrameGrfTangent frame_grf_rhs(const FrameGrfState& s) {
  const TotalFrame& fr = s.frame;
  const PeriodicGrid& g = *fr.grid;
  const int D = fr.dim(), hd = fr.hdim();
  TField Hbar = s.Hbar0 + t_d(s.bbar);

  FrameGrfTangent out;
  out.dg.assign(TotalMetric::npairs(D), std::vector<double>(g.npts, 0.0));
  out.db = TField(fr, 2, 1);

  std::vector<std::vector<double>> rc_full;
  frame_ricci_oracle(fr, s.gbar, &rc_full);
  FrameChristoffel ch(fr, s.gbar);
  std::vector<std::vector<double>> dH(std::size_t(Hbar.keys.size()) * hd, std::vector<double>(g.npts));
  for (std::size_t c = 0; c < Hbar.keys.size(); ++c)
    for (int mu = 0; mu < hd; ++mu) deriv_axis(g, Hbar.comp[c].data(), dH[c * hd + mu].data(), mu, 1);

  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      MatR gp = s.gbar.point(p);
      MatR gi = gp.inverse();
      double Hc[8][8][8] = {};
      for (std::size_t c = 0; c < Hbar.keys.size(); ++c) {
        auto [hm, vm] = Hbar.keys[c];
        int idx[3], t = 0;
        for (int mu = 0; mu < hd; ++mu)
          if (hm & (1u << mu)) idx[t++] = mu;
        for (int j = 0; j < fr.vdim(); ++j)
          if (vm & (1u << j)) idx[t++] = hd + j;
        double val = Hbar.comp[c][p];
        static const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
        static const double sg[6] = {1, 1, 1, -1, -1, -1};
        for (int q = 0; q < 6; ++q)
          Hc[idx[perms[q][0]]][idx[perms[q][1]]][idx[perms[q][2]]] = sg[q] * val;
      }
      auto dHc = [&](int mu, int a, int b, int c) -> double {
        int arr[3] = {a, b, c};
        int sorted[3] = {a, b, c};
        std::sort(sorted, sorted + 3);
        if (sorted[0] == sorted[1] || sorted[1] == sorted[2]) return 0.0;
        int sgn = 1;
        for (int i = 0; i < 3; ++i)
          for (int j = i + 1; j < 3; ++j)
            if (arr[i] > arr[j]) sgn = -sgn;
        unsigned hm = 0, vm = 0;
        for (int i = 0; i < 3; ++i) {
          if (sorted[i] < hd)
            hm |= 1u << sorted[i];
          else
            vm |= 1u << (sorted[i] - hd);
        }
        return sgn * dH[std::size_t(Hbar.find(hm, vm)) * hd + mu][p];
      };
      // dg = -2 Rc + (1/2) Hbar^2
      for (int a = 0; a < D; ++a)
        for (int b = a; b < D; ++b) {
          double h2 = 0;
          for (int c = 0; c < D; ++c)
            for (int d2 = 0; d2 < D; ++d2)
              for (int e = 0; e < D; ++e)
                for (int f = 0; f < D; ++f)
                  h2 += Hc[a][c][d2] * Hc[b][e][f] * gi(c, e) * gi(d2, f);
          double rc_sym = 0.5 * (rc_full[std::size_t(a) * D + b][p] + rc_full[std::size_t(b) * D + a][p]);
          out.dg[TotalMetric::pair_index(a, b, D)][p] = -2.0 * rc_sym + 0.5 * h2;
        }
      // db = -d* Hbar
      for (int a = 0; a < D; ++a)
        for (int b = a + 1; b < D; ++b) {
          double dstar = 0;
          for (int c = 0; c < D; ++c)
            for (int d2 = 0; d2 < D; ++d2) {
              double nabla = (c < hd) ? dHc(c, d2, a, b) : 0.0;
              for (int e = 0; e < D; ++e) {
                nabla -= ch.at(c, d2, e, p) * Hc[e][a][b];
                nabla -= ch.at(c, a, e, p) * Hc[d2][e][b];
                nabla -= ch.at(c, b, e, p) * Hc[d2][a][e];
              }
              dstar -= gi(c, d2) * nabla;
            }
          unsigned hm = 0, vm = 0;
          if (a < hd)
            hm |= 1u << a;
          else
            vm |= 1u << (a - hd);
          if (b < hd)
            hm |= 1u << b;
          else
            vm |= 1u << (b - hd);
          out.db.comp[out.db.find(hm, vm)][p] = -dstar;
        }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Hermitian reduction over an abelian even-dimensional fiber: the total space
// carries Jbar = diag(J, J_K); both J and J_K pair frame directions as
// (even, odd), so the frame complex algebra is the standard one.
// ---------------------------------------------------------------------------

// sigma -> sigma(Jbar^{-1}., ..., Jbar^{-1}.) acting on frame components;
// covector images: e^{2j} -> e^{2j+1}, e^{2j+1} -> -e^{2j} within each pair.
inline TField t_jact(const TField& a, bool inverse) {
  const TotalFrame& fr = *a.frame;
  TField out(fr, a.degree, a.ldim);
  const int hd = fr.hdim();
  for (std::size_t c = 0; c < a.keys.size(); ++c) {
    auto [hm, vm] = a.keys[c];
    // map each covector through J; the image masks stay within pairs
    unsigned hm2 = 0, vm2 = 0;
    double sign = 1.0;
    std::vector<int> image;
    for (int mu = 0; mu < hd; ++mu)
      if (hm & (1u << mu)) {
        int img = (mu % 2 == 0) ? mu + 1 : mu - 1;
        double s = (mu % 2 == 0) ? 1.0 : -1.0;
        if (inverse) s = -s;
        sign *= s;
        image.push_back(img);
      }
    for (int j = 0; j < fr.vdim(); ++j)
      if (vm & (1u << j)) {
        int img = (j % 2 == 0) ? j + 1 : j - 1;
        double s = (j % 2 == 0) ? 1.0 : -1.0;
        if (inverse) s = -s;
        sign *= s;
        image.push_back(hd + img);
      }
    // permutation sign of sorting the image list
    for (std::size_t i = 0; i < image.size(); ++i)
      for (std::size_t j = i + 1; j < image.size(); ++j)
        if (image[i] > image[j]) sign = -sign;
    for (int idx : image) {
      if (idx < hd)
        hm2 |= 1u << idx;
      else
        vm2 |= 1u << (idx - hd);
    }
    int target = out.find(hm2, vm2);
    for (std::size_t i = 0; i < a.comp[c].size(); ++i) out.comp[target][i] += sign * a.comp[c][i];
  }
  return out;
}

// frame d^c = -Jbar^{-1} d (Jbar a), which extends i(dbar - del) in every
// degree (pinned against the complex-type machinery).
inline TField t_dc(const TField& a) {
  TField ja = t_jact(a, false);
  TField dja = t_d(ja);
  TField out = t_jact(dja, true);
  return out * -1.0;
}

// frame codifferential of a 2-form via the Koszul connection
inline TField t_codifferential2(const TField& a, const TotalMetric& tm) {
  const TotalFrame& fr = *a.frame;
  const PeriodicGrid& g = *fr.grid;
  const int D = fr.dim(), hd = fr.hdim();
  if (a.degree != 2) throw dimension_error("t_codifferential2 expects a 2-form");
  FrameChristoffel ch(fr, tm);
  std::vector<std::vector<double>> dA(std::size_t(a.keys.size()) * hd, std::vector<double>(g.npts));
  for (std::size_t c = 0; c < a.keys.size(); ++c)
    for (int mu = 0; mu < hd; ++mu) deriv_axis(g, a.comp[c].data(), dA[c * hd + mu].data(), mu, 1);
  TField out(fr, 1, 1);
  parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      MatR gi = tm.point(p).inverse();
      double Ac[8][8] = {};
      for (std::size_t c = 0; c < a.keys.size(); ++c) {
        auto [hm, vm] = a.keys[c];
        int idx[2], t = 0;
        for (int mu = 0; mu < hd; ++mu)
          if (hm & (1u << mu)) idx[t++] = mu;
        for (int j = 0; j < fr.vdim(); ++j)
          if (vm & (1u << j)) idx[t++] = hd + j;
        Ac[idx[0]][idx[1]] = a.comp[c][p];
        Ac[idx[1]][idx[0]] = -a.comp[c][p];
      }
      auto dAc = [&](int mu, int x, int y) -> double {
        if (x == y) return 0.0;
        int sgn = x < y ? 1 : -1;
        int lo2 = std::min(x, y), hi2 = std::max(x, y);
        unsigned hm = 0, vm = 0;
        if (lo2 < hd)
          hm |= 1u << lo2;
        else
          vm |= 1u << (lo2 - hd);
        if (hi2 < hd)
          hm |= 1u << hi2;
        else
          vm |= 1u << (hi2 - hd);
        return sgn * dA[std::size_t(a.find(hm, vm)) * hd + mu][p];
      };
      for (int b = 0; b < D; ++b) {
        double acc = 0;
        for (int c2 = 0; c2 < D; ++c2)
          for (int d2 = 0; d2 < D; ++d2) {
            double nabla = (c2 < hd) ? dAc(c2, d2, b) : 0.0;
            for (int e = 0; e < D; ++e) {
              nabla -= ch.at(c2, d2, e, p) * Ac[e][b];
              nabla -= ch.at(c2, b, e, p) * Ac[d2][e];
            }
            acc -= gi(c2, d2) * nabla;
          }
        unsigned hm = 0, vm = 0;
        if (b < hd)
          hm = 1u << b;
        else
          vm = 1u << (b - hd);
        out.comp[out.find(hm, vm)][p] = acc;
      }
    }
  });
  return out;
}

struct HermitianReductionResiduals {
  double pluriclosed;  // sup |dd^c omegabar - p*(dd^c omega + <F^F>)|
  double rho_identity; // sup |rhobar_B - (p*rho_B + <Lam F, F> + <d(Lam F) ^ A>)|
  double otot_sign;    // pinned sign s in omegabar = p* omega + s (1/2) <Jbar A ^ A>
};

inline HermitianReductionResiduals hermitian_reduction_check(const RForm& omega,
                                                             const ConnectionData& conn) {
  const PeriodicGrid& g = *omega.grid;
  const QuadraticLieAlgebra& alg = *conn.alg;
  if (!alg.abelian() || alg.dim != 2)
    throw config_error("hermitian_reduction_check expects the abelian K = T^2 fiber");
  if (g.n != 1) throw config_error("hermitian_reduction_check runs over a T^2 base");
  RForm F = conn.curvature();
  if (type_residual(F, 1, 1) > 1e-8 * (1 + F.sup_norm()))
    throw config_error("frame connection has (0,2) curvature");

  TotalFrame fr{&g, &alg, F};
  HermitianData hd(omega);

  // In the frame adapted to the connection itself, gbar is block diagonal:
  // p*g + g_K vertical, with the full curvature in the structure functions.
  GeneralizedMetricState st = GeneralizedMetricState::flat(g, alg);
  st.g = hd.metric.g;
  st.F0 = F;
  TotalSpaceData ts = build_total(st, RForm(g, 0, 1));
  const int hd2 = fr.hdim();
  TField omegabar(fr, 2, 1);
  for (std::size_t c = 0; c < omegabar.keys.size(); ++c) {
    auto [hm, vm] = omegabar.keys[c];
    int idx[2], t = 0;
    for (int mu = 0; mu < hd2; ++mu)
      if (hm & (1u << mu)) idx[t++] = mu;
    for (int j = 0; j < fr.vdim(); ++j)
      if (vm & (1u << j)) idx[t++] = hd2 + j;
    auto jmap = [hd2](int a2) {
      int base = a2 < hd2 ? a2 : a2 - hd2;
      int img = (base % 2 == 0) ? base + 1 : base - 1;
      double s = (base % 2 == 0) ? 1.0 : -1.0;
      return std::pair<int, double>{a2 < hd2 ? img : img + hd2, s};
    };
    auto [j0, s0] = jmap(idx[0]);
    for (std::size_t p = 0; p < g.npts; ++p)
      omegabar.comp[c][p] = s0 * ts.gbar.at(std::min(j0, idx[1]), std::max(j0, idx[1]), p);
  }

  // pin the otot sign: omegabar - p*omega = s (1/2)<Jbar A ^ A>; in the
  // adapted frame A is the vertical coframe
  TField A = vertical_coframe(fr);
  TField jA = t_jact(A, false) * -1.0;  // (J a)(X) = -a(JX), matching j_act
  TField half = t_wedge_pair(jA, A, alg) * 0.5;
  TField diff = omegabar - pullback(fr, omega);
  double sp = (diff - half).sup_norm();
  double sm = (diff + half).sup_norm();
  double sign = sp < sm ? 1.0 : -1.0;
  double pin_res = std::min(sp, sm);

  // pluriclosed residual: on a T^2 base the pullback part vanishes, so
  // dd^c omegabar must vanish on the total space
  TField ddc = t_d(t_dc(omegabar));
  double plc = ddc.sup_norm() + (pin_res > 1e-6 ? 1e9 : 0.0);

  // rhobar_B via the frame potential formula
  TField dstar = t_codifferential2(omegabar, ts.gbar);
  // ||Omegabar||^2 = 2^2 / (omegabar^2/2 top coefficient)
  TField top = t_wedge(omegabar, omegabar);
  int top_key = top.find((1u << hd2) - 1, (1u << fr.vdim()) - 1);
  RForm lognorm(g, 0, 1);
  for (std::size_t p = 0; p < g.npts; ++p) {
    double dens = top.comp[top_key][p] * 0.5;
    if (dens <= 0) throw positivity_error("omegabar^2 is not positive");
    lognorm.at(0, p) = 0.5 * std::log(4.0 / dens);
  }
  TField dlog = t_dc(pullback(fr, lognorm));
  TField rhobar = t_d(dstar - dlog) * -1.0;

  // base side: p*rho_B + <Lam F, F> + <d(Lam F) ^ A>
  RForm lamF = lambda_trace(omega, F);
  RForm rho = bismut_ricci(hd);
  RForm pairing = pair_form_section(F, lamF, alg);
  TField rhs = pullback(fr, rho + pairing);
  rhs += t_wedge_pair(pullback(fr, d(lamF)), A, alg);
  double rho_res = (rhobar - rhs).sup_norm();

  return {plc, rho_res, sign};
}

// sup-difference of gbar between base-then-lift and lift-then-flow
inline double grf_correspondence_check(const GeneralizedMetricState& st0, double dt, int steps,
                                       const std::vector<double>& g_K_weights = {}) {
  // base route
  GeneralizedMetricState st = st0;
  for (int s = 0; s < steps; ++s)
    st = rk4_step<GrfTangent>(st, [](const GeneralizedMetricState& x) { return grf_rhs(x); },
                              [](const GeneralizedMetricState& x, const GrfTangent& t, double h) {
                                return grf_advance(x, t, h);
                              },
                              dt);
  RForm zero_phi(*st0.grid, 0, 1);
  TotalSpaceData lifted = build_total(st, zero_phi, g_K_weights);

  // frame route
  TotalSpaceData start = build_total(st0, zero_phi, g_K_weights);
  FrameGrfState fs{start.frame, start.gbar, start.bbar, start.Hbar - t_d(start.bbar)};
  for (int s = 0; s < steps; ++s)
    fs = rk4_step<FrameGrfTangent>(fs, [](const FrameGrfState& x) { return frame_grf_rhs(x); },
                                   [](const FrameGrfState& x, const FrameGrfTangent& t, double h) {
                                     return frame_grf_advance(x, t, h);
                                   },
                                   dt);
  double worst = 0;
  for (std::size_t i = 0; i < fs.gbar.g.size(); ++i)
    for (std::size_t p = 0; p < fs.gbar.g[i].size(); ++p)
      worst = std::max(worst, std::abs(fs.gbar.g[i][p] - lifted.gbar.g[i][p]));
  return worst;
}

}  // namespace strand
