#pragma once

#include "strand/reduction.hpp"

namespace strand {

// Named initial-data recipes. Each fixture fills exactly one of the flow
// states; backgrounds for the convergence monitors ride along.
struct FixtureData {
  FlowKind kind = FlowKind::grf;

  // grf / dilaton
  GeneralizedMetricState grf_state;
  RForm phi;
  std::vector<double> g_K_weights;

  // pcf unitary
  PcfUnitaryState unitary;

  // pcf holomorphic / hym
  PcfHolState hol;

  // one-form reduction
  OneformState oneform;

  // flat backgrounds for Phi_k / tr_G monitors
  bool has_flat_background = false;
  RForm omega_flat;

  // recorded constants for regression-style acceptance bounds
  double phi1_time_bound = 0.0;
};

inline std::vector<std::string> fixture_names() {
  return {"null_flow",       "grf_band",      "grf_t4_band",    "pcf_unitary_band",
          "flat_convergence", "pcf_hol_t4",    "dilaton_band",   "oneform_band",
          "correspondence",   "indefinite_g",  "broken_bianchi"};
}

// band-limited pluriclosed omega perturbation on any torus: 2 Re(del gamma)
inline RForm pluriclosed_band(const PeriodicGrid& g, const Band& band, double amp, Rng& rng) {
  RForm gamma_re = random_band_form(g, 1, 1, band, amp, rng);
  RForm gamma_im = random_band_form(g, 1, 1, band, amp, rng);
  CForm gamma_c = complexify(gamma_re);
  for (std::size_t i = 0; i < gamma_c.data.size(); ++i) gamma_c.data[i] += cplx(0, 1) * gamma_im.data[i];
  CpqForm g01 = to_complex(gamma_c).project(0, 1);
  return real_part(to_real_basis(del(g01))) * 2.0;
}

inline FixtureData make_fixture(const std::string& name, const PeriodicGrid& g,
                                const QuadraticLieAlgebra& alg, double amplitude,
                                std::uint64_t seed, const std::vector<double>& g_K_weights) {
  Rng rng(seed * 0x9e3779b97f4a7c15ull + 0x1234567);
  FixtureData fx;
  fx.g_K_weights = g_K_weights;

  if (name == "null_flow") {
    fx.kind = FlowKind::grf;
    fx.grf_state = GeneralizedMetricState::flat(g, alg);
    fx.phi = RForm(g, 0, 1);
    return fx;
  }
  if (name == "grf_band" || name == "grf_t4_band") {
    if (name == "grf_t4_band" && g.n != 2) throw config_error("grf_t4_band needs a T^4 grid");
    fx.kind = FlowKind::grf;
    fx.grf_state = GeneralizedMetricState::flat(g, alg);
    auto w = random_band_scalar(g, {1, 1}, amplitude, rng);
    auto w2 = random_band_scalar(g, {1, 1}, amplitude, rng);
    for (std::size_t p = 0; p < g.npts; ++p) {
      fx.grf_state.g.at(0, 0, p) = std::exp(w[p]);
      fx.grf_state.g.at(1, 1, p) = std::exp(-0.5 * w[p]);
      fx.grf_state.g.at(0, 1, p) = 0.2 * w2[p];
    }
    fx.grf_state.b = random_band_form(g, 2, 1, {1, 1}, amplitude, rng);
    fx.grf_state.a = random_band_form(g, 1, alg.dim, {1, 1}, amplitude, rng);
    if (g.n == 1) {
      // constant background curvature on the nontrivial bundle
      for (std::size_t p = 0; p < g.npts; ++p) fx.grf_state.F0.at(0, p, 0) = 0.3;
    } else {
      // T^4: constant F0 blocks keep <F0 ^ F0> = 0 with dH0 = 0
      for (std::size_t p = 0; p < g.npts; ++p) {
        fx.grf_state.F0.at(g.comp_index[0b0011], p, 0) = 0.2;
        if (alg.dim > 1) fx.grf_state.F0.at(g.comp_index[0b1100], p, 1) = -0.15;
      }
      if (fx.grf_state.background_bianchi_residual() > 1e-10)
        throw config_error("grf_t4_band background violates the Bianchi identity");
    }
    fx.phi = RForm(g, 0, 1);
    return fx;
  }
  if (name == "pcf_unitary_band") {
    fx.kind = FlowKind::pcf_unitary;
    fx.unitary = PcfUnitaryState{&g, &alg, omega_standard(g), RForm(g, 2, 1),
                                 RForm(g, 1, alg.dim), RForm(g, 2, alg.dim)};
    auto u = random_band_scalar(g, {1, 1}, amplitude, rng);
    for (int c = 0; c < g.ncomps(2); ++c)
      for (std::size_t p = 0; p < g.npts; ++p) fx.unitary.omega.at(c, p) *= std::exp(u[p]);
    fx.unitary.a = random_band_form(g, 1, alg.dim, {1, 1}, amplitude, rng);
    for (std::size_t p = 0; p < g.npts; ++p) fx.unitary.F0.at(0, p, 0) = 0.3;
    return fx;
  }
  if (name == "flat_convergence") {
    // A flat-background convergence run: perturbation modes with |k|^2 >= 4 so
    // the slowest heat mode decays below the final thresholds by t = 5.
    if (g.n != 1) throw config_error("flat_convergence runs on T^2");
    fx.kind = FlowKind::pcf_holomorphic;
    Band band{2, 4};
    RForm w = omega_standard(g);
    auto u = random_band_scalar(g, band, amplitude, rng);
    for (std::size_t p = 0; p < g.npts; ++p) w.at(0, p) *= std::exp(u[p]);
    Reduction h = Reduction::identity(g, alg);
    for (int l = 0; l < alg.dim; ++l) h.u[l] = random_band_scalar(g, band, amplitude, rng);
    fx.hol = PcfHolState{&g, w, h, Reduction::identity(g, alg), CpqForm(g, 2, 1), false};
    fx.has_flat_background = true;
    fx.omega_flat = omega_standard(g);
    fx.phi1_time_bound = 0.05;  // regression bound recorded for the manifest
    return fx;
  }
  if (name == "pcf_hol_t4") {
    if (g.n != 2) throw config_error("pcf_hol_t4 needs a T^4 grid");
    if (alg.dim < 2 || !alg.abelian()) throw config_error("pcf_hol_t4 expects u(1)^2");
    fx.kind = FlowKind::pcf_holomorphic;
    Reduction h = Reduction::identity(g, alg);
    for (int l = 0; l < alg.dim; ++l) h.u[l] = random_band_scalar(g, {1, 1}, amplitude, rng);
    // Bianchi-consistent omega through the Poisson construction
    CForm Fc = chern_connection_curvature(h);
    CpqForm F11 = to_complex(Fc).project(1, 1);
    RForm FF = real_part(to_real_basis(cwedge_pair_hol(F11, F11, alg)));
    std::vector<double> rhs(g.npts);
    for (std::size_t p = 0; p < g.npts; ++p) rhs[p] = -FF.at(0, p);
    auto phi = poisson_solve(g, rhs);
    RForm phif(g, 0, 1);
    std::copy(phi.begin(), phi.end(), phif.comp(0));
    RForm w = omega_standard(g) + wedge(phif, omega_standard(g));
    fx.hol = PcfHolState{&g, w, h, Reduction::identity(g, alg), CpqForm(g, 2, 1), true};
    return fx;
  }
  if (name == "dilaton_band") {
    fx.kind = FlowKind::dilaton_coupled;
    fx.grf_state = GeneralizedMetricState::flat(g, alg);
    auto w = random_band_scalar(g, {1, 1}, amplitude, rng);
    for (std::size_t p = 0; p < g.npts; ++p) {
      fx.grf_state.g.at(0, 0, p) = std::exp(w[p]);
      fx.grf_state.g.at(1, 1, p) = std::exp(-0.6 * w[p]);
    }
    fx.grf_state.a = random_band_form(g, 1, alg.dim, {1, 1}, amplitude, rng);
    if (g.n == 1)
      for (std::size_t p = 0; p < g.npts; ++p) fx.grf_state.F0.at(0, p, 0) = 0.25;
    fx.phi = random_band_form(g, 0, 1, {1, 1}, amplitude, rng);
    return fx;
  }
  if (name == "oneform_band") {
    if (g.n != 1) throw config_error("oneform_band runs on T^2");
    fx.kind = FlowKind::oneform_reduced;
    Reduction h = Reduction::identity(g, alg);
    for (int l = 0; l < alg.dim; ++l) h.u[l] = random_band_scalar(g, {1, 1}, amplitude, rng);
    RForm what = omega_standard(g);
    auto u = random_band_scalar(g, {1, 1}, amplitude, rng);
    for (std::size_t p = 0; p < g.npts; ++p) what.at(0, p) *= std::exp(u[p]);
    fx.oneform = OneformState{&g, CpqForm(g, 1, 1), h, Reduction::identity(g, alg), what,
                              omega_standard(g)};
    return fx;
  }
  if (name == "correspondence") {
    if (g.n != 1) throw config_error("correspondence runs on T^2");
    fx.kind = FlowKind::grf;
    fx.grf_state = GeneralizedMetricState::flat(g, alg);
    for (std::size_t p = 0; p < g.npts; ++p) fx.grf_state.F0.at(0, p, 0) = 0.5;
    fx.grf_state.b = random_band_form(g, 2, 1, {1, 1}, amplitude, rng);
    fx.phi = RForm(g, 0, 1);
    return fx;
  }
  if (name == "indefinite_g") {
    fx.kind = FlowKind::grf;
    fx.grf_state = GeneralizedMetricState::flat(g, alg);
    for (std::size_t p = 0; p < g.npts; ++p) fx.grf_state.g.at(0, 0, p) = -1.0;
    fx.phi = RForm(g, 0, 1);
    return fx;
  }
  if (name == "broken_bianchi") {
    if (g.n != 2) throw config_error("broken_bianchi needs a T^4 grid");
    fx.kind = FlowKind::grf;
    fx.grf_state = GeneralizedMetricState::flat(g, alg);
    // H0 with dH0 != 0 = <F0 ^ F0>
    std::array<double, 4> x{};
    for (std::size_t p = 0; p < g.npts; ++p) {
      g.coords(p, x.data());
      fx.grf_state.H0.at(g.comp_index[0b0111], p) = 0.2 * std::sin(x[3]);
    }
    fx.phi = RForm(g, 0, 1);
    return fx;
  }
  throw config_error("unknown fixture: " + name);
}

}  // namespace strand
