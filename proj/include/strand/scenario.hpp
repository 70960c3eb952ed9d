#pragma once

#include <filesystem>
#include <set>

#include "json.hpp"
#include "strand/fixtures.hpp"
#include "strand/io.hpp"

namespace strand {

// ---------------------------------------------------------------------------
// Scenario configs: structured JSON with a versioned schema; unknown keys are
// errors so tolerance-critical runs cannot silently typo an option.
// ---------------------------------------------------------------------------
struct ScenarioConfig {
  std::string scenario;
  PeriodicGrid grid;
  QuadraticLieAlgebra algebra;
  std::vector<double> g_K_weights;
  std::string fixture;
  double amplitude = 0.0;
  std::uint64_t seed = 1;
  FlowSpec flow;
  std::string output_dir = "out";
  int snapshot_stride = 0;  // 0: final snapshot only
  bool plots = false;
};

namespace detail {
inline void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw config_error(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw config_error("unknown key '" + it.key() + "' in " + where);
}
}  // namespace detail

inline FlowKind parse_flow_kind(const std::string& s) {
  if (s == "grf") return FlowKind::grf;
  if (s == "grf_gauge_fixed") return FlowKind::grf_gauge_fixed;
  if (s == "pcf_unitary") return FlowKind::pcf_unitary;
  if (s == "pcf_holomorphic") return FlowKind::pcf_holomorphic;
  if (s == "hym_G") return FlowKind::hym_G;
  if (s == "dilaton_coupled") return FlowKind::dilaton_coupled;
  if (s == "oneform_reduced") return FlowKind::oneform_reduced;
  throw config_error("unknown flow kind: " + s);
}

inline ScenarioConfig parse_config(const nlohmann::json& j) {
  detail::require_keys(j, {"version", "scenario", "grid", "algebra", "initial_data", "flow", "output"},
                       "config");
  if (!j.contains("version") || j.at("version").get<int>() != 1)
    throw config_error("config version must be 1");
  ScenarioConfig cfg;
  cfg.scenario = j.at("scenario").get<std::string>();

  const auto& jg = j.at("grid");
  detail::require_keys(jg, {"n", "sizes", "lengths"}, "grid");
  int n = jg.at("n").get<int>();
  auto sizes = jg.at("sizes").get<std::vector<int>>();
  if (int(sizes.size()) != 2 * n) throw config_error("grid.sizes must list 2n entries");
  std::array<int, 4> sz{1, 1, 1, 1};
  std::array<double, 4> len{};
  for (int i = 0; i < 2 * n; ++i) sz[i] = sizes[i];
  if (jg.contains("lengths")) {
    auto lengths = jg.at("lengths").get<std::vector<double>>();
    if (int(lengths.size()) != 2 * n) throw config_error("grid.lengths must list 2n entries");
    for (int i = 0; i < 2 * n; ++i) len[i] = lengths[i];
  }
  cfg.grid = PeriodicGrid(n, sz, len);

  const auto& ja = j.at("algebra");
  detail::require_keys(ja, {"name", "params", "g_K_weights"}, "algebra");
  std::vector<double> params;
  if (ja.contains("params")) params = ja.at("params").get<std::vector<double>>();
  cfg.algebra = make_algebra(ja.at("name").get<std::string>(), params);
  if (ja.contains("g_K_weights")) cfg.g_K_weights = ja.at("g_K_weights").get<std::vector<double>>();

  const auto& ji = j.at("initial_data");
  detail::require_keys(ji, {"fixture", "amplitude", "seed"}, "initial_data");
  cfg.fixture = ji.at("fixture").get<std::string>();
  bool known = false;
  for (auto& f : fixture_names()) known |= (f == cfg.fixture);
  if (!known) throw config_error("unknown fixture: " + cfg.fixture);
  if (ji.contains("amplitude")) cfg.amplitude = ji.at("amplitude").get<double>();
  if (ji.contains("seed")) cfg.seed = ji.at("seed").get<std::uint64_t>();

  const auto& jf = j.at("flow");
  detail::require_keys(jf, {"kind", "dt", "t_end", "cfl_safety", "monitor_stride"}, "flow");
  cfg.flow.kind = parse_flow_kind(jf.at("kind").get<std::string>());
  cfg.flow.dt = jf.at("dt").get<double>();
  cfg.flow.t_end = jf.at("t_end").get<double>();
  if (jf.contains("cfl_safety")) cfg.flow.cfl_safety = jf.at("cfl_safety").get<double>();
  if (jf.contains("monitor_stride")) cfg.flow.monitor_stride = jf.at("monitor_stride").get<int>();
  cfg.flow.validate();

  const auto& jo = j.at("output");
  detail::require_keys(jo, {"directory", "snapshot_stride", "plots"}, "output");
  cfg.output_dir = jo.at("directory").get<std::string>();
  if (jo.contains("snapshot_stride")) cfg.snapshot_stride = jo.at("snapshot_stride").get<int>();
  if (jo.contains("plots")) cfg.plots = jo.at("plots").get<bool>();
  return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Scenario driver: build fixture, run the flow, emit CSV / manifest /
// snapshots / plots. Exit codes: 0 reached t_end, 2 positivity loss, 3 NaN,
// 4 config error.
// ---------------------------------------------------------------------------
struct VerifyReport {
  double bianchi_residual = 0;
  double min_eig = 0;
  std::pair<int, int> signature{0, 0};
  bool ok = true;
  std::string detail;
};

inline VerifyReport verify_fixture(const ScenarioConfig& cfg) {
  FixtureData fx =
      make_fixture(cfg.fixture, cfg.grid, cfg.algebra, cfg.amplitude, cfg.seed, cfg.g_K_weights);
  VerifyReport rep;
  rep.signature = cfg.algebra.signature;
  try {
    switch (fx.kind) {
      case FlowKind::grf:
      case FlowKind::grf_gauge_fixed:
      case FlowKind::dilaton_coupled: {
        rep.bianchi_residual = fx.grf_state.background_bianchi_residual();
        RForm H = fx.grf_state.three_form();
        RForm F = fx.grf_state.connection().curvature();
        rep.bianchi_residual =
            std::max(rep.bianchi_residual, bianchi_residual(H, F, *fx.grf_state.alg));
        MetricData md(fx.grf_state.g);
        rep.min_eig = md.min_eig;
        break;
      }
      case FlowKind::pcf_unitary: {
        HermitianData hd(fx.unitary.omega);
        rep.min_eig = hd.metric.min_eig;
        RForm F = ConnectionData{fx.unitary.alg, fx.unitary.a, fx.unitary.F0}.curvature();
        rep.bianchi_residual = type_residual(F, 1, 1);
        break;
      }
      case FlowKind::pcf_holomorphic:
      case FlowKind::hym_G: {
        HermitianData hd(fx.hol.omega);
        rep.min_eig = std::min(hd.metric.min_eig, fx.hol.h.min_eigenvalue());
        CForm F = chern_connection_curvature(fx.hol.h);
        RForm lhs = (cfg.grid.dim() >= 4) ? d(dc(fx.hol.omega)) : RForm(cfg.grid, 4, 1);
        if (cfg.grid.dim() >= 4) {
          CpqForm Fz = to_complex(F).project(1, 1);
          lhs += real_part(to_real_basis(cwedge_pair_hol(Fz, Fz, cfg.algebra)));
        }
        rep.bianchi_residual = lhs.sup_norm();
        break;
      }
      case FlowKind::oneform_reduced: {
        HermitianData hd(fx.oneform.omega());
        rep.min_eig = hd.metric.min_eig;
        break;
      }
    }
    if (rep.bianchi_residual > 1e-8) {
      rep.ok = false;
      rep.detail = "anomaly identity residual above tolerance";
    }
    if (rep.min_eig <= 1e-10) {
      rep.ok = false;
      rep.detail = "initial data is not positive";
    }
  } catch (const positivity_error& e) {
    rep.ok = false;
    rep.min_eig = -1;
    rep.detail = e.what();
  }
  return rep;
}

inline int run_scenario(const ScenarioConfig& cfg, std::string* error_out = nullptr) {
  namespace fs = std::filesystem;
  try {
    FixtureData fx =
        make_fixture(cfg.fixture, cfg.grid, cfg.algebra, cfg.amplitude, cfg.seed, cfg.g_K_weights);
    fs::create_directories(cfg.output_dir);
    std::vector<MonitorRecord> recs;
    std::vector<double> dilaton_series;
    auto snap_name = [&](const char* field, double t) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "/%s_t%.6f.bin", field, t);
      return cfg.output_dir + buf;
    };
    auto snap_due = [&](double t) {
      if (cfg.snapshot_stride <= 0) return false;
      long step = std::lround(t / cfg.flow.dt);
      return step > 0 && step % (std::int64_t(cfg.snapshot_stride) * cfg.flow.monitor_stride) == 0;
    };

    auto flat_G = [&]() {
      HermitianData hdf(fx.omega_flat);
      Reduction idh = Reduction::identity(cfg.grid, cfg.algebra);
      return assemble_G(hdf, nullptr, idh, idh);
    };

    switch (cfg.flow.kind) {
      case FlowKind::grf:
      case FlowKind::grf_gauge_fixed: {
        check_cfl(cfg.flow, cfg.grid, sup_inverse_metric_eig(fx.grf_state.g));
        bool lee_mode = cfg.flow.kind == FlowKind::grf_gauge_fixed;
        auto rhs = [lee_mode](const GeneralizedMetricState& s) {
          if (!lee_mode) return grf_rhs(s);
          return grf_gauge_rhs(s, lee_vector_field(s));
        };
        recs = run_flow<GrfTangent>(
            cfg.flow, fx.grf_state, rhs,
            [](const GeneralizedMetricState& s, const GrfTangent& t, double h) {
              return grf_advance(s, t, h);
            },
            [](const GeneralizedMetricState& s) {
              if (!s.g.finite() || !s.b.finite() || !s.a.finite()) throw nan_error("state has NaN");
              MetricData guard(s.g);
            },
            [&](const GeneralizedMetricState& s, double t) {
              MonitorRecord r;
              r.t = t;
              MetricData md(s.g);
              r.min_eig_g = md.min_eig;
              RForm H = s.three_form();
              RForm F = s.connection().curvature();
              r.bianchi_residual = bianchi_residual(H, F, *s.alg);
              r.sup_F = F.sup_norm();
              if (s.alg->signature.first == 0) {
                auto lr = lambda_eigen(s, fx.g_K_weights.empty() && !s.alg->abelian()
                                              ? std::vector<double>{}
                                              : fx.g_K_weights);
                r.lambda = lr.lambda;
              }
              if (snap_due(t)) {
                snapshot::write_field(snap_name("b", t), s.b);
                snapshot::write_field(snap_name("a", t), s.a);
              }
              return r;
            });
        snapshot::write_field(cfg.output_dir + "/final_b.bin", fx.grf_state.b);
        snapshot::write_field(cfg.output_dir + "/final_a.bin", fx.grf_state.a);
        break;
      }
      case FlowKind::dilaton_coupled: {
        check_cfl(cfg.flow, cfg.grid, sup_inverse_metric_eig(fx.grf_state.g));
        DilatonState ds{fx.grf_state, fx.phi, fx.g_K_weights};
        recs = run_flow<DilatonTangent>(
            cfg.flow, ds, [](const DilatonState& s) { return dilaton_rhs(s); },
            [](const DilatonState& s, const DilatonTangent& t, double h) {
              return dilaton_advance(s, t, h);
            },
            [](const DilatonState& s) {
              if (!s.st.g.finite() || !s.phi.finite()) throw nan_error("state has NaN");
              MetricData guard(s.st.g);
            },
            [&](const DilatonState& s, double t) {
              MonitorRecord r;
              r.t = t;
              MetricData md(s.st.g);
              r.min_eig_g = md.min_eig;
              RForm F = s.st.connection().curvature();
              r.sup_F = F.sup_norm();
              RForm sc = generalized_scalar(s.st, s.phi);
              double mn = sc.data[0];
              for (double v : sc.data) mn = std::min(mn, v);
              r.scalar_min = mn;
              r.dilaton_value = s.phi.at(0, 0);
              return r;
            });
        snapshot::write_field(cfg.output_dir + "/final_phi.bin", ds.phi);
        break;
      }
      case FlowKind::pcf_unitary: {
        HermitianData hd0(fx.unitary.omega);
        check_cfl(cfg.flow, cfg.grid, sup_inverse_metric_eig(hd0.metric.g));
        recs = run_flow<PcfUnitaryTangent>(
            cfg.flow, fx.unitary, [](const PcfUnitaryState& s) { return pcf_unitary_rhs(s); },
            [](const PcfUnitaryState& s, const PcfUnitaryTangent& t, double h) {
              return pcf_unitary_advance(s, t, h);
            },
            [](const PcfUnitaryState& s) {
              if (!s.omega.finite() || !s.a.finite()) throw nan_error("state has NaN");
              HermitianData guard(s.omega);
            },
            [&](const PcfUnitaryState& s, double t) {
              MonitorRecord r;
              r.t = t;
              HermitianData hd(s.omega);
              r.min_eig_g = hd.metric.min_eig;
              RForm F = ConnectionData{s.alg, s.a, s.F0}.curvature();
              r.sup_F = F.sup_norm();
              r.bianchi_residual = type_residual(F, 1, 1);
              r.dilaton_value = dilaton_functional(hd);
              return r;
            });
        snapshot::write_field(cfg.output_dir + "/final_omega.bin", fx.unitary.omega);
        break;
      }
      case FlowKind::hym_G: {
        HermitianData hd0(fx.hol.omega);
        check_cfl(cfg.flow, cfg.grid, sup_inverse_metric_eig(hd0.metric.g));
        BlockHermitianMetric G = assemble_G(hd0, fx.hol.has_beta ? &fx.hol.beta : nullptr,
                                            fx.hol.h, fx.hol.h0);
        recs = run_flow<HymGTangent>(
            cfg.flow, G, [](const BlockHermitianMetric& s) { return hym_G_rhs(s); },
            [](const BlockHermitianMetric& s, const HymGTangent& t, double h) {
              return hym_advance(s, t, h);
            },
            [](const BlockHermitianMetric& s) {
              for (const auto& m : s.G)
                for (int rr = 0; rr < s.dim(); ++rr)
                  for (int cc = 0; cc < s.dim(); ++cc)
                    if (!std::isfinite(std::abs(m(rr, cc)))) throw nan_error("G has NaN");
              if (s.alg->signature.first == 0 && s.min_pairing_eig() <= 1e-10)
                throw positivity_error("block metric lost positivity");
            },
            [&](const BlockHermitianMetric& s, double t) {
              MonitorRecord r;
              r.t = t;
              r.min_eig_g = s.min_pairing_eig();
              CForm S = second_ricci_G(omega_from_block(s), s);
              r.sup_F = S.sup_norm();
              return r;
            });
        break;
      }
      case FlowKind::pcf_holomorphic: {
        HermitianData hd0(fx.hol.omega);
        check_cfl(cfg.flow, cfg.grid, sup_inverse_metric_eig(hd0.metric.g) *
                                          std::max(1.0, 1.0 / fx.hol.h.min_eigenvalue()));
        BlockHermitianMetric GF;
        if (fx.has_flat_background) GF = flat_G();
        recs = run_flow<PcfHolTangent>(
            cfg.flow, fx.hol, [](const PcfHolState& s) { return pcf_hol_rhs(s); },
            [](const PcfHolState& s, const PcfHolTangent& t, double h) {
              return pcf_hol_advance(s, t, h);
            },
            [](const PcfHolState& s) {
              if (!s.omega.finite()) throw nan_error("state has NaN");
              HermitianData guard(s.omega);
              s.h.check_positive();
            },
            [&](const PcfHolState& s, double t) {
              MonitorRecord r;
              r.t = t;
              HermitianData hd(s.omega);
              r.min_eig_g = hd.metric.min_eig;
              CForm F = chern_connection_curvature(s.h);
              r.sup_F = F.sup_norm();
              if (cfg.grid.dim() >= 4) {
                RForm lhs = d(dc(s.omega));
                CpqForm Fz = to_complex(F).project(1, 1);
                lhs += real_part(to_real_basis(cwedge_pair_hol(Fz, Fz, *s.h.alg)));
                r.bianchi_residual = lhs.sup_norm();
              }
              r.dilaton_value = dilaton_functional(hd);
              if (snap_due(t)) snapshot::write_field(snap_name("omega", t), s.omega);
              if (fx.has_flat_background) {
                BlockHermitianMetric G = assemble_G(hd, nullptr, s.h, fx.hol.h0);
                RForm tr = trace_pair_G(G, GF);
                r.tr_GF = tr.sup_norm();
                // |Upsilon(G, G_F)|^2 = |G^{-1} del G|^2 in the flat frame
                double ups = 0;
                const int N = G.dim();
                CForm gm(cfg.grid, 0, N * N);
                for (std::size_t p = 0; p < cfg.grid.npts; ++p)
                  for (int rr = 0; rr < N; ++rr)
                    for (int cc = 0; cc < N; ++cc) gm.at(0, p, rr * N + cc) = G.G[p](rr, cc);
                CpqForm dgm = del(to_complex(gm));
                auto gh = hd.hermitian_matrix();
                for (std::size_t p = 0; p < cfg.grid.npts; ++p) {
                  MatC Gi = G.G[p].inverse();
                  double ginv_scalar = 1.0 / gh[0].at(0, p).real();
                  double acc = 0;
                  for (int jj = 0; jj < cfg.grid.n; ++jj) {
                    int key = dgm.find(1u << jj, 0u);
                    MatC dG(N);
                    for (int rr = 0; rr < N; ++rr)
                      for (int cc = 0; cc < N; ++cc)
                        dG(rr, cc) = dgm.comp[key][p * std::size_t(N) * N + rr * N + cc];
                    MatC U = Gi * dG;
                    MatC M = U * Gi * U.adjoint() * G.G[p];
                    acc += 0.5 * ginv_scalar * M.trace().real();
                  }
                  ups = std::max(ups, acc);
                }
                r.upsilon_sq = ups;
                Reduction hflat = Reduction::identity(cfg.grid, *s.h.alg);
                HermitianData hdflat(fx.omega_flat);
                r.phi[0] = phi_k_monitor(hd, hdflat, s.h, hflat, 0);
                r.phi[1] = phi_k_monitor(hd, hdflat, s.h, hflat, 1);
              }
              return r;
            });
        snapshot::write_field(cfg.output_dir + "/final_omega.bin", fx.hol.omega);
        break;
      }
      case FlowKind::oneform_reduced: {
        HermitianData hd0(fx.oneform.omega());
        check_cfl(cfg.flow, cfg.grid, sup_inverse_metric_eig(hd0.metric.g));
        recs = run_flow<OneformTangent>(
            cfg.flow, fx.oneform, [](const OneformState& s) { return oneform_rhs(s); },
            [](const OneformState& s, const OneformTangent& t, double h) {
              return oneform_advance(s, t, h);
            },
            [](const OneformState& s) {
              RForm w = s.omega();
              if (!w.finite()) throw nan_error("state has NaN");
              HermitianData guard(w);
            },
            [&](const OneformState& s, double t) {
              MonitorRecord r;
              r.t = t;
              RForm w = s.omega();
              HermitianData hd(w);
              r.min_eig_g = hd.metric.min_eig;
              r.dilaton_value = dilaton_functional(hd);
              dilaton_series.push_back(r.dilaton_value);
              r.dM_dt_formula = dilaton_derivative_formula(hd, s.h);
              CForm F = chern_connection_curvature(s.h);
              r.sup_F = F.sup_norm();
              return r;
            });
        snapshot::write_field(cfg.output_dir + "/final_omega.bin", fx.oneform.omega());
        break;
      }
    }

    // centered numeric dM/dt column for the one-form flow
    if (cfg.flow.kind == FlowKind::oneform_reduced && recs.size() >= 3) {
      for (std::size_t i = 1; i + 1 < recs.size(); ++i)
        recs[i].dM_dt_numeric =
            (recs[i + 1].dilaton_value - recs[i - 1].dilaton_value) / (recs[i + 1].t - recs[i - 1].t);
    }

    write_trajectory_csv(cfg.output_dir + "/trajectory.csv", recs);
    write_column_manifest(cfg.output_dir + "/columns.json");
    {
      std::ofstream mos(cfg.output_dir + "/fixture_manifest.json");
      mos << "{\n  \"fixture\": \"" << cfg.fixture << "\",\n  \"amplitude\": " << cfg.amplitude
          << ",\n  \"seed\": " << cfg.seed << ",\n  \"phi1_time_bound\": " << fx.phi1_time_bound
          << "\n}\n";
    }
    if (cfg.plots) {
      auto [header, rows] = read_csv(cfg.output_dir + "/trajectory.csv");
      std::vector<double> ts;
      for (auto& row : rows) ts.push_back(row[0]);
      for (std::size_t col = 1; col < header.size(); ++col) {
        std::vector<double> ys;
        for (auto& row : rows) ys.push_back(row[col]);
        bool any = false;
        for (double y : ys) any |= std::isfinite(y);
        if (any)
          write_svg_line_plot(cfg.output_dir + "/" + header[col] + ".svg", header[col], ts, ys);
      }
    }
    return 0;
  } catch (const positivity_error& e) {
    if (error_out) *error_out = e.what();
    return 2;
  } catch (const nan_error& e) {
    if (error_out) *error_out = e.what();
    return 3;
  } catch (const config_error& e) {
    if (error_out) *error_out = e.what();
    return 4;
  }
}

}  // namespace strand
