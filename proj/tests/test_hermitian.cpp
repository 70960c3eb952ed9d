#include "doctest.h"
#include "strand/hermitian.hpp"

using namespace strand;

namespace {
PeriodicGrid t2(int nx = 32) { return PeriodicGrid(1, {nx, nx, 1, 1}); }
PeriodicGrid t4(int nx = 16) { return PeriodicGrid(2, {nx, nx, nx, nx}); }

RForm conformal_omega(const PeriodicGrid& g, const std::vector<double>& u) {
  RForm w = omega_standard(g);
  for (int c = 0; c < g.ncomps(2); ++c)
    for (std::size_t p = 0; p < g.npts; ++p) w.at(c, p) *= std::exp(u[p]);
  return w;
}

Sym2Field omega_J_sym(const PeriodicGrid& g, const RForm& rho) {
  // (X,Y) -> rho(X, JY), symmetric for a (1,1)-form
  Sym2Field out(g);
  for (int mu = 0; mu < g.dim(); ++mu)
    for (int nu = mu; nu < g.dim(); ++nu) {
      double s;
      int jn = J_image_axis(nu, s);
      if (mu == jn) continue;
      unsigned m1 = 1u << mu, m2 = 1u << jn;
      int sign = merge_sign(m1, m2);
      const double* src = rho.comp(g.comp_index[m1 | m2]);
      double* dst = out.comp(mu, nu);
      for (std::size_t p = 0; p < g.npts; ++p) dst[p] = s * sign * src[p];
    }
  return out;
}
}  // namespace

TEST_CASE("metric from omega and hermitian determinant") {
  auto g = t2();
  HermitianData hd(omega_standard(g));
  CHECK(hd.metric.g.at(0, 0, 0) == 1.0);
  CHECK(hd.metric.g.at(1, 1, 0) == 1.0);
  CHECK(hd.metric.g.at(0, 1, 0) == 0.0);
  // g_{1 1bar} = 1/2 for the standard metric
  auto h = hd.hermitian_matrix();
  CHECK(h[0].at(0, 0).real() == doctest::Approx(0.5));
  CHECK(hd.log_det_hermitian().at(0, 0) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("volume norm fixtures") {
  auto g = t2();
  HermitianData hd(omega_standard(g));
  RForm vn = volume_norm(hd);
  CHECK(vn.at(0, 0) == doctest::Approx(std::sqrt(2.0)));

  Rng rng(4);
  auto u = random_band_scalar(g, {2, 1}, 0.3, rng);
  HermitianData hc(conformal_omega(g, u));
  RForm vc = volume_norm(hc);
  double worst = 0;
  for (std::size_t p = 0; p < g.npts; ++p)
    worst = std::max(worst, std::abs(vc.at(0, p) - std::sqrt(2.0) * std::exp(-u[p] / 2)));
  CHECK(worst <= 1e-12);

  // scaling omega -> lambda omega multiplies ||Omega|| by lambda^{-n/2}
  auto g4 = t4(8);
  double lam = 1.7;
  HermitianData h1(omega_standard(g4));
  HermitianData h2(omega_standard(g4) * lam);
  CHECK(volume_norm(h2).at(0, 0) ==
        doctest::Approx(volume_norm(h1).at(0, 0) * std::pow(lam, -1.0)).epsilon(1e-12));
}

TEST_CASE("lambda_trace fixtures") {
  auto g = t4(8);
  RForm w = omega_standard(g);
  // Lambda_omega omega = n
  RForm lw = lambda_trace(w, w);
  CHECK(lw.at(0, 0) == doctest::Approx(2.0));
  // linearity on scalars: Lambda(f omega) = n f
  Rng rng(6);
  RForm f = random_band_form(g, 0, 1, {1, 1}, 1.0, rng);
  RForm fw = wedge(f, w);
  RForm lfw = lambda_trace(w, fw);
  double worst = 0;
  for (std::size_t p = 0; p < g.npts; ++p)
    worst = std::max(worst, std::abs(lfw.at(0, p) - 2.0 * f.at(0, p)));
  CHECK(worst <= 1e-14 * (1 + f.sup_norm()));

  // F = (i/2) dz1 ^ dzbar1 has Lambda F = 1 (pointwise linear-solve oracle)
  CpqForm Fz(g, 2, 1);
  Fz.comp[Fz.find(0b01u, 0b01u)].assign(g.npts, cplx(0, 0.5));
  CForm F = to_real_basis(Fz);
  CForm lf = lambda_trace(w, F);
  CHECK(lf.at(0, 0).real() == doctest::Approx(1.0));
  CHECK(lf.at(0, 0).imag() == doctest::Approx(0.0));

  // a (2,0) form has vanishing trace
  CpqForm F20(g, 2, 1);
  F20.comp[F20.find(0b11u, 0u)].assign(g.npts, cplx(1.0));
  CForm l20 = lambda_trace(w, to_real_basis(F20));
  CHECK(l20.sup_norm() <= 1e-14);
}

TEST_CASE("chern connection curvature of reductions") {
  auto g = t2();
  auto alg = make_u1({-1.0});

  // identity reduction is flat
  Reduction id = Reduction::identity(g, alg);
  CHECK(chern_connection_curvature(id).sup_norm() == 0.0);

  // U(1), h = e^u with u = eps sin(x0): F = dbar del u, analytic coefficient
  // (i/2) Lap u on dx^dy
  double eps = 0.05;
  Reduction h = Reduction::identity(g, alg);
  std::array<double, 4> x{};
  for (std::size_t p = 0; p < g.npts; ++p) {
    g.coords(p, x.data());
    h.u[0][p] = eps * std::sin(x[0]);
  }
  CForm F = chern_connection_curvature(h);
  double worst = 0;
  for (std::size_t p = 0; p < g.npts; ++p) {
    g.coords(p, x.data());
    cplx expect(0, 0.5 * (-eps * std::sin(x[0])));  // (i/2) Lap u
    worst = std::max(worst, std::abs(F.at(0, p, 0) - expect));
  }
  CHECK(worst <= eps * 1e-4);
  // type (1,1) to roundoff
  CHECK(type_residual(F, 1, 1) <= 1e-10);

  // su(2): h = exp(f * diag(1/2,-1/2)) = exp(f i shat3); F on the shat basis
  auto su2 = make_su2();
  Reduction hs = Reduction::identity(g, su2);
  for (std::size_t p = 0; p < g.npts; ++p) {
    g.coords(p, x.data());
    double fv = eps * std::cos(x[1]);
    MatC m(2);
    m(0, 0) = std::exp(0.5 * fv);
    m(1, 1) = std::exp(-0.5 * fv);
    hs.h2[p] = m;
  }
  CForm Fs = chern_connection_curvature(hs);
  worst = 0;
  for (std::size_t p = 0; p < g.npts; ++p) {
    g.coords(p, x.data());
    // F = (dbar del f) i shat3; real-basis coefficient (i/2)Lap f times i on shat3
    cplx expect = cplx(0, 1) * cplx(0, 0.5 * (-eps * std::cos(x[1])));
    worst = std::max(worst, std::abs(Fs.at(0, p, 2) - expect));
    worst = std::max(worst, std::abs(Fs.at(0, p, 0)));
    worst = std::max(worst, std::abs(Fs.at(0, p, 1)));
  }
  CHECK(worst <= eps * 1e-4);
}

TEST_CASE("bismut ricci: flat, conformal oracle, exactness") {
  auto g = t2();
  HermitianData flat(omega_standard(g));
  CHECK(bismut_ricci(flat).sup_norm() <= 1e-13);

  Rng rng(12);
  auto u = random_band_scalar(g, {1, 1}, 1e-4, rng);
  HermitianData hc(conformal_omega(g, u));
  RForm rb = bismut_ricci(hc);
  RForm rc = chern_ricci_oracle(hc);
  CHECK((rb - rc).sup_norm() <= 1e-8);
  double total = 0;
  for (std::size_t p = 0; p < g.npts; ++p) total += rb.at(0, p);
  CHECK(std::abs(total * g.cell_volume()) <= 1e-10);

  // T^4: rho_B is closed and integrates to zero against omega (c_1 = 0)
  auto g4 = t4(12);
  Rng rng4(13);
  auto u4 = random_band_scalar(g4, {1, 1}, 1e-3, rng4);
  HermitianData hc4(conformal_omega(g4, u4));
  RForm rb4 = bismut_ricci(hc4);
  CHECK(d(rb4).sup_norm() <= 1e-11);
  RForm top = wedge(rb4, hc4.omega);
  double tot4 = 0;
  for (std::size_t p = 0; p < g4.npts; ++p) tot4 += top.at(0, p);
  CHECK(std::abs(tot4 * g4.cell_volume()) <= 1e-9);
}

TEST_CASE("lee form and chern torsion") {
  auto g = t2();
  HermitianData flat(omega_standard(g));
  CHECK(lee_form(flat).sup_norm() == 0.0);
  CHECK(chern_torsion(flat).sup_norm() == 0.0);

  // n=2 conformal: theta = (n-1) du = du
  auto g4 = t4(12);
  Rng rng(17);
  auto u = random_band_scalar(g4, {1, 1}, 1e-2, rng);
  HermitianData hc(conformal_omega(g4, u));
  RForm theta = lee_form(hc);
  RForm uf(g4, 0, 1);
  std::copy(u.begin(), u.end(), uf.comp(0));
  RForm du = d(uf);
  CHECK((theta - du).sup_norm() <= 1e-6);

  // torsion is nonzero off the Kahler locus
  TorsionField T = chern_torsion(hc);
  CHECK(T.sup_norm() > 1e-6);
}

TEST_CASE("convention pin: d* omega against the Lee form") {
  // records the sign relating d*omega and J theta for this convention set
  auto g4 = t4(12);
  Rng rng(19);
  auto u = random_band_scalar(g4, {1, 1}, 1e-2, rng);
  HermitianData hc(conformal_omega(g4, u));
  RForm dsw = codifferential(hc.omega, hc.metric);
  RForm jtheta = j_act(lee_form(hc));
  double rplus = (dsw - jtheta).sup_norm();
  double rminus = (dsw + jtheta).sup_norm();
  // pinned: d* omega = -J theta
  CHECK(rminus <= 1e-6);
  CHECK(rplus > 1e-4);
}

TEST_CASE("rho_B decomposition identity with F_A = 0") {
  // T^2 (32 per axis): Kahler, reduces to rho_B(.,J.) = Rc
  {
    auto g = t2(32);
    Rng rng(23);
    auto u = random_band_scalar(g, {1, 1}, 2e-3, rng);
    HermitianData hd(conformal_omega(g, u));
    Sym2Field lhs = omega_J_sym(*hd.grid, bismut_ricci(hd));
    RiemannData rd(hd.metric);
    Sym2Field rc = rd.ricci();
    CHECK((lhs - rc).sup_norm() <= 1e-6);
  }
  // T^4: rho_B^{1,1}(.,J.) = Rc - (1/4)H^2 + (1/2) L_{theta#} g with H = -d^c omega.
  // The identity presumes the Bianchi constraint, so with F_A = 0 the metric
  // must be pluriclosed: omega = omega0 + 2 Re(del gamma) for a (0,1)-form gamma.
  {
    auto g = t4(16);
    Rng rng(29);
    RForm gamma_re = random_band_form(g, 1, 1, {1, 1}, 5e-4, rng);
    RForm gamma_im = random_band_form(g, 1, 1, {1, 1}, 5e-4, rng);
    CForm gamma_c = complexify(gamma_re);
    for (std::size_t i = 0; i < gamma_c.data.size(); ++i) gamma_c.data[i] += cplx(0, 1) * gamma_im.data[i];
    CpqForm gamma01 = to_complex(gamma_c).project(0, 1);
    CForm dg = to_real_basis(del(gamma01));
    RForm W = real_part(dg) * 2.0;
    RForm w = omega_standard(g) + W;
    CHECK(d(dc(w)).sup_norm() <= 1e-11);  // pluriclosed by construction
    CHECK(d(w).sup_norm() > 1e-6);        // but not Kahler
    HermitianData hd(w);
    RForm rb = bismut_ricci(hd);
    CForm rb11 = type_project(rb, 1, 1);
    Sym2Field lhs = omega_J_sym(*hd.grid, real_part(rb11));
    RiemannData rd(hd.metric);
    Sym2Field rhs = rd.ricci();
    RForm H = dc(hd.omega);
    H *= -1.0;
    rhs.axpy(-0.25, sq_contract(H, hd.metric));
    RForm theta = lee_form(hd);
    rhs.axpy(0.5, lie_derivative_metric(sharp(theta, hd.metric), hd.metric));
    CHECK((lhs - rhs).sup_norm() <= 1e-6);
  }
}
