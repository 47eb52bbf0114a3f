#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "helpers.hpp"
#include "nlc/couplings.hpp"

using namespace nlc;
using namespace testutil;

TEST_CASE("phase field profile") {
  auto mesh = generate_kuhn_3d(8, 8, 8, {0, 1, 0, 1, 0, 1});
  Vec<3> c{0.5, 0.5, 0.5};
  double eps = 0.06, r = 0.2;
  auto pf = build_phase_field_sphere(mesh, c, r, eps);
  // phi = 1/2 exactly on the surface
  CHECK(phase_field_ref(0.0, eps) == Catch::Approx(0.5));
  // inside -> 1, outside -> 0 beyond the arctan band
  for (index_t i = 0; i < mesh.n_vertices(); ++i) {
    double d = norm(mesh.vertices[i] - c) - r;
    if (d > 2.0 * eps * std::tan(0.49 * 3.14159265358979323846 / 1.0))
      CHECK(pf.phi[i] < 0.51);
    if (d < -0.19) CHECK(pf.phi[i] > 0.75);
  }
  CHECK_THROWS_AS(build_phase_field_sphere(mesh, c, r, -1.0), ConfigError);
}

TEST_CASE("surface functional recovers the sphere area") {
  // J_eps(1) ~ 4 pi r^2 = 0.50265, within 10% at eps = 0.06 on a 32^3 mesh
  auto mesh = generate_kuhn_3d(32, 32, 32, {0, 1, 0, 1, 0, 1});
  auto lumped = build_lumped_mass(mesh);
  Vec<3> c{0.5, 0.5, 0.5};
  double r = 0.2;
  std::vector<double> ones(mesh.n_vertices(), 1.0);
  const double exact = 4.0 * 3.14159265358979323846 * r * r;

  auto pf6 = build_phase_field_sphere(mesh, c, r, 0.06);
  double j6 = surface_functional(mesh, lumped, pf6, ones);
  CHECK(std::abs(j6 - exact) / exact < 0.10);

  auto pf3 = build_phase_field_sphere(mesh, c, r, 0.03);
  double j3 = surface_functional(mesh, lumped, pf3, ones);
  CHECK(std::abs(j3 - exact) < std::abs(j6 - exact));

  std::vector<double> zero(mesh.n_vertices(), 0.0);
  CHECK(surface_functional(mesh, lumped, pf6, zero) == 0.0);
}

TEST_CASE("anchoring identity a_n(n,n) = a_s(s,s) + omega(s) + zeta(s*-2s)") {
  auto mesh = generate_kuhn_3d(6, 6, 6, {0, 1, 0, 1, 0, 1});
  auto lumped = build_lumped_mass(mesh);
  auto pf = build_phase_field_sphere(mesh, {0.5, 0.5, 0.5}, 0.2, 0.06);
  std::mt19937_64 rng(31);
  AnchoringParams p;
  p.ka_normal = 2.0;
  p.ka_planar1 = 0.7;
  p.ka_planar2 = 0.4;
  p.s_star = 0.7;
  for (int trial = 0; trial < 20; ++trial) {
    auto sv = random_scalars(rng, mesh.n_vertices(), -0.45, 0.95);
    auto nv = random_units<3>(rng, mesh.n_vertices());
    DegreeField s(sv, Model::uniaxial_ldg, 3);
    double via_n = anchoring_energy(p, pf, lumped, s, nv);
    auto f = anchoring_s_forms(p, pf, nv);
    double via_s = anchoring_energy_from_s_forms(f, lumped, pf, p, s.s);
    CHECK(via_n == Catch::Approx(via_s).epsilon(1e-10).margin(1e-12));
  }
}

TEST_CASE("aligned states annihilate their anchoring term") {
  auto mesh = generate_kuhn_3d(8, 8, 8, {0, 1, 0, 1, 0, 1});
  auto lumped = build_lumped_mass(mesh);
  auto pf = build_phase_field_sphere(mesh, {0.5, 0.5, 0.5}, 0.25, 0.06);
  DegreeField s(std::vector<double>(mesh.n_vertices(), 0.7), Model::uniaxial_ldg, 3);

  // normal-only, n = nu = grad phi / |grad phi|
  AnchoringParams pn;
  pn.ka_normal = 1.0;
  pn.s_star = 0.7;
  std::vector<Vec<3>> nu(mesh.n_vertices(), Vec<3>{0, 0, 1});
  for (index_t i = 0; i < mesh.n_vertices(); ++i)
    if (pf.grad_phi_sq[i] > 1e-12)
      nu[i] = normalized(pf.grad_phi[i]);
  CHECK(anchoring_energy(pn, pf, lumped, s, nu) ==
        Catch::Approx(0.0).margin(1e-10));

  // planar-only, n orthogonal to grad phi
  AnchoringParams pp;
  pp.ka_planar1 = 1.0;
  pp.s_star = 0.7;
  std::vector<Vec<3>> tang(mesh.n_vertices(), Vec<3>{1, 0, 0});
  for (index_t i = 0; i < mesh.n_vertices(); ++i) {
    if (pf.grad_phi_sq[i] > 1e-12) {
      Vec<3> g = normalized(pf.grad_phi[i]);
      Vec<3> t = Vec<3>{1, 0, 0} - g[0] * g;
      if (norm(t) < 1e-6) t = Vec<3>{0, 1, 0} - g[1] * g;
      tang[i] = normalized(t);
    }
  }
  CHECK(anchoring_energy(pp, pf, lumped, s, tang) ==
        Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("projection monotonicity of lumped-mass forms") {
  std::mt19937_64 rng(37);
  auto mesh = generate_crisscross_2d(4, 4, {0, 1, 0, 1});
  auto lumped = build_lumped_mass(mesh);
  const index_t N = mesh.n_vertices();

  // 100 random PSD H and random |n_i| >= 1
  std::normal_distribution<double> gauss(0, 1);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Mat<3>> H(N);
    std::vector<Vec<3>> n(N);
    for (index_t i = 0; i < N; ++i) {
      Mat<3> G;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) G[r][c] = gauss(rng);
      Mat<3> Gt;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) Gt[r][c] = G[c][r];
      H[i] = matmul(Gt, G);  // PSD
      Vec<3> dir;
      for (int c = 0; c < 3; ++c) dir[c] = gauss(rng);
      n[i] = u(rng) * normalized(dir);
    }
    LumpedMass lm3;
    lm3.m.assign(N, 1.0);
    auto rep = anchoring_projection_monotone<3>(H, lm3, n);
    CHECK(rep.holds);
    CHECK(rep.worst_slack >= -1e-12);
  }

  // unit vectors give equality
  std::vector<Mat<3>> H(N, identity<3>());
  auto n1 = random_units<3>(rng, N);
  LumpedMass lm3;
  lm3.m.assign(N, 1.0);
  auto rep = anchoring_projection_monotone<3>(H, lm3, n1);
  CHECK(rep.worst_slack == Catch::Approx(0.0).margin(1e-12));

  // |n| = 2 with H = I: factor-4 decrease to 1 per node
  std::vector<Vec<3>> n2 = n1;
  for (auto& v : n2) v = 2.0 * v;
  for (index_t i = 0; i < N; ++i) {
    double before = dot(n2[i], matvec(H[i], n2[i]));
    Vec<3> pn = normalized(n2[i]);
    double after = dot(pn, matvec(H[i], pn));
    CHECK(before == Catch::Approx(4.0 * after).margin(1e-12));
  }
}

TEST_CASE("electric constants and energy structure") {
  ElectricParams<3> p;
  p.eps_par = 7.0 / 3.0;
  p.eps_perp = 1.0 / 3.0;
  CHECK(p.eps_bar() == Catch::Approx(1.0));
  CHECK(p.eps_a() == Catch::Approx(2.0));
  CHECK(p.gamma_a() == Catch::Approx(2.0 / 3.0));

  auto mesh = generate_kuhn_3d(4, 4, 4, {0, 1, 0, 1, 0, 1});
  auto lumped = build_lumped_mass(mesh);
  std::mt19937_64 rng(41);
  auto sv = random_scalars(rng, mesh.n_vertices(), -0.45, 0.95);
  DegreeField s(sv, Model::uniaxial_ldg, 3);
  auto n = random_units<3>(rng, mesh.n_vertices());

  // E = 0 -> zero energy
  ElectricParams<3> zero;
  zero.k_ext = 160.0;
  CHECK(electric_energy(zero, lumped, s, n) == 0.0);

  // PSD of e_h as a form: random Rayleigh quotients nonnegative
  p.field = {0, 1, 0};
  p.k_ext = 160.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto v = random_units<3>(rng, mesh.n_vertices());
    CHECK(electric_form(p, lumped, s, v, v) >= -1e-12);
  }

  // normalization monotonicity (|n| >= 1)
  std::uniform_real_distribution<double> scale(1.0, 2.5);
  for (int trial = 0; trial < 100; ++trial) {
    auto v = random_units<3>(rng, mesh.n_vertices());
    std::vector<Vec<3>> big = v;
    for (auto& x : big) x = scale(rng) * x;
    std::vector<Vec<3>> unit(big.size());
    for (std::size_t i = 0; i < big.size(); ++i) unit[i] = normalized(big[i]);
    CHECK(electric_form(p, lumped, s, big, big) >=
          electric_form(p, lumped, s, unit, unit) - 1e-12);
  }

  // sign flip invariance
  auto neg = n;
  for (auto& x : neg) x = -1.0 * x;
  CHECK(electric_energy(p, lumped, s, n) ==
        Catch::Approx(electric_energy(p, lumped, s, neg)).epsilon(1e-13));

  // hand value on constant aligned fields: n = E-hat, |E| = 1, s const
  // e_h = |ea| - ea*s ; energy = K/2(-eb(1-s ga) + |ea| - ea s - |ea|)
  DegreeField sc(std::vector<double>(mesh.n_vertices(), 0.5), Model::uniaxial_ldg, 3);
  std::vector<Vec<3>> ney(mesh.n_vertices(), Vec<3>{0, 1, 0});
  double expect = 0.5 * 160.0 * (-(1.0) * (1.0 - 0.5 * (2.0 / 3.0)) - 2.0 * 0.5);
  CHECK(electric_energy(p, lumped, sc, ney) == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("anchoring and electric variations match finite differences") {
  auto mesh = generate_kuhn_3d(4, 4, 4, {0, 1, 0, 1, 0, 1});
  auto lumped = build_lumped_mass(mesh);
  auto pf = build_phase_field_sphere(mesh, {0.5, 0.5, 0.5}, 0.25, 0.08);
  std::mt19937_64 rng(43);
  std::vector<double> taus{1e-3, 1e-4, 1e-5};

  AnchoringParams ap;
  ap.ka_normal = 3.0;
  ap.ka_planar1 = 1.0;
  ap.ka_planar2 = 0.5;
  ap.s_star = 0.7;
  ElectricParams<3> ep;
  ep.field = {0, 1, 0};
  ep.k_ext = 160.0;
  ep.eps_par = 7.0 / 3.0;
  ep.eps_perp = 1.0 / 3.0;

  auto sv = random_scalars(rng, mesh.n_vertices(), -0.4, 0.9);
  auto nv = random_units<3>(rng, mesh.n_vertices());
  DegreeField s(sv, Model::uniaxial_ldg, 3);

  SECTION("s-variation of anchoring") {
    auto z = random_scalars(rng, mesh.n_vertices(), -1, 1);
    auto f = anchoring_s_forms(ap, pf, nv);
    double scale = sphere_area_const(3) * pf.eps;
    double analytic = 0;
    for (index_t i = 0; i < mesh.n_vertices(); ++i)
      analytic += scale * lumped.m[i] *
                  (f.a_diag[i] * s.s[i] + 0.5 * f.omega[i] - f.zeta[i]) * z[i];
    auto path = [&](double tau) {
      DegreeField sp = s;
      for (std::size_t i = 0; i < sp.s.size(); ++i) sp.s[i] += tau * z[i];
      return anchoring_energy(ap, pf, lumped, sp, nv);
    };
    CHECK(fd_matches_second_order(path, analytic, taus, 1.0));
  }

  SECTION("n-variation of anchoring along the normalized path") {
    auto v = random_tangents<3>(rng, nv);
    double analytic =
        sphere_area_const(3) * pf.eps * anchoring_form_nn(ap, pf, lumped, s, nv, v);
    auto path = [&](double tau) {
      std::vector<Vec<3>> np(nv.size());
      for (std::size_t i = 0; i < nv.size(); ++i)
        np[i] = normalized(nv[i] + tau * v[i]);
      return anchoring_energy(ap, pf, lumped, s, np);
    };
    CHECK(fd_matches_second_order(path, analytic, taus, 1.0));
  }

  SECTION("s- and n-variations of the electric energy") {
    auto z = random_scalars(rng, mesh.n_vertices(), -1, 1);
    auto gs = electric_s_gradient(ep, lumped, nv);
    double analytic_s = 0;
    for (index_t i = 0; i < mesh.n_vertices(); ++i) analytic_s += gs[i] * z[i];
    auto path_s = [&](double tau) {
      DegreeField sp = s;
      for (std::size_t i = 0; i < sp.s.size(); ++i) sp.s[i] += tau * z[i];
      return electric_energy(ep, lumped, sp, nv);
    };
    CHECK(fd_matches_second_order(path_s, analytic_s, taus, 100.0));

    auto v = random_tangents<3>(rng, nv);
    double analytic_n = ep.k_ext * electric_form(ep, lumped, s, nv, v);
    auto path_n = [&](double tau) {
      std::vector<Vec<3>> np(nv.size());
      for (std::size_t i = 0; i < nv.size(); ++i)
        np[i] = normalized(nv[i] + tau * v[i]);
      return electric_energy(ep, lumped, s, np);
    };
    CHECK(fd_matches_second_order(path_n, analytic_n, taus, 100.0));
  }
}

TEST_CASE("gradient magnitude peaks at the interface like 1/(pi eps)") {
  double eps = 0.05;
  // derivative of the reference profile at t = 0
  double h = 1e-6;
  double d = (phase_field_ref(h, eps) - phase_field_ref(-h, eps)) / (2 * h);
  CHECK(std::abs(d) == Catch::Approx(1.0 / (3.14159265358979323846 * eps)).epsilon(1e-6));
}
