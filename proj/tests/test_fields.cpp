#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "helpers.hpp"
#include "nlc/fields.hpp"
#include "nlc/mesh.hpp"

using namespace nlc;

TEST_CASE("degree field clamps into the admissible range") {
  DegreeField erk({-0.7, 0.3, 1.4}, Model::ericksen, 3);
  CHECK(erk.s[0] == -0.5);
  CHECK(erk.s[1] == 0.3);
  CHECK(erk.s[2] == 1.0);
  DegreeField uni2({-0.95, 0.2}, Model::uniaxial_ldg, 2);
  CHECK(uni2.s[0] == -0.95);  // 2D uniaxial range is [-1, 1]
}

TEST_CASE("make_aux builds the nodal product fields") {
  DegreeField s({0.7, 0.0, -0.3}, Model::ericksen, 3);
  DirectorField<3> n(std::vector<Vec<3>>{{0, 0, 1}, {1, 0, 0}, {0, 1, 0}});
  auto u = make_aux(s, n);
  CHECK(u.u[0][2] == Catch::Approx(0.7));
  CHECK(norm(u.u[1]) == 0.0);  // s = 0 kills the direction
  for (int i = 0; i < 3; ++i)
    CHECK(norm(u.u[i]) == Catch::Approx(std::abs(s.s[i])).margin(1e-15));

  std::mt19937_64 rng(5);
  auto sv = testutil::random_scalars(rng, 50, -0.5, 1.0);
  auto nv = testutil::random_units<3>(rng, 50);
  DegreeField sr(sv, Model::ericksen, 3);
  DirectorField<3> nr(nv);
  auto ur = make_aux(sr, nr);
  for (int i = 0; i < 50; ++i)
    CHECK(norm(ur.u[i]) == Catch::Approx(std::abs(sr.s[i])).margin(1e-12));

  DegreeField wrong({0.1}, Model::ericksen, 3);
  CHECK_THROWS_AS(make_aux(wrong, nr), NumericalError);
}

TEST_CASE("line field is insensitive to the generator sign") {
  std::mt19937_64 rng(9);
  auto nv = testutil::random_units<3>(rng, 20);
  LineField<3> a(nv);
  for (auto& v : nv) v = -1.0 * v;
  LineField<3> b(nv);
  for (int i = 0; i < 20; ++i)
    CHECK(frob_norm(a.theta[i] - b.theta[i]) < 1e-15);
  // projector invariants
  for (int i = 0; i < 20; ++i) {
    CHECK(frob_norm(matmul(a.theta[i], a.theta[i]) - a.theta[i]) < 1e-12);
    CHECK(trace(a.theta[i]) == Catch::Approx(1.0).margin(1e-12));
    CHECK(frob_norm(a.theta[i]) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("normalization is idempotent on unit directors") {
  std::mt19937_64 rng(13);
  auto nv = testutil::random_units<3>(rng, 30);
  DirectorField<3> d1(nv);
  DirectorField<3> d2(d1.n);
  for (int i = 0; i < 30; ++i)
    CHECK(norm(d1.n[i] - d2.n[i]) <= 1e-15);
}

TEST_CASE("truncation clamps nodewise") {
  DegreeField s({0.2, 1.0, -0.5}, Model::ericksen, 3);
  auto t = truncate_nodewise(s, 0.01, 0.05);
  CHECK(t.s[0] == 0.2);
  CHECK(t.s[1] == Catch::Approx(0.99));
  CHECK(t.s[2] == Catch::Approx(-0.49));
  CHECK_THROWS_AS(truncate_nodewise(s, 0.2, 0.05), ConfigError);
}

TEST_CASE("uniaxial decompose recovers uniaxial tensors") {
  // uniaxial by construction
  DegreeField s({0.7}, Model::uniaxial_ldg, 3);
  LineField<3> line(std::vector<Vec<3>>{{0, 0, 1}});
  auto Q = uniaxial_compose(s, line);
  auto dec = uniaxial_decompose(Q);
  CHECK(dec.s_eff.s[0] == Catch::Approx(0.7).margin(1e-12));
  CHECK(frob_norm(dec.line.theta[0] - line.theta[0]) < 1e-10);
  CHECK(dec.beta[0] == Catch::Approx(0.0).margin(1e-12));

  // Q = 0 convention
  QTensorField<3> zero(1);
  auto dz = uniaxial_decompose(zero);
  CHECK(dz.s_eff.s[0] == 0.0);
  CHECK(dz.beta[0] == 0.0);

  // round trip on random uniaxial states including negative s
  std::mt19937_64 rng(21);
  auto sv = testutil::random_scalars(rng, 40, -0.45, 0.95);
  auto nv = testutil::random_units<3>(rng, 40);
  DegreeField sr(sv, Model::uniaxial_ldg, 3);
  LineField<3> lr(nv);
  auto Qr = uniaxial_compose(sr, lr);
  auto dr = uniaxial_decompose(Qr);
  for (int i = 0; i < 40; ++i) {
    if (std::abs(sr.s[i]) < 1e-8) continue;
    CHECK(dr.s_eff.s[i] == Catch::Approx(sr.s[i]).margin(1e-9));
    CHECK(frob_norm(dr.line.theta[i] - lr.theta[i]) < 1e-8);
  }
}

TEST_CASE("biaxiality is 1 for the s1 = 2 s2 tensor") {
  // Q = s1 n1(x)n1 + s2 n2(x)n2 - (s1+s2)/3 I with s1 = 0.6, s2 = 0.3
  double s1 = 0.6, s2 = 0.3;
  Mat<3> Q = mat_zero<3>();
  Q[0][0] = s1 - (s1 + s2) / 3.0;
  Q[1][1] = s2 - (s1 + s2) / 3.0;
  Q[2][2] = -(s1 + s2) / 3.0;
  CHECK(biaxiality(Q) == Catch::Approx(1.0).margin(1e-10));
  QTensorField<3> f(1);
  f.set_node(0, Q);
  auto dec = uniaxial_decompose(f);
  CHECK(dec.beta[0] == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("winding numbers of analytic fields") {
  auto mesh = generate_crisscross_2d(32, 32, {0, 1, 0, 1});
  // build a node loop: circle of radius 0.3 around the defect center
  auto make_loop = [&](Vec<2> c, double r) {
    std::vector<index_t> loop;
    for (int k = 0; k < 256; ++k) {
      double a = 2.0 * 3.14159265358979323846 * k / 256;
      Vec<2> p{c[0] + r * std::cos(a), c[1] + r * std::sin(a)};
      index_t best = 0;
      double bd = 1e30;
      for (index_t i = 0; i < mesh.n_vertices(); ++i) {
        double d2 = dot(mesh.vertices[i] - p, mesh.vertices[i] - p);
        if (d2 < bd) {
          bd = d2;
          best = i;
        }
      }
      if (loop.empty() || loop.back() != best) loop.push_back(best);
    }
    if (loop.front() == loop.back()) loop.pop_back();
    return loop;
  };
  auto loop = make_loop({0.45, 0.45}, 0.3);

  // uniform field: winding 0
  std::vector<Vec<2>> uni(mesh.n_vertices(), Vec<2>{1, 0});
  CHECK(winding_number(LineField<2>(uni), loop, 2) == 0.0);

  // +1/2 line-field defect at (0.45, 0.45)
  std::vector<Vec<2>> half(mesh.n_vertices());
  for (index_t i = 0; i < mesh.n_vertices(); ++i) {
    double th = 0.5 * std::atan2(mesh.vertices[i][1] - 0.45,
                                 mesh.vertices[i][0] - 0.45);
    half[i] = {std::cos(th), std::sin(th)};
  }
  CHECK(winding_number(LineField<2>(half), loop, 2) == Catch::Approx(0.5));

  // +3 director defect
  std::vector<Vec<2>> three(mesh.n_vertices());
  for (index_t i = 0; i < mesh.n_vertices(); ++i) {
    double th = 3.0 * std::atan2(mesh.vertices[i][1] - 0.45,
                                 mesh.vertices[i][0] - 0.45);
    three[i] = {std::cos(th), std::sin(th)};
  }
  CHECK(winding_number(DirectorField<2>(three), loop, 2) == Catch::Approx(3.0));

  // refuse when |s| ~ 0 on the loop
  DegreeField s(std::vector<double>(mesh.n_vertices(), 0.0), Model::ericksen, 2);
  CHECK_THROWS_AS(winding_number(LineField<2>(half), loop, 2, &s, 1e-6),
                  NumericalError);
}
