#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "vfl/picard.hpp"

using namespace vfl;

namespace {

ResidualPath zero_path(std::size_t n, std::size_t m) {
  return ResidualPath(n, std::vector<Cplx>(m, Cplx(0, 0)));
}

double path_abs_max(const ResidualPath& p) {
  double m = 0;
  for (const auto& row : p)
    for (const Cplx& v : row) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("operator vanishes when there are no oscillatory terms") {
  // one and two locations admit no interaction quadruples
  for (auto locs : {std::vector<double>{0.0}, std::vector<double>{0.0, 1.0}}) {
    Support s(locs);
    std::vector<Cplx> al(locs.size(), Cplx(0.3, -0.2));
    CoeffSystem sys(s, al, -1);
    std::vector<double> grid = {0.005, 0.02, 0.05};
    auto out = picard_apply(sys, zero_path(s.size(), 3), grid);
    CHECK(path_abs_max(out) == 0.0);

    auto fp = picard_solve(sys, 0.05);
    CHECK(fp.converged);
    CHECK(fp.iterations <= 2);
    CHECK(path_abs_max(fp.residual) == 0.0);
    // physical values at t follow the bare logarithmic rotation
    auto expect = gauge_from_slow(sys, 0.05, al);
    for (std::size_t k = 0; k < al.size(); ++k) CHECK(std::abs(fp.values[k] - expect[k]) < 1e-15);
  }
}

TEST_CASE("operator vanishes for a single populated location") {
  Support s({0.0, 1.0, 2.0});
  CoeffSystem sys(s, {Cplx(0, 0), Cplx(0.1, 0.05), Cplx(0, 0)}, -1);
  std::vector<double> grid = {0.01, 0.03};
  auto out = picard_apply(sys, zero_path(3, 2), grid);
  CHECK(path_abs_max(out) == 0.0);
}

TEST_CASE("single-integral part matches the incomplete-gamma oracle") {
  // int_{1/t}^inf e^{-i omega s/4} s^{-1+i beta} ds evaluated in 40-digit
  // arithmetic through the upper incomplete gamma function; values frozen.
  Support s({0.0, 1.0, 2.0});
  std::vector<Cplx> al = {{0.9, 0}, {0.7, 0}, {0.5, 0}};
  std::vector<double> grid = {0.01, 0.04};
  const double oracle[2][2][3][2] = {
      {{{-0.00018615131570847127, -0.000057605648521661183},
        {0.000478674811821783265, -0.000148128810484271613},
        {-0.000335072368275248286, -0.000103690167338990129}},
       {{-0.000763842794904715623, -0.000119099496649026848},
        {0.00196416718689784017, -0.000306255848526069039},
        {-0.00137491703082848812, -0.000214379093968248327}}},
      {{{-0.000186963979095367491, -0.0000548668621882283698},
        {0.000480764517673802121, -0.00014108621705544438},
        {-0.000336535162371661484, -0.0000987603519388110657}},
       {{-0.000764839858876684238, -0.000111211332873466713},
        {0.00196673106568290233, -0.000285971998817485834},
        {-0.00137671174597803163, -0.000200180399172240084}}}};
  int mi = 0;
  for (RenormMode mode : {RenormMode::sum_sq, RenormMode::equal_modulus}) {
    CoeffSystem sys(s, al, -1, mode);
    auto parts = picard_apply_parts(sys, zero_path(3, 2), grid);
    for (int g = 0; g < 2; ++g)
      for (int k = 0; k < 3; ++k) {
        Cplx o{oracle[mi][g][k][0], oracle[mi][g][k][1]};
        CHECK(std::abs(parts.single_part[k][g] - o) < 1e-6);
      }
    // refined panels tighten the agreement
    PicardOptions fine;
    fine.panel_ratio = 1.02;
    auto parts2 = picard_apply_parts(sys, zero_path(3, 2), grid, fine);
    for (int g = 0; g < 2; ++g)
      for (int k = 0; k < 3; ++k) {
        Cplx o{oracle[mi][g][k][0], oracle[mi][g][k][1]};
        CHECK(std::abs(parts2.single_part[k][g] - o) < 3e-7);
      }
    ++mi;
  }
}

TEST_CASE("fixed point reproduces the evolved coefficients for small data") {
  Support s({0.0, 1.0, 2.0});
  std::vector<Cplx> al = {{0.05, 0.0}, {0.0, 0.05}, {0.035, -0.035}};
  const double t = 0.04;
  for (RenormMode mode : {RenormMode::sum_sq, RenormMode::equal_modulus}) {
    CoeffSystem sys(s, al, -1, mode);
    auto pr = picard_solve(sys, t);
    REQUIRE(pr.converged);
    CHECK(pr.iterations <= 10);

    SolverConfig cfg;
    cfg.rel_tol = 1e-12;
    cfg.abs_tol = 1e-15;
    cfg.t_min = 1e-4;
    cfg.t_max = t;
    cfg.renorm_mode = mode;
    auto ev = evolve(sys, cfg);
    REQUIRE(ev.ok);
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(std::abs(ev.final_point().values[k] - pr.values[k]) < 1e-7);
  }
}

TEST_CASE("residual magnitude scales like the cube of the data") {
  Support s({0.0, 1.0, 2.0});
  auto residual_at = [&](double scale) {
    std::vector<Cplx> al = {{scale, 0.0}, {0.0, scale}, {scale, -scale}};
    CoeffSystem sys(s, al, -1);
    auto pr = picard_solve(sys, 0.04);
    REQUIRE(pr.converged);
    return path_abs_max(pr.residual);
  };
  double r1 = residual_at(0.05);
  double r2 = residual_at(0.1);
  CHECK(r2 / r1 == doctest::Approx(8.0).epsilon(0.15));
}

TEST_CASE("invalid requests are rejected") {
  Support s({0.0, 1.0});
  CoeffSystem sys(s, {Cplx(0.1, 0), Cplx(0.1, 0)}, -1);
  CHECK_THROWS(picard_apply(sys, zero_path(2, 2), {0.02, 0.01}));   // not increasing
  CHECK_THROWS(picard_apply(sys, zero_path(2, 2), {-0.01, 0.02}));  // nonpositive
  CHECK_THROWS(picard_apply(sys, zero_path(2, 2), {}));             // empty grid
  CHECK_THROWS(picard_apply(sys, zero_path(1, 2), {0.01, 0.02}));   // wrong rows
  CHECK_THROWS(picard_apply(sys, zero_path(2, 3), {0.01, 0.02}));   // wrong cols
  CHECK_THROWS(picard_solve(sys, 0.0));
}
