#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "vfl/coeffs.hpp"

using namespace vfl;
using std::polar;

namespace {

double max_abs_diff(const std::vector<Cplx>& a, const std::vector<Cplx>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// closed form for an isolated location: modulus is frozen, phase rotates
// logarithmically; A(t) = exp(-i*sign*|alpha|^2/(4 pi) * log sqrt(t)) * alpha
Cplx single_mode_exact(Cplx alpha, double t, int sign) {
  return alpha * polar(1.0, -sign * std::norm(alpha) / (4.0 * kPi) * std::log(std::sqrt(t)));
}

}  // namespace

TEST_CASE("construction validates input") {
  Support s({0.0, 1.0});
  CHECK_THROWS(CoeffSystem(s, {Cplx(1, 0)}, -1));                  // size mismatch
  CHECK_THROWS(CoeffSystem(s, {Cplx(1, 0), Cplx(0, 0)}, 2));       // bad sign
  CHECK_THROWS(CoeffSystem(s, {Cplx(std::nan(""), 0), Cplx(1, 0)}, -1));
  CoeffSystem sys(s, {Cplx(0.3, 0.1), Cplx(-0.2, 0.4)}, -1);
  CHECK(sys.mass_parameter() == doctest::Approx(0.09 + 0.01 + 0.04 + 0.16));
}

TEST_CASE("isolated location follows the logarithmic phase rotation exactly") {
  Support s({0.0});
  Cplx alpha = polar(0.8, 0.3);
  for (int sign : {-1, 1}) {
    CoeffSystem sys(s, {alpha}, sign, RenormMode::sum_sq);
    SolverConfig cfg;
    cfg.sign = sign;
    cfg.t_min = 0.01;
    cfg.t_max = 0.5;
    cfg.rel_tol = 1e-12;
    cfg.abs_tol = 1e-14;
    auto res = evolve(sys, cfg, {0.02, 0.1, 0.37});
    REQUIRE(res.ok);
    REQUIRE(res.samples.size() == 5);
    for (const auto& pt : res.samples) {
      CHECK(std::abs(pt.values[0] - single_mode_exact(alpha, pt.t, sign)) < 1e-10);
      CHECK(std::abs(std::abs(pt.values[0]) - 0.8) < 1e-12);
    }
  }
}

TEST_CASE("isolated location is frozen in modulus-anchored mode") {
  Support s({0.0});
  Cplx alpha = polar(0.8, -1.1);
  CoeffSystem sys(s, {alpha}, -1, RenormMode::equal_modulus);
  SolverConfig cfg;
  cfg.renorm_mode = RenormMode::equal_modulus;
  cfg.t_min = 0.01;
  cfg.t_max = 0.5;
  auto res = evolve(sys, cfg);
  REQUIRE(res.ok);
  CHECK(std::abs(res.final_point().values[0] - alpha) < 1e-12);
}

TEST_CASE("two isolated modes: both self-term conventions agree after the slow change") {
  // supports {0,1} carry no oscillatory terms, so the relation is exact
  Support s({0.0, 1.0});
  std::vector<Cplx> alphas = {polar(0.5, 0.2), polar(0.7, -0.9)};
  SolverConfig cfg;
  cfg.t_min = 0.02;
  cfg.t_max = 0.3;
  cfg.rel_tol = 1e-12;
  cfg.abs_tol = 1e-14;

  CoeffSystem sys_ss(s, alphas, -1, RenormMode::sum_sq);
  auto res_ss = evolve(sys_ss, cfg);
  REQUIRE(res_ss.ok);

  CoeffSystem sys_em(s, alphas, -1, RenormMode::equal_modulus);
  cfg.renorm_mode = RenormMode::equal_modulus;
  auto res_em = evolve(sys_em, cfg);
  REQUIRE(res_em.ok);

  // slow variables of the sum_sq run equal the modulus-anchored values
  auto slow = gauge_to_slow(sys_ss, cfg.t_max, res_ss.final_point().values);
  CHECK(max_abs_diff(slow, res_em.final_point().values) < 1e-10);
  // and both equal the bare coefficients here (no interactions at all)
  CHECK(max_abs_diff(slow, alphas) < 1e-10);
}

TEST_CASE("zero data stays zero") {
  Support s({0.0, 1.0, 2.0});
  CoeffSystem sys(s, {Cplx(0, 0), Cplx(0, 0), Cplx(0, 0)}, -1);
  SolverConfig cfg;
  cfg.t_min = 0.01;
  cfg.t_max = 0.1;
  auto res = evolve(sys, cfg);
  REQUIRE(res.ok);
  for (const auto& v : res.final_point().values) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("right-hand side conserves mass and momentum pointwise") {
  // d/dt sum |A|^2 = 2 Re sum conj(A) dA = 0 up to roundoff, same with weights x_k
  auto check = [](const Support& s, const std::vector<Cplx>& a, RenormMode mode) {
    CoeffSystem sys(s, a, -1, mode);
    std::vector<Cplx> da(a.size());
    for (double t : {1.0 / (2.0 * kPi), 0.003, 0.7}) {
      sys.rhs(t, a.data(), da.data());
      double dm = 0, dp = 0, scale = 0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        double r = 2.0 * std::real(std::conj(a[k]) * da[k]);
        dm += r;
        dp += s.locs[k] * r;
        scale += std::abs(da[k]);
      }
      CHECK(std::abs(dm) < 1e-13 * std::max(scale, 1.0));
      CHECK(std::abs(dp) < 1e-13 * std::max(scale, 1.0));
    }
  };
  std::vector<Cplx> a4 = {polar(0.4, 0.1), polar(0.6, -2.0), polar(0.3, 1.2), polar(0.5, 2.8)};
  check(Support({0.0, 1.0, 2.0, 3.0}), a4, RenormMode::sum_sq);
  check(Support({0.0, 1.0, 2.0, 3.0}), a4, RenormMode::equal_modulus);
  check(Support({-1.5, 0.25, 0.75, 2.0}), a4, RenormMode::sum_sq);
}

TEST_CASE("mass and momentum drift stay tiny along the evolution") {
  Support s({0.0, 1.0, 2.0, 3.0});
  std::vector<Cplx> alphas = {polar(0.4, 0.1), polar(0.6, -2.0), polar(0.3, 1.2),
                              polar(0.5, 2.8)};
  CoeffSystem sys(s, alphas, -1);
  SolverConfig cfg;
  cfg.t_min = 0.01;
  cfg.t_max = 0.1;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-12;
  auto res = evolve(sys, cfg);
  REQUIRE(res.ok);
  CHECK(res.max_mass_drift < 1e-9);
  CHECK(res.max_momentum_drift < 1e-9);
  CHECK(res.steps > 0);
}

TEST_CASE("slow-variable change is an exact involution") {
  Support s({0.0, 1.0, 2.0});
  std::vector<Cplx> alphas = {polar(0.4, 0.1), polar(0.6, -2.0), polar(0.3, 1.2)};
  CoeffSystem sys(s, alphas, -1);
  std::vector<Cplx> vals = {polar(0.41, 0.3), polar(0.58, -1.7), polar(0.33, 0.9)};
  for (double t : {0.003, 0.5, 1.0, 7.0}) {
    auto round = gauge_from_slow(sys, t, gauge_to_slow(sys, t, vals));
    CHECK(max_abs_diff(round, vals) < 1e-14);
  }
  // at t = 1 the change is the identity
  CHECK(max_abs_diff(gauge_to_slow(sys, 1.0, vals), vals) == 0.0);
  // slow variables of the prepared data equal the bare coefficients
  auto a0 = sys.initial_values(0.037);
  CHECK(max_abs_diff(gauge_to_slow(sys, 0.037, a0), alphas) < 1e-14);
}

TEST_CASE("forward then backward evolution returns the data") {
  Support s({0.0, 1.0, 2.0});
  std::vector<Cplx> alphas = {polar(0.5, 0.0), polar(0.5, 1.0), polar(0.5, -1.0)};
  CoeffSystem sys(s, alphas, -1);
  SolverConfig cfg;
  cfg.rel_tol = 1e-11;
  cfg.abs_tol = 1e-13;
  auto a0 = sys.initial_values(0.02);
  auto fwd = evolve_values(sys, cfg, a0, 0.02, 0.4);
  REQUIRE(fwd.ok);
  auto bwd = evolve_values(sys, cfg, fwd.final_point().values, 0.4, 0.02);
  REQUIRE(bwd.ok);
  CHECK(max_abs_diff(bwd.final_point().values, a0) < 1e-8);
}

TEST_CASE("requested sample times are hit exactly and in order") {
  Support s({0.0, 1.0});
  CoeffSystem sys(s, {Cplx(0.3, 0), Cplx(0.2, 0.1)}, -1);
  SolverConfig cfg;
  auto res = evolve_values(sys, cfg, sys.initial_values(0.01), 0.01, 0.2,
                           {0.15, 0.05, 0.1});
  REQUIRE(res.ok);
  REQUIRE(res.samples.size() == 5);
  const double expect[] = {0.01, 0.05, 0.1, 0.15, 0.2};
  for (int i = 0; i < 5; ++i) CHECK(res.samples[i].t == doctest::Approx(expect[i]).epsilon(1e-14));
  // backward runs sample in descending order
  auto back = evolve_values(sys, cfg, sys.initial_values(0.2), 0.2, 0.01, {0.05, 0.15});
  REQUIRE(back.ok);
  REQUIRE(back.samples.size() == 4);
  CHECK(back.samples[0].t == doctest::Approx(0.2));
  CHECK(back.samples[3].t == doctest::Approx(0.01));
  CHECK_THROWS(evolve_values(sys, cfg, sys.initial_values(0.2), 0.2, 0.01, {0.5}));
}

TEST_CASE("oscillatory panel scheme matches the adaptive integrator") {
  Support s({0.0, 1.0, 2.0});
  std::vector<Cplx> alphas = {polar(0.45, 0.4), polar(0.55, -0.3), polar(0.35, 2.0)};
  CoeffSystem sys(s, alphas, -1);

  SolverConfig fine;
  fine.rel_tol = 1e-12;
  fine.abs_tol = 1e-14;
  auto a0 = sys.initial_values(0.02);
  auto ref = evolve_values(sys, fine, a0, 0.02, 0.25);
  REQUIRE(ref.ok);

  SolverConfig panel;
  panel.scheme = Scheme::integrating_factor;
  panel.rel_tol = 1e-9;
  panel.abs_tol = 1e-11;
  auto got = evolve_values(sys, panel, a0, 0.02, 0.25);
  REQUIRE(got.ok);
  CHECK(max_abs_diff(got.final_point().values, ref.final_point().values) < 1e-6);
  CHECK(got.max_mass_drift < 1e-7);

  // and on descent
  auto ref_b = evolve_values(sys, fine, a0, 0.02, 0.004);
  REQUIRE(ref_b.ok);
  auto got_b = evolve_values(sys, panel, a0, 0.02, 0.004);
  REQUIRE(got_b.ok);
  CHECK(max_abs_diff(got_b.final_point().values, ref_b.final_point().values) < 1e-6);
}

TEST_CASE("shrinking the start time barely moves the later state") {
  // prepared data at t0 carries zero perturbation; the perturbation the
  // dynamics builds up below a small t0 is O(t0) in the state at fixed t
  Support s({0.0, 1.0, 2.0});
  std::vector<Cplx> alphas = {polar(0.2, 0.4), polar(0.25, -0.3), polar(0.15, 2.0)};
  CoeffSystem sys(s, alphas, -1);
  SolverConfig cfg;
  cfg.rel_tol = 1e-11;
  cfg.abs_tol = 1e-13;
  double t_ref = 0.1;

  cfg.t_min = 4e-4;
  cfg.t_max = t_ref;
  auto coarse = evolve(sys, cfg);
  REQUIRE(coarse.ok);
  cfg.t_min = 2e-4;
  auto fine = evolve(sys, cfg);
  REQUIRE(fine.ok);
  CHECK(max_abs_diff(coarse.final_point().values, fine.final_point().values) < 2e-3);
}

TEST_CASE("invalid evolution requests are rejected") {
  Support s({0.0});
  CoeffSystem sys(s, {Cplx(0.5, 0)}, -1);
  SolverConfig cfg;
  CHECK_THROWS(evolve_values(sys, cfg, {Cplx(1, 0), Cplx(1, 0)}, 0.01, 0.1));
  CHECK_THROWS(evolve_values(sys, cfg, {Cplx(1, 0)}, -0.01, 0.1));
  CHECK_THROWS(evolve_values(sys, cfg, {Cplx(1, 0)}, 0.01, 0.0));
  CHECK_THROWS(evolve_values(sys, cfg, {Cplx(std::nan(""), 0)}, 0.01, 0.1));
  cfg.t_min = 0;
  CHECK_THROWS(evolve(sys, cfg));
}

TEST_CASE("interaction phases respect the frequency table") {
  // rhs at t and the reciprocal-time rhs at s = 1/t describe the same flow:
  // dA/ds = -t^2 dA/dt
  Support s({0.0, 1.0, 2.0, 4.0});
  std::vector<Cplx> a = {polar(0.4, 0.1), polar(0.6, -2.0), polar(0.3, 1.2), polar(0.5, 2.8)};
  CoeffSystem sys(s, a, -1);
  std::vector<Cplx> dt_form(4), ds_form(4);
  for (double t : {0.01, 0.3, 2.0}) {
    sys.rhs(t, a.data(), dt_form.data());
    sys.rhs_s(1.0 / t, a.data(), ds_form.data());
    for (int k = 0; k < 4; ++k)
      CHECK(std::abs(ds_form[k] + t * t * dt_form[k]) < 1e-12 * std::max(1.0, std::abs(dt_form[k]) * t * t));
  }
}
