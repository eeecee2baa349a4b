#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "vfl/support.hpp"

using namespace vfl;

TEST_CASE("support validates its locations") {
  CHECK_THROWS(Support(std::vector<double>{}));
  CHECK_THROWS(Support({1.0, 1.0}));
  CHECK_THROWS(Support({2.0, 1.0}));
  CHECK_THROWS(Support({0.0, std::nan("")}));
  Support s({-1.0, 0.5, 2.0});
  CHECK(s.size() == 3);
  CHECK(s.index_of(0.5) == 1);
  CHECK(s.index_of(0.7) == -1);
}

TEST_CASE("integer lattices are recognized") {
  CHECK(Support({-3.0, 0.0, 7.0}).integer_lattice);
  CHECK_FALSE(Support({0.0, 0.5}).integer_lattice);
  Support s({-2.0, 1.0});
  REQUIRE(s.integer_lattice);
  CHECK(s.ilocs[0] == -2);
  CHECK(s.ilocs[1] == 1);
}

TEST_CASE("a single location interacts only with itself") {
  auto split = resonant_split(Support({0.0}));
  CHECK(split.nonresonant[0].empty());
  CHECK(split.resonant_count[0] == 1);
  CHECK(split.omega_max == 0.0);
}

TEST_CASE("two locations produce no oscillatory terms") {
  auto split = resonant_split(Support({0.0, 1.0}));
  CHECK(split.nonresonant[0].empty());
  CHECK(split.nonresonant[1].empty());
  CHECK(split.resonant_count[0] == 3);
  CHECK(split.resonant_count[1] == 3);
}

TEST_CASE("three-point lattice: oscillatory terms and frequencies") {
  auto split = resonant_split(Support({0.0, 1.0, 2.0}));
  // target 0: only (1,2,1), frequency 2(x0-x1)(x0-x1) = 2
  REQUIRE(split.nonresonant[0].size() == 1);
  CHECK(split.nonresonant[0][0].j1 == 1);
  CHECK(split.nonresonant[0][0].j2 == 2);
  CHECK(split.nonresonant[0][0].j3 == 1);
  CHECK(split.nonresonant[0][0].omega == doctest::Approx(2.0));
  CHECK(split.nonresonant[0][0].iomega == 2);
  CHECK(split.resonant_count[0] == 5);
  // target 1: (0,1,2) and (2,1,0), both frequency -2
  REQUIRE(split.nonresonant[1].size() == 2);
  for (const auto& tr : split.nonresonant[1]) {
    CHECK(tr.j2 == 1);
    CHECK(tr.omega == doctest::Approx(-2.0));
  }
  // target 2 mirrors target 0
  REQUIRE(split.nonresonant[2].size() == 1);
  CHECK(split.nonresonant[2][0].omega == doctest::Approx(2.0));
  CHECK(split.omega_max == doctest::Approx(2.0));
}

namespace {

// reference classification by direct enumeration
void check_against_bruteforce(const Support& s, double tol) {
  auto split = resonant_split(s, tol);
  const auto& x = s.locs;
  for (std::size_t k = 0; k < s.size(); ++k) {
    std::size_t res = 0;
    std::set<std::array<int, 3>> expected;
    for (std::size_t j1 = 0; j1 < s.size(); ++j1)
      for (std::size_t j2 = 0; j2 < s.size(); ++j2)
        for (std::size_t j3 = 0; j3 < s.size(); ++j3) {
          if (std::abs(x[k] - x[j1] + x[j2] - x[j3]) > 1e-9) continue;
          double om = x[k] * x[k] - x[j1] * x[j1] + x[j2] * x[j2] - x[j3] * x[j3];
          if (std::abs(om) <= tol)
            ++res;
          else
            expected.insert({int(j1), int(j2), int(j3)});
        }
    CHECK(split.resonant_count[k] == res);
    REQUIRE(split.nonresonant[k].size() == expected.size());
    for (const auto& tr : split.nonresonant[k]) {
      CHECK(expected.count({tr.j1, tr.j2, tr.j3}) == 1);
      // frequency identity: omega = 2 (x_k - x_{j1}) (x_k - x_{j3})
      double om = 2.0 * (x[k] - x[tr.j1]) * (x[k] - x[tr.j3]);
      CHECK(tr.omega == doctest::Approx(om).epsilon(1e-12));
      CHECK(std::abs(tr.omega) <= split.omega_max);
    }
  }
}

}  // namespace

TEST_CASE("splits match brute-force enumeration") {
  check_against_bruteforce(Support({0.0, 1.0, 2.0, 3.0}), 1e-12);
  check_against_bruteforce(Support({-2.0, 0.0, 1.0, 4.0, 5.0}), 1e-12);
  check_against_bruteforce(Support({0.0, 0.5, 1.25, 2.0}), 1e-12);
  check_against_bruteforce(Support({-1.5, -0.25, 0.75, 1.0, 2.5, 3.75}), 1e-12);
}

TEST_CASE("constraint and frequency are consistent on every reported triple") {
  Support s({-3.0, -1.0, 0.0, 2.0, 4.0, 7.0});
  auto split = resonant_split(s);
  std::size_t total = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    for (const auto& tr : split.nonresonant[k]) {
      double cons = s.locs[k] - s.locs[tr.j1] + s.locs[tr.j2] - s.locs[tr.j3];
      CHECK(std::abs(cons) < 1e-12);
      CHECK(std::abs(tr.omega) > 1e-12);
      ++total;
    }
  }
  CHECK(total > 0);
}

TEST_CASE("near resonances are reported for almost-degenerate spacings") {
  // (1+eps, 1, 2, 2+eps) satisfies the constraint with frequency -2*eps
  double eps = 1e-6;
  Support s({0.0, 1.0, 1.0 + eps, 2.0, 2.0 + eps});
  auto split = resonant_split(s, 1e-12);
  REQUIRE_FALSE(split.near_resonances.empty());
  double smallest = 1e9;
  for (double w : split.near_resonances) smallest = std::min(smallest, std::abs(w));
  CHECK(smallest < 1e-4);
  CHECK(smallest > 1e-12);
}

TEST_CASE("single-target split matches the full split") {
  Support s({0.0, 1.0, 2.0, 5.0});
  auto full = resonant_split(s);
  for (std::size_t k = 0; k < s.size(); ++k) {
    auto one = resonant_split_at(s, s.locs[k]);
    REQUIRE(one.nonresonant[k].size() == full.nonresonant[k].size());
    CHECK(one.resonant_count[k] == full.resonant_count[k]);
    for (std::size_t i = 0; i < one.nonresonant[k].size(); ++i) {
      CHECK(one.nonresonant[k][i].j1 == full.nonresonant[k][i].j1);
      CHECK(one.nonresonant[k][i].j2 == full.nonresonant[k][i].j2);
      CHECK(one.nonresonant[k][i].j3 == full.nonresonant[k][i].j3);
    }
  }
}
