#include "vfl/support.hpp"

#include <algorithm>
#include <cmath>

namespace vfl {

Support::Support(std::vector<double> xs) : locs(std::move(xs)) {
  if (locs.empty()) throw std::invalid_argument("support: empty location list");
  for (std::size_t i = 0; i + 1 < locs.size(); ++i)
    if (!(locs[i] < locs[i + 1]))
      throw std::invalid_argument("support: locations must be strictly increasing");
  for (double x : locs)
    if (!std::isfinite(x)) throw std::invalid_argument("support: non-finite location");

  integer_lattice = true;
  for (double x : locs) {
    double r = std::nearbyint(x);
    if (std::abs(x - r) > 1e-12 || std::abs(r) > 4.0e15) {
      integer_lattice = false;
      break;
    }
  }
  if (integer_lattice) {
    ilocs.reserve(locs.size());
    for (double x : locs) ilocs.push_back(static_cast<std::int64_t>(std::llround(x)));
  }
}

int Support::index_of(double x, double tol) const {
  auto it = std::lower_bound(locs.begin(), locs.end(), x - tol);
  if (it != locs.end() && std::abs(*it - x) <= tol)
    return static_cast<int>(it - locs.begin());
  return -1;
}

namespace {

void split_for_target(const Support& s, int k, double resonance_tol,
                      QuadrupleSplit& out) {
  const auto& xs = s.locs;
  const int n = static_cast<int>(xs.size());
  auto& list = out.nonresonant[k];
  std::size_t res = 0;
  for (int j1 = 0; j1 < n; ++j1)
    for (int j2 = 0; j2 < n; ++j2) {
      // momentum constraint: x_j3 = x_k - x_j1 + x_j2
      int j3;
      std::int64_t io = 0;
      double om;
      if (s.integer_lattice) {
        std::int64_t t3 = s.ilocs[k] - s.ilocs[j1] + s.ilocs[j2];
        auto it = std::lower_bound(s.ilocs.begin(), s.ilocs.end(), t3);
        if (it == s.ilocs.end() || *it != t3) continue;
        j3 = static_cast<int>(it - s.ilocs.begin());
        io = s.ilocs[k] * s.ilocs[k] - s.ilocs[j1] * s.ilocs[j1] +
             s.ilocs[j2] * s.ilocs[j2] - t3 * t3;
        if (io == 0) {
          ++res;
          continue;
        }
        om = static_cast<double>(io);
      } else {
        double t3 = xs[k] - xs[j1] + xs[j2];
        j3 = s.index_of(t3, 1e-12);
        if (j3 < 0) continue;
        om = xs[k] * xs[k] - xs[j1] * xs[j1] + xs[j2] * xs[j2] - xs[j3] * xs[j3];
        if (std::abs(om) <= resonance_tol) {
          ++res;
          continue;
        }
        if (std::abs(om) < 1.0) out.near_resonances.push_back(om);
      }
      list.push_back(Triple{j1, j2, j3, om, io});
      out.omega_max = std::max(out.omega_max, std::abs(om));
    }
  out.resonant_count[k] = res;
}

}  // namespace

QuadrupleSplit resonant_split(const Support& s, double resonance_tol) {
  if (s.locs.empty()) throw std::invalid_argument("resonant_split: empty support");
  QuadrupleSplit out;
  out.support = &s;
  out.nonresonant.resize(s.size());
  out.resonant_count.resize(s.size(), 0);
  for (int k = 0; k < static_cast<int>(s.size()); ++k)
    split_for_target(s, k, resonance_tol, out);
  return out;
}

QuadrupleSplit resonant_split_at(const Support& s, double k_loc, double resonance_tol) {
  if (s.locs.empty()) throw std::invalid_argument("resonant_split: empty support");
  int k = s.index_of(k_loc);
  if (k < 0) throw std::invalid_argument("resonant_split: location not in support");
  QuadrupleSplit out;
  out.support = &s;
  out.nonresonant.resize(s.size());
  out.resonant_count.resize(s.size(), 0);
  split_for_target(s, k, resonance_tol, out);
  return out;
}

}  // namespace vfl
