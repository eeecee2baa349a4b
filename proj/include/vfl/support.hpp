#pragma once
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfl {

using Cplx = std::complex<double>;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Sorted Dirac locations. Integer lattices are detected so resonance
// decisions can run in exact integer arithmetic.
struct Support {
  std::vector<double> locs;              // strictly increasing
  bool integer_lattice = false;
  std::vector<std::int64_t> ilocs;       // filled iff integer_lattice

  Support() = default;
  explicit Support(std::vector<double> xs);

  std::size_t size() const { return locs.size(); }
  // index of location x (within tol), -1 if absent
  int index_of(double x, double tol = 1e-12) const;
};

// One non-resonant interaction triple for a target index k:
// locations (j1, j2, j3) with x_k - x_j1 + x_j2 - x_j3 = 0 and
// omega = x_k^2 - x_j1^2 + x_j2^2 - x_j3^2 != 0.
struct Triple {
  int j1, j2, j3;
  double omega;
  std::int64_t iomega;  // exact value on integer lattices, else 0
};

struct QuadrupleSplit {
  const Support* support = nullptr;
  std::vector<std::vector<Triple>> nonresonant;  // per target index
  std::vector<std::size_t> resonant_count;       // per target index
  double omega_max = 0.0;                        // max |omega| over all triples
  std::vector<double> near_resonances;           // nonzero |omega| < 1 seen (non-integer supports)

  const std::vector<Triple>& for_target(int k) const { return nonresonant.at(k); }
};

// Enumerate the zero-momentum triples over the support and split them into
// resonant ({(k,j,j)} and {(j,j,k)}) and non-resonant classes. On integer
// lattices the quadratic phase is tested exactly; otherwise a triple counts
// as resonant when |omega| <= resonance_tol.
QuadrupleSplit resonant_split(const Support& s, double resonance_tol = 1e-12);

// Same, restricted to one target location (must belong to the support).
QuadrupleSplit resonant_split_at(const Support& s, double k_loc,
                                 double resonance_tol = 1e-12);

}  // namespace vfl
