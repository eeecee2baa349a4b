#pragma once
#include <vector>

#include "vfl/coeffs.hpp"

namespace vfl {

// Quadrature and iteration controls for the fixed-point integral operator.
struct PicardOptions {
  double panel_ratio = 1.05;  // geometric node growth in reciprocal time
  double s_max = 2e5;         // switch to the analytic tail beyond this
  double tail_phase = 1e3;    // ensure omega*s_max/4 >= tail_phase/4 for the smallest omega
  double head_gamma = 1.0;    // residual extrapolation R ~ (t/t_front)^gamma below the grid
  int max_iters = 80;
  double fp_tol = 1e-13;      // sup-norm stopping threshold for the iteration
};

// Sampled residual paths: path[k][i] is R at support location k, time grid[i].
using ResidualPath = std::vector<std::vector<Cplx>>;

struct PicardParts {
  ResidualPath single_part;  // i * sign * int_0^t g dtau
  ResidualPath double_part;  // i * int_0^t (1/4 pi tau) [int_0^tau Im(g conj(alpha+R))] (alpha+R) dtau
};

// One application of the fixed-point operator to a sampled residual path.
// grid must be strictly increasing and positive; the result samples the new
// residual on the same grid. The operator integrates from time zero: below
// the grid the residual is extrapolated by head_gamma, and the infinite
// reciprocal-time tail is handled by integration by parts.
ResidualPath picard_apply(const CoeffSystem& sys, const ResidualPath& residual_path,
                          const std::vector<double>& grid, const PicardOptions& opt = {});

// Same, with the two contributions reported separately (diagnostics/tests).
PicardParts picard_apply_parts(const CoeffSystem& sys, const ResidualPath& residual_path,
                               const std::vector<double>& grid, const PicardOptions& opt = {});

struct PicardResult {
  std::vector<double> grid;   // ascending times, grid.back() = requested t
  ResidualPath residual;      // fixed point R[k][i]
  ResidualPath slow_path;     // alpha_k + R_k[i]
  std::vector<Cplx> values;   // physical variables at grid.back()
  int iterations = 0;
  double last_update = 0.0;   // sup-norm of the final iteration step
  bool converged = false;
};

// Iterate R <- Phi(R) from R = 0 on an internally built dense grid ending at
// time t. Valid in the small-amplitude regime where the operator contracts.
PicardResult picard_solve(const CoeffSystem& sys, double t, const PicardOptions& opt = {});

}  // namespace vfl
