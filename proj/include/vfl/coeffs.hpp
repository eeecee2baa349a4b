#pragma once
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "vfl/support.hpp"

namespace vfl {

enum class Scheme { rk_adaptive, integrating_factor };
enum class RenormMode { sum_sq, equal_modulus };

struct SolverConfig {
  Scheme scheme = Scheme::rk_adaptive;
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  double t_min = 1e-4;
  double t_max = 0.25;
  double resonance_tol = 1e-12;
  int sign = -1;                               // coupling sign in front of the interaction
  RenormMode renorm_mode = RenormMode::sum_sq;
  double c_phase = 0.25;                       // phase radians resolved per step (rk_adaptive)
  double panel_ratio = 0.5;                    // max panel width / s (integrating_factor)
  std::size_t max_steps = 500000000;
};

// The coupled oscillatory system for the interaction coefficients A_k(t) on a
// fixed support:
//   dA_k/dt = (i*sign / 8 pi t) * ( sum_{NR_k} e^{-i Omega/4t} A_{j1} conj(A_{j2}) A_{j3}
//                                   - self_k )
// self_k = |A_k|^2 A_k            (sum_sq)
//        = (|A_k|^2 - |alpha_k|^2) A_k   (equal_modulus)
// Shared by the time evolution, the fixed-point solver and frame co-integration.
class CoeffSystem {
 public:
  CoeffSystem(Support support, std::vector<Cplx> alphas, int sign = -1,
              RenormMode mode = RenormMode::sum_sq, double resonance_tol = 1e-12);

  struct PhasedTriple {
    int j1, j2, j3;
    std::size_t omega_idx;  // into distinct_omegas()
  };

  std::size_t size() const { return alphas_.size(); }
  const Support& support() const { return support_; }
  const QuadrupleSplit& split() const { return split_; }
  const std::vector<Cplx>& alphas() const { return alphas_; }
  double alpha_sq(std::size_t k) const { return alpha_sq_[k]; }
  double mass_parameter() const { return mass_param_; }  // sum_k |alpha_k|^2
  int sign() const { return sign_; }
  RenormMode renorm_mode() const { return mode_; }
  double omega_max() const { return split_.omega_max; }

  // dA/dt at time t > 0
  void rhs(double t, const Cplx* a, Cplx* da) const;
  // dA/ds in reciprocal time s = 1/t (phases become e^{-i Omega s / 4})
  void rhs_s(double s, const Cplx* a, Cplx* da) const;

  // largest step resolving every interaction phase at time t
  double phase_cap(double t, double c_phase) const;

  // data at t0 with zero perturbation: the slow-variable phase is applied in
  // sum_sq mode; equal_modulus starts at the bare coefficients
  std::vector<Cplx> initial_values(double t0) const;

  double mass(const Cplx* a) const;      // sum |A_k|^2
  double momentum(const Cplx* a) const;  // sum x_k |A_k|^2

  const std::vector<double>& distinct_omegas() const { return distinct_omegas_; }
  const std::vector<PhasedTriple>& triples_for(std::size_t k) const { return triples_[k]; }

 private:
  Support support_;
  std::vector<Cplx> alphas_;
  std::vector<double> alpha_sq_;
  double mass_param_ = 0.0;
  int sign_;
  RenormMode mode_;
  QuadrupleSplit split_;

  std::vector<double> distinct_omegas_;
  std::vector<std::vector<PhasedTriple>> triples_;  // per target index
  mutable std::vector<Cplx> phase_buf_;             // scratch; not thread-safe

  void fill_phases(double quarter_rate) const;  // phase_buf[m] = exp(-i om_m * quarter_rate / 4)
  void accumulate(const Cplx* a, Cplx* da, double inv_scale) const;
};

// Slow-variable change. In sum_sq mode A_k = exp(-i*sign*|alpha_k|^2/(4 pi) * log sqrt(t)) * Atilde_k;
// equal_modulus keeps the bare variables (identity map).
std::vector<Cplx> gauge_to_slow(const CoeffSystem& sys, double t, const std::vector<Cplx>& a);
std::vector<Cplx> gauge_from_slow(const CoeffSystem& sys, double t, const std::vector<Cplx>& a);

struct TrajectoryPoint {
  double t = 0.0;
  std::vector<Cplx> values;
  double mass = 0.0;
  double momentum = 0.0;
};

struct EvolveResult {
  std::vector<TrajectoryPoint> samples;  // requested times, endpoints included
  double max_mass_drift = 0.0;           // relative, monitored at accepted steps
  double max_momentum_drift = 0.0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
  bool ok = true;
  std::string message;
  const TrajectoryPoint& final_point() const { return samples.back(); }
};

// Evolve from sys.initial_values(cfg.t_min) over [cfg.t_min, cfg.t_max].
EvolveResult evolve(const CoeffSystem& sys, const SolverConfig& cfg,
                    std::vector<double> sample_ts = {});

// Evolve arbitrary data a0 from t0 to t1 (either direction).
EvolveResult evolve_values(const CoeffSystem& sys, const SolverConfig& cfg,
                           std::vector<Cplx> a0, double t0, double t1,
                           std::vector<double> sample_ts = {});

double conserved_mass(const CoeffSystem& sys, const std::vector<Cplx>& a);
double conserved_momentum(const CoeffSystem& sys, const std::vector<Cplx>& a);

}  // namespace vfl
