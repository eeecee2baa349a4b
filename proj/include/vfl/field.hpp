#pragma once
#include <vector>

#include "vfl/support.hpp"

namespace vfl {

// Kernel normalization for the point-source superposition.
//   analyst:   e^{i dx^2/4t} / sqrt(4 pi i t), principal branch (sqrt(i) = e^{i pi/4})
//   geometric: e^{i dx^2/4t} / sqrt(t), for data pre-scaled by sqrt(4 pi i)
enum class Normalization { analyst, geometric };

// Free-propagator point-source kernel at time t > 0 and offset dx.
Cplx point_kernel(double t, double dx, Normalization norm);

// u(t,x) = sum_k values[k] * kernel(t, x - x_k). The values are the
// coefficients at the evaluation time; callers keep them in sync with t.
struct FieldAnsatz {
  Support support;
  std::vector<Cplx> values;
  Normalization normalization = Normalization::analyst;

  FieldAnsatz() = default;
  FieldAnsatz(Support s, std::vector<Cplx> vals,
              Normalization norm = Normalization::analyst);
};

Cplx evaluate_u(const FieldAnsatz& f, double t, double x);
// Termwise spatial derivative: each term carries the factor i (x - x_k) / 2t.
Cplx evaluate_ux(const FieldAnsatz& f, double t, double x);

// Batch evaluation over parallel arrays of (t, x) points.
std::vector<Cplx> evaluate_u(const FieldAnsatz& f, const std::vector<double>& ts,
                             const std::vector<double>& xs);
std::vector<Cplx> evaluate_ux(const FieldAnsatz& f, const std::vector<double>& ts,
                              const std::vector<double>& xs);

// Phi(t,x) = sum_j asq[j] * log(|x - x_j| / sqrt(t)), skipping any location
// that matches x within the support tolerance (the singular term is dropped
// by contract, so on-support evaluation stays finite).
double modulation_phase(const Support& s, const std::vector<double>& alphas_sq,
                        double t, double x);

// Fourier symbol of the coefficient comb: sum_k values[k] e^{-i x_k xi}.
// 2 pi periodic in xi when the support is an integer lattice.
Cplx comb_symbol(const Support& s, const std::vector<Cplx>& values, double xi);

}  // namespace vfl
