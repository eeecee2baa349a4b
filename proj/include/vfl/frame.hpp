#pragma once
#include <cstddef>
#include <vector>

#include "vfl/coeffs.hpp"
#include "vfl/field.hpp"
#include "vfl/geom.hpp"

namespace vfl {

// Row-major 3x3 rotation matrix (rows are images of the basis vectors'
// coordinates: y = M x with y_i = sum_j M[i][j] x_j).
using Mat3 = std::array<Vec3, 3>;

Vec3 mat_apply(const Mat3& m, const Vec3& v);

// Orthonormal moving frame: tangent T and normal pair (e1, e2) with
// N = e1 + i e2. Right-handed: det[T e1 e2] = +1.
struct Frame {
  Vec3 T{1.0, 0.0, 0.0};
  Vec3 e1{0.0, 1.0, 0.0};
  Vec3 e2{0.0, 0.0, 1.0};
};

// Worst orthonormality defect: max over |<a,b> - delta_ab| and the
// handedness error ||e2 - T ^ e1||_inf contributes via the dot terms only.
double frame_orthonormality_defect(const Frame& f);

// Right-handedness indicator: T . (e1 ^ e2), +1 for a proper frame.
double frame_handedness(const Frame& f);

struct FrameConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double c_phase = 0.25;        // phase radians resolved per step
  double phase_exponent = 0.0;  // constant-in-x gauge rotation of the field
                                // (transport laws adjusted to compensate)
  double drift_limit = 1e-6;    // hard cap on per-step orthonormality defect
  double frame_tol = 1e-8;      // tolerance for input frame orthonormality
  int sign = -1;                // focusing/defocusing switch of the evolution
  RenormMode renorm_mode = RenormMode::sum_sq;
  bool freeze_coefficients = false;  // keep coefficients fixed (diagnostics)
  std::size_t max_steps = 500000000;
};

// A construction is anchored at (t0, x=0): position P and frame there.
struct AnchoredConstruction {
  Vec3 P{0.0, 0.0, 0.0};
  double t0 = 0.25;
  Frame base_frame{};
};

// Curve snapshot at fixed time: sample locations (ascending), positions
// and frames. ||points[i+1]-points[i]|| tracks |xs[i+1]-xs[i]| (unit-speed).
struct CurveState {
  double t = 0.0;
  std::vector<double> xs;
  std::vector<Vec3> points;
  std::vector<Frame> frames;
};

// Result of evolving the anchored frame in time at x = 0.
struct TimeAdvance {
  double t = 0.0;
  Frame frame;
  std::vector<Cplx> values;  // coefficients at t (same order as support)
  Vec3 chi{};                // anchor position at t
  double max_drift_rate = 0.0;  // worst pre-correction defect per unit time
  double max_step_defect = 0.0; // worst single-step pre-correction defect
  double post_defect = 0.0;     // defect after the final correction
  std::size_t steps = 0;
};

// t -> 0 extrapolation of the tangent at fixed x. Components are reported
// in the construction's anchor basis (the anchor frame with the anchor
// point's own modulated-normal phase removed): the construction's global
// orientation wanders slowly with the anchor corner's perpetual spiral, and
// only components taken in that co-moving basis settle. Angles between
// limits are unaffected, and with a single source at the anchor the basis
// is static so the components are absolute.
struct TangentTrace {
  Vec3 T0{};
  double rate = 0.0;  // fitted decay exponent of the deviation from T0
  bool exact = false; // samples coincide to roundoff (no fit performed)
  std::vector<Vec3> samples;
};

// t -> 0 extrapolation of the phase-renormalized normal at fixed x, in the
// same anchor basis as TangentTrace.
struct NormalTrace {
  CVec3 N0{};
  double rate = 0.0;
  bool exact = false;
  std::vector<CVec3> samples;
};

// Least-squares fit of a corner trajectory to the sqrt(t)-spiral
//   chi(t) = center + sqrt(t) (v1 sin(mu log sqrt(t/t0)) +
//                              v2 cos(mu log sqrt(t/t0))),
// plus a straight-line comparison fit chi(t) = center + sqrt(t) v.
struct SpiralFit {
  Vec3 center{}, v1{}, v2{};
  double mu = 0.0;             // angular rate in log sqrt(t)
  double residual = 0.0;       // max_i ||chi_i - model(t_i)||
  double residual_over_t = 0.0;// max_i ||chi_i - model(t_i)|| / t_i
  double ortho_defect = 0.0;   // |v1.v2| / (|v1| |v2|), 0 when degenerate
  bool degenerate = false;     // spiral amplitude below resolution
  double straight_residual = 0.0;         // same metrics for the line fit
  double straight_residual_over_t = 0.0;
  std::vector<double> ts;
  std::vector<Vec3> chis;
};

// Frames along the self-similar paths x = corner + xtilde sqrt(t_n),
// demodulated and compared against the stored similarity profile.
struct PathProbe {
  std::vector<double> xtilde;
  std::vector<double> ts;           // probe times, decreasing
  std::vector<Vec3> T_star;         // tangents at the finest time
  std::vector<CVec3> N_star;        // demodulated normals at the finest time
  Mat3 theta{};                     // best-fit rotation profile -> probe
  std::vector<double> residuals;    // per-time RMS mismatch after refit
  double residual = 0.0;            // mismatch at the finest time
};

// Evolve the anchored frame, coefficients and anchor position from
// anchor.t0 to t_target at x = 0. t_target must be positive; the frame is
// re-orthonormalized after every accepted step and the pre-correction
// defect is recorded (exceeding drift_limit aborts the integration).
TimeAdvance advance_frame_in_time(const AnchoredConstruction& anchor,
                                  const FieldAnsatz& field, double t_target,
                                  const FrameConfig& cfg = {});

// Transport a frame along x at fixed time t > 0. xs must be sorted
// ascending and contain 0 (the location of frame_at_0); the returned curve
// starts at the origin. values in `field` are the coefficients at time t;
// gauge_phase is the constant normal-phase rotation applied to the field
// (reconstruct_curve passes the one matching its time gauge).
CurveState integrate_frame_in_space(const Frame& frame_at_0,
                                    const FieldAnsatz& field, double t,
                                    const std::vector<double>& xs,
                                    const FrameConfig& cfg = {},
                                    double gauge_phase = 0.0);

// Full curve snapshot at time t: advance the anchor in time, then sweep in
// space. xs as in integrate_frame_in_space.
CurveState reconstruct_curve(const AnchoredConstruction& anchor,
                             const FieldAnsatz& field, double t,
                             const std::vector<double>& xs,
                             const FrameConfig& cfg = {});

// Extrapolate T(t, x) over a decreasing time sequence (>= 3 entries,
// all within (0, anchor.t0]). The fitted rate is the exponent rho in
// ||T(t_{j+1}, x) - T(t_j, x)|| ~ t^rho.
TangentTrace tangent_trace(const AnchoredConstruction& anchor,
                           const FieldAnsatz& field, double x,
                           const std::vector<double>& ts,
                           const FrameConfig& cfg = {});

// Extrapolate the phase-renormalized normal at fixed x (off the support):
// the log-divergent rotation of the raw normal is removed by the
// inter-corner modulation phase, leaving a finite limit.
NormalTrace modulated_normal_trace(const AnchoredConstruction& anchor,
                                   const FieldAnsatz& field, double x,
                                   const std::vector<double>& ts,
                                   const FrameConfig& cfg = {});

// Trajectory t -> chi(t, corner) sampled on t_grid (entries in (0, t0]),
// fitted to the sqrt(t)-spiral with rate mu = M, the total squared
// amplitude. `corner` must be a support location unless the support is
// empty.
SpiralFit corner_trajectory(const AnchoredConstruction& anchor,
                            const FieldAnsatz& field, double corner,
                            const std::vector<double>& t_grid,
                            const FrameConfig& cfg = {});

// Sample the frame along x = corner + xtilde sqrt(t_n) for each probe time
// (decreasing), demodulate the normal, and fit the rotation mapping the
// stored self-similar profile of matching amplitude onto the samples.
// The corner must carry a nonzero coefficient.
PathProbe selfsimilar_path_probe(const AnchoredConstruction& anchor,
                                 const FieldAnsatz& field, double corner,
                                 const std::vector<double>& xtilde,
                                 const std::vector<double>& t_ns,
                                 const FrameConfig& cfg = {});

}  // namespace vfl
