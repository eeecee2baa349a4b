#pragma once
#include <vector>

#include "vfl/geom.hpp"

namespace vfl {

// Frame of the self-similar profile of amplitude a:
//   T'(x) = Re(a e^{-i x^2/4} N),   N'(x) = -a e^{i x^2/4} T,
// integrated outward from the canonical frame T(0)=e1, N(0)=e2+i*e3.
// As |x| grows, T approaches limit directions A+/- and the log-modulated
// normal e^{i a^2 log|x|} N approaches complex limits B+/-.

struct ProfileConfig {
  double rel_tol = 1e-11;
  double abs_tol = 1e-13;
  double c_phase = 0.25;    // phase radians resolved per step
  int window_points = 32;   // samples per averaging window
  int periods = 1;          // quadratic-phase periods per window
  double station_min = 8.0; // smallest station of the dyadic ladder
  int export_points = 0;    // uniform grid points per side kept in samples (0 = none)
};

struct ProfileSample {
  double x;
  Vec3 T;
  CVec3 N;
};

// Oscillation-free observables at one station |x| = x: the frame averaged
// over one full quadratic-phase period starting there.
struct StationAverage {
  double x;       // station magnitude
  Vec3 T_avg;
  CVec3 B_avg;    // average of e^{i a^2 log|y|} N(y) over the window
};

struct Asymptotics {
  Vec3 A_plus{}, A_minus{};
  CVec3 B_plus{}, B_minus{};
  double unit_defect = 0.0;   // worst | |A| - 1 |, | |Re B| - 1 |, | |Im B| - 1 |
  double ortho_defect = 0.0;  // worst pairwise orthogonality defect
  double X_window = 0.0;
};

struct SelfSimilarProfile {
  double a = 0.0;
  double X = 0.0;
  std::vector<ProfileSample> samples;         // export grid, ascending in x
  std::vector<StationAverage> stations_pos;   // dyadic ladder, ascending
  std::vector<StationAverage> stations_neg;   // same stations on the -x side
  double ortho_defect = 0.0;                  // worst frame defect before projection
  bool has_asymptotics = false;
  Asymptotics asym;
  bool has_phi = false;
  double phi = 0.0;
};

// Integrate the profile frame out to +-X (plus the outermost averaging
// window) and record station averages on the ladder X, X/2, X/4, ...
SelfSimilarProfile solve_profile(double a, double X, const ProfileConfig& cfg = {});

// Limit directions and modulated-normal limits by Richardson extrapolation
// in 1/x over the stations at X_window, X_window/2, X_window/4 (which must
// exist on the profile's ladder).
Asymptotics extract_asymptotics(const SelfSimilarProfile& p, double X_window);

// The unique phi in [0, 2pi) expressing the unit wedge direction
// W = (A- x A+)/|A- x A+| in the plus-side normal frame:
//   W = cos(phi) Re B+ + sin(phi) Im B+.
// Throws when the wedge is degenerate (a = 0: no corner).
double phi_from_asymptotics(const Asymptotics& as);

// || W - (cos(phi) Re B- + sin(phi) Im B-) ||: the same coordinates must
// reproduce W in the minus-side frame; measures parity/extraction quality.
double second_identity_residual(const Asymptotics& as, double phi);

// Opening angle of the corner between the incoming and outgoing rays,
// acos(-A- . A+); matches angle_from_alpha(a) for the exact profile.
double corner_angle(const Asymptotics& as);

// Convenience: solve, extract at X, and fill phi (when a > 0).
SelfSimilarProfile analyze_profile(double a, double X, const ProfileConfig& cfg = {});

// Corner-angle laws: theta = 2 asin(e^{-pi a^2 / 2}) and its inverse
// a = sqrt(-(2/pi) log sin(theta/2)), theta in (0, pi].
double angle_from_alpha(double a);
double alpha_from_angle(double theta);

}  // namespace vfl
