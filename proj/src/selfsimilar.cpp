#include "vfl/selfsimilar.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "vfl/ode.hpp"
#include "vfl/phase_util.hpp"

namespace vfl {

namespace {

using State = std::array<double, 9>;  // T, Re N, Im N

double frame_defect(const std::vector<double>& y) {
  auto d3 = [&](int i, int j) {
    return y[i] * y[j] + y[i + 1] * y[j + 1] + y[i + 2] * y[j + 2];
  };
  double worst = 0.0;
  for (int i : {0, 3, 6}) worst = std::max(worst, std::abs(d3(i, i) - 1.0));
  worst = std::max(worst, std::abs(d3(0, 3)));
  worst = std::max(worst, std::abs(d3(0, 6)));
  worst = std::max(worst, std::abs(d3(3, 6)));
  return worst;
}

void orthonormalize(std::vector<double>& y) {
  auto scale = [&](int i, double f) {
    y[i] *= f;
    y[i + 1] *= f;
    y[i + 2] *= f;
  };
  auto d3 = [&](int i, int j) {
    return y[i] * y[j] + y[i + 1] * y[j + 1] + y[i + 2] * y[j + 2];
  };
  auto sub = [&](int i, int j, double f) {
    y[i] -= f * y[j];
    y[i + 1] -= f * y[j + 1];
    y[i + 2] -= f * y[j + 2];
  };
  scale(0, 1.0 / std::sqrt(d3(0, 0)));
  sub(3, 0, d3(3, 0));
  scale(3, 1.0 / std::sqrt(d3(3, 3)));
  sub(6, 0, d3(6, 0));
  sub(6, 3, d3(6, 3));
  scale(6, 1.0 / std::sqrt(d3(6, 6)));
}

struct SideData {
  std::map<double, State> at;  // keyed by the signed sample coordinate
};

SideData integrate_side(double a, int dir, const std::vector<double>& pts_abs,
                        const ProfileConfig& cfg, double& worst_defect) {
  SideData out;
  if (pts_abs.empty()) return out;

  // pts_abs is ascending; negating it already gives the descending traversal
  // order of the backward run
  std::vector<double> samples;
  samples.reserve(pts_abs.size());
  for (double x : pts_abs) samples.push_back(dir * x);

  std::vector<double> y = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  OdeOptions opt;
  opt.rel_tol = cfg.rel_tol;
  opt.abs_tol = cfg.abs_tol;
  const double cp = std::max(1e-3, cfg.c_phase);
  opt.max_h = [cp](double x) {
    return std::min(0.5, 2.0 * cp / std::max(std::abs(x), 1e-9));
  };

  auto rhs = [a](double x, const std::vector<double>& s, std::vector<double>& ds) {
    const Cplx e = cis_reduced(static_cast<long double>(x) * x / 4.0L);
    const double c = a * e.real(), sn = a * e.imag();
    for (int i = 0; i < 3; ++i) {
      ds[i] = c * s[3 + i] + sn * s[6 + i];
      ds[3 + i] = -c * s[i];
      ds[6 + i] = -sn * s[i];
    }
  };
  auto accept = [&worst_defect](double, std::vector<double>& s) -> bool {
    double d = frame_defect(s);
    worst_defect = std::max(worst_defect, d);
    if (d <= 1e-13) return false;
    orthonormalize(s);
    return true;
  };
  auto sample = [&out](double x, const std::vector<double>& s) {
    State st;
    std::copy(s.begin(), s.end(), st.begin());
    out.at[x] = st;
  };

  const double x_end = samples.empty() ? 0.0 : samples.back();
  OdeReport rep = dopri5(rhs, y, 0.0, x_end, opt, samples, sample, accept);
  if (!rep.ok)
    throw std::runtime_error("profile integration failed: " + rep.message);
  return out;
}

const State& lookup(const SideData& side, double x) {
  auto it = side.at.lower_bound(x - 1e-9 * std::max(1.0, std::abs(x)));
  if (it == side.at.end() ||
      std::abs(it->first - x) > 1e-9 * std::max(1.0, std::abs(x)))
    throw std::logic_error("profile sample bookkeeping lost a window point");
  return it->second;
}

Vec3 state_T(const State& s) { return {s[0], s[1], s[2]}; }

CVec3 state_N(const State& s) {
  return {Cplx(s[3], s[6]), Cplx(s[4], s[7]), Cplx(s[5], s[8])};
}

}  // namespace

SelfSimilarProfile solve_profile(double a, double X, const ProfileConfig& cfg) {
  if (!std::isfinite(a) || a < 0.0)
    throw std::invalid_argument("solve_profile: amplitude must be finite and nonnegative");
  if (!std::isfinite(X) || !(X > 0.0))
    throw std::invalid_argument("solve_profile: X must be positive and finite");

  SelfSimilarProfile p;
  p.a = a;
  p.X = X;

  std::vector<double> stations;
  for (double s = X; s >= cfg.station_min; s *= 0.5) stations.push_back(s);
  std::sort(stations.begin(), stations.end());

  const int P = std::max(4, cfg.window_points);
  const int m = std::max(1, cfg.periods);
  std::vector<std::vector<double>> windows(stations.size());
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const double psi0 = stations[i] * stations[i] / 4.0;
    for (int j = 0; j < P; ++j)
      windows[i].push_back(2.0 * std::sqrt(psi0 + 2.0 * kPi * m * j / P));
  }

  std::vector<double> grid;
  if (cfg.export_points > 1)
    for (int j = 0; j < cfg.export_points; ++j)
      grid.push_back(X * j / (cfg.export_points - 1));
  else if (cfg.export_points == 1)
    grid.push_back(0.0);

  std::vector<double> pts;  // positive magnitudes, ascending, deduplicated
  for (double g : grid) pts.push_back(g);
  for (const auto& w : windows) pts.insert(pts.end(), w.begin(), w.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](double u, double v) {
                          return std::abs(u - v) <= 1e-12 * std::max(1.0, std::abs(v));
                        }),
            pts.end());

  std::vector<double> pts_neg;
  for (double x : pts)
    if (x > 0.0) pts_neg.push_back(x);

  double defect = 0.0;
  SideData fwd = integrate_side(a, +1, pts, cfg, defect);
  SideData bwd = integrate_side(a, -1, pts_neg, cfg, defect);
  p.ortho_defect = defect;

  for (const auto& [x, st] : bwd.at)
    p.samples.push_back({x, state_T(st), state_N(st)});
  for (const auto& [x, st] : fwd.at)
    p.samples.push_back({x, state_T(st), state_N(st)});
  if (cfg.export_points <= 0) p.samples.clear();
  if (cfg.export_points > 0) {
    // keep only the export grid in samples; the window points stay in the
    // station averages
    std::vector<ProfileSample> kept;
    for (const auto& s : p.samples) {
      double ax = std::abs(s.x);
      bool on_grid = false;
      for (double g : grid)
        if (std::abs(ax - g) <= 1e-12 * std::max(1.0, g)) {
          on_grid = true;
          break;
        }
      if (on_grid) kept.push_back(s);
    }
    p.samples = std::move(kept);
  }

  const double asq = a * a;
  for (std::size_t i = 0; i < stations.size(); ++i) {
    StationAverage pos{stations[i], {0, 0, 0}, {Cplx(0), Cplx(0), Cplx(0)}};
    StationAverage neg = pos;
    for (double x : windows[i]) {
      const Cplx mod = cis_reduced(static_cast<long double>(asq) * std::log(x));
      const State& sp = lookup(fwd, x);
      const State& sn = lookup(bwd, -x);
      pos.T_avg = pos.T_avg + state_T(sp);
      neg.T_avg = neg.T_avg + state_T(sn);
      pos.B_avg = pos.B_avg + mod * state_N(sp);
      neg.B_avg = neg.B_avg + mod * state_N(sn);
    }
    const double inv = 1.0 / static_cast<double>(windows[i].size());
    pos.T_avg = inv * pos.T_avg;
    neg.T_avg = inv * neg.T_avg;
    pos.B_avg = Cplx(inv, 0) * pos.B_avg;
    neg.B_avg = Cplx(inv, 0) * neg.B_avg;
    p.stations_pos.push_back(pos);
    p.stations_neg.push_back(neg);
  }
  return p;
}

namespace {

const StationAverage* find_station(const std::vector<StationAverage>& v, double x) {
  for (const auto& s : v)
    if (std::abs(s.x - x) <= 1e-9 * std::max(1.0, x)) return &s;
  return nullptr;
}

}  // namespace

Asymptotics extract_asymptotics(const SelfSimilarProfile& p, double X_window) {
  const double xs[3] = {X_window / 4.0, X_window / 2.0, X_window};
  const StationAverage* sp[3];
  const StationAverage* sn[3];
  for (int i = 0; i < 3; ++i) {
    sp[i] = find_station(p.stations_pos, xs[i]);
    sn[i] = find_station(p.stations_neg, xs[i]);
    if (!sp[i] || !sn[i])
      throw std::invalid_argument(
          "extract_asymptotics: station ladder does not cover the requested window");
  }

  auto rich_r = [](const Vec3& v1, const Vec3& v2, const Vec3& v3) {
    return (1.0 / 3.0) * ((8.0 * v3) - (6.0 * v2) + v1);
  };
  auto rich_c = [](const CVec3& v1, const CVec3& v2, const CVec3& v3) {
    CVec3 out;
    for (int i = 0; i < 3; ++i)
      out[i] = (8.0 * v3[i] - 6.0 * v2[i] + v1[i]) / 3.0;
    return out;
  };

  Asymptotics as;
  as.X_window = X_window;
  as.A_plus = rich_r(sp[0]->T_avg, sp[1]->T_avg, sp[2]->T_avg);
  as.A_minus = rich_r(sn[0]->T_avg, sn[1]->T_avg, sn[2]->T_avg);
  as.B_plus = rich_c(sp[0]->B_avg, sp[1]->B_avg, sp[2]->B_avg);
  as.B_minus = rich_c(sn[0]->B_avg, sn[1]->B_avg, sn[2]->B_avg);

  double unit = 0.0, ortho = 0.0;
  for (const Vec3* A : {&as.A_plus, &as.A_minus})
    unit = std::max(unit, std::abs(norm(*A) - 1.0));
  for (int side = 0; side < 2; ++side) {
    const Vec3& A = side ? as.A_minus : as.A_plus;
    const CVec3& B = side ? as.B_minus : as.B_plus;
    const Vec3 re = real_part(B), im = imag_part(B);
    unit = std::max({unit, std::abs(norm(re) - 1.0), std::abs(norm(im) - 1.0)});
    ortho = std::max({ortho, std::abs(dot(A, re)), std::abs(dot(A, im)),
                      std::abs(dot(re, im))});
  }
  as.unit_defect = unit;
  as.ortho_defect = ortho;
  return as;
}

namespace {

Vec3 unit_wedge(const Asymptotics& as) {
  Vec3 w = cross(as.A_minus, as.A_plus);
  const double n = norm(w);
  if (n < 1e-8)
    throw std::domain_error("wedge direction degenerate: the profile has no corner");
  return (1.0 / n) * w;
}

}  // namespace

double phi_from_asymptotics(const Asymptotics& as) {
  const Vec3 w = unit_wedge(as);
  const double c = dot(w, real_part(as.B_plus));
  const double s = dot(w, imag_part(as.B_plus));
  double phi = std::atan2(s, c);
  if (phi < 0.0) phi += 2.0 * kPi;
  return phi;
}

double second_identity_residual(const Asymptotics& as, double phi) {
  const Vec3 w = unit_wedge(as);
  const Vec3 rec = std::cos(phi) * real_part(as.B_minus) +
                   std::sin(phi) * imag_part(as.B_minus);
  return norm(w - rec);
}

double corner_angle(const Asymptotics& as) {
  const double c = -dot(as.A_minus, as.A_plus);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

SelfSimilarProfile analyze_profile(double a, double X, const ProfileConfig& cfg) {
  SelfSimilarProfile p = solve_profile(a, X, cfg);
  if (p.stations_pos.size() < 3)
    throw std::invalid_argument(
        "analyze_profile: X must cover at least three ladder stations");
  p.asym = extract_asymptotics(p, p.stations_pos.back().x);
  p.has_asymptotics = true;
  if (a > 0.0) {
    p.phi = phi_from_asymptotics(p.asym);
    p.has_phi = true;
  }
  return p;
}

double angle_from_alpha(double a) {
  if (!std::isfinite(a) || a < 0.0)
    throw std::domain_error("angle_from_alpha: amplitude must be finite and nonnegative");
  return 2.0 * std::asin(std::exp(-kPi * a * a / 2.0));
}

double alpha_from_angle(double theta) {
  if (!std::isfinite(theta) || !(theta > 0.0) || theta > kPi)
    throw std::domain_error("alpha_from_angle: angle must lie in (0, pi]");
  const double s = std::sin(0.5 * theta);
  return std::sqrt(std::max(0.0, -2.0 * std::log(s) / kPi));
}

}  // namespace vfl
