#include "vfl/ode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vfl {
namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b(5th) - b(4th): error estimator weights (k7 = FSAL stage)
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

OdeReport dopri5(const OdeRhs& f, std::vector<double>& y, double t0, double t1,
                 const OdeOptions& opt, const std::vector<double>& sample_ts,
                 const OdeSample& on_sample, const OdeAccept& on_accept) {
  OdeReport rep;
  const std::size_t n = y.size();
  const double dir = (t1 >= t0) ? 1.0 : -1.0;
  double t = t0;
  if (t0 == t1) {
    for (double ts : sample_ts)
      if (on_sample) on_sample(ts, y);
    return rep;
  }

  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  std::vector<double> ytmp(n), ynew(n);

  auto capped = [&](double h) {
    if (opt.max_h) {
      h = std::min(h, opt.max_h(t));
      // caps that tighten along the march (e.g. ~t^2 on descent) must also
      // hold at the step's far end
      h = std::min(h, opt.max_h(t + dir * h));
    }
    h = std::min(h, std::abs(t1 - t));
    return h;
  };

  f(t, y, k1);
  double h = opt.h_init > 0 ? opt.h_init : std::abs(t1 - t0) * 1e-6;
  h = capped(h);

  std::size_t next_sample = 0;
  bool fsal_valid = true;

  while (dir * (t1 - t) > 0) {
    if (++rep.steps > opt.max_steps) {
      rep.ok = false;
      rep.message = "step budget exhausted at t=" + std::to_string(t);
      return rep;
    }
    h = capped(h);
    const double h_unclamped = h;
    // land exactly on the next sample time
    bool at_sample = false;
    if (next_sample < sample_ts.size()) {
      double ds = dir * (sample_ts[next_sample] - t);
      if (ds <= h * (1 + 1e-12)) {
        h = std::max(ds, 0.0);
        at_sample = true;
      }
    }
    if (h <= opt.h_floor) {
      if (at_sample && h == 0.0) {
        if (on_sample) on_sample(sample_ts[next_sample], y);
        ++next_sample;
        --rep.steps;
        h = h_unclamped;
        continue;
      }
      rep.ok = false;
      rep.message = "step size underflow at t=" + std::to_string(t);
      return rep;
    }
    const double hs = dir * h;

    if (!fsal_valid) f(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * a21 * k1[i];
    f(t + hs * c2, ytmp, k2);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
    f(t + hs * c3, ytmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + hs * c4, ytmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + hs * c5, ytmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    f(t + hs, ytmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    f(t + hs, ynew, k7);

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      double r = e / sc;
      err += r * r;
    }
    err = std::sqrt(err / std::max<std::size_t>(n, 1));

    if (!std::isfinite(err)) {
      ++rep.rejected;
      h *= 0.1;
      fsal_valid = false;
      --rep.steps;
      continue;
    }

    if (err <= 1.0) {
      t = t + hs;
      y.swap(ynew);
      k1.swap(k7);
      fsal_valid = true;
      rep.h_last = h;
      if (on_accept && on_accept(t, y)) {
        // hook projected y; refresh FSAL derivative
        f(t, y, k1);
      }
      if (at_sample && next_sample < sample_ts.size()) {
        if (on_sample) on_sample(sample_ts[next_sample], y);
        ++next_sample;
      }
      double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
      h *= std::clamp(fac, 0.2, 5.0);
    } else {
      ++rep.rejected;
      double fac = 0.9 * std::pow(err, -0.2);
      h *= std::clamp(fac, 0.1, 1.0);
      fsal_valid = true;  // k1 still matches (t, y)
    }
  }
  // flush samples at (or numerically past) the endpoint
  while (next_sample < sample_ts.size()) {
    if (on_sample) on_sample(sample_ts[next_sample], y);
    ++next_sample;
  }
  return rep;
}

}  // namespace vfl
