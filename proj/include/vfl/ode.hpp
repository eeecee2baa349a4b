#pragma once
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace vfl {

// Shared adaptive Dormand-Prince 5(4) driver. Oscillatory problems must pass
// a max_h cap resolving their fastest phase; the error controller alone will
// silently smooth through rapid oscillation otherwise.
struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  std::function<double(double)> max_h;  // optional hard cap per time (positive)
  double h_init = 0.0;                  // 0 = automatic
  std::size_t max_steps = 500000000;
  double h_floor = 1e-300;              // |h| below this -> failure
};

struct OdeReport {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  double h_last = 0.0;
  bool ok = true;
  std::string message;
};

using OdeRhs = std::function<void(double, const std::vector<double>&, std::vector<double>&)>;
// called after each accepted step; may project y (re-orthonormalization);
// must return true iff it modified y
using OdeAccept = std::function<bool(double, std::vector<double>&)>;
// called exactly at each requested sample time (in traversal order)
using OdeSample = std::function<void(double, const std::vector<double>&)>;

// Integrate y' = f(t,y) from t0 to t1 (either direction). sample_ts must be
// sorted in traversal direction and lie within [t0, t1].
OdeReport dopri5(const OdeRhs& f, std::vector<double>& y, double t0, double t1,
                 const OdeOptions& opt, const std::vector<double>& sample_ts = {},
                 const OdeSample& on_sample = nullptr,
                 const OdeAccept& on_accept = nullptr);

}  // namespace vfl
