#include "vfl/frame.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "vfl/ode.hpp"
#include "vfl/phase_util.hpp"

namespace vfl {
namespace {

// ---------------------------------------------------------------------------
// frame linear algebra

Vec3 load3(const double* p) { return {p[0], p[1], p[2]}; }
void store3(double* p, const Vec3& v) { p[0] = v[0]; p[1] = v[1]; p[2] = v[2]; }

double defect_of(const Vec3& T, const Vec3& e1, const Vec3& e2) {
  double d = std::abs(dot(T, T) - 1.0);
  d = std::max(d, std::abs(dot(e1, e1) - 1.0));
  d = std::max(d, std::abs(dot(e2, e2) - 1.0));
  d = std::max(d, std::abs(dot(T, e1)));
  d = std::max(d, std::abs(dot(T, e2)));
  d = std::max(d, std::abs(dot(e1, e2)));
  return d;
}

// Project (T, e1, e2) back onto the orthonormal right-handed manifold:
// normalize T, Gram-Schmidt e1 against T, rebuild e2 = T ^ e1.
void reorthonormalize(Vec3& T, Vec3& e1, Vec3& e2) {
  T = normalized(T);
  e1 = e1 - dot(e1, T) * T;
  e1 = normalized(e1);
  e2 = cross(T, e1);
}

void check_input_frame(const Frame& f, double tol, const char* who) {
  if (frame_orthonormality_defect(f) > tol)
    throw std::invalid_argument(std::string(who) +
                                ": frame is not orthonormal within tolerance");
  if (frame_handedness(f) < 0.0)
    throw std::invalid_argument(std::string(who) + ": frame is left-handed");
}

// ---------------------------------------------------------------------------
// field access in the gauged normal frame
//
// The transport laws use w(t,x) = e^{i gauge} u(t,x), with u the analyst
// point-source superposition. `outer` collects the kernel branch e^{-i pi/4},
// the 1/sqrt(4 pi t) amplitude and the gauge rotation.

struct GaugedField {
  const std::vector<double>* xs = nullptr;  // support locations
  const Cplx* vals = nullptr;               // analyst coefficients at t
  std::size_t n = 0;
  double t = 1.0;
  Cplx outer{1.0, 0.0};

  void set_time(double time, double gauge_phase) {
    t = time;
    outer = cis_reduced(static_cast<long double>(gauge_phase) -
                        static_cast<long double>(kPi) / 4.0L) /
            std::sqrt(4.0 * kPi * t);
  }

  Cplx w(double x) const {
    Cplx acc{0.0, 0.0};
    const long double inv4t = 0.25L / static_cast<long double>(t);
    for (std::size_t k = 0; k < n; ++k) {
      const long double dx = static_cast<long double>(x) - (*xs)[k];
      acc += vals[k] * cis_reduced(dx * dx * inv4t);
    }
    return outer * acc;
  }

  void w_and_wx(double x, Cplx& w_out, Cplx& wx_out) const {
    Cplx acc{0.0, 0.0}, accx{0.0, 0.0};
    const long double inv4t = 0.25L / static_cast<long double>(t);
    const double inv2t = 0.5 / t;
    for (std::size_t k = 0; k < n; ++k) {
      const double dxd = x - (*xs)[k];
      const long double dx = static_cast<long double>(x) - (*xs)[k];
      const Cplx term = vals[k] * cis_reduced(dx * dx * inv4t);
      acc += term;
      accx += Cplx(0.0, dxd * inv2t) * term;
    }
    w_out = outer * acc;
    wx_out = outer * accx;
  }
};

Cplx sqrt_4pi_i() {
  return std::sqrt(4.0 * kPi) * Cplx(std::sqrt(0.5), std::sqrt(0.5));
}

// Analyst-normalized copy of the field coefficients.
std::vector<Cplx> analyst_values(const FieldAnsatz& f) {
  std::vector<Cplx> v = f.values;
  if (f.normalization == Normalization::geometric) {
    const Cplx s = sqrt_4pi_i();
    for (auto& c : v) c *= s;
  }
  return v;
}

double l1_norm(const std::vector<Cplx>& v) {
  double s = 0.0;
  for (const auto& c : v) s += std::abs(c);
  return s;
}

// Per-source squared amplitudes |v_k|^2 / 4pi (the corner masses).
std::vector<double> amp_squares(const std::vector<Cplx>& v) {
  std::vector<double> asq(v.size());
  for (std::size_t k = 0; k < v.size(); ++k)
    asq[k] = std::norm(v[k]) / (4.0 * kPi);
  return asq;
}

// The frame is driven by geometric coefficients whose arguments each rotate
// at -(M - a_k^2) log sqrt(t/t0): every source counter-rotates at the
// combined squared amplitude of the others. The normal direction at a fixed
// point is swept forward by the distant sources' oscillating kernels at the
// mirror rate sum_{j != k} a_j^2, so in the corner velocity Im(conj(u) N)
// the two contributions add and a corner of a multi-corner curve spirals at
// the full mass rate M, while a lone corner (nothing sweeping it) travels
// straight. The conversion below undoes the evolution's own diagonal drift
// (convention dependent) and imposes that counter-rotation.
std::vector<Cplx> frame_side_values(const std::vector<Cplx>& a,
                                    const std::vector<double>& asq0,
                                    double m_geo, double L,
                                    const FrameConfig& cfg) {
  std::vector<Cplx> b(a);
  if (cfg.freeze_coefficients) return b;
  const double sgn = static_cast<double>(cfg.sign);
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double own =
        (cfg.renorm_mode == RenormMode::sum_sq) ? sgn * asq0[k] : 0.0;
    b[k] *=
        cis_reduced(static_cast<long double>((own + asq0[k] - m_geo) * L));
  }
  return b;
}

double mass_geometric(const std::vector<Cplx>& v) {
  double s = 0.0;
  for (const auto& c : v) s += std::norm(c);
  return s / (4.0 * kPi);
}

// ---------------------------------------------------------------------------
// drift bookkeeping shared by the time and space integrations

struct DriftTracker {
  double limit = 1e-6;
  double max_rate = 0.0;
  double max_step = 0.0;
  double last_param = 0.0;

  OdeAccept make(std::size_t frame_off) {
    return [this, frame_off](double s, std::vector<double>& y) {
      Vec3 T = load3(y.data() + frame_off);
      Vec3 e1 = load3(y.data() + frame_off + 3);
      Vec3 e2 = load3(y.data() + frame_off + 6);
      const double d = defect_of(T, e1, e2);
      const double h = std::abs(s - last_param);
      last_param = s;
      max_step = std::max(max_step, d);
      if (h > 0.0) max_rate = std::max(max_rate, d / h);
      if (d > limit)
        throw std::runtime_error(
            "frame transport: orthonormality drift exceeded the hard limit "
            "(integration failure)");
      if (d <= 1e-16) return false;
      reorthonormalize(T, e1, e2);
      store3(y.data() + frame_off, T);
      store3(y.data() + frame_off + 3, e1);
      store3(y.data() + frame_off + 6, e2);
      return true;
    };
  }
};

// ---------------------------------------------------------------------------
// time transport at x = 0

struct TimeSample {
  double t = 0.0;
  std::vector<Cplx> values;
  Frame frame;
  Vec3 chi{};
};

struct TimeRun {
  std::vector<TimeSample> samples;
  double max_drift_rate = 0.0;
  double max_step_defect = 0.0;
  double post_defect = 0.0;
  std::size_t steps = 0;
};

// Integrate coefficients, frame and anchor position from anchor.t0 to
// t_end, emitting states at sample_ts (sorted in traversal direction).
TimeRun advance_time_multi(const AnchoredConstruction& anchor,
                           const FieldAnsatz& field,
                           const std::vector<double>& sample_ts, double t_end,
                           const FrameConfig& cfg) {
  if (!(t_end > 0.0))
    throw std::domain_error(
        "advance_frame_in_time: target time must be positive");
  if (!(anchor.t0 > 0.0))
    throw std::domain_error(
        "advance_frame_in_time: anchor time must be positive");
  check_input_frame(anchor.base_frame, cfg.frame_tol, "advance_frame_in_time");

  const std::vector<Cplx> vals0 = analyst_values(field);
  const std::size_t n = vals0.size();
  if (field.support.size() != n)
    throw std::invalid_argument(
        "advance_frame_in_time: value/support size mismatch");

  std::optional<CoeffSystem> sys;
  if (n > 0) sys.emplace(field.support, vals0, cfg.sign, cfg.renorm_mode);
  const double m_geo = mass_geometric(vals0);
  const std::vector<double> asq0 = amp_squares(vals0);
  const double kap = cfg.phase_exponent;
  const double l1 = l1_norm(vals0);
  const double t0 = anchor.t0;
  double d0 = 1.0;
  for (std::size_t k = 0; k < n; ++k)
    d0 = std::max(d0, std::abs(field.support.locs[k]));

  const std::size_t off = 2 * n;
  std::vector<double> y(off + 12);
  for (std::size_t k = 0; k < n; ++k) {
    y[2 * k] = vals0[k].real();
    y[2 * k + 1] = vals0[k].imag();
  }
  store3(y.data() + off, anchor.base_frame.T);
  store3(y.data() + off + 3, anchor.base_frame.e1);
  store3(y.data() + off + 6, anchor.base_frame.e2);
  store3(y.data() + off + 9, anchor.P);

  GaugedField gf;
  gf.xs = &field.support.locs;
  gf.n = n;

  const double sgn = static_cast<double>(cfg.sign);
  const double logt0 = std::log(t0);
  std::vector<double> drifts(n, 0.0);
  bool bridge = false;
  if (!cfg.freeze_coefficients) {
    for (std::size_t k = 0; k < n; ++k) {
      const double own =
          (cfg.renorm_mode == RenormMode::sum_sq) ? sgn * asq0[k] : 0.0;
      drifts[k] = own + asq0[k] - m_geo;
      if (drifts[k] != 0.0) bridge = true;
    }
  }
  std::vector<Cplx> bvals(n);
  auto rhs = [&](double t, const std::vector<double>& yv,
                 std::vector<double>& dy) {
    if (sys && !cfg.freeze_coefficients) {
      sys->rhs(t, reinterpret_cast<const Cplx*>(yv.data()),
               reinterpret_cast<Cplx*>(dy.data()));
    } else {
      std::fill(dy.begin(), dy.begin() + off, 0.0);
    }
    const Cplx* avals = reinterpret_cast<const Cplx*>(yv.data());
    const double L = 0.5 * (std::log(t) - logt0);
    GaugedField g = gf;
    if (bridge) {
      for (std::size_t k = 0; k < n; ++k)
        bvals[k] =
            avals[k] * cis_reduced(static_cast<long double>(drifts[k] * L));
      g.vals = bvals.data();
    } else {
      g.vals = avals;
    }
    g.set_time(t, kap * m_geo * L);
    Cplx w, wx;
    g.w_and_wx(0.0, w, wx);

    const Vec3 T = load3(yv.data() + off);
    const Vec3 e1 = load3(yv.data() + off + 3);
    const Vec3 e2 = load3(yv.data() + off + 6);
    const double a = -wx.imag();
    const double b = wx.real();
    const double c = (1.0 - kap) * m_geo / (2.0 * t) - 0.5 * std::norm(w);

    store3(dy.data() + off, a * e1 + b * e2);
    store3(dy.data() + off + 3, (-a) * T + c * e2);
    store3(dy.data() + off + 6, (-b) * T + (-c) * e1);
    store3(dy.data() + off + 9, (-w.imag()) * e1 + w.real() * e2);
  };

  OdeOptions opt;
  opt.rel_tol = cfg.rel_tol;
  opt.abs_tol = cfg.abs_tol;
  opt.max_steps = cfg.max_steps;
  opt.max_h = [&sys, &cfg, l1, d0, m_geo, kap](double t) {
    const double ta = std::abs(t);
    const double amp = l1 / std::sqrt(4.0 * kPi * ta);
    const double rate =
        amp * (d0 + 0.5) / (2.0 * ta) +
        ((std::abs(1.0 - kap) + 1.0) * m_geo * 0.5 + l1 * l1 / (8.0 * kPi)) /
            ta +
        amp + 1e-12;
    double h = cfg.c_phase / rate;
    if (sys) h = std::min(h, sys->phase_cap(ta, cfg.c_phase));
    return std::min(h, 0.5 * ta);
  };

  DriftTracker drift;
  drift.limit = cfg.drift_limit;
  drift.last_param = t0;
  auto accept = drift.make(off);

  TimeRun run;
  auto capture = [&](double t, const std::vector<double>& yv) {
    TimeSample s;
    s.t = t;
    s.values.assign(reinterpret_cast<const Cplx*>(yv.data()),
                    reinterpret_cast<const Cplx*>(yv.data()) + n);
    s.frame.T = load3(yv.data() + off);
    s.frame.e1 = load3(yv.data() + off + 3);
    s.frame.e2 = load3(yv.data() + off + 6);
    s.chi = load3(yv.data() + off + 9);
    run.samples.push_back(std::move(s));
  };

  // Samples at t0 exactly are emitted before the run starts.
  std::vector<double> inner;
  inner.reserve(sample_ts.size());
  for (double t : sample_ts) {
    if (t == t0)
      capture(t0, y);
    else
      inner.push_back(t);
  }

  if (t_end != t0) {
    OdeReport rep = dopri5(rhs, y, t0, t_end, opt, inner, capture, accept);
    if (!rep.ok)
      throw std::runtime_error("advance_frame_in_time: " + rep.message);
    run.steps = rep.steps;
  }

  run.post_defect = defect_of(load3(y.data() + off), load3(y.data() + off + 3),
                              load3(y.data() + off + 6));
  run.max_drift_rate = drift.max_rate;
  run.max_step_defect = drift.max_step;

  bool have_end = false;
  for (const auto& s : run.samples) have_end = have_end || s.t == t_end;
  if (!have_end) capture(t_end, y);
  return run;
}

// ---------------------------------------------------------------------------
// space transport at fixed t

struct SpaceSample {
  double x = 0.0;
  Frame frame;
  Vec3 chi{};
};

// Transport (frame, chi) from x = 0 to every target (sorted strictly
// ascending, any signs). Returns samples in the same order.
std::vector<SpaceSample> sweep_space(const Frame& f0, const Vec3& chi0,
                                     const std::vector<double>& locs,
                                     const std::vector<Cplx>& vals, double t,
                                     double gauge_phase,
                                     const std::vector<double>& targets,
                                     const FrameConfig& cfg,
                                     DriftTracker& drift) {
  if (!(t > 0.0))
    throw std::domain_error("frame space transport: time must be positive");

  GaugedField gf;
  gf.xs = &locs;
  gf.vals = vals.data();
  gf.n = vals.size();
  gf.set_time(t, gauge_phase);

  auto rhs = [&gf](double x, const std::vector<double>& yv,
                   std::vector<double>& dy) {
    const Cplx w = gf.w(x);
    const Vec3 T = load3(yv.data());
    const Vec3 e1 = load3(yv.data() + 3);
    const Vec3 e2 = load3(yv.data() + 6);
    store3(dy.data(), w.real() * e1 + w.imag() * e2);
    store3(dy.data() + 3, (-w.real()) * T);
    store3(dy.data() + 6, (-w.imag()) * T);
    store3(dy.data() + 9, T);
  };

  const double amp = l1_norm(vals) / std::sqrt(4.0 * kPi * t) + 1e-12;
  auto max_h = [&locs, amp, t, &cfg](double x) {
    double dmax = 1.0;
    if (!locs.empty())
      dmax = std::max(std::abs(x - locs.front()), std::abs(x - locs.back()));
    const double rate = amp + (dmax + 1.0) / (2.0 * t);
    return std::min(cfg.c_phase / rate, 1.0);
  };

  OdeOptions opt;
  opt.rel_tol = cfg.rel_tol;
  opt.abs_tol = cfg.abs_tol;
  opt.max_steps = cfg.max_steps;
  opt.max_h = max_h;

  std::vector<double> y0(12);
  store3(y0.data(), f0.T);
  store3(y0.data() + 3, f0.e1);
  store3(y0.data() + 6, f0.e2);
  store3(y0.data() + 9, chi0);

  std::vector<SpaceSample> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) out[i].x = targets[i];

  // One integration per sign, each fed its targets in traversal order.
  auto run_side = [&](bool negative) {
    std::vector<double> xs;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const double x = targets[i];
      if (x == 0.0) {
        out[i].frame = f0;
        out[i].chi = chi0;
        continue;
      }
      if ((x < 0.0) == negative) {
        xs.push_back(x);
        idx.push_back(i);
      }
    }
    if (xs.empty()) return;
    if (negative) {
      std::reverse(xs.begin(), xs.end());
      std::reverse(idx.begin(), idx.end());
    }
    std::vector<double> y = y0;
    drift.last_param = 0.0;
    auto accept = drift.make(0);
    std::size_t emit = 0;
    auto on_sample = [&](double, const std::vector<double>& yv) {
      SpaceSample& o = out[idx[emit++]];
      o.frame.T = load3(yv.data());
      o.frame.e1 = load3(yv.data() + 3);
      o.frame.e2 = load3(yv.data() + 6);
      o.chi = load3(yv.data() + 9);
    };
    OdeReport rep = dopri5(rhs, y, 0.0, xs.back(), opt, xs, on_sample, accept);
    if (!rep.ok)
      throw std::runtime_error("frame space transport: " + rep.message);
  };
  run_side(false);
  run_side(true);
  return out;
}

// Gauge phase matching the time transport at time t.
double gauge_at(double t, double t0, double m_geo, const FrameConfig& cfg) {
  return 0.5 * cfg.phase_exponent * m_geo * (std::log(t) - std::log(t0));
}

// ---------------------------------------------------------------------------
// extrapolation helpers (vectors as flat double arrays)

struct TraceLimit {
  std::vector<double> limit;
  double rate = 0.0;
  bool exact = false;
};

// t -> 0 limit of vector samples (times decreasing). The deviation from the
// limit is a sqrt(t)-size tail per distant source, carrying the kernel's
// fast phase d^2/4t — quasi-random across a geometric grid of times, so it
// behaves as noise of standard deviation proportional to sqrt(t). The limit
// is the variance-weighted least squares fit of
//   sample(t) = limit + sqrt(t) v
// with rows weighted by 1/sqrt(t); the deep samples pin the limit, and the
// sqrt(t) column guards against any coherent leftover. The reported rate is
// a power fit of the actual deviations against t.
TraceLimit trace_limit_fit(const std::vector<double>& ts,
                           const std::vector<std::vector<double>>& samples) {
  const std::size_t m = samples.size();
  const std::size_t dim = samples.front().size();
  TraceLimit out;
  out.limit = samples.back();

  double scale = 1e-300;
  for (const auto& s : samples)
    for (double v : s) scale = std::max(scale, std::abs(v));
  double spread = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    double d2 = 0.0;
    for (std::size_t c = 0; c < dim; ++c)
      d2 += (samples[j + 1][c] - samples[j][c]) *
            (samples[j + 1][c] - samples[j][c]);
    spread = std::max(spread, std::sqrt(d2));
  }
  if (spread <= 1e-13 * scale) {
    out.exact = true;
    return out;
  }

  Eigen::MatrixXd A(static_cast<Eigen::Index>(m), 2);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(m),
                    static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    const double irt = 1.0 / std::sqrt(ts[i]);
    A(r, 0) = irt;
    A(r, 1) = 1.0;
    for (std::size_t c = 0; c < dim; ++c)
      X(r, static_cast<Eigen::Index>(c)) = samples[i][c] * irt;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  Eigen::MatrixXd P = svd.solve(X);
  for (std::size_t c = 0; c < dim; ++c)
    out.limit[c] = P(0, static_cast<Eigen::Index>(c));

  // The limit estimate carries an error of its own; deviations below that
  // floor say nothing about convergence, so they are excluded from the rate
  // fit. The floor comes from the scaled-space residuals and the leverage of
  // the limit column.
  const Eigen::MatrixXd R = X - A * P;
  const double dof = static_cast<double>(m > 3 ? m - 2 : 1);
  const double sigma2 = R.squaredNorm() / dof;
  double lev0 = 0.0;
  for (int k = 0; k < svd.nonzeroSingularValues(); ++k) {
    const double s = svd.singularValues()(k);
    const double v = svd.matrixV()(0, k);
    lev0 += v * v / (s * s);
  }
  const double floor = 4.0 * std::sqrt(sigma2 * lev0);

  // Observed convergence: power fit of ||sample - limit|| against t over the
  // samples that stand clear of the floor.
  double st = 0.0, sd = 0.0, stt = 0.0, std_ = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double d2 = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double d = samples[i][c] - out.limit[c];
      d2 += d * d;
    }
    const double d = std::sqrt(d2);
    if (d <= std::max(floor, 1e-12 * scale)) continue;
    const double lt = std::log(ts[i]);
    const double ld = std::log(d);
    st += lt;
    sd += ld;
    stt += lt * lt;
    std_ += lt * ld;
    ++cnt;
  }
  if (cnt >= 2) {
    const double denom = static_cast<double>(cnt) * stt - st * st;
    if (denom != 0.0)
      out.rate = (static_cast<double>(cnt) * std_ - st * sd) / denom;
  }
  return out;
}

// Nearest complex frame vector e1 + i e2 with e1, e2 orthonormal: polar
// factor of the 3x2 matrix [Re, Im]. Falls back to the input when the fit
// is too degenerate to define one.
CVec3 snap_to_frame_vector(const CVec3& n) {
  Eigen::Matrix<double, 3, 2> M;
  for (int c = 0; c < 3; ++c) {
    M(c, 0) = n[c].real();
    M(c, 1) = n[c].imag();
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>> svd(
      M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(1) < 1e-9) return n;
  Eigen::Matrix<double, 3, 2> Q =
      svd.matrixU().leftCols<2>() * svd.matrixV().transpose();
  CVec3 out;
  for (int c = 0; c < 3; ++c) out[c] = Cplx(Q(c, 0), Q(c, 1));
  return out;
}

// Sample times are given decreasing and must lie on one side of the anchor
// time: at or below it (integrating toward 0) or at or above it (the anchor
// is the early seed of the construction and sampling happens on the way up).
void validate_trace_times(const std::vector<double>& ts, double t0,
                          const char* who) {
  if (ts.size() < 3)
    throw std::invalid_argument(std::string(who) +
                                ": need at least three times");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(ts[i] > 0.0))
      throw std::invalid_argument(std::string(who) + ": times must be positive");
    if (i > 0 && !(ts[i] < ts[i - 1]))
      throw std::invalid_argument(std::string(who) +
                                  ": times must be strictly decreasing");
  }
  const bool below = ts.front() <= t0 * (1.0 + 1e-12);
  const bool above = ts.back() >= t0 * (1.0 - 1e-12);
  if (!below && !above)
    throw std::invalid_argument(
        std::string(who) + ": times must lie on one side of the anchor time");
}

// States at the given times (decreasing), integrating away from the anchor
// in whichever direction the times lie.
std::vector<TimeSample> samples_at(const AnchoredConstruction& anchor,
                                   const FieldAnsatz& field,
                                   const std::vector<double>& ts_desc,
                                   const FrameConfig& cfg) {
  const bool up = ts_desc.front() > anchor.t0;
  std::vector<double> run_ts = ts_desc;
  if (up) std::reverse(run_ts.begin(), run_ts.end());
  TimeRun run = advance_time_multi(anchor, field, run_ts, run_ts.back(), cfg);
  std::vector<TimeSample> out(run.samples.begin(),
                              run.samples.begin() +
                                  static_cast<std::ptrdiff_t>(ts_desc.size()));
  if (up) std::reverse(out.begin(), out.end());
  return out;
}

// Shared driver: frame samples at (ts_i, x) for a fixed off-anchor x, each
// paired with the reference frame the trace is measured in. The reference is
// the anchor frame with the anchor point's own modulated-normal phase taken
// out: that phase removal freezes the reference's transverse axes, so the
// reference carries exactly the construction's slow rigid orientation wander
// (the anchor corner co-rotates with its own spiral forever) and nothing
// else. Components taken in this basis settle; absolute components do not.
struct PointFrameSample {
  double t = 0.0;
  Frame at_x;
  Frame ref;
};

std::vector<PointFrameSample> frames_at_point(
    const AnchoredConstruction& anchor, const FieldAnsatz& field, double x,
    const std::vector<double>& ts, const FrameConfig& cfg) {
  auto states = samples_at(anchor, field, ts, cfg);
  const std::vector<Cplx> vals0 = analyst_values(field);
  const std::vector<double> asq0 = amp_squares(vals0);
  const double m_geo = mass_geometric(vals0);
  std::vector<PointFrameSample> out;
  out.reserve(ts.size());
  DriftTracker drift;
  drift.limit = cfg.drift_limit;
  for (const auto& s : states) {
    const double L = 0.5 * (std::log(s.t) - std::log(anchor.t0));
    PointFrameSample ps;
    ps.t = s.t;
    ps.ref = s.frame;
    const double d0 =
        modulation_phase(field.support, asq0, s.t, 0.0) -
        cfg.phase_exponent * m_geo * L;
    const Cplx rot0 = cis_reduced(static_cast<long double>(d0));
    for (int c = 0; c < 3; ++c) {
      const Cplx n = rot0 * Cplx(s.frame.e1[c], s.frame.e2[c]);
      ps.ref.e1[c] = n.real();
      ps.ref.e2[c] = n.imag();
    }
    if (std::abs(x) <= 1e-12) {
      ps.at_x = s.frame;
    } else {
      auto bvals = frame_side_values(s.values, asq0, m_geo, L, cfg);
      auto sw =
          sweep_space(s.frame, s.chi, field.support.locs, bvals, s.t,
                      gauge_at(s.t, anchor.t0, m_geo, cfg), {x}, cfg, drift);
      ps.at_x = sw[0].frame;
    }
    out.push_back(ps);
  }
  return out;
}

Mat3 to_mat3(const Eigen::Matrix3d& r) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = r(i, j);
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// public surface

Vec3 mat_apply(const Mat3& m, const Vec3& v) {
  return {dot(m[0], v), dot(m[1], v), dot(m[2], v)};
}

double frame_orthonormality_defect(const Frame& f) {
  return defect_of(f.T, f.e1, f.e2);
}

double frame_handedness(const Frame& f) { return dot(f.T, cross(f.e1, f.e2)); }

TimeAdvance advance_frame_in_time(const AnchoredConstruction& anchor,
                                  const FieldAnsatz& field, double t_target,
                                  const FrameConfig& cfg) {
  TimeRun run = advance_time_multi(anchor, field, {}, t_target, cfg);
  const TimeSample& s = run.samples.back();
  TimeAdvance out;
  out.t = s.t;
  out.frame = s.frame;
  out.values = s.values;
  out.chi = s.chi;
  out.max_drift_rate = run.max_drift_rate;
  out.max_step_defect = run.max_step_defect;
  out.post_defect = run.post_defect;
  out.steps = run.steps;
  return out;
}

CurveState integrate_frame_in_space(const Frame& frame_at_0,
                                    const FieldAnsatz& field, double t,
                                    const std::vector<double>& xs,
                                    const FrameConfig& cfg,
                                    double gauge_phase) {
  if (!(t > 0.0))
    throw std::domain_error("integrate_frame_in_space: time must be positive");
  check_input_frame(frame_at_0, cfg.frame_tol, "integrate_frame_in_space");
  if (xs.empty())
    throw std::invalid_argument("integrate_frame_in_space: empty grid");
  bool has_zero = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0 && !(xs[i] > xs[i - 1]))
      throw std::invalid_argument(
          "integrate_frame_in_space: grid must be strictly ascending");
    has_zero = has_zero || std::abs(xs[i]) <= 1e-12;
  }
  if (!has_zero)
    throw std::invalid_argument(
        "integrate_frame_in_space: grid must contain x = 0");

  const std::vector<Cplx> vals = analyst_values(field);
  DriftTracker drift;
  drift.limit = cfg.drift_limit;
  auto samples = sweep_space(frame_at_0, Vec3{0.0, 0.0, 0.0},
                             field.support.locs, vals, t, gauge_phase, xs, cfg,
                             drift);
  CurveState st;
  st.t = t;
  st.xs = xs;
  st.points.reserve(xs.size());
  st.frames.reserve(xs.size());
  for (auto& s : samples) {
    st.points.push_back(s.chi);
    st.frames.push_back(s.frame);
  }
  return st;
}

CurveState reconstruct_curve(const AnchoredConstruction& anchor,
                             const FieldAnsatz& field, double t,
                             const std::vector<double>& xs,
                             const FrameConfig& cfg) {
  TimeRun run = advance_time_multi(anchor, field, {}, t, cfg);
  const TimeSample& s = run.samples.back();
  const std::vector<Cplx> vals0 = analyst_values(field);
  const double m_geo = mass_geometric(vals0);
  const double L = 0.5 * (std::log(t) - std::log(anchor.t0));
  FieldAnsatz at_t(
      field.support,
      frame_side_values(s.values, amp_squares(vals0), m_geo, L, cfg),
      Normalization::analyst);
  CurveState st = integrate_frame_in_space(s.frame, at_t, t, xs, cfg,
                                           gauge_at(t, anchor.t0, m_geo, cfg));
  // Shift the sweep (anchored at the origin) to the transported anchor point.
  for (auto& p : st.points) p = p + s.chi;
  return st;
}

TangentTrace tangent_trace(const AnchoredConstruction& anchor,
                           const FieldAnsatz& field, double x,
                           const std::vector<double>& ts,
                           const FrameConfig& cfg) {
  validate_trace_times(ts, anchor.t0, "tangent_trace");
  auto frames = frames_at_point(anchor, field, x, ts, cfg);

  TangentTrace out;
  std::vector<std::vector<double>> flat;
  flat.reserve(frames.size());
  for (auto& ps : frames) {
    const Vec3 rel{dot(ps.at_x.T, ps.ref.T), dot(ps.at_x.T, ps.ref.e1),
                   dot(ps.at_x.T, ps.ref.e2)};
    out.samples.push_back(rel);
    flat.push_back({rel[0], rel[1], rel[2]});
  }
  TraceLimit fit = trace_limit_fit(ts, flat);
  out.exact = fit.exact;
  out.rate = fit.rate;
  out.T0 = normalized(Vec3{fit.limit[0], fit.limit[1], fit.limit[2]});
  return out;
}

NormalTrace modulated_normal_trace(const AnchoredConstruction& anchor,
                                   const FieldAnsatz& field, double x,
                                   const std::vector<double>& ts,
                                   const FrameConfig& cfg) {
  validate_trace_times(ts, anchor.t0, "modulated_normal_trace");
  if (field.support.index_of(x, 1e-9) >= 0)
    throw std::invalid_argument(
        "modulated_normal_trace: x must lie off the support");

  const std::vector<Cplx> vals0 = analyst_values(field);
  const std::vector<double> asq = amp_squares(vals0);
  const double m_geo = mass_geometric(vals0);

  auto frames = frames_at_point(anchor, field, x, ts, cfg);

  NormalTrace out;
  std::vector<std::vector<double>> flat;
  flat.reserve(frames.size());
  for (auto& ps : frames) {
    const double phi = modulation_phase(field.support, asq, ps.t, x);
    const double ph = phi - cfg.phase_exponent * m_geo * 0.5 *
                                (std::log(ps.t) - std::log(anchor.t0));
    const Cplx rot = cis_reduced(static_cast<long double>(ph));
    CVec3 nraw;
    for (int c = 0; c < 3; ++c) nraw[c] = Cplx(ps.at_x.e1[c], ps.at_x.e2[c]);
    CVec3 nn;
    nn[0] = rot * (nraw[0] * ps.ref.T[0] + nraw[1] * ps.ref.T[1] +
                   nraw[2] * ps.ref.T[2]);
    nn[1] = rot * (nraw[0] * ps.ref.e1[0] + nraw[1] * ps.ref.e1[1] +
                   nraw[2] * ps.ref.e1[2]);
    nn[2] = rot * (nraw[0] * ps.ref.e2[0] + nraw[1] * ps.ref.e2[1] +
                   nraw[2] * ps.ref.e2[2]);
    out.samples.push_back(nn);
    flat.push_back({nn[0].real(), nn[1].real(), nn[2].real(), nn[0].imag(),
                    nn[1].imag(), nn[2].imag()});
  }
  TraceLimit fit = trace_limit_fit(ts, flat);
  out.exact = fit.exact;
  out.rate = fit.rate;
  for (int c = 0; c < 3; ++c) out.N0[c] = Cplx(fit.limit[c], fit.limit[c + 3]);
  // The limit is a unit complex frame vector; snapping the estimate onto
  // that manifold removes the shrinkage the averaged noise causes.
  out.N0 = snap_to_frame_vector(out.N0);
  return out;
}

SpiralFit corner_trajectory(const AnchoredConstruction& anchor,
                            const FieldAnsatz& field, double corner,
                            const std::vector<double>& t_grid,
                            const FrameConfig& cfg) {
  const std::vector<Cplx> vals0 = analyst_values(field);
  if (!vals0.empty() && field.support.index_of(corner, 1e-9) < 0)
    throw std::invalid_argument(
        "corner_trajectory: location is not on the support");
  const double m_geo = mass_geometric(vals0);
  const double mu = m_geo;

  std::vector<double> ts = t_grid;
  std::sort(ts.begin(), ts.end(), std::greater<double>());
  validate_trace_times(ts, anchor.t0, "corner_trajectory");

  auto states = samples_at(anchor, field, ts, cfg);
  const std::vector<double> asq0 = amp_squares(vals0);
  DriftTracker drift;
  drift.limit = cfg.drift_limit;

  SpiralFit out;
  out.mu = mu;
  out.ts = ts;
  out.chis.reserve(ts.size());
  for (const auto& s : states) {
    if (std::abs(corner) <= 1e-12) {
      out.chis.push_back(s.chi);
    } else {
      const double L = 0.5 * (std::log(s.t) - std::log(anchor.t0));
      auto bvals = frame_side_values(s.values, asq0, m_geo, L, cfg);
      auto sw = sweep_space(s.frame, s.chi, field.support.locs, bvals, s.t,
                            gauge_at(s.t, anchor.t0, m_geo, cfg), {corner},
                            cfg, drift);
      out.chis.push_back(sw[0].chi);
    }
  }

  // Fit chi(t) = center + sqrt(t) (v1 sin phi + v2 cos phi) with rows scaled
  // by 1/sqrt(t) so every time contributes at the same order.
  const std::size_t m = ts.size();
  Eigen::MatrixXd B(static_cast<Eigen::Index>(m), 3);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(m), 3);
  for (std::size_t i = 0; i < m; ++i) {
    const double phi = 0.5 * mu * (std::log(ts[i]) - std::log(anchor.t0));
    const double irt = 1.0 / std::sqrt(ts[i]);
    B(static_cast<Eigen::Index>(i), 0) = irt;
    B(static_cast<Eigen::Index>(i), 1) = std::sin(phi);
    B(static_cast<Eigen::Index>(i), 2) = std::cos(phi);
    for (int c = 0; c < 3; ++c)
      X(static_cast<Eigen::Index>(i), c) = out.chis[i][c] * irt;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  Eigen::MatrixXd P = svd.solve(X);  // 3x3: rows = (center, v1, v2)
  for (int c = 0; c < 3; ++c) {
    out.center[c] = P(0, c);
    out.v1[c] = P(1, c);
    out.v2[c] = P(2, c);
  }

  Eigen::MatrixXd R = X - B * P;
  for (std::size_t i = 0; i < m; ++i) {
    const double r =
        R.row(static_cast<Eigen::Index>(i)).norm() * std::sqrt(ts[i]);
    out.residual = std::max(out.residual, r);
    out.residual_over_t = std::max(out.residual_over_t, r / ts[i]);
  }

  // Straight-line comparison: chi(t) = center + sqrt(t) v, same row scaling.
  Eigen::MatrixXd B2 = B.leftCols(2);
  B2.col(1).setOnes();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd2(
      B2, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd2.setThreshold(1e-10);
  Eigen::MatrixXd R2 = X - B2 * svd2.solve(X);
  for (std::size_t i = 0; i < m; ++i) {
    const double r =
        R2.row(static_cast<Eigen::Index>(i)).norm() * std::sqrt(ts[i]);
    out.straight_residual = std::max(out.straight_residual, r);
    out.straight_residual_over_t =
        std::max(out.straight_residual_over_t, r / ts[i]);
  }

  const double n1 = norm(out.v1), n2 = norm(out.v2);
  const double amp = std::sqrt(n1 * n1 + n2 * n2);
  out.degenerate = amp < 1e-8;
  out.ortho_defect = (out.degenerate || n1 < 1e-12 || n2 < 1e-12)
                         ? 0.0
                         : std::abs(dot(out.v1, out.v2)) / (n1 * n2);
  return out;
}

PathProbe selfsimilar_path_probe(const AnchoredConstruction& anchor,
                                 const FieldAnsatz& field, double corner,
                                 const std::vector<double>& xtilde,
                                 const std::vector<double>& t_ns,
                                 const FrameConfig& cfg) {
  const std::vector<Cplx> vals0 = analyst_values(field);
  const int idx = field.support.index_of(corner, 1e-9);
  if (idx < 0)
    throw std::invalid_argument(
        "selfsimilar_path_probe: location is not on the support");
  const Cplx vk = vals0[static_cast<std::size_t>(idx)];
  const double a_geo = std::abs(vk) / std::sqrt(4.0 * kPi);
  if (!(a_geo > 0.0))
    throw std::invalid_argument(
        "selfsimilar_path_probe: corner coefficient vanishes");
  if (xtilde.empty())
    throw std::invalid_argument("selfsimilar_path_probe: empty path grid");
  for (std::size_t i = 1; i < xtilde.size(); ++i)
    if (!(xtilde[i] > xtilde[i - 1]))
      throw std::invalid_argument(
          "selfsimilar_path_probe: path grid must be strictly ascending");
  std::vector<double> ts = t_ns;
  std::sort(ts.begin(), ts.end(), std::greater<double>());
  if (ts.empty() || !(ts.back() > 0.0))
    throw std::invalid_argument(
        "selfsimilar_path_probe: probe times must be positive");
  if (ts.front() > anchor.t0 * (1.0 + 1e-12) &&
      ts.back() < anchor.t0 * (1.0 - 1e-12))
    throw std::invalid_argument(
        "selfsimilar_path_probe: probe times must lie on one side of the "
        "anchor time");

  const double m_geo = mass_geometric(vals0);
  // A constant-in-x phase on the field rotates every normal about its own
  // tangent — not a rigid motion, so the fitted rotation cannot absorb it.
  // The demodulation therefore undoes the field-side phase at the corner
  // exactly: the coefficient's counter-rotation, the gauge, and the offset
  // of the coefficient's argument against the reference profile's. The
  // anchor normal's own slow rotation enters as an initial-frame rotation,
  // which is rigid and is left to the fit.
  const double nu = cfg.phase_exponent * m_geo - (m_geo - a_geo * a_geo);
  const double arg_eff = std::arg(vk) - kPi / 4.0;

  // Reference profile frames on the same path grid (unit time, amplitude a).
  DriftTracker drift;
  drift.limit = cfg.drift_limit;
  const std::vector<double> one_loc{0.0};
  const std::vector<Cplx> one_val{sqrt_4pi_i() * a_geo};
  auto prof = sweep_space(Frame{}, Vec3{0.0, 0.0, 0.0}, one_loc, one_val, 1.0,
                          0.0, xtilde, cfg, drift);

  auto states = samples_at(anchor, field, ts, cfg);
  const std::vector<double> asq0 = amp_squares(vals0);

  PathProbe out;
  out.xtilde = xtilde;
  out.ts = ts;

  Eigen::Matrix3d theta_fine = Eigen::Matrix3d::Identity();
  std::size_t emitted = 0;
  for (const auto& s : states) {
    ++emitted;
    const double tn = s.t;
    const double rt = std::sqrt(tn);
    std::vector<double> abs_xs(xtilde.size());
    for (std::size_t j = 0; j < xtilde.size(); ++j)
      abs_xs[j] = corner + xtilde[j] * rt;
    const double L = 0.5 * (std::log(tn) - std::log(anchor.t0));
    auto bvals = frame_side_values(s.values, asq0, m_geo, L, cfg);
    auto sw = sweep_space(s.frame, s.chi, field.support.locs, bvals, tn,
                          gauge_at(tn, anchor.t0, m_geo, cfg), abs_xs, cfg,
                          drift);

    const double ph = -nu * L - arg_eff;
    const Cplx rot = cis_reduced(static_cast<long double>(ph));

    std::vector<Vec3> T_s(xtilde.size());
    std::vector<CVec3> N_s(xtilde.size());
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    for (std::size_t j = 0; j < xtilde.size(); ++j) {
      T_s[j] = sw[j].frame.T;
      for (int c = 0; c < 3; ++c)
        N_s[j][c] = rot * Cplx(sw[j].frame.e1[c], sw[j].frame.e2[c]);
      const Vec3 qs[3] = {T_s[j], real_part(N_s[j]), imag_part(N_s[j])};
      const Vec3 ps[3] = {prof[j].frame.T, prof[j].frame.e1, prof[j].frame.e2};
      for (int v = 0; v < 3; ++v)
        for (int r = 0; r < 3; ++r)
          for (int cc = 0; cc < 3; ++cc) H(r, cc) += qs[v][r] * ps[v][cc];
    }
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d UVt = svd.matrixU() * svd.matrixV().transpose();
    Eigen::Vector3d dsign(1.0, 1.0, UVt.determinant() > 0.0 ? 1.0 : -1.0);
    Eigen::Matrix3d R =
        svd.matrixU() * dsign.asDiagonal() * svd.matrixV().transpose();

    double rss = 0.0;
    for (std::size_t j = 0; j < xtilde.size(); ++j) {
      const Vec3 qs[3] = {T_s[j], real_part(N_s[j]), imag_part(N_s[j])};
      const Vec3 ps[3] = {prof[j].frame.T, prof[j].frame.e1, prof[j].frame.e2};
      for (int v = 0; v < 3; ++v) {
        Eigen::Vector3d p(ps[v][0], ps[v][1], ps[v][2]);
        Eigen::Vector3d q(qs[v][0], qs[v][1], qs[v][2]);
        rss += (R * p - q).squaredNorm();
      }
    }
    out.residuals.push_back(
        std::sqrt(rss / (3.0 * static_cast<double>(xtilde.size()))));

    if (emitted == ts.size()) {
      theta_fine = R;
      out.T_star = std::move(T_s);
      out.N_star = std::move(N_s);
    }
  }

  out.theta = to_mat3(theta_fine);
  out.residual = out.residuals.back();
  return out;
}

}  // namespace vfl
