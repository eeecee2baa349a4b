#include "vfl/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <stdexcept>
#include <utility>

#include "vfl/ode.hpp"
#include "vfl/phase_util.hpp"

namespace vfl {
namespace {

constexpr Cplx kImag{0.0, 1.0};

}  // namespace

CoeffSystem::CoeffSystem(Support support, std::vector<Cplx> alphas, int sign, RenormMode mode,
                         double resonance_tol)
    : support_(std::move(support)),
      alphas_(std::move(alphas)),
      sign_(sign),
      mode_(mode),
      split_(resonant_split(support_, resonance_tol)) {
  if (alphas_.size() != support_.size())
    throw std::invalid_argument("coefficient count does not match support size");
  if (sign_ != 1 && sign_ != -1) throw std::invalid_argument("sign must be +1 or -1");
  alpha_sq_.resize(alphas_.size());
  for (std::size_t k = 0; k < alphas_.size(); ++k) {
    if (!std::isfinite(alphas_[k].real()) || !std::isfinite(alphas_[k].imag()))
      throw std::invalid_argument("non-finite coefficient");
    alpha_sq_[k] = std::norm(alphas_[k]);
    mass_param_ += alpha_sq_[k];
  }
  // distinct-frequency table: each oscillation factor is computed once per call
  std::map<double, std::size_t> omega_index;
  triples_.resize(support_.size());
  for (std::size_t k = 0; k < support_.size(); ++k) {
    triples_[k].reserve(split_.nonresonant[k].size());
    for (const Triple& tr : split_.nonresonant[k]) {
      auto [it, inserted] = omega_index.try_emplace(tr.omega, distinct_omegas_.size());
      if (inserted) distinct_omegas_.push_back(tr.omega);
      triples_[k].push_back({tr.j1, tr.j2, tr.j3, it->second});
    }
    std::sort(triples_[k].begin(), triples_[k].end(),
              [](const PhasedTriple& a, const PhasedTriple& b) { return a.omega_idx < b.omega_idx; });
  }
  phase_buf_.resize(distinct_omegas_.size());
}

void CoeffSystem::fill_phases(double quarter_rate) const {
  const double q = 0.25 * quarter_rate;
  for (std::size_t m = 0; m < distinct_omegas_.size(); ++m)
    phase_buf_[m] = std::polar(1.0, -distinct_omegas_[m] * q);
}

void CoeffSystem::accumulate(const Cplx* a, Cplx* da, double coef) const {
  for (std::size_t k = 0; k < alphas_.size(); ++k) {
    Cplx s{0.0, 0.0};
    for (const PhasedTriple& tr : triples_[k])
      s += phase_buf_[tr.omega_idx] * (a[tr.j1] * std::conj(a[tr.j2]) * a[tr.j3]);
    const double nk = std::norm(a[k]);
    const Cplx self = (mode_ == RenormMode::sum_sq) ? nk * a[k] : (nk - alpha_sq_[k]) * a[k];
    da[k] = kImag * (coef * (s - self));
  }
}

void CoeffSystem::rhs(double t, const Cplx* a, Cplx* da) const {
  if (!(t > 0)) throw std::domain_error("time must be positive");
  fill_phases(1.0 / t);
  accumulate(a, da, sign_ / (8.0 * kPi * t));
}

void CoeffSystem::rhs_s(double s, const Cplx* a, Cplx* da) const {
  if (!(s > 0)) throw std::domain_error("reciprocal time must be positive");
  fill_phases(s);
  accumulate(a, da, -sign_ / (8.0 * kPi * s));
}

double CoeffSystem::phase_cap(double t, double c_phase) const {
  double cap = 0.5 * t;  // resolves the 1/t envelope and keeps t positive
  if (split_.omega_max > 0) cap = std::min(cap, c_phase * 4.0 * t * t / split_.omega_max);
  return cap;
}

std::vector<Cplx> CoeffSystem::initial_values(double t0) const {
  if (!(t0 > 0)) throw std::invalid_argument("start time must be positive");
  std::vector<Cplx> a(alphas_);
  if (mode_ == RenormMode::sum_sq) {
    const double lg = std::log(std::sqrt(t0));
    for (std::size_t k = 0; k < a.size(); ++k)
      a[k] *= std::polar(1.0, -sign_ * alpha_sq_[k] / (4.0 * kPi) * lg);
  }
  return a;
}

double CoeffSystem::mass(const Cplx* a) const {
  double m = 0.0;
  for (std::size_t k = 0; k < alphas_.size(); ++k) m += std::norm(a[k]);
  return m;
}

double CoeffSystem::momentum(const Cplx* a) const {
  double p = 0.0;
  for (std::size_t k = 0; k < alphas_.size(); ++k) p += support_.locs[k] * std::norm(a[k]);
  return p;
}

std::vector<Cplx> gauge_to_slow(const CoeffSystem& sys, double t, const std::vector<Cplx>& a) {
  if (!(t > 0)) throw std::invalid_argument("gauge time must be positive");
  if (a.size() != sys.size()) throw std::invalid_argument("value count does not match support");
  std::vector<Cplx> out(a);
  if (sys.renorm_mode() == RenormMode::sum_sq) {
    const double lg = std::log(std::sqrt(t));
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] *= std::polar(1.0, sys.sign() * sys.alpha_sq(k) / (4.0 * kPi) * lg);
  }
  return out;
}

std::vector<Cplx> gauge_from_slow(const CoeffSystem& sys, double t, const std::vector<Cplx>& a) {
  if (!(t > 0)) throw std::invalid_argument("gauge time must be positive");
  if (a.size() != sys.size()) throw std::invalid_argument("value count does not match support");
  std::vector<Cplx> out(a);
  if (sys.renorm_mode() == RenormMode::sum_sq) {
    const double lg = std::log(std::sqrt(t));
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] *= std::polar(1.0, -sys.sign() * sys.alpha_sq(k) / (4.0 * kPi) * lg);
  }
  return out;
}

double conserved_mass(const CoeffSystem& sys, const std::vector<Cplx>& a) {
  if (a.size() != sys.size()) throw std::invalid_argument("value count does not match support");
  return sys.mass(a.data());
}

double conserved_momentum(const CoeffSystem& sys, const std::vector<Cplx>& a) {
  if (a.size() != sys.size()) throw std::invalid_argument("value count does not match support");
  return sys.momentum(a.data());
}

namespace {

std::vector<double> ordered_samples(double t0, double t1, std::vector<double> ts) {
  const double lo = std::min(t0, t1), hi = std::max(t0, t1);
  const double slack = 1e-12 * std::max(std::abs(lo), std::abs(hi));
  for (double& s : ts) {
    if (s < lo - slack || s > hi + slack)
      throw std::invalid_argument("sample time outside evolution range");
    s = std::clamp(s, lo, hi);
  }
  ts.push_back(t0);
  ts.push_back(t1);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(),
                       [](double a, double b) {
                         return std::abs(a - b) <= 1e-14 * std::max(std::abs(a), std::abs(b));
                       }),
           ts.end());
  if (t1 < t0) std::reverse(ts.begin(), ts.end());
  return ts;
}

struct DriftMonitor {
  const CoeffSystem& sys;
  double mass0, mom0, mass_den, mom_den;
  EvolveResult& res;
  DriftMonitor(const CoeffSystem& s, const Cplx* a0, EvolveResult& r) : sys(s), res(r) {
    mass0 = sys.mass(a0);
    mom0 = sys.momentum(a0);
    mass_den = std::max(mass0, 1e-300);
    mom_den = std::max(std::abs(mom0), mass_den);
  }
  void observe(const Cplx* a) {
    res.max_mass_drift = std::max(res.max_mass_drift, std::abs(sys.mass(a) - mass0) / mass_den);
    res.max_momentum_drift =
        std::max(res.max_momentum_drift, std::abs(sys.momentum(a) - mom0) / mom_den);
  }
};

EvolveResult run_rk(const CoeffSystem& sys, const SolverConfig& cfg, std::vector<Cplx> a0,
                    double t0, double t1, const std::vector<double>& ts) {
  EvolveResult res;
  const std::size_t n = sys.size();
  std::vector<double> y(2 * n);
  std::memcpy(y.data(), a0.data(), 2 * n * sizeof(double));
  DriftMonitor mon(sys, a0.data(), res);

  OdeOptions opt;
  opt.rel_tol = cfg.rel_tol;
  opt.abs_tol = cfg.abs_tol;
  opt.max_steps = cfg.max_steps;
  opt.max_h = [&sys, &cfg](double t) { return sys.phase_cap(t, cfg.c_phase); };

  OdeRhs f = [&sys](double t, const std::vector<double>& yv, std::vector<double>& dyv) {
    sys.rhs(t, reinterpret_cast<const Cplx*>(yv.data()), reinterpret_cast<Cplx*>(dyv.data()));
  };
  OdeSample on_sample = [&](double t, const std::vector<double>& yv) {
    const Cplx* a = reinterpret_cast<const Cplx*>(yv.data());
    res.samples.push_back({t, std::vector<Cplx>(a, a + n), sys.mass(a), sys.momentum(a)});
  };
  OdeAccept on_accept = [&](double, std::vector<double>& yv) {
    mon.observe(reinterpret_cast<const Cplx*>(yv.data()));
    return false;
  };

  OdeReport rep = dopri5(f, y, t0, t1, opt, ts, on_sample, on_accept);
  res.steps = rep.steps;
  res.rejected = rep.rejected;
  res.ok = rep.ok;
  res.message = rep.message;
  return res;
}

EvolveResult run_filon(const CoeffSystem& sys, const SolverConfig& cfg, std::vector<Cplx> a0,
                       double t0, double t1, const std::vector<double>& ts) {
  EvolveResult res;
  const std::size_t n = sys.size();
  const double s_begin = 1.0 / t0, s_end = 1.0 / t1;
  const double dir = (s_end >= s_begin) ? 1.0 : -1.0;
  std::vector<double> s_samples;
  s_samples.reserve(ts.size());
  for (double tt : ts) s_samples.push_back(1.0 / tt);

  std::vector<Cplx> a = std::move(a0);
  std::vector<Cplx> da(n), a_end(n), a_new(n), err_vec(n);
  DriftMonitor mon(sys, a.data(), res);

  // distinct-frequency tables rebuilt per panel
  std::vector<Cplx> c1_tab, c2_tab;

  const Cplx pref{0.0, -sys.sign() / (8.0 * kPi)};
  auto emit_sample = [&](double s_at) {
    res.samples.push_back(
        {1.0 / s_at, a, sys.mass(a.data()), sys.momentum(a.data())});
  };

  double s = s_begin;
  const double ratio_cap = cfg.panel_ratio / (1.0 + cfg.panel_ratio);
  double h = std::min(std::abs(s_end - s_begin), ratio_cap * s) * 1e-2;
  if (h <= 0) h = std::abs(s_end - s_begin);
  std::size_t next_sample = 0;
  std::size_t panels = 0;

  if (s_begin == s_end) {
    for (std::size_t i = 0; i < s_samples.size(); ++i) emit_sample(s_samples[i]);
    return res;
  }

  while (dir * (s_end - s) > 0) {
    if (++panels > cfg.max_steps) {
      res.ok = false;
      res.message = "panel budget exhausted at t=" + std::to_string(1.0 / s);
      return res;
    }
    h = std::min(h, ratio_cap * s);
    h = std::min(h, std::abs(s_end - s));
    const double h_unclamped = h;
    bool at_sample = false;
    if (next_sample < s_samples.size()) {
      double ds = dir * (s_samples[next_sample] - s);
      if (ds <= h * (1 + 1e-12)) {
        h = std::max(ds, 0.0);
        at_sample = true;
      }
    }
    if (h <= 1e-14 * s) {
      if (at_sample && h == 0.0) {
        emit_sample(s_samples[next_sample]);
        ++next_sample;
        --panels;
        h = h_unclamped;
        continue;
      }
      res.ok = false;
      res.message = "panel size underflow at t=" + std::to_string(1.0 / s);
      return res;
    }
    const double hs = dir * h;
    const double sp = s + hs;

    // predictor: Euler in reciprocal time
    sys.rhs_s(s, a.data(), da.data());
    for (std::size_t k = 0; k < n; ++k) a_end[k] = a[k] + hs * da[k];

    // oscillation weights on the panel
    const auto& omegas = sys.distinct_omegas();
    const std::size_t m_cnt = omegas.size();
    c1_tab.resize(m_cnt);
    c2_tab.resize(m_cnt);
    for (std::size_t m = 0; m < m_cnt; ++m) {
      const Cplx z{0.0, -omegas[m] * hs * 0.25};
      const Cplx w = std::polar(1.0, -omegas[m] * s * 0.25);
      c1_tab[m] = w * (hs * phi1(z));
      c2_tab[m] = w * (hs * phi2(z));
    }

    double err = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < n; ++k) {
        Cplx acc{0.0, 0.0}, acc_err{0.0, 0.0};
        for (const auto& tr : sys.triples_for(k)) {
          const Cplx p0 = a[tr.j1] * std::conj(a[tr.j2]) * a[tr.j3] / s;
          const Cplx p1 = a_end[tr.j1] * std::conj(a_end[tr.j2]) * a_end[tr.j3] / sp;
          const Cplx d = p1 - p0;
          acc += c1_tab[tr.omega_idx] * p0 + c2_tab[tr.omega_idx] * d;
          acc_err += c2_tab[tr.omega_idx] * d;
        }
        const double n0 = std::norm(a[k]);
        const double n1 = std::norm(a_end[k]);
        const Cplx q0 = (sys.renorm_mode() == RenormMode::sum_sq) ? n0 * a[k]
                                                                  : (n0 - sys.alpha_sq(k)) * a[k];
        const Cplx q1 = (sys.renorm_mode() == RenormMode::sum_sq)
                            ? n1 * a_end[k]
                            : (n1 - sys.alpha_sq(k)) * a_end[k];
        const Cplx f0 = -q0 / s, f1 = -q1 / sp;
        acc += hs * f0 + (0.5 * hs) * (f1 - f0);
        acc_err += (0.5 * hs) * (f1 - f0);
        a_new[k] = a[k] + pref * acc;
        err_vec[k] = pref * acc_err;
      }
      for (std::size_t k = 0; k < n; ++k) a_end[k] = a_new[k];
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double sc =
          cfg.abs_tol + cfg.rel_tol * std::max(std::abs(a[k]), std::abs(a_end[k]));
      const double r = std::abs(err_vec[k]) / sc;
      err += r * r;
    }
    err = std::sqrt(err / std::max<std::size_t>(n, 1));

    if (std::isfinite(err) && err <= 1.0) {
      s = sp;
      a.swap(a_end);
      mon.observe(a.data());
      ++res.steps;
      if (at_sample && next_sample < s_samples.size()) {
        emit_sample(s_samples[next_sample]);
        ++next_sample;
      }
      h *= std::clamp(0.9 * std::pow(std::max(err, 1e-12), -0.5), 0.2, 4.0);
    } else {
      ++res.rejected;
      double fac = std::isfinite(err) ? 0.9 * std::pow(err, -0.5) : 0.1;
      h *= std::clamp(fac, 0.1, 0.9);
    }
  }
  while (next_sample < s_samples.size()) {
    emit_sample(s_samples[next_sample]);
    ++next_sample;
  }
  return res;
}

}  // namespace

EvolveResult evolve_values(const CoeffSystem& sys, const SolverConfig& cfg, std::vector<Cplx> a0,
                           double t0, double t1, std::vector<double> sample_ts) {
  if (a0.size() != sys.size()) throw std::invalid_argument("value count does not match support");
  if (!(t0 > 0) || !(t1 > 0)) throw std::invalid_argument("evolution times must be positive");
  for (const Cplx& v : a0)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw std::invalid_argument("non-finite coefficient data");
  std::vector<double> ts = ordered_samples(t0, t1, std::move(sample_ts));
  EvolveResult res = (cfg.scheme == Scheme::rk_adaptive)
                         ? run_rk(sys, cfg, std::move(a0), t0, t1, ts)
                         : run_filon(sys, cfg, std::move(a0), t0, t1, ts);
  return res;
}

EvolveResult evolve(const CoeffSystem& sys, const SolverConfig& cfg,
                    std::vector<double> sample_ts) {
  if (!(cfg.t_min > 0) || !(cfg.t_max > 0))
    throw std::invalid_argument("evolution times must be positive");
  return evolve_values(sys, cfg, sys.initial_values(cfg.t_min), cfg.t_min, cfg.t_max,
                       std::move(sample_ts));
}

}  // namespace vfl
