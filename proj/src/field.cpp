#include "vfl/field.hpp"

#include <cmath>
#include <stdexcept>

#include "vfl/phase_util.hpp"

namespace vfl {

namespace {

constexpr long double kPiL = 3.14159265358979323846264338327950288L;

inline Cplx cis(long double theta) { return cis_reduced(theta); }

void check_time(double t, const char* who) {
  if (!(t > 0.0)) throw std::domain_error(std::string(who) + ": time must be positive");
}

}  // namespace

Cplx point_kernel(double t, double dx, Normalization norm) {
  check_time(t, "point_kernel");
  const long double ph = static_cast<long double>(dx) * dx / (4.0L * t);
  if (norm == Normalization::analyst)
    return cis(ph - kPiL / 4.0L) / std::sqrt(4.0 * kPi * t);
  return cis(ph) / std::sqrt(t);
}

FieldAnsatz::FieldAnsatz(Support s, std::vector<Cplx> vals, Normalization norm)
    : support(std::move(s)), values(std::move(vals)), normalization(norm) {
  if (values.size() != support.size())
    throw std::invalid_argument("FieldAnsatz: one value per support location required");
  for (const Cplx& v : values)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw std::invalid_argument("FieldAnsatz: values must be finite");
}

Cplx evaluate_u(const FieldAnsatz& f, double t, double x) {
  check_time(t, "evaluate_u");
  const double amp = f.normalization == Normalization::analyst
                         ? 1.0 / std::sqrt(4.0 * kPi * t)
                         : 1.0 / std::sqrt(t);
  const long double branch =
      f.normalization == Normalization::analyst ? -kPiL / 4.0L : 0.0L;
  Cplx acc(0.0, 0.0);
  for (std::size_t k = 0; k < f.support.size(); ++k) {
    const long double dx = static_cast<long double>(x) - f.support.locs[k];
    acc += f.values[k] * cis(dx * dx / (4.0L * t) + branch);
  }
  return acc * amp;
}

Cplx evaluate_ux(const FieldAnsatz& f, double t, double x) {
  check_time(t, "evaluate_ux");
  const double amp = f.normalization == Normalization::analyst
                         ? 1.0 / std::sqrt(4.0 * kPi * t)
                         : 1.0 / std::sqrt(t);
  const long double branch =
      f.normalization == Normalization::analyst ? -kPiL / 4.0L : 0.0L;
  Cplx acc(0.0, 0.0);
  for (std::size_t k = 0; k < f.support.size(); ++k) {
    const double dxd = x - f.support.locs[k];
    const long double dx = static_cast<long double>(x) - f.support.locs[k];
    acc += f.values[k] * cis(dx * dx / (4.0L * t) + branch) * Cplx(0.0, dxd / (2.0 * t));
  }
  return acc * amp;
}

namespace {

template <typename Fn>
std::vector<Cplx> batch(const std::vector<double>& ts, const std::vector<double>& xs, Fn fn) {
  if (ts.size() != xs.size())
    throw std::invalid_argument("batch evaluation: ts and xs must have equal length");
  std::vector<Cplx> out(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) out[i] = fn(ts[i], xs[i]);
  return out;
}

}  // namespace

std::vector<Cplx> evaluate_u(const FieldAnsatz& f, const std::vector<double>& ts,
                             const std::vector<double>& xs) {
  return batch(ts, xs, [&](double t, double x) { return evaluate_u(f, t, x); });
}

std::vector<Cplx> evaluate_ux(const FieldAnsatz& f, const std::vector<double>& ts,
                              const std::vector<double>& xs) {
  return batch(ts, xs, [&](double t, double x) { return evaluate_ux(f, t, x); });
}

double modulation_phase(const Support& s, const std::vector<double>& alphas_sq,
                        double t, double x) {
  check_time(t, "modulation_phase");
  if (alphas_sq.size() != s.size())
    throw std::invalid_argument("modulation_phase: one weight per support location required");
  const int skip = s.index_of(x);
  const double half_log_t = 0.5 * std::log(t);
  double acc = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (static_cast<int>(j) == skip || alphas_sq[j] == 0.0) continue;
    acc += alphas_sq[j] * (std::log(std::abs(x - s.locs[j])) - half_log_t);
  }
  return acc;
}

Cplx comb_symbol(const Support& s, const std::vector<Cplx>& values, double xi) {
  if (values.size() != s.size())
    throw std::invalid_argument("comb_symbol: one value per support location required");
  Cplx acc(0.0, 0.0);
  for (std::size_t k = 0; k < s.size(); ++k)
    acc += values[k] * cis(-static_cast<long double>(s.locs[k]) * xi);
  return acc;
}

}  // namespace vfl
