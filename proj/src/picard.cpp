#include "vfl/picard.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vfl/phase_util.hpp"

namespace vfl {
namespace {

constexpr Cplx kImag{0.0, 1.0};

struct FlatTriple {
  int k, j1, j2, j3;
  double omega;
  double omega_hat;  // slow logarithmic rate from the modulus metadata
};

struct NodePlan {
  std::vector<double> s;          // ascending reciprocal times
  std::vector<std::size_t> grid_node;  // node index of each grid time
};

// nodes: reciprocals of the grid plus geometric refinement and extension
NodePlan build_nodes(const std::vector<double>& grid, double ratio, double s_stop) {
  NodePlan plan;
  std::vector<double> base;
  base.reserve(grid.size());
  for (auto it = grid.rbegin(); it != grid.rend(); ++it) base.push_back(1.0 / *it);
  const double lr = std::log(ratio);
  for (std::size_t i = 0; i + 1 < base.size(); ++i) {
    plan.s.push_back(base[i]);
    const double q = base[i + 1] / base[i];
    int extra = static_cast<int>(std::floor(std::log(q) / lr));
    for (int j = 1; j <= extra; ++j) {
      double v = base[i] * std::pow(q, double(j) / (extra + 1));
      if (v > plan.s.back() * (1 + 1e-12) && v < base[i + 1] * (1 - 1e-12)) plan.s.push_back(v);
    }
  }
  plan.s.push_back(base.back());
  while (plan.s.back() < s_stop) plan.s.push_back(plan.s.back() * ratio);
  // locate the grid times among the nodes
  plan.grid_node.resize(grid.size());
  std::size_t cursor = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double target = 1.0 / grid[grid.size() - 1 - g];
    while (cursor + 1 < plan.s.size() &&
           std::abs(plan.s[cursor + 1] - target) < std::abs(plan.s[cursor] - target))
      ++cursor;
    plan.grid_node[grid.size() - 1 - g] = cursor;
  }
  return plan;
}

}  // namespace

PicardParts picard_apply_parts(const CoeffSystem& sys, const ResidualPath& residual_path,
                               const std::vector<double>& grid, const PicardOptions& opt) {
  const std::size_t n = sys.size();
  if (grid.empty()) throw std::invalid_argument("empty evaluation grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0) || !std::isfinite(grid[i]))
      throw std::invalid_argument("grid times must be positive and finite");
    if (i && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument("grid times must be strictly increasing");
  }
  if (residual_path.size() != n)
    throw std::invalid_argument("residual path does not match support size");
  for (const auto& row : residual_path) {
    if (row.size() != grid.size())
      throw std::invalid_argument("residual path does not match grid length");
    for (const Cplx& v : row)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw std::invalid_argument("non-finite residual sample");
  }

  // flatten the oscillatory terms with their slow logarithmic rates
  std::vector<FlatTriple> terms;
  double omega_min = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (const auto& tr : sys.triples_for(k)) {
      const double om = sys.distinct_omegas()[tr.omega_idx];
      const double what = (sys.renorm_mode() == RenormMode::sum_sq)
                              ? (sys.alpha_sq(k) - sys.alpha_sq(tr.j1) + sys.alpha_sq(tr.j2) -
                                 sys.alpha_sq(tr.j3)) /
                                    (4.0 * kPi)
                              : 0.0;
      terms.push_back({int(k), tr.j1, tr.j2, tr.j3, om, what});
      const double a = std::abs(om);
      if (omega_min == 0.0 || a < omega_min) omega_min = a;
    }

  const double s_stop =
      std::max({opt.s_max, omega_min > 0 ? opt.tail_phase / omega_min : 0.0, 1.0 / grid.front()});
  NodePlan plan = build_nodes(grid, opt.panel_ratio, s_stop);
  const std::size_t nn = plan.s.size();

  // slow variables interpolated onto the nodes (tau descending as s ascends)
  std::vector<std::vector<Cplx>> slow(n, std::vector<Cplx>(nn));
  const double t_front = grid.front();
  for (std::size_t j = 0; j < nn; ++j) {
    const double tau = 1.0 / plan.s[j];
    std::size_t hi = std::lower_bound(grid.begin(), grid.end(), tau) - grid.begin();
    for (std::size_t k = 0; k < n; ++k) {
      Cplx r;
      if (hi == 0) {
        r = residual_path[k][0] * std::pow(std::min(tau / t_front, 1.0), opt.head_gamma);
      } else if (hi >= grid.size()) {
        r = residual_path[k].back();
      } else {
        const double w = (tau - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
        r = residual_path[k][hi - 1] * (1.0 - w) + residual_path[k][hi] * w;
      }
      slow[k][j] = sys.alphas()[k] + r;
    }
  }

  const int sigma = sys.sign();
  const double S = plan.s.back();

  // per-term slow factors F_T(s) = (1/8 pi s) e^{-i sigma omega_hat log(s)/2} P_T(s)
  auto slow_factor = [&](const FlatTriple& tt, std::size_t j) {
    const double s = plan.s[j];
    Cplx p = slow[tt.j1][j] * std::conj(slow[tt.j2][j]) * slow[tt.j3][j];
    if (tt.omega_hat != 0.0)
      p *= std::polar(1.0, -sigma * tt.omega_hat * 0.5 * std::log(s));
    return p / (8.0 * kPi * s);
  };

  // cumulative integrals from the far end inward
  std::vector<std::vector<Cplx>> g_single(n, std::vector<Cplx>(nn));
  std::vector<std::vector<Cplx>> g_conj(n, std::vector<Cplx>(nn));
  // analytic tails at S via integration by parts (two orders)
  for (const auto& tt : terms) {
    const Cplx f = slow_factor(tt, nn - 1);
    const Cplx e = std::polar(1.0, -tt.omega * S * 0.25);
    const Cplx lead = Cplx(0.0, -4.0 / tt.omega) * e;
    const Cplx corr = (16.0 / (tt.omega * tt.omega * S)) * e *
                      (Cplx(1.0, 0.0) + Cplx(0.0, sigma * tt.omega_hat * 0.5));
    const Cplx tail = (lead + corr) * f;
    g_single[tt.k][nn - 1] += tail;
    g_conj[tt.k][nn - 1] += tail * std::conj(slow[tt.k][nn - 1]);
  }
  // oscillatory panels, accumulated backwards
  std::vector<Cplx> v1(n), vc(n);
  for (std::size_t j = nn - 1; j-- > 0;) {
    const double h = plan.s[j + 1] - plan.s[j];
    std::fill(v1.begin(), v1.end(), Cplx(0, 0));
    std::fill(vc.begin(), vc.end(), Cplx(0, 0));
    for (const auto& tt : terms) {
      const Cplx z{0.0, -tt.omega * h * 0.25};
      const Cplx w = std::polar(1.0, -tt.omega * plan.s[j] * 0.25);
      const Cplx c1 = w * (h * phi1(z));
      const Cplx c2 = w * (h * phi2(z));
      const Cplx f0 = slow_factor(tt, j);
      const Cplx f1 = slow_factor(tt, j + 1);
      v1[tt.k] += c1 * f0 + c2 * (f1 - f0);
      const Cplx h0 = f0 * std::conj(slow[tt.k][j]);
      const Cplx h1 = f1 * std::conj(slow[tt.k][j + 1]);
      vc[tt.k] += c1 * h0 + c2 * (h1 - h0);
    }
    for (std::size_t k = 0; k < n; ++k) {
      g_single[k][j] = g_single[k][j + 1] + v1[k];
      g_conj[k][j] = g_conj[k][j + 1] + vc[k];
    }
  }

  // outer smooth integral of (1/4 pi s) Im(g_conj) (alpha + R), tail model ~ 1/s
  std::vector<std::vector<Cplx>> outer(n, std::vector<Cplx>(nn));
  for (std::size_t k = 0; k < n; ++k)
    outer[k][nn - 1] =
        (1.0 / (4.0 * kPi)) * std::imag(g_conj[k][nn - 1]) * slow[k][nn - 1];
  for (std::size_t j = nn - 1; j-- > 0;) {
    const double h = plan.s[j + 1] - plan.s[j];
    for (std::size_t k = 0; k < n; ++k) {
      const Cplx a0 = std::imag(g_conj[k][j]) / (4.0 * kPi * plan.s[j]) * slow[k][j];
      const Cplx a1 =
          std::imag(g_conj[k][j + 1]) / (4.0 * kPi * plan.s[j + 1]) * slow[k][j + 1];
      outer[k][j] = outer[k][j + 1] + 0.5 * h * (a0 + a1);
    }
  }

  PicardParts parts;
  parts.single_part.assign(n, std::vector<Cplx>(grid.size()));
  parts.double_part.assign(n, std::vector<Cplx>(grid.size()));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const std::size_t j = plan.grid_node[g];
      parts.single_part[k][g] = kImag * double(sigma) * g_single[k][j];
      parts.double_part[k][g] = kImag * outer[k][j];
    }
  return parts;
}

ResidualPath picard_apply(const CoeffSystem& sys, const ResidualPath& residual_path,
                          const std::vector<double>& grid, const PicardOptions& opt) {
  PicardParts parts = picard_apply_parts(sys, residual_path, grid, opt);
  ResidualPath out(sys.size(), std::vector<Cplx>(grid.size()));
  for (std::size_t k = 0; k < sys.size(); ++k)
    for (std::size_t g = 0; g < grid.size(); ++g)
      out[k][g] = parts.single_part[k][g] + parts.double_part[k][g];
  return out;
}

PicardResult picard_solve(const CoeffSystem& sys, double t, const PicardOptions& opt) {
  if (!(t > 0) || !std::isfinite(t)) throw std::invalid_argument("time must be positive");
  PicardResult res;
  // dense geometric grid ending at t so every iterate is well resolved
  std::vector<double> s_nodes{1.0 / t};
  const double s_stop = std::max(opt.s_max, 1.0 / t * 8.0);
  while (s_nodes.back() < s_stop) s_nodes.push_back(s_nodes.back() * opt.panel_ratio);
  res.grid.assign(s_nodes.rbegin(), s_nodes.rend());
  for (double& v : res.grid) v = 1.0 / v;

  const std::size_t n = sys.size();
  ResidualPath r(n, std::vector<Cplx>(res.grid.size(), Cplx(0, 0)));
  for (res.iterations = 1; res.iterations <= opt.max_iters; ++res.iterations) {
    ResidualPath next = picard_apply(sys, r, res.grid, opt);
    double delta = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < res.grid.size(); ++i)
        delta = std::max(delta, std::abs(next[k][i] - r[k][i]));
    r.swap(next);
    res.last_update = delta;
    if (delta < opt.fp_tol) {
      res.converged = true;
      break;
    }
  }
  if (res.iterations > opt.max_iters) res.iterations = opt.max_iters;
  res.residual = std::move(r);
  res.slow_path.assign(n, std::vector<Cplx>(res.grid.size()));
  std::vector<Cplx> slow_end(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < res.grid.size(); ++i)
      res.slow_path[k][i] = sys.alphas()[k] + res.residual[k][i];
    slow_end[k] = res.slow_path[k].back();
  }
  res.values = gauge_from_slow(sys, res.grid.back(), slow_end);
  return res;
}

}  // namespace vfl
