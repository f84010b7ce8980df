#include "bbm/fkpp_wave.hpp"

#include <array>
#include <cmath>

#include "bbm/error.hpp"
#include "bbm/ode.hpp"

namespace bbm {

namespace {

// Trajectories start this far from the zero equilibrium.
constexpr double kSeedAmplitude = 1e-8;

/// u''/2 + a u' + G(u) - u = 0 written as a first-order system, together with
/// the two-term expansion of the solution leaving the zero equilibrium along
/// the mode exp(lambda s).
template <typename Scalar>
struct WaveOde {
  using State = Eigen::Matrix<Scalar, 2, 1>;

  Scalar a;
  Scalar lambda;
  Scalar quadratic;
  const OffspringLaw& law;

  WaveOde(Scalar drift, Scalar root, const OffspringLaw& offspring)
      : a(drift), lambda(root), quadratic(0), law(offspring) {
    const Scalar q = Scalar(offspring.second_factorial_moment()) / 2;
    const Scalar leak = Scalar(1) - Scalar(offspring.p_one());
    quadratic = -q / (2 * lambda * lambda + 2 * a * lambda - leak);
  }

  Scalar source(Scalar u) const {
    Scalar total = 0;
    for (const auto& m : law.masses()) total += Scalar(m.probability) * std::pow(u, m.count);
    return total - u;
  }

  State operator()(const State& y) const {
    return State(y[1], 2 * (-a * y[1] - source(y[0])));
  }

  State expansion(Scalar s) const {
    const Scalar eps = Scalar(kSeedAmplitude);
    const Scalar e1 = eps * std::exp(lambda * s);
    const Scalar e2 = quadratic * e1 * e1;
    return State(e1 + e2, lambda * e1 + 2 * lambda * e2);
  }

  Scalar residual(Scalar u, Scalar du, Scalar d2u) const {
    return d2u / 2 + a * du + source(u);
  }
};

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Fills values/slopes at parameter points s (sorted ascending): points on the
/// integrated side of 0 come from the ODE started at the seed, the rest from
/// the expansion.
template <typename Scalar>
void sample_trajectory(const WaveOde<Scalar>& ode, const Vec<Scalar>& s, Scalar direction,
                       Vec<Scalar>& values, Vec<Scalar>& slopes) {
  using State = typename WaveOde<Scalar>::State;
  const Eigen::Index n = s.size();
  values.resize(n);
  slopes.resize(n);
  const DormandPrince<Scalar, 2> solver({Scalar(1e-12), Scalar(1e-24), Scalar(1e6), 2'000'000});

  State y = ode.expansion(0);
  Scalar at = 0;
  Scalar h = 0;
  auto visit = [&](Eigen::Index i) {
    if (s[i] * direction <= 0) {
      const State e = ode.expansion(s[i]);
      values[i] = e[0];
      slopes[i] = e[1];
      return;
    }
    y = solver.integrate(ode, at, y, s[i], h);
    at = s[i];
    values[i] = y[0];
    slopes[i] = y[1];
  };
  if (direction > 0)
    for (Eigen::Index i = 0; i < n; ++i) visit(i);
  else
    for (Eigen::Index i = n - 1; i >= 0; --i) visit(i);
}

/// Max over points with a full 9-point stencil of |D u - u'| and the ODE
/// residual with u'' = D u'.
template <typename Scalar>
Scalar system_residual(const WaveOde<Scalar>& ode, const Vec<Scalar>& values,
                       const Vec<Scalar>& slopes, Scalar h) {
  static constexpr std::array<double, 9> d1 = {1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0,
                                               4.0 / 5,   -1.0 / 5,   4.0 / 105, -1.0 / 280};
  Scalar worst = 0;
  for (Eigen::Index i = 4; i + 4 < values.size(); ++i) {
    Scalar du = 0, d2u = 0;
    for (int k = 0; k < 9; ++k) {
      du += Scalar(d1[k]) * values[i + k - 4];
      d2u += Scalar(d1[k]) * slopes[i + k - 4];
    }
    du /= h;
    d2u /= h;
    worst = std::max(worst, std::abs(du - slopes[i]));
    worst = std::max(worst, std::abs(ode.residual(values[i], slopes[i], d2u)));
  }
  return worst;
}

/// Integrates from the seed in `direction` until u crosses `level`; returns the
/// parameter and state where it does.
template <typename Scalar>
typename DormandPrince<Scalar, 2>::Stop level_crossing(const WaveOde<Scalar>& ode, Scalar direction, Scalar level, Scalar limit) {
  using State = typename WaveOde<Scalar>::State;
  const DormandPrince<Scalar, 2> solver({Scalar(1e-12), Scalar(1e-24), Scalar(1e6), 2'000'000});
  Scalar h = 0;
  const auto stop = solver.integrate_until(ode, Scalar(0), State(ode.expansion(0)),
                                           direction * limit, h,
                                           [&](const State& y) { return y[0] - level; });
  if (!stop.event) throw Error(ErrorCode::NoBracket, "wave trajectory never reaches the level");
  return stop;
}

}  // namespace

template <typename Scalar>
Scalar WaveSolution<Scalar>::at(Scalar x) const {
  const Eigen::Index n = grid.size();
  if (n < 2 || x < grid[0] || x > grid[n - 1])
    throw Error(ErrorCode::BadArgs, "point outside the wave grid");
  Eigen::Index i = std::upper_bound(grid.data(), grid.data() + n, x) - grid.data() - 1;
  i = std::clamp<Eigen::Index>(i, 0, n - 2);
  const Scalar h = grid[i + 1] - grid[i];
  const Scalar t = (x - grid[i]) / h;
  const Scalar t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * values[i] + (t3 - 2 * t2 + t) * h * slopes[i] +
         (-2 * t3 + 3 * t2) * values[i + 1] + (t3 - t2) * h * slopes[i + 1];
}

template <typename Scalar>
WaveSolution<Scalar> solve_oneside_wave(Scalar rho, std::optional<Scalar> x_max, Scalar tol,
                                        Scalar grid_step, const OffspringLaw& law) {
  const Scalar sqrt2 = std::sqrt(Scalar(2));
  if (!(rho < sqrt2) || !std::isfinite(rho))
    throw Error(ErrorCode::BadArgs, "one-sided wave needs rho < sqrt(2)");
  const Scalar end = x_max.value_or(Scalar(40) / (sqrt2 - rho));
  if (!(end > 0) || !(grid_step > 0) || !(tol > 0))
    throw Error(ErrorCode::BadArgs, "x_max, grid_step and tol must be positive");

  const Scalar leak = Scalar(1) - Scalar(law.p_one());
  const Scalar lambda = rho - std::sqrt(rho * rho + 2 * leak);
  const WaveOde<Scalar> ode(-rho, lambda, law);
  const Scalar limit = Scalar(200) + Scalar(100) / std::abs(lambda);
  const Scalar origin = level_crossing(ode, Scalar(-1), Scalar(1), limit).t;

  const auto n = static_cast<Eigen::Index>(std::ceil(end / grid_step - Scalar(1e-9))) + 1;
  WaveSolution<Scalar> out;
  out.grid = Vec<Scalar>::LinSpaced(n, 0, grid_step * Scalar(n - 1));
  const Vec<Scalar> s = out.grid.array() + origin;
  sample_trajectory(ode, s, Scalar(-1), out.values, out.slopes);
  out.values[0] = 1;
  out.derivative_at_zero = out.slopes[0];
  out.residual_norm = system_residual(ode, out.values, out.slopes, grid_step);
  if (out.values[n - 1] > tol)
    throw Error(ErrorCode::BadArgs, "g(x_max) exceeds tol; increase x_max");
  return out;
}

template <typename Scalar>
WaveSolution<Scalar> solve_free_wave(Scalar z_min, Scalar z_max, Scalar tol, Scalar grid_step,
                                     const OffspringLaw& law) {
  if (!(z_min < z_max) || !(grid_step > 0))
    throw Error(ErrorCode::BadArgs, "free wave needs z_min < z_max and grid_step > 0");
  const Scalar sqrt2 = std::sqrt(Scalar(2));
  const Scalar leak = Scalar(1) - Scalar(law.p_one());
  const Scalar mu = -sqrt2 + std::sqrt(2 + 2 * leak);
  const WaveOde<Scalar> ode(sqrt2, mu, law);
  const auto centre = level_crossing(ode, Scalar(1), Scalar(0.5), Scalar(200) + 100 / mu);
  const Scalar origin = centre.t;

  const auto k0 = static_cast<Eigen::Index>(std::floor(z_min / grid_step + Scalar(1e-9)));
  const auto k1 = static_cast<Eigen::Index>(std::ceil(z_max / grid_step - Scalar(1e-9)));
  WaveSolution<Scalar> out;
  out.grid.resize(k1 - k0 + 1);
  for (Eigen::Index k = k0; k <= k1; ++k) out.grid[k - k0] = Scalar(k) * grid_step;
  const Vec<Scalar> s = out.grid.array() + origin;
  sample_trajectory(ode, s, Scalar(1), out.values, out.slopes);
  if (k0 <= 0 && k1 >= 0) out.values[-k0] = Scalar(0.5);
  out.derivative_at_zero = centre.y[1];
  out.residual_norm = system_residual(ode, out.values, out.slopes, grid_step);
  if (!(out.residual_norm <= tol))
    throw Error(ErrorCode::NoConvergence, "free wave residual above tol");
  return out;
}

template struct WaveSolution<double>;
template WaveSolution<double> solve_oneside_wave<double>(double, std::optional<double>, double,
                                                         double, const OffspringLaw&);
template WaveSolution<double> solve_free_wave<double>(double, double, double, double,
                                                      const OffspringLaw&);

}  // namespace bbm
