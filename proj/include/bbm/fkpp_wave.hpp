#pragma once

#include <Eigen/Core>
#include <optional>

#include "bbm/process.hpp"

namespace bbm {

template <typename Scalar>
struct WaveSolution {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector grid;
  Vector values;
  Vector slopes;
  /// Slope at the normalisation point (x = 0 for g, z = 0 for w).
  Scalar derivative_at_zero = 0;
  /// Max over interior grid points of the first-order system residual,
  /// evaluated with 8th-order central differences.
  Scalar residual_norm = 0;

  /// Cubic Hermite interpolation; throws BadArgs outside the grid.
  Scalar at(Scalar x) const;
};

/// Extinction probability g of the absorbed process:
/// g''/2 - rho g' + sum_k p_k g^k - g = 0 on x > 0, g(0) = 1, g(inf) = 0.
///
/// The grid is i * grid_step, i = 0..ceil(x_max / grid_step); x_max defaults to
/// 40 / (sqrt2 - rho). Throws BadArgs for rho >= sqrt2 or when g at the last
/// grid point exceeds tol, NoBracket if the decaying trajectory never reaches
/// 1, Blowup if the integration diverges.
template <typename Scalar>
WaveSolution<Scalar> solve_oneside_wave(Scalar rho, std::optional<Scalar> x_max = std::nullopt,
                                        Scalar tol = Scalar(1e-6), Scalar grid_step = Scalar(0.01),
                                        const OffspringLaw& law = OffspringLaw::binary());

/// Free critical wave w''/2 + sqrt2 w' + sum_k p_k w^k - w = 0, increasing from
/// 0 at -inf to 1 at +inf, translated so that w(0) = 1/2. The grid is
/// k * grid_step covering [z_min, z_max]. Throws NoConvergence when the
/// residual exceeds tol.
template <typename Scalar>
WaveSolution<Scalar> solve_free_wave(Scalar z_min, Scalar z_max, Scalar tol = Scalar(1e-8),
                                     Scalar grid_step = Scalar(0.01),
                                     const OffspringLaw& law = OffspringLaw::binary());

extern template struct WaveSolution<double>;
extern template WaveSolution<double> solve_oneside_wave<double>(double, std::optional<double>,
                                                                double, double,
                                                                const OffspringLaw&);
extern template WaveSolution<double> solve_free_wave<double>(double, double, double, double,
                                                             const OffspringLaw&);

}  // namespace bbm
