#pragma once

// Closed-form reference laws. Everything here is a pure function templated on
// the scalar type so the same formulas serve double and long double oracles.

#include <cmath>
#include <limits>
#include <numbers>

#include "bbm/error.hpp"

namespace bbm {

/// Endpoint values of a Brownian path on [t0, t1].
struct SegmentDraw {
  double t0;
  double t1;
  double x0;
  double x1;
};

namespace analytic {

template <typename Scalar>
inline constexpr Scalar sqrt2 = std::numbers::sqrt2_v<Scalar>;

/// m_t = sqrt(2) t - 3/(2 sqrt(2)) log t.
template <typename Scalar>
Scalar centering(Scalar t) {
  if (!(t > Scalar(0))) throw Error(ErrorCode::NonpositiveTime, "centering needs t > 0");
  return sqrt2<Scalar> * t - Scalar(3) / (Scalar(2) * sqrt2<Scalar>)*std::log(t);
}

template <typename Scalar>
struct GumbelMixtureParams {
  Scalar c_star;
  Scalar z_value;
};

/// exp(-c_star * z_value * exp(-sqrt(2) z)).
template <typename Scalar>
Scalar gumbel_mixture_cdf(const GumbelMixtureParams<Scalar>& params, Scalar z) {
  if (!(params.c_star > Scalar(0))) throw Error(ErrorCode::BadArgs, "c_star must be > 0");
  if (params.z_value < Scalar(0)) throw Error(ErrorCode::NegativeMass, "negative Z value");
  if (params.z_value == Scalar(0)) return Scalar(1);
  // Work on the log scale so that very negative z gives 0 instead of NaN.
  const Scalar log_rate = std::log(params.c_star * params.z_value) - sqrt2<Scalar> * z;
  return std::exp(-std::exp(log_rate));
}

/// Standard normal CDF.
template <typename Scalar>
Scalar normal_cdf(Scalar x) {
  return Scalar(0.5) * std::erfc(-x / sqrt2<Scalar>);
}

/// Density in r of the first time the line y = rho * t is reached by a Brownian
/// motion with drift sqrt(2) started at x > 0:
///   x / sqrt(2 pi r^3) * exp(-(x + (sqrt(2) - rho) r)^2 / (2 r)).
/// For rho < sqrt(2) the total mass is exp(-2 (sqrt(2) - rho) x) (the line is
/// missed with positive probability), otherwise it is 1.
template <typename Scalar>
Scalar first_passage_density(Scalar x, Scalar rho, Scalar r) {
  if (!(x > Scalar(0)) || !(r > Scalar(0)))
    throw Error(ErrorCode::BadArgs, "first_passage_density needs x > 0 and r > 0");
  const Scalar gap = sqrt2<Scalar> - rho;
  const Scalar shift = x + gap * r;
  return x / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar> * r * r * r) *
         std::exp(-shift * shift / (Scalar(2) * r));
}

/// The same passage problem seen from the driftless frame: first time a
/// standard Brownian motion from x goes below the line of slope sqrt(2) - rho.
/// Inverse-Gaussian, mass 1 when rho < sqrt(2). Differs from
/// first_passage_density by the constant factor exp(-2 (sqrt(2) - rho) x).
template <typename Scalar>
Scalar tilted_first_passage_density(Scalar x, Scalar rho, Scalar r) {
  if (!(x > Scalar(0)) || !(r > Scalar(0)))
    throw Error(ErrorCode::BadArgs, "tilted_first_passage_density needs x > 0 and r > 0");
  const Scalar gap = sqrt2<Scalar> - rho;
  const Scalar shift = x - gap * r;
  return x / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar> * r * r * r) *
         std::exp(-shift * shift / (Scalar(2) * r));
}

/// Total mass of first_passage_density.
template <typename Scalar>
Scalar first_passage_mass(Scalar x, Scalar rho) {
  const Scalar gap = sqrt2<Scalar> - rho;
  return gap > Scalar(0) ? std::exp(-Scalar(2) * gap * x) : Scalar(1);
}

/// P(x + nu s + B_s <= 0 for some s <= horizon); horizon may be infinite.
template <typename Scalar>
Scalar line_hit_probability(Scalar distance, Scalar relative_drift, Scalar horizon) {
  if (!(distance >= Scalar(0)) || !(horizon >= Scalar(0)))
    throw Error(ErrorCode::BadArgs, "line_hit_probability needs distance >= 0, horizon >= 0");
  if (distance == Scalar(0)) return Scalar(1);
  const Scalar nu = relative_drift;
  if (std::isinf(horizon)) return nu > Scalar(0) ? std::exp(-Scalar(2) * nu * distance) : Scalar(1);
  if (horizon == Scalar(0)) return Scalar(0);
  const Scalar root = std::sqrt(horizon);
  const Scalar direct = normal_cdf<Scalar>((-distance - nu * horizon) / root);
  const Scalar reflected = normal_cdf<Scalar>((-distance + nu * horizon) / root);
  return direct + std::exp(-Scalar(2) * nu * distance) * reflected;
}

/// Probability that a Brownian bridge between (t0, x0) and (t1, x1) touches
/// the line y = rho t: exp(-2 d0 d1 / (t1 - t0)) with d the endpoint distances
/// above the line, and 1 when either endpoint is on or below it.
template <typename Scalar>
Scalar bridge_crossing_prob(Scalar t0, Scalar t1, Scalar x0, Scalar x1, Scalar rho) {
  if (!(t1 > t0)) throw Error(ErrorCode::DegenerateSegment, "bridge needs t1 > t0");
  const Scalar d0 = x0 - rho * t0;
  const Scalar d1 = x1 - rho * t1;
  if (d0 <= Scalar(0) || d1 <= Scalar(0)) return Scalar(1);
  return std::exp(-Scalar(2) * d0 * d1 / (t1 - t0));
}

inline double bridge_crossing_prob(const SegmentDraw& seg, double rho) {
  return bridge_crossing_prob<double>(seg.t0, seg.t1, seg.x0, seg.x1, rho);
}

}  // namespace analytic
}  // namespace bbm
