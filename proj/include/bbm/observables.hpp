#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "bbm/analytic.hpp"
#include "bbm/process.hpp"

namespace bbm {

using analytic::centering;

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double value);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

/// sum over the view of (sqrt(2) t - X_u(t)) exp(sqrt(2) (X_u(t) - sqrt(2) t)).
/// Selector All gives Z_t, Surviving gives the absorbed-process analogue.
double derivative_sum(const Population& pop, const Selector& selector);

/// Alive particles whose lineage first crossed on a segment starting in
/// [s, s2). Crossing times are known at knot resolution, so window ends should
/// sit on knot times. Throws BadWindow unless 0 <= s <= s2 <= pop.time.
ParticleView window_set(const Population& pop, double s, double s2);

/// Centered maxima at pop.time. Empty sets give nullopt; max_all is -inf when
/// nothing is alive.
struct ExtremeRecord {
  double t = 0.0;
  double max_all = -kInfinity;
  std::optional<double> max_surviving;
  std::optional<double> max_truncated;
  std::optional<double> max_window;
};

/// Computes M_t, the surviving maximum, the maximum over TruncatedAt(s) and the
/// maximum over the window set [s, t]. Needs pop.time > 0 and 0 <= s <= t.
ExtremeRecord extremes(const Population& pop, double s);

/// Two-sided localisation corridor F_beta(s) <= X(s) <= F_alpha(s) on (r, t - r)
/// with F_gamma(s) = x + (s / t) m_t - min(s^gamma, (t - s)^gamma).
struct TubeSpec {
  double alpha = 0.25;
  double beta = 0.75;
  double r = 1.0;
  double t = 10.0;
  double x = 1.0;

  /// 0 < alpha < 1/2 < beta < 1, r > 0, t > 0; throws BadArgs.
  void validate() const;
  double envelope(double gamma, double s) const;
  double lower(double s) const { return envelope(beta, s); }
  double upper(double s) const { return envelope(alpha, s); }
};

/// True iff every knot of the path with time in (r, t - r) lies inside the
/// tube. Vacuously true when t <= 2r. Throws InsufficientPath when the knots
/// do not span (r, t - r).
bool localized(std::span<const Knot> path, const TubeSpec& tube);

/// Running left-endpoint Riemann sum of s -> 1{centered max <= z} on a z grid.
///
/// Accumulators over the same z grid form a monoid under `merge` (occupancies
/// and exposure add, traces concatenate), which is how replicas and adjacent
/// windows are pooled.
class ErgodicAccumulator {
 public:
  struct TracePoint {
    double t;
    double z_tilde;
  };

  ErgodicAccumulator(Eigen::ArrayXd z_grid, double window_start, double window_end);

  /// Adds dt * 1{centered_max <= z} for every z (nothing when centered_max is
  /// empty: extinct trajectories do not count as below any level) and appends
  /// (t, z_tilde). Throws OutOfWindow unless window_start <= t and
  /// t + dt <= window_end.
  void accumulate(double t, std::optional<double> centered_max, double dt, double z_tilde);
  void accumulate(const ExtremeRecord& record, double dt, double z_tilde) {
    accumulate(record.t, record.max_surviving, dt, z_tilde);
  }

  /// Throws BadArgs for a different z grid.
  void merge(const ErgodicAccumulator& other);

  const Eigen::ArrayXd& z_grid() const { return z_grid_; }
  const Eigen::ArrayXd& occupancy() const { return occupancy_; }
  double exposure() const { return exposure_; }
  double window_start() const { return window_start_; }
  double window_end() const { return window_end_; }
  const std::vector<TracePoint>& trace() const { return trace_; }

  /// occupancy / exposure (all zeros when nothing was accumulated).
  Eigen::ArrayXd cdf() const;

 private:
  Eigen::ArrayXd z_grid_;
  Eigen::ArrayXd occupancy_;
  double window_start_;
  double window_end_;
  double exposure_ = 0.0;
  std::vector<TracePoint> trace_;
};

}  // namespace bbm
