#include "bbm/observables.hpp"

#include <algorithm>
#include <cmath>

#include "bbm/error.hpp"

namespace bbm {

namespace {

constexpr double kSlack = kTimeSlack;

bool in_window(const ParticleRecord& p, double s, double s2) {
  return p.hit_segment && !crossed_before(p, s) && crossed_before(p, s2);
}

void raise(std::optional<double>& current, double value) {
  if (!current || value > *current) current = value;
}

}  // namespace

void CompensatedSum::add(double value) {
  const double t = sum_ + value;
  if (std::abs(sum_) >= std::abs(value))
    compensation_ += (sum_ - t) + value;
  else
    compensation_ += (value - t) + sum_;
  sum_ = t;
}

double derivative_sum(const Population& pop, const Selector& selector) {
  const double t = pop.time;
  const double front = kSqrt2 * t;
  CompensatedSum total;
  for (const auto& p : pop.alive) {
    if (!selects(selector, p)) continue;
    const double lag = front - p.position();
    if (lag == 0.0) continue;
    // lag * exp(-sqrt2 * lag) through logs: underflows to 0 cleanly for
    // particles far behind the front.
    const double magnitude = std::exp(std::log(std::abs(lag)) - kSqrt2 * lag);
    total.add(lag > 0.0 ? magnitude : -magnitude);
  }
  return total.value();
}

ParticleView window_set(const Population& pop, double s, double s2) {
  if (!(s >= 0.0) || !(s2 >= s) || s2 > pop.time + kSlack)
    throw Error(ErrorCode::BadWindow, "window must satisfy 0 <= s <= s2 <= t");
  ParticleView out;
  for (const auto& p : pop.alive)
    if (in_window(p, s, s2)) out.push_back(&p);
  return out;
}

ExtremeRecord extremes(const Population& pop, double s) {
  if (!(s >= 0.0) || s > pop.time + kSlack)
    throw Error(ErrorCode::BadWindow, "truncation time must lie in [0, t]");
  ExtremeRecord record;
  record.t = pop.time;
  const double shift = centering(pop.time);
  const Selector truncated = Selector::truncated_at(s);
  for (const auto& p : pop.alive) {
    const double x = p.position() - shift;
    record.max_all = std::max(record.max_all, x);
    if (!p.hit_segment) raise(record.max_surviving, x);
    if (selects(truncated, p)) raise(record.max_truncated, x);
    if (in_window(p, s, pop.time + 1.0)) raise(record.max_window, x);
  }
  return record;
}

void TubeSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 0.5 && beta > 0.5 && beta < 1.0))
    throw Error(ErrorCode::BadArgs, "tube exponents need 0 < alpha < 1/2 < beta < 1");
  if (!(r > 0.0) || !(t > 0.0)) throw Error(ErrorCode::BadArgs, "tube needs r > 0 and t > 0");
}

double TubeSpec::envelope(double gamma, double s) const {
  const double dip = std::min(std::pow(s, gamma), std::pow(t - s, gamma));
  return x + (s / t) * centering(t) - dip;
}

bool localized(std::span<const Knot> path, const TubeSpec& tube) {
  tube.validate();
  const double lo = tube.r;
  const double hi = tube.t - tube.r;
  if (hi <= lo) return true;
  if (path.empty() || path.front().time > lo || path.back().time < hi)
    throw Error(ErrorCode::InsufficientPath, "path does not span (r, t - r)");
  for (const auto& knot : path) {
    if (knot.time <= lo || knot.time >= hi) continue;
    if (knot.position < tube.lower(knot.time) || knot.position > tube.upper(knot.time))
      return false;
  }
  return true;
}

ErgodicAccumulator::ErgodicAccumulator(Eigen::ArrayXd z_grid, double window_start,
                                       double window_end)
    : z_grid_(std::move(z_grid)),
      occupancy_(Eigen::ArrayXd::Zero(z_grid_.size())),
      window_start_(window_start),
      window_end_(window_end) {
  for (Eigen::Index i = 1; i < z_grid_.size(); ++i)
    if (!(z_grid_[i] > z_grid_[i - 1]))
      throw Error(ErrorCode::BadArgs, "z grid must be strictly increasing");
  if (!(window_end >= window_start)) throw Error(ErrorCode::BadArgs, "empty accumulation window");
}

void ErgodicAccumulator::accumulate(double t, std::optional<double> centered_max, double dt,
                                    double z_tilde) {
  const double slack = kSlack * std::max(1.0, std::abs(window_end_));
  if (t < window_start_ - slack || t + dt > window_end_ + slack || !(dt >= 0.0))
    throw Error(ErrorCode::OutOfWindow, "observation outside the accumulation window");
  if (centered_max) occupancy_ += (z_grid_ >= *centered_max).cast<double>() * dt;
  exposure_ += dt;
  trace_.push_back({t, z_tilde});
}

void ErgodicAccumulator::merge(const ErgodicAccumulator& other) {
  if (other.z_grid_.size() != z_grid_.size() || !(other.z_grid_ == z_grid_).all())
    throw Error(ErrorCode::BadArgs, "cannot merge accumulators on different z grids");
  occupancy_ += other.occupancy_;
  if (other.exposure_ > 0.0 || !other.trace_.empty()) {
    if (exposure_ == 0.0 && trace_.empty()) {
      window_start_ = other.window_start_;
      window_end_ = other.window_end_;
    } else {
      window_start_ = std::min(window_start_, other.window_start_);
      window_end_ = std::max(window_end_, other.window_end_);
    }
  }
  exposure_ += other.exposure_;
  trace_.insert(trace_.end(), other.trace_.begin(), other.trace_.end());
}

Eigen::ArrayXd ErgodicAccumulator::cdf() const {
  if (exposure_ <= 0.0) return Eigen::ArrayXd::Zero(z_grid_.size());
  return occupancy_ / exposure_;
}

}  // namespace bbm
