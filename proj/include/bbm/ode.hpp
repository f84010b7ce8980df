#pragma once

// Dormand-Prince 5(4) with adaptive steps for small autonomous systems.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>

#include "bbm/error.hpp"

namespace bbm {

template <typename Scalar>
struct OdeOptions {
  Scalar rtol = Scalar(1e-12);
  Scalar atol = Scalar(1e-14);
  /// |y| above this (or a non-finite state) raises Blowup.
  Scalar blowup = Scalar(1e6);
  long max_steps = 2'000'000;
};

template <typename Scalar, int N>
class DormandPrince {
 public:
  using State = Eigen::Matrix<Scalar, N, 1>;

  explicit DormandPrince(OdeOptions<Scalar> options = {}) : opt_(options) {}

  /// Result of integrate_until: where it stopped and whether the event fired.
  struct Stop {
    Scalar t;
    State y;
    bool event;
  };

  /// Integrates y' = f(y) from (t0, y0) to t1 (either direction). `h` carries the
  /// step size between calls; pass 0 to let the first step be guessed.
  template <class F>
  State integrate(const F& f, Scalar t0, State y0, Scalar t1, Scalar& h) const {
    return run(f, t0, std::move(y0), t1, h, [](const State&) { return Scalar(1); }).y;
  }

  /// As integrate, but stops at the first sign change of event(y) (located to
  /// roughly machine precision by bisection on the step length).
  template <class F, class E>
  Stop integrate_until(const F& f, Scalar t0, State y0, Scalar t1, Scalar& h,
                       const E& event) const {
    return run(f, t0, std::move(y0), t1, h, event);
  }

 private:
  template <class F>
  State step(const F& f, const State& y, const State& k1, Scalar h, State& err,
             State& k7) const {
    using S = Scalar;
    const State k2 = f(State(y + h * (S(1) / 5) * k1));
    const State k3 = f(State(y + h * (S(3) / 40 * k1 + S(9) / 40 * k2)));
    const State k4 = f(State(y + h * (S(44) / 45 * k1 - S(56) / 15 * k2 + S(32) / 9 * k3)));
    const State k5 = f(State(y + h * (S(19372) / 6561 * k1 - S(25360) / 2187 * k2 +
                                      S(64448) / 6561 * k3 - S(212) / 729 * k4)));
    const State k6 =
        f(State(y + h * (S(9017) / 3168 * k1 - S(355) / 33 * k2 + S(46732) / 5247 * k3 +
                         S(49) / 176 * k4 - S(5103) / 18656 * k5)));
    const State out = y + h * (S(35) / 384 * k1 + S(500) / 1113 * k3 + S(125) / 192 * k4 -
                               S(2187) / 6784 * k5 + S(11) / 84 * k6);
    k7 = f(out);
    err = h * (S(71) / 57600 * k1 - S(71) / 16695 * k3 + S(71) / 1920 * k4 -
               S(17253) / 339200 * k5 + S(22) / 525 * k6 - S(1) / 40 * k7);
    return out;
  }

  Scalar error_norm(const State& err, const State& y0, const State& y1) const {
    const auto scale = (opt_.atol + opt_.rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array());
    return std::sqrt((err.array() / scale).square().mean());
  }

  void check(const State& y) const {
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > opt_.blowup)
      throw Error(ErrorCode::Blowup, "ODE state left the admissible range");
  }

  template <class F, class E>
  Stop run(const F& f, Scalar t, State y, Scalar t1, Scalar& h, const E& event) const {
    const Scalar span = t1 - t;
    if (span == Scalar(0)) return {t, y, false};
    const Scalar dir = span > 0 ? Scalar(1) : Scalar(-1);
    h = std::abs(h);
    if (h == Scalar(0)) h = std::min(std::abs(span), Scalar(1e-3));
    check(y);
    State k1 = f(y);
    Scalar e0 = event(y);
    State err, k7;
    for (long n = 0; n < opt_.max_steps; ++n) {
      const Scalar remaining = std::abs(t1 - t);
      const bool last = h >= remaining;
      const Scalar hs = last ? remaining : h;
      const State y1 = step(f, y, k1, dir * hs, err, k7);
      const Scalar norm = error_norm(err, y, y1);
      if (!(norm <= Scalar(1))) {
        if (!std::isfinite(norm)) check(y1);
        h = hs * std::max(Scalar(0.2), Scalar(0.9) * std::pow(norm, Scalar(-0.2)));
        if (h < std::abs(t) * Scalar(1e-15) + Scalar(1e-300))
          throw Error(ErrorCode::NoConvergence, "ODE step size underflow");
        continue;
      }
      check(y1);
      const Scalar e1 = event(y1);
      if ((e0 < 0) != (e1 < 0)) return locate(f, t, y, k1, dir, hs, event, e0);
      t = last ? t1 : t + dir * hs;
      y = y1;
      k1 = k7;
      e0 = e1;
      const Scalar grow =
          norm == Scalar(0) ? Scalar(5)
                            : std::min(Scalar(5), Scalar(0.9) * std::pow(norm, Scalar(-0.2)));
      if (!last) h = hs * grow;
      if (last) return {t1, y, false};
    }
    throw Error(ErrorCode::NoConvergence, "ODE step budget exhausted");
  }

  template <class F, class E>
  Stop locate(const F& f, Scalar t, const State& y, const State& k1, Scalar dir, Scalar hs,
              const E& event, Scalar e0) const {
    Scalar lo = 0, hi = hs;
    State err, k7;
    State at_hi = step(f, y, k1, dir * hi, err, k7);
    for (int i = 0; i < 200 && hi - lo > std::abs(t + dir * hi) * Scalar(1e-16); ++i) {
      const Scalar mid = (lo + hi) / 2;
      if (mid == lo || mid == hi) break;
      const State ym = step(f, y, k1, dir * mid, err, k7);
      if ((event(ym) < 0) == (e0 < 0)) {
        lo = mid;
      } else {
        hi = mid;
        at_hi = ym;
      }
    }
    return {t + dir * hi, at_hi, true};
  }

  OdeOptions<Scalar> opt_;
};

}  // namespace bbm
