#pragma once

// Adaptive Gauss-Kronrod (7/15) quadrature with global error control, plus a
// truncation rule for [a, +inf).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "bbm/error.hpp"

namespace bbm {

template <typename Scalar>
struct QuadratureResult {
  Scalar value;
  Scalar error;
  /// Upper end actually integrated; equals b for finite b.
  Scalar cutoff;
  int evaluations;
};

namespace detail {

template <typename Scalar>
struct KronrodPanel {
  Scalar a;
  Scalar b;
  Scalar value;
  Scalar error;
  bool operator<(const KronrodPanel& other) const { return error < other.error; }
};

template <typename Scalar, class Func>
KronrodPanel<Scalar> gauss_kronrod_15(const Func& f, Scalar a, Scalar b) {
  // Nodes on [0, 1]; index 0 is the centre. Even indices are the Gauss nodes.
  static constexpr std::array<long double, 8> nodes = {
      0.0L,
      0.207784955007898467600689403773245L,
      0.405845151377397166906606412076961L,
      0.586087235467691130294144845693013L,
      0.741531185599394439863864773280788L,
      0.864864423359769072789712788640926L,
      0.949107912342758524526189684047851L,
      0.991455371120812639206854697526329L};
  static constexpr std::array<long double, 8> kronrod = {
      0.209482141084727828012999174891714L, 0.204432940075298892414161999234649L,
      0.190350578064785409913256402421014L, 0.169004726639267902826583426598550L,
      0.140653259715525918745189590510238L, 0.104790010322250183839876322541518L,
      0.063092092629978553290700663189204L, 0.022935322010529224963732008058970L};
  static constexpr std::array<long double, 4> gauss = {
      0.417959183673469387755102040816327L, 0.381830050505118944950369775488975L,
      0.279705391489276667901467771423780L, 0.129484966168869693270611432679082L};

  const Scalar centre = (a + b) / Scalar(2);
  const Scalar half = (b - a) / Scalar(2);
  const Scalar f0 = f(centre);
  Scalar k15 = Scalar(kronrod[0]) * f0;
  Scalar g7 = Scalar(gauss[0]) * f0;
  for (int i = 1; i < 8; ++i) {
    const Scalar dx = half * Scalar(nodes[i]);
    const Scalar pair = f(centre - dx) + f(centre + dx);
    k15 += Scalar(kronrod[i]) * pair;
    if (i % 2 == 0) g7 += Scalar(gauss[i / 2]) * pair;
  }
  return {a, b, k15 * half, std::abs((k15 - g7) * half)};
}

}  // namespace detail

/// Integrates f over [a, b] until the summed panel error estimate is below
/// tol. Panels with the largest error are bisected first. Throws NoConvergence
/// after max_panels bisections.
template <typename Scalar, class Func>
QuadratureResult<Scalar> integrate_finite(const Func& f, Scalar a, Scalar b, Scalar tol,
                                          int max_panels = 4000) {
  if (!(tol > Scalar(0)) || !(b >= a)) throw Error(ErrorCode::BadArgs, "bad quadrature arguments");
  if (a == b) return {Scalar(0), Scalar(0), b, 0};
  std::priority_queue<detail::KronrodPanel<Scalar>> panels;
  panels.push(detail::gauss_kronrod_15<Scalar>(f, a, b));
  Scalar value = panels.top().value;
  Scalar error = panels.top().error;
  int evaluations = 15;
  const Scalar min_width = (b - a) * Scalar(64) * std::numeric_limits<Scalar>::epsilon();
  while (error > tol) {
    if (static_cast<int>(panels.size()) >= max_panels)
      throw Error(ErrorCode::NoConvergence, "quadrature panel budget exhausted");
    const auto worst = panels.top();
    if (worst.b - worst.a < min_width)
      throw Error(ErrorCode::NoConvergence, "quadrature panel below resolution");
    panels.pop();
    const Scalar mid = (worst.a + worst.b) / Scalar(2);
    const auto left = detail::gauss_kronrod_15<Scalar>(f, worst.a, mid);
    const auto right = detail::gauss_kronrod_15<Scalar>(f, mid, worst.b);
    evaluations += 30;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
  }
  // Re-add from scratch to shed the drift of the running updates.
  value = Scalar(0);
  error = Scalar(0);
  std::vector<detail::KronrodPanel<Scalar>> all;
  while (!panels.empty()) {
    all.push_back(panels.top());
    panels.pop();
  }
  std::sort(all.begin(), all.end(), [](const auto& l, const auto& r) { return l.a < r.a; });
  for (const auto& p : all) {
    value += p.value;
    error += p.error;
  }
  return {value, error, b, evaluations};
}

/// Integrates f over [a, b]; b may be +infinity.
///
/// For an infinite upper limit the range is cut at the first point B (found by
/// doubling) where f has fallen below tol * 1e-3, is decreasing, and the
/// exponential envelope f(B) / k with k = -(log f)'(B) bounds the remaining
/// tail by tol / 10. The envelope is a bound for log-concave tails such as the
/// Gaussian-type first-passage densities; it is added to the error estimate.
template <typename Scalar, class Func>
QuadratureResult<Scalar> quadrature(const Func& f, Scalar a, Scalar b, Scalar tol,
                                    int max_panels = 4000) {
  if (!(tol > Scalar(0))) throw Error(ErrorCode::BadArgs, "tol must be > 0");
  if (!std::isinf(b)) return integrate_finite<Scalar>(f, a, b, tol, max_panels);
  if (b < Scalar(0)) throw Error(ErrorCode::BadArgs, "upper limit -inf not supported");

  const Scalar threshold = tol * Scalar(1e-3);
  Scalar width = Scalar(1);
  bool seen_mass = false;
  for (int doubling = 0; doubling < 200; ++doubling, width *= Scalar(2)) {
    const Scalar cut = a + width;
    const Scalar fb = f(cut);
    if (fb != Scalar(0)) seen_mass = true;
    if (!(std::abs(fb) < threshold)) continue;
    const Scalar h = std::max(Scalar(1e-3) * width, Scalar(1e-6));
    const Scalar fh = f(cut + h);
    if (fb == Scalar(0)) {
      // An all-zero prefix can precede a far-away bump.
      if (fh != Scalar(0) || !seen_mass) continue;
      auto body = integrate_finite<Scalar>(f, a, cut, tol, max_panels);
      return {body.value, body.error, cut, body.evaluations + 2};
    }
    if (!(fh > Scalar(0)) || !(fh < fb)) continue;
    const Scalar rate = std::log(fb / fh) / h;
    const Scalar tail = fb / rate;
    if (tail > tol / Scalar(10)) continue;
    auto body = integrate_finite<Scalar>(f, a, cut, tol - tail, max_panels);
    return {body.value, body.error + tail, cut, body.evaluations + 2};
  }
  throw Error(ErrorCode::NoConvergence, "integrand tail did not decay");
}

}  // namespace bbm
