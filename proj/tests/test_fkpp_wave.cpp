#include <doctest.h>

#include <cmath>

#include "bbm/error.hpp"
#include "bbm/fkpp_wave.hpp"
#include "bbm/ode.hpp"

using namespace bbm;

TEST_CASE("dormand-prince on linear systems") {
  using Solver = DormandPrince<double, 2>;
  const Solver solver;
  // Harmonic oscillator.
  auto f = [](const Solver::State& y) { return Solver::State(y[1], -y[0]); };
  double h = 0;
  const auto y = solver.integrate(f, 0.0, Solver::State(1, 0), 10.0, h);
  CHECK(y[0] == doctest::Approx(std::cos(10.0)).epsilon(1e-10));
  CHECK(y[1] == doctest::Approx(-std::sin(10.0)).epsilon(1e-10));

  h = 0;
  const auto back = solver.integrate(f, 10.0, y, 0.0, h);
  CHECK(std::abs(back[0] - 1.0) < 1e-9);

  h = 0;
  const auto stop = solver.integrate_until(f, 0.0, Solver::State(1, 0), 10.0, h,
                                           [](const Solver::State& s) { return s[0]; });
  CHECK(stop.event);
  CHECK(stop.t == doctest::Approx(M_PI / 2).epsilon(1e-12));

  auto grow = [](const Solver::State& s) { return Solver::State(s[1], s[0]); };
  h = 0;
  CHECK_THROWS_AS(solver.integrate(grow, 0.0, Solver::State(1, 1), 100.0, h), Error);
}

TEST_CASE("one-sided wave without drift matches the sech^2 solution") {
  const auto g = solve_oneside_wave<double>(0.0);
  const double c = std::acosh(std::sqrt(1.5));
  auto exact = [&](double x) {
    const double s = 1.0 / std::cosh(x / std::sqrt(2.0) + c);
    return 1.5 * s * s;
  };
  CHECK(g.values[0] == 1.0);
  CHECK(g.grid[0] == 0.0);
  CHECK(g.at(1.0) == doctest::Approx(0.344510748570743560).epsilon(1e-10));
  CHECK(g.derivative_at_zero == doctest::Approx(-std::sqrt(2.0 / 3.0)).epsilon(1e-10));
  double worst = 0;
  for (Eigen::Index i = 0; i < g.grid.size(); i += 7)
    worst = std::max(worst, std::abs(g.values[i] - exact(g.grid[i])));
  CHECK(worst < 1e-9);
  CHECK(g.residual_norm < 1e-8);
  CHECK(g.values[g.values.size() - 1] <= 1e-6);
  CHECK(g.grid[g.grid.size() - 1] == doctest::Approx(40.0 / std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("one-sided wave with drift") {
  // Reference values from an independent collocation solve.
  const auto g = solve_oneside_wave<double>(0.5);
  CHECK(g.at(1.0) == doctest::Approx(0.6255065937207).epsilon(1e-10));
  CHECK(g.derivative_at_zero == doctest::Approx(-0.2901258234199).epsilon(1e-9));
  const auto g1 = solve_oneside_wave<double>(1.0);
  CHECK(g1.at(1.0) == doctest::Approx(0.9269043718368).epsilon(1e-10));

  const auto fine = solve_oneside_wave<double>(0.5, std::nullopt, 1e-6, 0.005);
  double change = 0;
  for (Eigen::Index i = 0; i < g.grid.size(); ++i)
    change = std::max(change, std::abs(g.values[i] - fine.values[2 * i]));
  CHECK(change <= 1e-6);

  for (Eigen::Index i = 1; i < g.values.size(); ++i) CHECK(g.values[i] <= g.values[i - 1]);
}

TEST_CASE("one-sided wave argument checks") {
  CHECK_THROWS_AS(solve_oneside_wave<double>(std::sqrt(2.0)), Error);
  CHECK_THROWS_AS(solve_oneside_wave<double>(2.0), Error);
  CHECK_THROWS_AS(solve_oneside_wave<double>(0.5, 3.0), Error);
  CHECK_THROWS_AS(solve_oneside_wave<double>(0.5, std::nullopt, 1e-6, -1.0), Error);
  const auto g = solve_oneside_wave<double>(0.0, 20.0);
  CHECK_THROWS_AS(g.at(-0.5), Error);
  CHECK_THROWS_AS(g.at(25.0), Error);
}

TEST_CASE("one-sided wave with a general offspring law") {
  const auto law = validate_offspring({{1, 0.5}, {3, 0.5}});
  const auto g = solve_oneside_wave<double>(0.0, std::nullopt, 1e-6, 0.01, law);
  CHECK(g.values[0] == 1.0);
  CHECK(g.residual_norm < 1e-8);
  // g'(0)^2 = 4 * integral_0^1 (u - G(u)) du with u - G(u) = (u - u^3) / 2.
  const double first_integral = 4.0 * (0.5 / 2.0 - 0.5 / 4.0);
  CHECK(g.derivative_at_zero == doctest::Approx(-std::sqrt(first_integral)).epsilon(1e-9));
}

TEST_CASE("free critical wave") {
  const auto w = solve_free_wave<double>(-20.0, 20.0);
  const Eigen::Index zero = 2000;
  CHECK(w.grid[zero] == 0.0);
  CHECK(w.values[zero] == 0.5);
  CHECK(w.residual_norm <= 1e-8);
  CHECK(w.derivative_at_zero > 0.0);
  CHECK(w.values[0] < 1e-4);
  const double mu = -std::sqrt(2.0) + 2.0;
  CHECK(w.slopes[0] / w.values[0] == doctest::Approx(mu).epsilon(1e-4));
  CHECK(w.values[w.values.size() - 1] > 1.0 - 1e-6);
  for (Eigen::Index i = 1; i < w.values.size(); ++i) CHECK(w.values[i] >= w.values[i - 1]);
  CHECK_THROWS_AS(solve_free_wave<double>(1.0, -1.0), Error);
}
