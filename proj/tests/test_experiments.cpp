#include <doctest.h>

#include <cmath>

#include "bbm/error.hpp"
#include "bbm/experiments.hpp"

using namespace bbm;

namespace {

std::string all_csv(const Report& r) {
  std::string out;
  for (const auto& t : r.tables) out += t.name + "\n" + to_csv(t);
  return out;
}

}  // namespace

TEST_CASE("gumbel fit recovers an exact double exponential") {
  Eigen::ArrayXd z = Eigen::ArrayXd::LinSpaced(601, -6.0, 6.0);
  Eigen::ArrayXd f(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    f[i] = analytic::gumbel_mixture_cdf<double>({3.0, 0.5}, z[i]);
  const auto fit = fit_gumbel(z, f);
  CHECK(fit.slope == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-10));
  CHECK(fit.intercept == doctest::Approx(std::log(1.5)).epsilon(1e-10));
  CHECK(fit.slope_se < 1e-10);
  CHECK(fit.points > 10);

  Eigen::ArrayXd flat = Eigen::ArrayXd::Constant(z.size(), 0.99);
  CHECK_THROWS_AS(fit_gumbel(z, flat), Error);
}

TEST_CASE("wilson interval") {
  auto [lo, hi] = wilson_interval(5, 10);
  CHECK(lo == doctest::Approx(0.23659309051256394).epsilon(1e-6));
  CHECK(hi == doctest::Approx(0.7634069094874361).epsilon(1e-6));
  std::tie(lo, hi) = wilson_interval(0, 20);
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(0.1611251580528194).epsilon(1e-6));
  std::tie(lo, hi) = wilson_interval(37, 1000);
  CHECK(lo == doctest::Approx(0.026961180875554734).epsilon(1e-6));
  CHECK(hi == doctest::Approx(0.05058239748206931).epsilon(1e-6));
}

TEST_CASE("farm keeps index order and rethrows the first failure") {
  const auto squares = farm<int>(100, 4, [](std::uint64_t i) { return int(i * i); });
  for (int i = 0; i < 100; ++i) CHECK(squares[i] == i * i);
  try {
    farm<int>(50, 3, [](std::uint64_t i) -> int {
      if (i == 7 || i == 30) throw Error(ErrorCode::BadArgs, std::to_string(i));
      return 0;
    });
    FAIL("expected a failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
  CHECK(farm<int>(0, 4, [](std::uint64_t) { return 1; }).empty());
}

TEST_CASE("fine bridge crossing frequency") {
  const SegmentDraw seg{0.0, 1.0, 1.0, 1.0};
  int hits = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto rng = make_stream(5, i, Lane::Experiment);
    hits += fine_bridge_crosses(seg, 0.0, 1e-3, rng);
  }
  const double p = std::exp(-2.0);
  CHECK(std::abs(hits / double(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n));
  auto rng = make_stream(5, 0, Lane::Experiment);
  CHECK(fine_bridge_crosses({0.0, 1.0, -1.0, 1.0}, 0.0, 1e-3, rng));
}

TEST_CASE("small runs of every experiment are thread-independent") {
  std::vector<ExperimentConfig> configs;
  {
    auto c = default_config(ExperimentName::Ergodic);
    c.sim.horizon = 4.0;
    c.sim.obs_grid_step = 0.1;
    c.replicas = 8;
    c.bootstrap = 20;
    configs.push_back(c);
  }
  {
    auto c = default_config(ExperimentName::WindowTail);
    c.sim.horizon = 4.0;
    c.sweep = {1.0, 2.0};
    c.truncation_time = 1.5;
    c.replicas = 6;
    configs.push_back(c);
  }
  {
    auto c = default_config(ExperimentName::Survival);
    c.replicas = 40;
    c.trials = 200;
    configs.push_back(c);
  }
  {
    auto c = default_config(ExperimentName::Phase);
    c.replicas = 30;
    configs.push_back(c);
  }
  {
    auto c = default_config(ExperimentName::Martingale);
    c.replicas = 200;
    configs.push_back(c);
  }
  {
    auto c = default_config(ExperimentName::BridgeCheck);
    c.trials = 1500;
    c.fine_step = 1e-2;
    configs.push_back(c);
  }
  configs.push_back(default_config(ExperimentName::Wave));

  for (const auto& cfg : configs) {
    CAPTURE(to_string(cfg.name));
    const auto one = run_experiment(cfg, 1);
    const auto three = run_experiment(cfg, 3);
    CHECK(all_csv(one) == all_csv(three));
    CHECK(one.summary["results"] == three.summary["results"]);
    CHECK(one.summary["seed"] == cfg.sim.seed);
    CHECK(one.summary["experiment"] == std::string(to_string(cfg.name)));
    CHECK(one.summary.contains("git_describe"));
    CHECK(config_from_json(one.summary["config"]) == cfg);
  }
}

TEST_CASE("martingale experiment rejects off-grid times") {
  auto c = default_config(ExperimentName::Martingale);
  c.times = {1.25};
  CHECK_THROWS_AS(run_martingale(c), Error);
}

TEST_CASE("ergodic with every replica extinct") {
  auto c = default_config(ExperimentName::Ergodic);
  c.sim.horizon = 2.0;
  c.sim.obs_grid_step = 0.1;
  c.sim.barrier = BarrierSpec::full(50.0);
  c.replicas = 3;
  try {
    run_ergodic(c);
    FAIL("expected AllExtinct");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllExtinct);
  }
}
