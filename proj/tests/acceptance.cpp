// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iterator>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "bbm/analytic.hpp"
#include "bbm/experiments.hpp"
#include "bbm/fkpp_wave.hpp"
#include "bbm/observables.hpp"
#include "bbm/quadrature.hpp"
#include "bbm/simulator.hpp"

using namespace bbm;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

struct Criterion {
  int number;
  const char* name;
  double budget_seconds;
  std::function<Verdict()> run;
};

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

double cell(const Table& t, std::size_t row, const std::string& column) {
  const auto it = std::find(t.columns.begin(), t.columns.end(), column);
  const auto& c = t.rows.at(row).at(static_cast<std::size_t>(it - t.columns.begin()));
  if (const auto* d = std::get_if<double>(&c)) return *d;
  return static_cast<double>(std::get<std::int64_t>(c));
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0) {
  char buffer[256];
  std::snprintf(buffer, sizeof buffer, pattern, a, b, c, d);
  return buffer;
}

Verdict bridge_oracle() {
  const auto report = run_bridge_check(default_config(ExperimentName::BridgeCheck), threads());
  const auto& t = report.table("bridge_check");
  double worst = 0;
  bool has_reference = false;
  bool pass = t.rows.size() == 10;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double z = cell(t, r, "z_score");
    worst = std::max(worst, std::abs(z));
    pass = pass && std::abs(z) <= 3.0 && cell(t, r, "trials") >= 1e5;
    has_reference = has_reference ||
                    (cell(t, r, "x0") == 1 && cell(t, r, "x1") == 1 && cell(t, r, "rho") == 0 &&
                     cell(t, r, "t1") - cell(t, r, "t0") == 1);
  }
  return {pass && has_reference,
          fmt("%.0f sets, max |z| = %.2f, reference set present = %.0f", double(t.rows.size()),
              worst, has_reference)};
}

Verdict first_passage() {
  constexpr std::array<std::array<double, 2>, 9> pairs = {
      {{0.5, 0.0}, {1.0, 0.0}, {2.0, 0.0}, {0.5, 0.5}, {1.0, 0.5}, {3.0, 0.5}, {1.0, 1.0},
       {2.0, 1.0}, {1.0, -0.5}}};
  double worst = 0;
  for (const auto& [x, rho] : pairs) {
    const auto f = [x, rho](double r) { return analytic::first_passage_density(x, rho, r); };
    const double q = quadrature<double>(f, 0.0, kInfinity, 1e-11).value;
    worst = std::max(worst, std::abs(q - std::exp(-2.0 * (kSqrt2 - rho) * x)));
  }
  auto cfg = default_config(ExperimentName::Survival);
  cfg.sim.initial_position = 1.0;
  cfg.sim.barrier = BarrierSpec::full(0.0);
  cfg.replicas = 10;
  cfg.trials = 100'000;
  cfg.lineage_horizon = 50.0;
  const auto report = run_survival(cfg, threads());
  const auto& t = report.table("survival");
  const double hit = cell(t, 1, "frequency");
  const bool pass = worst <= 1e-8 && std::abs(hit - 0.0591) <= 0.0025;
  return {pass, fmt("max quadrature error %.2e; lineage hit %.5f (target 0.0591 +- 0.0025)",
                    worst, hit)};
}

Verdict martingale() {
  const auto cfg = default_config(ExperimentName::Martingale);
  const auto report = run_martingale(cfg, threads());
  const auto& t = report.table("martingale");
  const double z0 = -std::exp(kSqrt2);
  bool pass = cfg.replicas >= 10'000 && t.rows.size() == 3 &&
              cfg.sim.barrier.mode == BarrierMode::None && cfg.sim.initial_position == 1.0;
  std::string detail;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double mean = cell(t, r, "mean");
    const double se = cell(t, r, "se");
    pass = pass && std::abs(mean - z0) <= 3.0 * se;
    detail += fmt("t=%.0f: %.4f (%.2f se) ", cell(t, r, "t"), mean, (mean - z0) / se);
  }
  return {pass, detail + fmt("vs %.4f", z0)};
}

Verdict phase() {
  auto cfg = default_config(ExperimentName::Phase);
  cfg.sim.initial_position = 1.0;
  cfg.sim.horizon = 30.0;
  cfg.replicas = 1000;
  cfg.slopes = {1.6, 0.5};
  const auto report = run_phase(cfg, threads());
  const auto& t = report.table("phase");
  const double sub_extinct = cell(t, 0, "extinction_frequency");
  const double survival = 1.0 - cell(t, 1, "extinction_frequency");
  const double oracle = 1.0 - solve_oneside_wave<double>(0.5).at(1.0);
  const double sigma = std::sqrt(survival * (1.0 - survival) / 1000.0);
  const bool pass = sub_extinct >= 0.99 && std::abs(survival - oracle) <= 3.0 * sigma + 0.02;
  return {pass, fmt("rho=1.6 extinct %.3f; rho=0.5 survival %.3f vs 1-g(1) = %.4f", sub_extinct,
                    survival, oracle) +
                    fmt(" (allowance %.4f)", 3.0 * sigma + 0.02)};
}

Verdict wave() {
  double residual = 0, tail = 0, refinement = 0;
  bool anchored = true;
  for (const double rho : {0.0, 0.5, 1.0}) {
    const auto g = solve_oneside_wave<double>(rho);
    const auto fine = solve_oneside_wave<double>(rho, std::nullopt, 1e-6, 0.005);
    residual = std::max(residual, g.residual_norm);
    tail = std::max(tail, g.values[g.values.size() - 1]);
    anchored = anchored && g.values[0] == 1.0 && g.grid[0] == 0.0;
    for (Eigen::Index i = 0; i < g.grid.size(); ++i)
      refinement = std::max(refinement, std::abs(g.values[i] - fine.values[2 * i]));
  }
  const bool pass = residual <= 1e-8 && anchored && tail <= 1e-6 && refinement <= 1e-6;
  return {pass, fmt("residual %.2e, g(x_max) %.2e, refinement %.2e", residual, tail, refinement)};
}

Verdict ergodic() {
  const auto cfg = default_config(ExperimentName::Ergodic);
  const auto report = run_ergodic(cfg, threads());
  const auto& res = report.summary["results"];
  const double survivors = res["survivors"].get<double>();
  const double slope = res["fit"]["slope"].get<double>();
  const double self_test = res["estimator_self_test"]["slope"].get<double>();
  const bool setup = cfg.sim.initial_position == 1.0 && cfg.sim.barrier.slope == 0.0 &&
                     cfg.sim.horizon == 14.0 && cfg.sim.obs_grid_step == 0.02 &&
                     cfg.burn_in_fraction == 0.2;
  const bool pass = setup && survivors >= 32 && std::abs(slope + kSqrt2) <= 0.25 * kSqrt2 &&
                    std::abs(self_test + kSqrt2) <= 1e-6;
  return {pass, fmt("%.0f survivors, slope %.4f (window %.4f), self-test error %.1e", survivors,
                    slope, 0.25 * kSqrt2, std::abs(self_test + kSqrt2)) +
                    fmt(", slope CI [%.3f, %.3f]", res["fit"]["slope_ci"][0].get<double>(),
                        res["fit"]["slope_ci"][1].get<double>()),
          };
}

template <class T>
bool subset(const std::vector<T>& inner, const std::vector<T>& outer) {
  return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

Verdict identities() {
  long checks = 0, failures = 0;
  auto same = [](std::optional<double> a, std::optional<double> b) { return a == b; };
  auto larger = [](std::optional<double> a, std::optional<double> b) -> std::optional<double> {
    if (!a) return b;
    if (!b) return a;
    return std::max(*a, *b);
  };
  for (const double slope : {0.0, 0.5, 1.0}) {
    for (const double cut : {0.0, 1.0, 2.5}) {
      SimConfig cfg;
      cfg.horizon = 6.0;
      cfg.obs_grid_step = 0.25;
      cfg.barrier = BarrierSpec::truncated_at(slope, cut);
      for (std::uint64_t i = 0; i < 12; ++i) {
        cfg.seed = replica_seed(2024, i);
        run_replica(cfg, [&](const Population& pop) {
          if (pop.time <= 0.0) return;
          const auto all = ids_of(view(pop, Selector::all()));
          const auto surv = ids_of(view(pop, Selector::surviving()));
          std::vector<double> starts;
          for (int k = 0; k * 0.25 <= pop.time + 1e-12; ++k) starts.push_back(k * 0.25);
          for (std::size_t a = 0; a < starts.size(); ++a) {
            const double s = std::min(starts[a], pop.time);
            const auto trunc = ids_of(view(pop, Selector::truncated_at(s)));
            std::vector<ParticleId> diff;
            std::set_difference(trunc.begin(), trunc.end(), surv.begin(), surv.end(),
                                std::back_inserter(diff));
            const auto e = extremes(pop, s);
            bool ok = subset(surv, trunc) && subset(trunc, all) &&
                      diff == ids_of(window_set(pop, s, pop.time)) &&
                      same(e.max_truncated, larger(e.max_surviving, e.max_window));
            for (std::size_t b = a + 1; b < starts.size(); ++b) {
              const double s2 = std::min(starts[b], pop.time);
              const auto later = ids_of(view(pop, Selector::truncated_at(s2)));
              ok = ok && subset(surv, later) && subset(later, trunc);
            }
            ++checks;
            failures += !ok;
          }
        });
      }
    }
  }
  return {failures == 0 && checks > 0,
          fmt("%.0f checkpoint/start pairs, %.0f violations", double(checks), double(failures))};
}

Verdict window_tail() {
  const auto cfg = default_config(ExperimentName::WindowTail);
  const auto report = run_window_tail(cfg, threads());
  const auto& t = report.table("window_tail");
  std::vector<double> occupancy;
  for (const double s : {2.0, 4.0, 6.0})
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      if (cell(t, r, "s") == s) occupancy.push_back(cell(t, r, "occupancy_time"));
  const bool setup = cfg.sim.horizon == 12.0 && cfg.sim.barrier.slope == 0.5 && cfg.replicas == 64;
  const bool pass = setup && occupancy.size() == 3 && occupancy[0] >= occupancy[1] &&
                    occupancy[1] >= occupancy[2];
  return {pass, occupancy.size() == 3 ? fmt("occupancy at s=2,4,6: %.3f, %.3f, %.3f",
                                            occupancy[0], occupancy[1], occupancy[2])
                                      : std::string("sweep rows missing")};
}

std::string bodies(const Report& r) {
  std::string out;
  for (const auto& t : r.tables) out += t.name + "\n" + to_csv(t);
  return out;
}

Verdict determinism() {
  std::vector<ExperimentConfig> configs;
  for (auto name : {ExperimentName::Ergodic, ExperimentName::WindowTail, ExperimentName::Survival,
                    ExperimentName::Phase, ExperimentName::Martingale,
                    ExperimentName::BridgeCheck, ExperimentName::Wave}) {
    auto c = default_config(name);
    c.sim.seed = 97;
    switch (name) {
      case ExperimentName::Ergodic:
        c.sim.horizon = 6.0;
        c.replicas = 12;
        c.bootstrap = 50;
        break;
      case ExperimentName::WindowTail:
        c.sim.horizon = 6.0;
        c.replicas = 12;
        c.sweep = {1.0, 2.0, 3.0};
        break;
      case ExperimentName::Survival:
        c.replicas = 100;
        c.trials = 2000;
        break;
      case ExperimentName::Phase:
        c.replicas = 100;
        break;
      case ExperimentName::Martingale:
        c.replicas = 1000;
        break;
      case ExperimentName::BridgeCheck:
        c.trials = 2000;
        break;
      case ExperimentName::Wave:
        break;
    }
    configs.push_back(c);
  }
  int identical = 0;
  for (const auto& c : configs) {
    const auto a = bodies(run_experiment(c, 1));
    const auto b = bodies(run_experiment(c, 1));
    const auto d = bodies(run_experiment(c, 3));
    identical += a == b && a == d && !a.empty();
  }
  return {identical == static_cast<int>(configs.size()),
          fmt("%.0f of %.0f experiments byte-identical across reruns and 1 vs 3 threads",
              identical, double(configs.size()))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "bridge-crossing oracle", 120, bridge_oracle},
      {2, "first-passage integral and lineage hit", 180, first_passage},
      {3, "martingale conservation", 300, martingale},
      {4, "phase criterion", 600, phase},
      {5, "wave solver", 10, wave},
      {6, "ergodic slope", 1800, ergodic},
      {7, "structural identities", 600, identities},
      {8, "window-tail trend", 600, window_tail},
      {9, "determinism", 1800, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v{false, ""};
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.budget_seconds;
    const bool pass = v.pass && in_time;
    failed += !pass;
    std::printf("%s [%d] %s: %s; %.1f s (limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.number,
                c.name, v.detail.c_str(), seconds, c.budget_seconds,
                in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failed;
}
