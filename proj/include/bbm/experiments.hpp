#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "bbm/analytic.hpp"
#include "bbm/config.hpp"
#include "bbm/report.hpp"
#include "bbm/rng.hpp"

namespace bbm {

/// Least-squares line log(-log F) = intercept + slope * z through the points
/// with F in [0.05, 0.95].
struct GumbelFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  int points = 0;
};

/// Throws DegenerateFit with fewer than 3 usable points.
GumbelFit fit_gumbel(const Eigen::ArrayXd& z, const Eigen::ArrayXd& cdf);

/// Runs job(i) for i in [0, count) on up to `threads` workers and returns the
/// results in index order. The first failure (by index) is rethrown.
template <class Result, class Job>
std::vector<Result> farm(std::uint64_t count, unsigned threads, const Job& job) {
  std::vector<Result> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        results[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = static_cast<unsigned>(
      std::clamp<std::uint64_t>(threads == 0 ? 1 : threads, 1, std::max<std::uint64_t>(count, 1)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

/// Wilson score interval at 95%.
std::pair<double, double> wilson_interval(std::uint64_t events, std::uint64_t trials);

/// Crossing test of a Brownian bridge from (t0, x0) to (t1, x1) against the
/// line y = rho t, monitored on a dyadic grid no coarser than `step` built by
/// midpoint refinement. Subintervals whose endpoints both sit more than
/// 8 sqrt(length) above the line are not refined. Monitoring uses the line
/// shifted up by 0.5826 sqrt(h) to offset discrete-monitoring bias.
bool fine_bridge_crosses(const SegmentDraw& seg, double rho, double step, Stream& rng);

std::string git_describe();

Report run_ergodic(const ExperimentConfig& cfg, unsigned threads = 1);
Report run_window_tail(const ExperimentConfig& cfg, unsigned threads = 1);
Report run_survival(const ExperimentConfig& cfg, unsigned threads = 1);
Report run_phase(const ExperimentConfig& cfg, unsigned threads = 1);
Report run_martingale(const ExperimentConfig& cfg, unsigned threads = 1);
Report run_bridge_check(const ExperimentConfig& cfg, unsigned threads = 1);
Report run_wave(const ExperimentConfig& cfg, unsigned threads = 1);

/// Dispatches on cfg.name after validating cfg.
Report run_experiment(const ExperimentConfig& cfg, unsigned threads = 1);

}  // namespace bbm
