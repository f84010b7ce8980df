#include "bbm/experiments.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include "bbm/error.hpp"
#include "bbm/fkpp_wave.hpp"
#include "bbm/observables.hpp"
#include "bbm/simulator.hpp"

#ifndef BBM_GIT_DESCRIBE
#define BBM_GIT_DESCRIBE "unknown"
#endif

namespace bbm {

using Json = nlohmann::ordered_json;

namespace {

constexpr double kFitLow = 0.05;
constexpr double kFitHigh = 0.95;
constexpr double kBgkShift = 0.5826;

Json base_summary(const ExperimentConfig& cfg) {
  Json out;
  out["experiment"] = to_string(cfg.name);
  out["seed"] = cfg.sim.seed;
  out["git_describe"] = git_describe();
  out["config"] = to_json(cfg);
  return out;
}

Json fit_json(const std::optional<GumbelFit>& fit) {
  if (!fit) return nullptr;
  return {{"slope", fit->slope},
          {"intercept", fit->intercept},
          {"slope_se", fit->slope_se},
          {"intercept_se", fit->intercept_se},
          {"points", fit->points}};
}

std::optional<GumbelFit> try_fit(const Eigen::ArrayXd& z, const Eigen::ArrayXd& cdf) {
  try {
    return fit_gumbel(z, cdf);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateFit) throw;
    return std::nullopt;
  }
}

double optional_cell(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

/// Largest position among lineages that never crossed, if any.
std::optional<double> surviving_max(const Population& pop) {
  std::optional<double> best;
  for (const auto& p : pop.alive)
    if (!p.hit_segment && (!best || p.position() > *best)) best = p.position();
  return best;
}

bool has_survivor(const Population& pop) {
  return std::any_of(pop.alive.begin(), pop.alive.end(),
                     [](const ParticleRecord& p) { return !p.hit_segment; });
}

bool on_grid(double t, double step) {
  const double k = std::round(t / step);
  return std::abs(t - k * step) <= kTimeSlack * std::max(1.0, std::abs(t));
}

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Eigen::ArrayXd as_array(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::ArrayXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::int64_t as_int(std::uint64_t v) { return static_cast<std::int64_t>(v); }

}  // namespace

GumbelFit fit_gumbel(const Eigen::ArrayXd& z, const Eigen::ArrayXd& cdf) {
  if (z.size() != cdf.size()) throw Error(ErrorCode::BadArgs, "z and cdf differ in length");
  std::vector<Eigen::Index> use;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (cdf[i] >= kFitLow && cdf[i] <= kFitHigh) use.push_back(i);
  const auto n = static_cast<Eigen::Index>(use.size());
  if (n < 3) throw Error(ErrorCode::DegenerateFit, "fewer than 3 points with F in [0.05, 0.95]");

  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd target(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    design(k, 0) = 1.0;
    design(k, 1) = z[use[k]];
    target[k] = std::log(-std::log(cdf[use[k]]));
  }
  const Eigen::Vector2d beta = design.colPivHouseholderQr().solve(target);
  const double rss = (design * beta - target).squaredNorm();
  const double sigma2 = rss / static_cast<double>(n - 2);
  const Eigen::Matrix2d cov = sigma2 * (design.transpose() * design).inverse();

  GumbelFit fit;
  fit.intercept = beta[0];
  fit.slope = beta[1];
  fit.intercept_se = std::sqrt(std::max(0.0, cov(0, 0)));
  fit.slope_se = std::sqrt(std::max(0.0, cov(1, 1)));
  fit.points = static_cast<int>(n);
  return fit;
}

std::pair<double, double> wilson_interval(std::uint64_t events, std::uint64_t trials) {
  if (trials == 0) return {0.0, 1.0};
  const double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(events) / n;
  const double denom = 1.0 + z * z / n;
  const double centre = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

bool fine_bridge_crosses(const SegmentDraw& seg, double rho, double step, Stream& rng) {
  if (!(seg.t1 > seg.t0)) throw Error(ErrorCode::DegenerateSegment, "segment needs t1 > t0");
  if (!(step > 0.0)) throw Error(ErrorCode::BadArgs, "step must be > 0");
  double h = seg.t1 - seg.t0;
  while (h > step) h /= 2.0;
  const double shift = kBgkShift * std::sqrt(h);
  auto below = [&](double t, double x) { return x <= rho * t + shift; };
  if (below(seg.t0, seg.x0) || below(seg.t1, seg.x1)) return true;

  struct Piece {
    double t0, x0, t1, x1;
  };
  std::vector<Piece> stack{{seg.t0, seg.x0, seg.t1, seg.x1}};
  while (!stack.empty()) {
    const Piece piece = stack.back();
    stack.pop_back();
    const double len = piece.t1 - piece.t0;
    if (len <= step * (1.0 + 1e-12)) continue;
    const double reach = 8.0 * std::sqrt(len);
    if (piece.x0 - rho * piece.t0 > reach && piece.x1 - rho * piece.t1 > reach) continue;
    const double tm = 0.5 * (piece.t0 + piece.t1);
    const double xm = 0.5 * (piece.x0 + piece.x1) + 0.5 * std::sqrt(len) * rng.normal();
    if (below(tm, xm)) return true;
    // Left half first.
    stack.push_back({tm, xm, piece.t1, piece.x1});
    stack.push_back({piece.t0, piece.x0, tm, xm});
  }
  return false;
}

std::string git_describe() {
  const std::string text = BBM_GIT_DESCRIBE;
  return text.empty() ? "unknown" : text;
}

// ---------------------------------------------------------------------------
// ergodic
// ---------------------------------------------------------------------------

namespace {

struct ErgodicObservation {
  double t;
  double dt;
  std::optional<double> centered_max;
  double z_tilde;
};

struct ErgodicReplica {
  std::vector<ErgodicObservation> observations;
  bool survived = false;
  bool extinct = false;
  bool capped = false;
  double z_tilde_final = 0.0;
  std::uint64_t alive = 0;
};

}  // namespace

Report run_ergodic(const ExperimentConfig& cfg, unsigned threads) {
  cfg.validate();
  const double horizon = cfg.sim.horizon;
  const double step = cfg.sim.obs_grid_step;
  const double start = cfg.burn_in_fraction * horizon;
  const double slack = kTimeSlack * std::max(1.0, horizon);

  auto replicas = farm<ErgodicReplica>(cfg.replicas, threads, [&](std::uint64_t i) {
    SimConfig sim = cfg.sim;
    sim.seed = replica_seed(cfg.sim.seed, i);
    ErgodicReplica r;
    const auto outcome = run_replica(sim, [&](const Population& pop) {
      const double t = pop.time;
      if (t <= 0.0 || t < start - slack || t >= horizon - slack) return;
      const auto top = surviving_max(pop);
      r.observations.push_back({t, std::min(step, horizon - t),
                                top ? std::optional<double>(*top - centering(t)) : std::nullopt,
                                derivative_sum(pop, Selector::surviving())});
    });
    r.capped = outcome.capped;
    r.extinct = outcome.extinct;
    r.alive = outcome.final_population.alive.size();
    r.survived = !r.capped && has_survivor(outcome.final_population);
    if (r.survived) r.z_tilde_final = derivative_sum(outcome.final_population, Selector::surviving());
    return r;
  });

  const Eigen::ArrayXd z = as_array(cfg.z_grid);
  ErgodicAccumulator conditioned(z, start, horizon);
  ErgodicAccumulator unconditioned(z, start, horizon);
  ErgodicAccumulator aligned(z, start, horizon);
  std::vector<ErgodicAccumulator> aligned_each;

  Report report;
  Table per_replica{"ergodic_replicas",
                    {"replica", "survived", "extinct", "capped", "alive_final", "z_tilde_final",
                     "slope", "intercept", "fit_points"},
                    {}};
  Table trace{"ergodic_trace", {"replica", "t", "observable", "value"}, {}};

  std::uint64_t survivors = 0, extinct = 0, capped = 0;
  for (std::size_t i = 0; i < replicas.size(); ++i) {
    const auto& r = replicas[i];
    survivors += r.survived;
    extinct += r.extinct;
    capped += r.capped;
    std::optional<GumbelFit> own;
    if (!r.capped) {
      ErgodicAccumulator raw(z, start, horizon);
      for (const auto& o : r.observations) raw.accumulate(o.t, o.centered_max, o.dt, o.z_tilde);
      unconditioned.merge(raw);
      if (r.survived) {
        conditioned.merge(raw);
        own = try_fit(z, raw.cdf());
      }
      if (r.survived && r.z_tilde_final > 0.0) {
        const double shift = std::log(r.z_tilde_final) / kSqrt2;
        ErgodicAccumulator moved(z, start, horizon);
        for (const auto& o : r.observations) {
          std::optional<double> m;
          if (o.centered_max) m = *o.centered_max - shift;
          moved.accumulate(o.t, m, o.dt, o.z_tilde);
        }
        aligned.merge(moved);
        aligned_each.push_back(std::move(moved));
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    per_replica.add({std::int64_t(i), std::int64_t(r.survived), std::int64_t(r.extinct),
                     std::int64_t(r.capped), as_int(r.alive),
                     r.survived ? r.z_tilde_final : nan, own ? own->slope : nan,
                     own ? own->intercept : nan, std::int64_t(own ? own->points : 0)});
    for (const auto& o : r.observations) {
      trace.add({std::int64_t(i), o.t, std::string("centered_max"),
                 optional_cell(o.centered_max)});
      trace.add({std::int64_t(i), o.t, std::string("z_tilde"), o.z_tilde});
    }
  }

  if (survivors == 0) throw Error(ErrorCode::AllExtinct, "no replica survived to the horizon");
  if (aligned_each.empty())
    throw Error(ErrorCode::AllExtinct, "no surviving replica with a positive Z tilde");

  const GumbelFit primary = fit_gumbel(z, aligned.cdf());
  std::vector<double> boot;
  auto rng = make_stream(cfg.sim.seed, 0, Lane::Experiment);
  const auto m = aligned_each.size();
  for (std::uint64_t b = 0; b < cfg.bootstrap; ++b) {
    Eigen::ArrayXd occupancy = Eigen::ArrayXd::Zero(z.size());
    double exposure = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const auto j = std::min<std::size_t>(m - 1, static_cast<std::size_t>(rng.uniform() * m));
      occupancy += aligned_each[j].occupancy();
      exposure += aligned_each[j].exposure();
    }
    if (const auto fit = try_fit(z, occupancy / exposure)) boot.push_back(fit->slope);
  }
  double ci_lo = primary.slope - 1.959963984540054 * primary.slope_se;
  double ci_hi = primary.slope + 1.959963984540054 * primary.slope_se;
  if (boot.size() >= 2) {
    ci_lo = percentile(boot, 0.025);
    ci_hi = percentile(boot, 0.975);
  }

  Table cdf{"ergodic_cdf", {"z", "cdf_aligned", "cdf_conditioned", "cdf_unconditioned"}, {}};
  const Eigen::ArrayXd fa = aligned.cdf(), fc = conditioned.cdf(), fu = unconditioned.cdf();
  for (Eigen::Index k = 0; k < z.size(); ++k) cdf.add({z[k], fa[k], fc[k], fu[k]});

  Eigen::ArrayXd synthetic(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k)
    synthetic[k] = analytic::gumbel_mixture_cdf<double>({1.0, 1.0}, z[k]);
  const auto self_test = try_fit(z, synthetic);

  Json results;
  results["replicas"] = cfg.replicas;
  results["survivors"] = survivors;
  results["extinct"] = extinct;
  results["capped"] = capped;
  results["aligned_replicas"] = aligned_each.size();
  results["window"] = {start, horizon};
  results["z_tilde_surrogate"] = "Z tilde at the horizon";
  results["fit"] = fit_json(primary);
  results["fit"]["slope_ci"] = {ci_lo, ci_hi};
  results["fit"]["bootstrap_resamples"] = boot.size();
  results["fit"]["intercept_meaning"] = "log C* (aligned frame)";
  results["fit_conditioned"] = fit_json(try_fit(z, fc));
  results["fit_unconditioned"] = fit_json(try_fit(z, fu));
  results["target_slope"] = -kSqrt2;
  results["estimator_self_test"] = fit_json(self_test);

  report.tables = {std::move(cdf), std::move(per_replica), std::move(trace)};
  report.summary = base_summary(cfg);
  report.summary["results"] = std::move(results);
  return report;
}

// ---------------------------------------------------------------------------
// window-tail
// ---------------------------------------------------------------------------

namespace {

struct WindowReplica {
  std::vector<double> occupancy;
  double exposure = 0.0;
  bool capped = false;
};

}  // namespace

Report run_window_tail(const ExperimentConfig& cfg, unsigned threads) {
  cfg.validate();
  std::set<double> unique(cfg.sweep.begin(), cfg.sweep.end());
  if (cfg.truncation_time) unique.insert(*cfg.truncation_time);
  const std::vector<double> starts(unique.begin(), unique.end());
  if (starts.empty()) throw Error(ErrorCode::InvalidConfig, "window-tail needs a sweep");

  SimConfig sim_base = cfg.sim;
  sim_base.barrier = BarrierSpec::truncated_at(cfg.sim.barrier.slope, starts.front());
  const double horizon = sim_base.horizon;
  const double step = sim_base.obs_grid_step;
  const double start = cfg.burn_in_fraction * horizon;
  const double slack = kTimeSlack * std::max(1.0, horizon);

  auto replicas = farm<WindowReplica>(cfg.replicas, threads, [&](std::uint64_t i) {
    SimConfig sim = sim_base;
    sim.seed = replica_seed(cfg.sim.seed, i);
    WindowReplica r;
    r.occupancy.assign(starts.size(), 0.0);
    const auto outcome = run_replica(sim, [&](const Population& pop) {
      const double t = pop.time;
      if (t <= 0.0 || t < start - slack || t >= horizon - slack) return;
      const double dt = std::min(step, horizon - t);
      r.exposure += dt;
      for (std::size_t k = 0; k < starts.size(); ++k) {
        if (starts[k] > t + slack) continue;
        const auto record = extremes(pop, std::min(starts[k], t));
        if (record.max_window && *record.max_window > cfg.level) r.occupancy[k] += dt;
      }
    });
    r.capped = outcome.capped;
    return r;
  });

  std::vector<double> occupancy(starts.size(), 0.0);
  double exposure = 0.0;
  std::uint64_t capped = 0;
  Table per_replica{"window_tail_replicas", {"replica", "s", "occupancy_time", "exposure"}, {}};
  for (std::size_t i = 0; i < replicas.size(); ++i) {
    const auto& r = replicas[i];
    if (r.capped) {
      ++capped;
      continue;
    }
    exposure += r.exposure;
    for (std::size_t k = 0; k < starts.size(); ++k) {
      occupancy[k] += r.occupancy[k];
      per_replica.add({std::int64_t(i), starts[k], r.occupancy[k], r.exposure});
    }
  }

  Table pooled{"window_tail", {"s", "occupancy_time", "exposure", "fraction"}, {}};
  Json rows = Json::array();
  bool monotone = true;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const double fraction = exposure > 0.0 ? occupancy[k] / exposure : 0.0;
    pooled.add({starts[k], occupancy[k], exposure, fraction});
    rows.push_back({{"s", starts[k]}, {"fraction", fraction}});
    if (k > 0 && occupancy[k] > occupancy[k - 1]) monotone = false;
  }

  Report report;
  report.tables = {std::move(pooled), std::move(per_replica)};
  report.summary = base_summary(cfg);
  report.summary["results"] = {{"replicas", cfg.replicas},
                               {"capped", capped},
                               {"level", cfg.level},
                               {"window", {start, horizon}},
                               {"absorbing_until", starts.front()},
                               {"occupancy", rows},
                               {"nonincreasing", monotone},
                               {"truncation_exponent_note",
                                "default truncation time is T^0.4 snapped to the grid"}};
  return report;
}

// ---------------------------------------------------------------------------
// survival and phase
// ---------------------------------------------------------------------------

namespace {

struct SurvivalReplica {
  bool extinct = false;
  bool censored = false;
  bool capped = false;
  double extinction_time = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t alive = 0;
};

std::vector<SurvivalReplica> survival_farm(const SimConfig& base, std::uint64_t count,
                                           unsigned threads) {
  return farm<SurvivalReplica>(count, threads, [&](std::uint64_t i) {
    SimConfig sim = base;
    sim.seed = replica_seed(base.seed, i);
    const auto outcome = run_replica(sim);
    SurvivalReplica r;
    r.extinct = outcome.extinct;
    r.censored = outcome.censored;
    r.capped = outcome.capped;
    if (outcome.extinction_time) r.extinction_time = *outcome.extinction_time;
    r.alive = outcome.final_population.alive.size();
    return r;
  });
}

/// g(x) from the wave solver, 1 outside the supercritical phase.
double extinction_oracle(double slope, double x, const ExperimentConfig& cfg) {
  if (classify_phase(slope) != Phase::Supercritical) return 1.0;
  const double reach = std::max(40.0 / (kSqrt2 - slope), x);
  const auto wave = solve_oneside_wave<double>(slope, reach, cfg.wave_tol, cfg.wave_step,
                                               cfg.sim.offspring);
  return wave.at(x);
}

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::Supercritical: return "supercritical";
    case Phase::Critical: return "critical";
    case Phase::Subcritical: return "subcritical";
  }
  return "supercritical";
}

}  // namespace

Report run_survival(const ExperimentConfig& cfg, unsigned threads) {
  cfg.validate();
  SimConfig base = cfg.sim;
  base.barrier = BarrierSpec::full(cfg.sim.barrier.slope);
  const auto replicas = survival_farm(base, cfg.replicas, threads);

  Table per_replica{"survival_replicas",
                    {"replica", "extinct", "extinction_time", "censored", "capped", "alive_final"},
                    {}};
  std::uint64_t extinct = 0, censored = 0, capped = 0;
  for (std::size_t i = 0; i < replicas.size(); ++i) {
    const auto& r = replicas[i];
    extinct += r.extinct;
    censored += r.censored;
    capped += r.capped;
    per_replica.add({std::int64_t(i), std::int64_t(r.extinct), r.extinction_time,
                     std::int64_t(r.censored), std::int64_t(r.capped), as_int(r.alive)});
  }
  const double n = static_cast<double>(cfg.replicas);
  const std::uint64_t survived = cfg.replicas - extinct;
  const double p = static_cast<double>(survived) / n;
  const double se = std::sqrt(p * (1.0 - p) / n);
  const auto [lo, hi] = wilson_interval(survived, cfg.replicas);
  const double slope = base.barrier.slope;
  const double x = base.initial_position;
  const double oracle = 1.0 - extinction_oracle(slope, x, cfg);

  // Single lineage with drift sqrt(2): the absorption event is the first
  // passage below the line.
  SimConfig lineage = base;
  lineage.branching = false;
  lineage.drift = kSqrt2;
  lineage.horizon = cfg.lineage_horizon;
  lineage.obs_grid_step = cfg.lineage_step;
  lineage.survival_cutoff = 0;
  const std::uint64_t family = splitmix64(cfg.sim.seed + 1);
  const auto hits = farm<char>(cfg.trials, threads, [&](std::uint64_t i) {
    SimConfig sim = lineage;
    sim.seed = replica_seed(family, i);
    return char(run_replica(sim).extinct ? 1 : 0);
  });
  const auto hit_count = static_cast<std::uint64_t>(std::count(hits.begin(), hits.end(), 1));
  const double trials = static_cast<double>(cfg.trials);
  const double q = static_cast<double>(hit_count) / trials;
  const double q_se = std::sqrt(q * (1.0 - q) / trials);
  const auto [q_lo, q_hi] = wilson_interval(hit_count, cfg.trials);
  const double relative = kSqrt2 - slope;
  const double mass = analytic::first_passage_mass(x, slope);
  const double finite = analytic::line_hit_probability(x, relative, cfg.lineage_horizon);

  Table table{"survival",
              {"quantity", "slope", "x", "trials", "events", "frequency", "se", "ci_low",
               "ci_high", "oracle"},
              {}};
  table.add({std::string("branching_survival"), slope, x, as_int(cfg.replicas), as_int(survived),
             p, se, lo, hi, oracle});
  table.add({std::string("lineage_hit"), slope, x, as_int(cfg.trials), as_int(hit_count), q, q_se,
             q_lo, q_hi, finite});

  Report report;
  report.tables = {std::move(table), std::move(per_replica)};
  report.summary = base_summary(cfg);
  report.summary["results"] = {
      {"survival",
       {{"frequency", p},
        {"se", se},
        {"ci", {lo, hi}},
        {"oracle_one_minus_g", oracle},
        {"deviation", p - oracle},
        {"within_3se_plus_censoring", std::abs(p - oracle) <= 3.0 * se + 0.02},
        {"extinct", extinct},
        {"censored", censored},
        {"capped", capped},
        {"censoring_rule", "alive count reached survival_cutoff counts as survival"}}},
      {"lineage_hit",
       {{"frequency", q},
        {"se", q_se},
        {"ci", {q_lo, q_hi}},
        {"closed_form_infinite_horizon", mass},
        {"closed_form_finite_horizon", finite},
        {"within_3se", std::abs(q - finite) <= 3.0 * q_se}}},
  };
  return report;
}

Report run_phase(const ExperimentConfig& cfg, unsigned threads) {
  cfg.validate();
  std::vector<double> slopes = cfg.slopes;
  if (slopes.empty()) slopes = {cfg.sim.barrier.slope};
  Table table{"phase",
              {"slope", "phase", "replicas", "extinct", "extinction_frequency", "ci_low",
               "ci_high", "censored", "capped", "oracle_extinction"},
              {}};
  Json rows = Json::array();
  for (const double slope : slopes) {
    SimConfig base = cfg.sim;
    base.barrier = BarrierSpec::full(slope);
    const auto replicas = survival_farm(base, cfg.replicas, threads);
    std::uint64_t extinct = 0, censored = 0, capped = 0;
    for (const auto& r : replicas) {
      extinct += r.extinct;
      censored += r.censored;
      capped += r.capped;
    }
    const double f = static_cast<double>(extinct) / static_cast<double>(cfg.replicas);
    const auto [lo, hi] = wilson_interval(extinct, cfg.replicas);
    const double oracle = extinction_oracle(slope, base.initial_position, cfg);
    const auto phase = classify_phase(slope);
    table.add({slope, std::string(phase_name(phase)), as_int(cfg.replicas), as_int(extinct), f,
               lo, hi, as_int(censored), as_int(capped), oracle});
    rows.push_back({{"slope", slope},
                    {"phase", phase_name(phase)},
                    {"extinction_frequency", f},
                    {"ci", {lo, hi}},
                    {"oracle_extinction", oracle},
                    {"censored", censored},
                    {"capped", capped}});
  }
  Report report;
  report.tables = {std::move(table)};
  report.summary = base_summary(cfg);
  report.summary["results"] = {{"slopes", rows}};
  return report;
}

// ---------------------------------------------------------------------------
// martingale
// ---------------------------------------------------------------------------

namespace {

struct MartingaleReplica {
  std::vector<double> z;
  std::vector<double> count;
};

double median_of_means(const std::vector<double>& values, std::size_t groups) {
  groups = std::clamp<std::size_t>(groups, 1, values.size());
  std::vector<double> means;
  const std::size_t n = values.size();
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t a = g * n / groups, b = (g + 1) * n / groups;
    means.push_back(std::accumulate(values.begin() + a, values.begin() + b, 0.0) /
                    static_cast<double>(b - a));
  }
  std::sort(means.begin(), means.end());
  const std::size_t mid = means.size() / 2;
  return means.size() % 2 ? means[mid] : 0.5 * (means[mid - 1] + means[mid]);
}

}  // namespace

Report run_martingale(const ExperimentConfig& cfg, unsigned threads) {
  cfg.validate();
  std::vector<double> times = cfg.times;
  std::sort(times.begin(), times.end());
  if (times.empty()) throw Error(ErrorCode::InvalidConfig, "martingale needs observation times");
  SimConfig base = cfg.sim;
  base.barrier = BarrierSpec::none(cfg.sim.barrier.slope);
  base.horizon = times.back();
  for (const double t : times)
    if (!on_grid(t, base.obs_grid_step))
      throw Error(ErrorCode::InvalidConfig, "martingale times must be multiples of obs_grid_step");

  const auto replicas = farm<MartingaleReplica>(cfg.replicas, threads, [&](std::uint64_t i) {
    SimConfig sim = base;
    sim.seed = replica_seed(cfg.sim.seed, i);
    MartingaleReplica r;
    r.z.assign(times.size(), 0.0);
    r.count.assign(times.size(), 0.0);
    run_replica(sim, [&](const Population& pop) {
      for (std::size_t k = 0; k < times.size(); ++k) {
        if (std::abs(pop.time - times[k]) > kTimeSlack * std::max(1.0, times[k])) continue;
        r.z[k] = derivative_sum(pop, Selector::all());
        r.count[k] = static_cast<double>(pop.alive.size());
      }
    });
    return r;
  });

  const double x = base.initial_position;
  const double z0 = -x * std::exp(kSqrt2 * x);
  Table table{"martingale",
              {"t", "mean", "se", "median_of_means", "z0", "mean_count", "exp_t"},
              {}};
  Table per_replica{"martingale_replicas", {"replica", "t", "z", "count"}, {}};
  for (std::size_t i = 0; i < replicas.size(); ++i)
    for (std::size_t k = 0; k < times.size(); ++k)
      per_replica.add({std::int64_t(i), times[k], replicas[i].z[k],
                       std::int64_t(replicas[i].count[k])});

  Json rows = Json::array();
  const double n = static_cast<double>(replicas.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> values;
    CompensatedSum total, counts;
    for (const auto& r : replicas) {
      values.push_back(r.z[k]);
      total.add(r.z[k]);
      counts.add(r.count[k]);
    }
    const double mean = total.value() / n;
    CompensatedSum squares;
    for (const double v : values) squares.add((v - mean) * (v - mean));
    const double se = n > 1 ? std::sqrt(squares.value() / (n - 1) / n) : 0.0;
    const double mom = median_of_means(values, 10);
    table.add({times[k], mean, se, mom, z0, counts.value() / n, std::exp(times[k])});
    rows.push_back({{"t", times[k]},
                    {"mean", mean},
                    {"se", se},
                    {"median_of_means", mom},
                    {"z_score", se > 0 ? (mean - z0) / se : 0.0},
                    {"within_3se", std::abs(mean - z0) <= 3.0 * se},
                    {"mean_count", counts.value() / n}});
  }

  Report report;
  report.tables = {std::move(table), std::move(per_replica)};
  report.summary = base_summary(cfg);
  report.summary["results"] = {{"z0", z0}, {"times", rows}};
  return report;
}

// ---------------------------------------------------------------------------
// bridge-check
// ---------------------------------------------------------------------------

namespace {

struct BridgeSet {
  SegmentDraw seg;
  double rho;
};

const std::vector<BridgeSet>& bridge_sets() {
  static const std::vector<BridgeSet> sets = {
      {{0.0, 1.0, 1.0, 1.0}, 0.0},  {{0.0, 1.0, 2.0, 2.0}, 0.0},  {{0.0, 1.0, 0.5, 0.5}, 0.0},
      {{0.0, 2.0, 1.0, 1.5}, 0.0},  {{0.0, 1.0, 1.0, 0.3}, 0.0},  {{1.0, 2.0, 1.5, 2.5}, 0.5},
      {{0.0, 0.5, 0.4, 0.6}, 1.0},  {{0.0, 1.0, 1.0, 1.0}, -0.5}, {{0.0, 4.0, 2.0, 3.0}, 0.25},
      {{0.0, 0.25, 0.3, 0.3}, 0.0},
  };
  return sets;
}

constexpr std::uint64_t kBridgeChunk = 1000;

}  // namespace

Report run_bridge_check(const ExperimentConfig& cfg, unsigned threads) {
  cfg.validate();
  const auto& sets = bridge_sets();
  const std::uint64_t chunks = (cfg.trials + kBridgeChunk - 1) / kBridgeChunk;
  const auto counts =
      farm<std::uint64_t>(sets.size() * chunks, threads, [&](std::uint64_t job) {
        const auto& set = sets[job / chunks];
        const std::uint64_t set_seed = replica_seed(cfg.sim.seed, job / chunks);
        const std::uint64_t first = (job % chunks) * kBridgeChunk;
        const std::uint64_t last = std::min(cfg.trials, first + kBridgeChunk);
        std::uint64_t hits = 0;
        for (std::uint64_t trial = first; trial < last; ++trial) {
          auto rng = make_stream(set_seed, trial, Lane::Experiment);
          hits += fine_bridge_crosses(set.seg, set.rho, cfg.fine_step, rng);
        }
        return hits;
      });

  Table table{"bridge_check",
              {"set", "t0", "t1", "x0", "x1", "rho", "trials", "crossings", "frequency", "se",
               "analytic", "z_score"},
              {}};
  Json rows = Json::array();
  bool all_pass = true;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::uint64_t hits = 0;
    for (std::uint64_t c = 0; c < chunks; ++c) hits += counts[s * chunks + c];
    const auto& [seg, rho] = sets[s];
    const double n = static_cast<double>(cfg.trials);
    const double freq = static_cast<double>(hits) / n;
    const double exact = analytic::bridge_crossing_prob(seg, rho);
    const double se = std::sqrt(exact * (1.0 - exact) / n);
    const double score = se > 0 ? (freq - exact) / se : 0.0;
    all_pass = all_pass && std::abs(score) <= 3.0;
    table.add({std::int64_t(s), seg.t0, seg.t1, seg.x0, seg.x1, rho, as_int(cfg.trials),
               as_int(hits), freq, se, exact, score});
    rows.push_back({{"set", s},
                    {"frequency", freq},
                    {"analytic", exact},
                    {"se", se},
                    {"z_score", score},
                    {"within_3se", std::abs(score) <= 3.0}});
  }
  Report report;
  report.tables = {std::move(table)};
  report.summary = base_summary(cfg);
  report.summary["results"] = {{"fine_step", cfg.fine_step},
                               {"monitoring_shift", "0.5826 sqrt(h)"},
                               {"sets", rows},
                               {"all_within_3se", all_pass}};
  return report;
}

// ---------------------------------------------------------------------------
// wave
// ---------------------------------------------------------------------------

Report run_wave(const ExperimentConfig& cfg, unsigned /*threads*/) {
  cfg.validate();
  const double rho = cfg.sim.barrier.slope;
  const auto& law = cfg.sim.offspring;
  const auto g = solve_oneside_wave<double>(rho, std::nullopt, cfg.wave_tol, cfg.wave_step, law);
  const auto fine =
      solve_oneside_wave<double>(rho, std::nullopt, cfg.wave_tol, cfg.wave_step / 2.0, law);
  double refinement = 0.0;
  for (Eigen::Index i = 0; i < g.grid.size() && 2 * i < fine.grid.size(); ++i)
    refinement = std::max(refinement, std::abs(g.values[i] - fine.values[2 * i]));
  const auto w = solve_free_wave<double>(cfg.free_z_min, cfg.free_z_max, 1e-8, cfg.wave_step, law);

  Table gt{"wave_g", {"x", "g", "dg", "survival", "lineage_hit"}, {}};
  for (Eigen::Index i = 0; i < g.grid.size(); ++i)
    gt.add({g.grid[i], g.values[i], g.slopes[i], 1.0 - g.values[i],
            analytic::first_passage_mass(g.grid[i], rho)});
  Table wt{"wave_w", {"z", "w", "dw"}, {}};
  for (Eigen::Index i = 0; i < w.grid.size(); ++i) wt.add({w.grid[i], w.values[i], w.slopes[i]});

  // Right tail of the free wave: -log(1 - w) against z.
  std::optional<double> tail_slope;
  {
    const double b = std::min(14.0, cfg.free_z_max), a = b - 6.0;
    std::vector<double> zs, ys;
    for (Eigen::Index i = 0; i < w.grid.size(); ++i)
      if (w.grid[i] >= a && w.grid[i] <= b && w.values[i] < 1.0) {
        zs.push_back(w.grid[i]);
        ys.push_back(-std::log1p(-w.values[i]));
      }
    if (zs.size() >= 2) {
      Eigen::MatrixXd design(zs.size(), 2);
      design.col(0).setOnes();
      design.col(1) = Eigen::Map<Eigen::VectorXd>(zs.data(), zs.size());
      const Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), ys.size());
      tail_slope = design.colPivHouseholderQr().solve(y)[1];
    }
  }

  const double x = cfg.sim.initial_position;
  const Eigen::Index last = g.grid.size() - 1;
  Report report;
  report.tables = {std::move(gt), std::move(wt)};
  report.summary = base_summary(cfg);
  report.summary["results"] = {
      {"oneside",
       {{"rho", rho},
        {"x_max", g.grid[last]},
        {"g_at_zero", g.values[0]},
        {"g_at_x_max", g.values[last]},
        {"derivative_at_zero", g.derivative_at_zero},
        {"residual_norm", g.residual_norm},
        {"refinement_change", refinement},
        {"g_at_x", x <= g.grid[last] ? Json(g.at(x)) : Json(nullptr)},
        {"survival_at_x", x <= g.grid[last] ? Json(1.0 - g.at(x)) : Json(nullptr)}}},
      {"free",
       {{"z_range", {w.grid[0], w.grid[w.grid.size() - 1]}},
        {"derivative_at_zero", w.derivative_at_zero},
        {"residual_norm", w.residual_norm},
        {"right_tail_slope", tail_slope ? Json(*tail_slope) : Json(nullptr)}}},
  };
  return report;
}

Report run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  switch (cfg.name) {
    case ExperimentName::Ergodic: return run_ergodic(cfg, threads);
    case ExperimentName::Survival: return run_survival(cfg, threads);
    case ExperimentName::Phase: return run_phase(cfg, threads);
    case ExperimentName::Martingale: return run_martingale(cfg, threads);
    case ExperimentName::WindowTail: return run_window_tail(cfg, threads);
    case ExperimentName::BridgeCheck: return run_bridge_check(cfg, threads);
    case ExperimentName::Wave: return run_wave(cfg, threads);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown experiment");
}

}  // namespace bbm
