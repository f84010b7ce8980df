#pragma once

#include <functional>
#include <optional>

#include "bbm/analytic.hpp"
#include "bbm/process.hpp"
#include "bbm/rng.hpp"

namespace bbm {

/// One Bernoulli draw with the bridge crossing probability of the line
/// y = slope * t. Endpoints on or below the line cross without consuming
/// randomness. Throws DegenerateSegment when t1 <= t0.
bool crossing_decision(const SegmentDraw& seg, double slope, Stream& rng);

/// Realises every branch event up to `to` and extends all paths to `to`.
///
/// Knots are placed at branch events, at every multiple of cfg.obs_grid_step,
/// at the truncation time of a TruncatedAt barrier, and at `to`. Branch clocks
/// and offspring counts are keyed to particle ids, which are handed out in
/// birth-time order, so they do not depend on the knot grid.
///
/// Throws ParticleCapExceeded when more than cfg.particle_cap particles would
/// have been created; the population is left at the time of the failure.
void advance(Population& pop, double to, const SimConfig& cfg);

struct ReplicaOutcome {
  bool extinct = false;
  std::optional<double> extinction_time;
  Population final_population;
  bool capped = false;
  /// Stopped early because survival_cutoff particles were alive.
  bool censored = false;
};

/// Called with the initial population and after each grid checkpoint.
using Observer = std::function<void(const Population&)>;

/// Runs a replica from Population::initial(cfg) to cfg.horizon, stopping at the
/// cap or the survival cutoff. Pure function of cfg.
ReplicaOutcome run_replica(const SimConfig& cfg, const Observer& observer = {});

/// Checkpoint times k * step in (0, horizon], with horizon appended when it is
/// not itself on the grid.
std::vector<double> grid_times(double horizon, double step);

}  // namespace bbm
