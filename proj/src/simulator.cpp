#include "bbm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "bbm/error.hpp"

namespace bbm {

namespace {

bool same_time(double a, double b) {
  return std::abs(a - b) <= kTimeSlack * std::max({1.0, std::abs(a), std::abs(b)});
}

double draw_lifetime(const Population& pop, ParticleId id) {
  auto rng = make_stream(pop.seed, id, Lane::Lifetime);
  return rng.exponential();
}

class Stepper {
 public:
  Stepper(Population& pop, const SimConfig& cfg) : pop_(pop), cfg_(cfg) {}

  void step_to(double target) {
    struct Event {
      double time;
      std::size_t index;
      bool operator>(const Event& other) const {
        return time > other.time || (time == other.time && index > other.index);
      }
    };
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    for (std::size_t i = 0; i < pop_.alive.size(); ++i)
      if (pop_.alive[i].branch_time < target) events.push({pop_.alive[i].branch_time, i});

    std::vector<bool> gone(pop_.alive.size(), false);
    while (!events.empty()) {
      const Event event = events.top();
      events.pop();
      if (!extend(event.index, event.time)) {
        gone[event.index] = true;
        continue;
      }
      const std::size_t first_child = pop_.alive.size();
      branch(event.index, event.time);
      gone[event.index] = true;
      gone.resize(pop_.alive.size(), false);
      for (std::size_t c = first_child; c < pop_.alive.size(); ++c)
        if (pop_.alive[c].branch_time < target) events.push({pop_.alive[c].branch_time, c});
    }

    for (std::size_t i = 0; i < pop_.alive.size(); ++i) {
      if (gone[i]) continue;
      if (!extend(i, target)) gone[i] = true;
    }
    compact(gone);
    pop_.time = target;
  }

 private:
  /// Moves particle i from its last knot to time t; returns false if it was
  /// absorbed on the way (it is then retired).
  bool extend(std::size_t i, double t) {
    ParticleRecord& p = pop_.alive[i];
    const double t0 = p.last_time();
    if (t <= t0) return true;
    const double x0 = p.position();
    const double dt = t - t0;

    auto rng = make_stream(pop_.seed, p.id, Lane::Path);
    rng.seek(2 * p.segments);
    const double x1 = x0 + cfg_.drift * dt + std::sqrt(dt) * rng.normal();
    rng.seek(2 * p.segments + 1);
    ++p.segments;

    const Knot knot{t, x1};
    if (cfg_.knots == KnotRetention::All || p.knots.size() == 1)
      p.knots.push_back(knot);
    else
      p.knots.back() = knot;

    const BarrierSpec& barrier = cfg_.barrier;
    if (!barrier.tests_crossings() || p.hit_segment) return true;
    if (!crossing_decision({t0, t, x0, x1}, barrier.slope, rng)) return true;
    p.hit_segment = HitSegment{t0, t};
    if (t <= barrier.absorbs_until() || same_time(t, barrier.absorbs_until())) {
      p.absorbed = true;
      p.death_time = t;
      return false;
    }
    return true;
  }

  void branch(std::size_t i, double t) {
    const int count = [&] {
      auto rng = make_stream(pop_.seed, pop_.alive[i].id, Lane::Offspring);
      return cfg_.offspring.sample(rng.uniform());
    }();
    if (pop_.next_id + count > cfg_.particle_cap)
      throw Error(ErrorCode::ParticleCapExceeded,
                  "particle cap " + std::to_string(cfg_.particle_cap) + " reached at t = " +
                      std::to_string(t));
    pop_.alive[i].death_time = t;
    const ParticleId parent = pop_.alive[i].id;
    const double position = pop_.alive[i].position();
    const auto inherited = pop_.alive[i].hit_segment;
    for (int c = 0; c < count; ++c) {
      ParticleRecord child;
      child.id = pop_.next_id++;
      child.parent = parent;
      child.birth_time = t;
      child.knots.push_back({t, position});
      child.hit_segment = inherited;
      child.branch_time = cfg_.branching ? t + draw_lifetime(pop_, child.id) : kInfinity;
      pop_.alive.push_back(std::move(child));
    }
  }

  void compact(const std::vector<bool>& gone) {
    std::vector<ParticleRecord> kept;
    kept.reserve(pop_.alive.size());
    for (std::size_t i = 0; i < pop_.alive.size(); ++i) {
      if (!gone[i]) {
        kept.push_back(std::move(pop_.alive[i]));
        continue;
      }
      ++pop_.dead_count;
      if (cfg_.knots == KnotRetention::All) pop_.archive.push_back(std::move(pop_.alive[i]));
    }
    pop_.alive = std::move(kept);
  }

  Population& pop_;
  const SimConfig& cfg_;
};

}  // namespace

bool crossing_decision(const SegmentDraw& seg, double slope, Stream& rng) {
  if (!(seg.t1 > seg.t0)) throw Error(ErrorCode::DegenerateSegment, "segment needs t1 > t0");
  if (seg.x0 <= slope * seg.t0 || seg.x1 <= slope * seg.t1) return true;
  return rng.uniform() < analytic::bridge_crossing_prob(seg, slope);
}

std::vector<double> grid_times(double horizon, double step) {
  std::vector<double> times;
  for (std::uint64_t k = 1;; ++k) {
    const double t = static_cast<double>(k) * step;
    if (t > horizon && !same_time(t, horizon)) break;
    times.push_back(same_time(t, horizon) ? horizon : t);
  }
  if (times.empty() || !same_time(times.back(), horizon)) {
    if (horizon > 0.0) times.push_back(horizon);
  }
  return times;
}

void advance(Population& pop, double to, const SimConfig& cfg) {
  if (to < pop.time && !same_time(to, pop.time))
    throw Error(ErrorCode::BadArgs, "advance target is in the past");
  if (to <= pop.time) return;

  std::vector<double> checkpoints;
  const double step = cfg.obs_grid_step;
  for (auto k = static_cast<std::uint64_t>(std::floor(pop.time / step + kTimeSlack)) + 1;; ++k) {
    const double t = static_cast<double>(k) * step;
    if (t >= to || same_time(t, to)) break;
    if (t > pop.time && !same_time(t, pop.time)) checkpoints.push_back(t);
  }
  if (cfg.barrier.mode == BarrierMode::TruncatedAt) {
    const double s = cfg.barrier.truncation;
    if (s > pop.time && s < to && !same_time(s, pop.time) && !same_time(s, to)) {
      const bool on_grid = std::any_of(checkpoints.begin(), checkpoints.end(),
                                       [&](double c) { return same_time(c, s); });
      if (!on_grid) {
        checkpoints.push_back(s);
        std::sort(checkpoints.begin(), checkpoints.end());
      }
    }
  }
  checkpoints.push_back(to);

  Stepper stepper(pop, cfg);
  for (const double t : checkpoints) stepper.step_to(t);
}

ReplicaOutcome run_replica(const SimConfig& cfg, const Observer& observer) {
  cfg.validate();
  ReplicaOutcome outcome;
  Population pop = Population::initial(cfg);
  if (observer) observer(pop);
  try {
    for (const double t : grid_times(cfg.horizon, cfg.obs_grid_step)) {
      const bool was_alive = !pop.alive.empty();
      advance(pop, t, cfg);
      if (was_alive && pop.alive.empty()) {
        outcome.extinct = true;
        outcome.extinction_time = t;
      }
      if (observer) observer(pop);
      if (cfg.survival_cutoff > 0 && pop.alive.size() >= cfg.survival_cutoff) {
        outcome.censored = true;
        break;
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ParticleCapExceeded) throw;
    outcome.capped = true;
  }
  outcome.final_population = std::move(pop);
  return outcome;
}

}  // namespace bbm
