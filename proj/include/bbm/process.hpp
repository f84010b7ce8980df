#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace bbm {

inline constexpr double kSqrt2 = 1.4142135623730950488;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Offspring law
// ---------------------------------------------------------------------------

/// Finite-support offspring distribution {p_k : k >= 1} with mean 2.
/// Instances can only be obtained through validation, so holding one is proof
/// that the invariants hold.
class OffspringLaw {
 public:
  struct Mass {
    int count;
    double probability;
    bool operator==(const Mass&) const = default;
  };

  /// p_2 = 1.
  static OffspringLaw binary();

  const std::vector<Mass>& masses() const { return masses_; }
  double mean() const;
  double second_factorial_moment() const;
  /// Probability generating function sum_k p_k s^k.
  double generating_function(double s) const;
  /// Mass on k = 1; the linearised wave equations need it.
  double p_one() const;

  /// Inverse-CDF sample from a uniform in (0, 1).
  int sample(double uniform) const;

  bool operator==(const OffspringLaw&) const = default;

 private:
  explicit OffspringLaw(std::vector<Mass> masses);
  friend OffspringLaw validate_offspring(std::vector<OffspringLaw::Mass> masses);

  std::vector<Mass> masses_;
  std::vector<double> cumulative_;
};

/// Checks sum p_k = 1, k >= 1 and sum k p_k = 2 (both to 1e-12). Masses are
/// sorted by k; duplicate k are merged.
OffspringLaw validate_offspring(std::vector<OffspringLaw::Mass> masses);

// ---------------------------------------------------------------------------
// Barrier
// ---------------------------------------------------------------------------

enum class BarrierMode { None, Full, TruncatedAt };

enum class Phase { Supercritical, Critical, Subcritical };

/// Absorbing line y = slope * t.
///
/// Full absorbs on every crossing. TruncatedAt(s) absorbs crossings that
/// happen on [0, s] and, after s, only flags the crossing lineage and keeps it
/// alive; TruncatedAt(0) therefore kills nobody and lets a single run carry
/// N_t together with every barrier-derived subset. None performs no tests.
struct BarrierSpec {
  double slope = 0.0;
  BarrierMode mode = BarrierMode::None;
  double truncation = 0.0;

  static BarrierSpec none(double slope = 0.0) { return {slope, BarrierMode::None, 0.0}; }
  static BarrierSpec full(double slope) { return {slope, BarrierMode::Full, 0.0}; }
  static BarrierSpec truncated_at(double slope, double s);

  bool tests_crossings() const { return mode != BarrierMode::None; }
  /// Crossings on segments ending at or before this time absorb.
  double absorbs_until() const;
  double line(double t) const { return slope * t; }

  bool operator==(const BarrierSpec&) const = default;
};

Phase classify_phase(double slope);
inline Phase classify_phase(const BarrierSpec& barrier) { return classify_phase(barrier.slope); }

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class KnotRetention {
  /// Every knot of every particle is kept and dead particles are archived so
  /// whole lineages can be reconstructed.
  All,
  /// Only the birth knot and the latest knot; no archive.
  Sparse,
};

struct SimConfig {
  double initial_position = 1.0;
  double horizon = 1.0;
  double obs_grid_step = 0.05;
  std::uint64_t particle_cap = 20'000'000;
  std::uint64_t seed = 1;
  OffspringLaw offspring = OffspringLaw::binary();
  BarrierSpec barrier = BarrierSpec::none();

  /// Drift added to every Brownian increment. Zero for the branching process;
  /// the single-lineage first-passage checks run a spine with drift sqrt(2).
  double drift = 0.0;
  /// When false no branch clocks are set and the initial particle lives alone.
  bool branching = true;
  KnotRetention knots = KnotRetention::Sparse;
  /// Stop a replica and report it as a censored survivor once this many
  /// particles are alive (0 disables).
  std::uint64_t survival_cutoff = 0;

  /// Throws InvalidConfig.
  void validate() const;

  bool operator==(const SimConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Particles and populations
// ---------------------------------------------------------------------------

using ParticleId = std::uint64_t;

struct Knot {
  double time;
  double position;
  bool operator==(const Knot&) const = default;
};

/// Knot interval in which the lineage first crossed the barrier line.
struct HitSegment {
  double start;
  double end;
  bool operator==(const HitSegment&) const = default;
};

struct ParticleRecord {
  ParticleId id = 0;
  std::optional<ParticleId> parent;
  double birth_time = 0.0;
  std::optional<double> death_time;
  std::vector<Knot> knots;
  /// Inherited unchanged by all descendants.
  std::optional<HitSegment> hit_segment;
  bool absorbed = false;

  // Simulation bookkeeping.
  double branch_time = kInfinity;
  std::uint64_t segments = 0;

  double position() const { return knots.back().position; }
  double last_time() const { return knots.back().time; }

  bool operator==(const ParticleRecord&) const = default;
};

struct Population {
  double time = 0.0;
  std::vector<ParticleRecord> alive;
  /// Dead particles (branched or absorbed); filled only with KnotRetention::All.
  std::vector<ParticleRecord> archive;
  std::uint64_t dead_count = 0;
  ParticleId next_id = 0;
  std::uint64_t seed = 0;

  /// One particle with id 0 at cfg.initial_position, time 0.
  static Population initial(const SimConfig& cfg);

  bool operator==(const Population&) const = default;
};

// ---------------------------------------------------------------------------
// Views
// ---------------------------------------------------------------------------

enum class ViewKind { All, Surviving, TruncatedAt };

struct Selector {
  ViewKind kind = ViewKind::All;
  double s = 0.0;

  static Selector all() { return {ViewKind::All, 0.0}; }
  static Selector surviving() { return {ViewKind::Surviving, 0.0}; }
  static Selector truncated_at(double s) { return {ViewKind::TruncatedAt, s}; }
};

/// Tolerance for comparing knot times that were built as k * step.
inline constexpr double kTimeSlack = 1e-9;

/// The lineage's first crossing segment starts before time s.
inline bool crossed_before(const ParticleRecord& particle, double s) {
  return particle.hit_segment && particle.hit_segment->start < s - kTimeSlack;
}

/// Membership test behind `view`; does not check preconditions.
bool selects(const Selector& selector, const ParticleRecord& particle);

using ParticleView = std::vector<const ParticleRecord*>;

/// All = N_t, Surviving = lineages that never crossed, TruncatedAt(s) = lineages
/// with no crossing segment starting before s. Throws TruncationAfterNow when
/// s > pop.time.
ParticleView view(const Population& pop, const Selector& selector);

std::vector<ParticleId> ids_of(const ParticleView& particles);

// ---------------------------------------------------------------------------
// Genealogy
// ---------------------------------------------------------------------------

/// Index over alive and archived records of a population (the population must
/// outlive it).
class Genealogy {
 public:
  explicit Genealogy(const Population& pop);

  const ParticleRecord* find(ParticleId id) const;
  /// Knots from the root to `id`, ancestors first; shared branch-time knots
  /// appear once. Needs KnotRetention::All for a complete path.
  std::vector<Knot> lineage_path(ParticleId id) const;
  std::vector<ParticleId> roots() const;
  /// Every parent link resolves and no record is its own ancestor.
  bool is_forest() const;

 private:
  std::unordered_map<ParticleId, const ParticleRecord*> by_id_;
};

}  // namespace bbm
