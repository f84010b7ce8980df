#include "bbm/process.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bbm/error.hpp"
#include "bbm/rng.hpp"

namespace bbm {

namespace {

constexpr double kMassTolerance = 1e-12;

}  // namespace

OffspringLaw::OffspringLaw(std::vector<Mass> masses) : masses_(std::move(masses)) {
  double running = 0.0;
  cumulative_.reserve(masses_.size());
  for (const auto& m : masses_) {
    running += m.probability;
    cumulative_.push_back(running);
  }
  cumulative_.back() = 1.0;
}

OffspringLaw OffspringLaw::binary() { return OffspringLaw({{2, 1.0}}); }

double OffspringLaw::mean() const {
  double total = 0.0;
  for (const auto& m : masses_) total += m.count * m.probability;
  return total;
}

double OffspringLaw::second_factorial_moment() const {
  double total = 0.0;
  for (const auto& m : masses_) total += double(m.count) * (m.count - 1) * m.probability;
  return total;
}

double OffspringLaw::generating_function(double s) const {
  double total = 0.0;
  for (const auto& m : masses_) total += m.probability * std::pow(s, m.count);
  return total;
}

double OffspringLaw::p_one() const {
  for (const auto& m : masses_)
    if (m.count == 1) return m.probability;
  return 0.0;
}

int OffspringLaw::sample(double uniform) const {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), uniform);
  const auto index = std::min<std::size_t>(it - cumulative_.begin(), masses_.size() - 1);
  return masses_[index].count;
}

OffspringLaw validate_offspring(std::vector<OffspringLaw::Mass> masses) {
  if (masses.empty()) throw Error(ErrorCode::NotAProbability, "empty offspring law");
  for (const auto& m : masses) {
    if (m.count == 0) throw Error(ErrorCode::ZeroOffspringMass, "k = 0 is not allowed");
    if (m.count < 0) throw Error(ErrorCode::NotAProbability, "negative offspring count");
    if (!(m.probability >= 0.0 && m.probability <= 1.0))
      throw Error(ErrorCode::NotAProbability, "mass outside [0, 1]");
  }
  std::sort(masses.begin(), masses.end(),
            [](const auto& a, const auto& b) { return a.count < b.count; });
  std::vector<OffspringLaw::Mass> merged;
  for (const auto& m : masses) {
    if (!merged.empty() && merged.back().count == m.count)
      merged.back().probability += m.probability;
    else
      merged.push_back(m);
  }
  double total = 0.0;
  double mean = 0.0;
  for (const auto& m : merged) {
    total += m.probability;
    mean += m.count * m.probability;
  }
  if (std::abs(total - 1.0) > kMassTolerance)
    throw Error(ErrorCode::NotAProbability, "masses sum to " + std::to_string(total));
  if (std::abs(mean - 2.0) > kMassTolerance)
    throw Error(ErrorCode::MeanNotTwo, "mean offspring " + std::to_string(mean));
  return OffspringLaw(std::move(merged));
}

BarrierSpec BarrierSpec::truncated_at(double slope, double s) {
  if (!(s >= 0.0)) throw Error(ErrorCode::InvalidConfig, "truncation time must be >= 0");
  return {slope, BarrierMode::TruncatedAt, s};
}

double BarrierSpec::absorbs_until() const {
  switch (mode) {
    case BarrierMode::None: return -kInfinity;
    case BarrierMode::Full: return kInfinity;
    case BarrierMode::TruncatedAt: return truncation;
  }
  return kInfinity;
}

Phase classify_phase(double slope) {
  if (std::abs(slope - kSqrt2) <= 1e-12) return Phase::Critical;
  return slope < kSqrt2 ? Phase::Supercritical : Phase::Subcritical;
}

void SimConfig::validate() const {
  if (!(initial_position > 0.0) || !std::isfinite(initial_position))
    throw Error(ErrorCode::InvalidConfig, "initial_position must be > 0");
  if (!(horizon >= 0.0) || !std::isfinite(horizon))
    throw Error(ErrorCode::InvalidConfig, "horizon must be finite and >= 0");
  if (!(obs_grid_step > 0.0)) throw Error(ErrorCode::InvalidConfig, "obs_grid_step must be > 0");
  if (particle_cap < 1) throw Error(ErrorCode::InvalidConfig, "particle_cap must be >= 1");
  if (barrier.mode == BarrierMode::TruncatedAt && !(barrier.truncation >= 0.0))
    throw Error(ErrorCode::InvalidConfig, "truncation time must be >= 0");
  if (!std::isfinite(barrier.slope) || !std::isfinite(drift))
    throw Error(ErrorCode::InvalidConfig, "slope and drift must be finite");
}

Population Population::initial(const SimConfig& cfg) {
  Population pop;
  pop.seed = cfg.seed;
  ParticleRecord root;
  root.id = pop.next_id++;
  root.birth_time = 0.0;
  root.knots.push_back({0.0, cfg.initial_position});
  if (cfg.branching) root.branch_time = make_stream(cfg.seed, root.id, Lane::Lifetime).exponential();
  pop.alive.push_back(std::move(root));
  return pop;
}

bool selects(const Selector& selector, const ParticleRecord& particle) {
  switch (selector.kind) {
    case ViewKind::All: return true;
    case ViewKind::Surviving: return !particle.hit_segment;
    case ViewKind::TruncatedAt:
      return !crossed_before(particle, selector.s);
  }
  return false;
}

ParticleView view(const Population& pop, const Selector& selector) {
  if (selector.kind == ViewKind::TruncatedAt && selector.s > pop.time)
    throw Error(ErrorCode::TruncationAfterNow, "truncation time after population time");
  ParticleView out;
  for (const auto& p : pop.alive)
    if (selects(selector, p)) out.push_back(&p);
  return out;
}

std::vector<ParticleId> ids_of(const ParticleView& particles) {
  std::vector<ParticleId> ids;
  ids.reserve(particles.size());
  for (const auto* p : particles) ids.push_back(p->id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

Genealogy::Genealogy(const Population& pop) {
  by_id_.reserve(pop.alive.size() + pop.archive.size());
  for (const auto& p : pop.archive) by_id_.emplace(p.id, &p);
  for (const auto& p : pop.alive) by_id_.emplace(p.id, &p);
}

const ParticleRecord* Genealogy::find(ParticleId id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : it->second;
}

std::vector<Knot> Genealogy::lineage_path(ParticleId id) const {
  std::vector<const ParticleRecord*> chain;
  for (const ParticleRecord* p = find(id); p != nullptr;
       p = p->parent ? find(*p->parent) : nullptr) {
    chain.push_back(p);
  }
  std::vector<Knot> path;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    for (const auto& k : (*it)->knots) {
      if (!path.empty() && k.time <= path.back().time) continue;
      path.push_back(k);
    }
  }
  return path;
}

std::vector<ParticleId> Genealogy::roots() const {
  std::vector<ParticleId> out;
  for (const auto& [id, p] : by_id_)
    if (!p->parent) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

bool Genealogy::is_forest() const {
  // Ids are handed out in birth order, so a parent always has a smaller id and
  // following parent links can never cycle.
  for (const auto& [id, p] : by_id_) {
    if (!p->parent) continue;
    const ParticleRecord* parent = find(*p->parent);
    if (parent == nullptr || parent->id >= id) return false;
    if (parent->death_time.value_or(-1.0) != p->birth_time) return false;
  }
  return true;
}

}  // namespace bbm
