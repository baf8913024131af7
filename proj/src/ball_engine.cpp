#include "ball_engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowpack/errors.hpp"

namespace flowpack::detail {

BallEngine::BallEngine(const FlowSystem& system, double dt, const ReparamOptions& options)
    : system_(&system), dt_(dt), options_(options) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("dt must be positive");
}

std::size_t BallEngine::add(const Point& p) {
  tracks_.emplace_back(*system_, p, dt_);
  return tracks_.size() - 1;
}

namespace {

constexpr std::uint32_t kUnknown = 0xffffffffu;
constexpr std::uint32_t kCapped = 0x80000000u;

}  // namespace

void BallEngine::set_horizon(double t) {
  horizon_ = static_cast<std::size_t>(std::ceil(t / dt_ - 1e-9)) + 2;
}

bool BallEngine::grid_columns(double t, std::size_t& columns) const {
  if (!(t > 0.0)) throw InputError("ball duration must be positive");
  auto steps = static_cast<std::size_t>(std::floor(t / dt_ + 1e-9));
  bool aligned = std::fabs(static_cast<double>(steps) * dt_ - t) <= 1e-9 * std::max(1.0, t);
  columns = aligned ? steps + 1 : steps + 2;
  return aligned;
}

void BallEngine::check_budget(double t, std::size_t columns) const {
  std::size_t rows = row_limit_for(t, dt_, options_.eta_margin) + 1;
  if (static_cast<double>(rows) * static_cast<double>(columns) > options_.max_cells)
    throw ResourceError("free-space grid of " + std::to_string(rows) + "x" +
                        std::to_string(columns) + " exceeds the cell budget");
}

std::size_t BallEngine::cached_reach(std::size_t center, double radius, std::size_t other,
                                     std::size_t needed) {
  auto& by_center = reach_cache_[radius];
  if (by_center.size() < tracks_.size()) by_center.resize(tracks_.size());
  auto& row = by_center[center];
  if (row.size() < tracks_.size()) row.resize(tracks_.size(), kUnknown);
  std::uint32_t e = row[other];
  if (e != kUnknown) {
    if (!(e & kCapped)) return std::min<std::size_t>(e, needed);
    if ((e & ~kCapped) >= needed) return needed;
  }
  std::size_t columns = std::max(needed, horizon_);
  std::size_t got = reach(tracks_[center], radius, tracks_[other], columns);
  row[other] = got < columns ? static_cast<std::uint32_t>(got)
                             : (kCapped | static_cast<std::uint32_t>(columns));
  return std::min(got, needed);
}

bool BallEngine::contains(std::size_t center, double t, double radius, std::size_t other) {
  std::size_t columns = 0;
  if (!grid_columns(t, columns)) return contains(tracks_[center], t, radius, tracks_[other]);
  check_budget(t, columns);
  return cached_reach(center, radius, other, columns) == columns;
}

bool BallEngine::contains(FeatureTrack& center, double t, double radius, FeatureTrack& other) {
  std::size_t columns = 0;
  bool aligned = grid_columns(t, columns);
  check_budget(t, columns);
  auto center_at = [&](std::size_t i) -> const Feature& { return center.at(i); };
  auto other_at = [&](std::size_t j) -> const Feature& { return other.at(j); };
  auto limit_at = [&](std::size_t j) {
    return row_limit_for(static_cast<double>(j) * dt_, dt_, options_.eta_margin);
  };
  if (aligned)
    return alignment_reach(*system_, center_at, other_at, limit_at, columns, radius) == columns;

  // The last column sits at s = t, off the grid.
  std::size_t body = columns - 1, last = 0;
  if (alignment_reach(*system_, center_at, other_at, limit_at, body, radius, nullptr, &last) <
      body)
    return false;
  return offgrid_tail(*system_, center_at, center.at_time(t), other.at_time(t), last,
                      row_limit_for(t, dt_, options_.eta_margin), t, dt_, radius)
      .has_value();
}

std::size_t BallEngine::reach(FeatureTrack& center, double radius, FeatureTrack& other,
                              std::size_t max_columns) {
  auto limit_at = [&](std::size_t j) {
    return row_limit_for(static_cast<double>(j) * dt_, dt_, options_.eta_margin);
  };
  return alignment_reach(
      *system_, [&](std::size_t i) -> const Feature& { return center.at(i); },
      [&](std::size_t j) -> const Feature& { return other.at(j); }, limit_at, max_columns,
      radius);
}

bool BallEngine::in_both(std::size_t c1, double t1, std::size_t c2, double t2, double eps,
                         std::size_t y) {
  return contains(c1, t1, eps, y) && contains(tracks_[c2], t2, eps, tracks_[y]);
}

bool BallEngine::in_both(std::size_t c1, double t1, std::size_t c2, double t2, double eps,
                         FeatureTrack& y) {
  return contains(tracks_[c1], t1, eps, y) && contains(tracks_[c2], t2, eps, y);
}

bool BallEngine::disjoint(std::size_t c1, double t1, std::size_t c2, double t2, double eps,
                          std::span<const std::size_t> probes) {
  if (!contains(c1, std::min(t1, t2), 2.0 * eps, c2)) return true;
  if (in_both(c1, t1, c2, t2, eps, c1) || in_both(c1, t1, c2, t2, eps, c2))
    return false;
  FeatureTrack mid(*system_, system_->midpoint(point(c1), point(c2)), dt_);
  if (in_both(c1, t1, c2, t2, eps, mid)) return false;

  const double bound = eps + kDistanceSlack;
  const Feature f1 = origin(c1);
  const Feature f2 = origin(c2);
  for (std::size_t p : probes) {
    if (p == c1 || p == c2) continue;
    const Feature& fp = origin(p);
    if (!system_->within(fp, f1, bound) || !system_->within(fp, f2, bound)) continue;
    if (in_both(c1, t1, c2, t2, eps, p)) return false;
  }
  return true;
}

bool verify_maximal(BallEngine& engine, const GreedyScan& scan, std::span<const std::size_t> ids,
                    std::span<const double> durations, double eps,
                    std::span<const std::size_t> probe_ids) {
  for (std::size_t k = 0; k < scan.blocker.size(); ++k) {
    std::ptrdiff_t slot = scan.blocker[k];
    if (slot == -2) return false;
    if (slot < 0) continue;
    std::size_t a = scan.accepted[static_cast<std::size_t>(slot)];
    if (engine.disjoint(ids[a], durations[a], ids[k], durations[k], eps, probe_ids)) return false;
  }
  return true;
}

}  // namespace flowpack::detail
