#ifndef FLOWPACK_BALL_ENGINE_HPP
#define FLOWPACK_BALL_ENGINE_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "flowpack/reparam.hpp"

namespace flowpack::detail {

// Ball-membership queries over a pool of points whose orbit features are
// cached on a common dt grid, so one point can serve as center and as probe
// across many queries and durations.
class BallEngine {
 public:
  BallEngine(const FlowSystem& system, double dt, const ReparamOptions& options);

  std::size_t add(const Point& p);
  // Longest duration expected in later queries; cached reaches are computed
  // that far so one alignment serves every shorter duration.
  void set_horizon(double t);
  std::size_t size() const { return tracks_.size(); }
  const Point& point(std::size_t id) const { return tracks_[id].base(); }
  const Feature& origin(std::size_t id) { return tracks_[id].at(0); }
  const FlowSystem& system() const { return *system_; }
  double dt() const { return dt_; }

  bool contains(std::size_t center, double t, double radius, std::size_t other);
  bool contains(FeatureTrack& center, double t, double radius, FeatureTrack& other);

  // Number of leading grid columns s_j = j*dt (j < max_columns) for which
  // `other` aligns with `center` within radius.
  std::size_t reach(FeatureTrack& center, double radius, FeatureTrack& other,
                    std::size_t max_columns);

  // Probe-certified disjointness of two closed balls, with the 2*eps
  // center-separation fast path.
  bool disjoint(std::size_t c1, double t1, std::size_t c2, double t2, double eps,
                std::span<const std::size_t> probes);

  FeatureTrack& track(std::size_t id) { return tracks_[id]; }

 private:
  bool in_both(std::size_t c1, double t1, std::size_t c2, double t2, double eps,
               std::size_t y);
  bool in_both(std::size_t c1, double t1, std::size_t c2, double t2, double eps,
               FeatureTrack& y);
  // Columns needed for duration t; false if t is off the dt grid.
  bool grid_columns(double t, std::size_t& columns) const;
  void check_budget(double t, std::size_t columns) const;
  // min(reach, needed) for a pair of pool points, memoized per center and radius.
  std::size_t cached_reach(std::size_t center, double radius, std::size_t other,
                           std::size_t needed);

  const FlowSystem* system_;
  double dt_;
  ReparamOptions options_;
  std::vector<FeatureTrack> tracks_;
  std::size_t horizon_ = 0;
  // radius -> center id -> per-other entry (kUnknown, exact reach, or kCapped | cap).
  std::map<double, std::vector<std::vector<std::uint32_t>>> reach_cache_;
};

struct GreedyScan {
  std::vector<std::size_t> accepted;    // candidate indices, in acceptance order
  std::vector<std::ptrdiff_t> blocker;  // per candidate: slot in `accepted` it meets,
                                        // -1 if accepted, -2 if never scanned
};

// Scans candidates in `order`, accepting a ball iff it is disjoint from every
// accepted ball. `ids[k]` is candidate k's engine id. Stops early once
// `stop_after(k)` returns true for a freshly accepted k.
template <class StopAfter>
GreedyScan greedy_scan(BallEngine& engine, std::span<const std::size_t> ids,
                       std::span<const double> durations, double eps,
                       std::span<const std::size_t> probe_ids,
                       std::span<const std::size_t> order, StopAfter&& stop_after) {
  GreedyScan scan;
  scan.blocker.assign(ids.size(), -2);
  for (std::size_t k : order) {
    std::ptrdiff_t hit = -1;
    for (std::size_t slot = 0; slot < scan.accepted.size(); ++slot) {
      std::size_t a = scan.accepted[slot];
      if (!engine.disjoint(ids[a], durations[a], ids[k], durations[k], eps, probe_ids)) {
        hit = static_cast<std::ptrdiff_t>(slot);
        break;
      }
    }
    scan.blocker[k] = hit;
    if (hit < 0) {
      scan.accepted.push_back(k);
      if (stop_after(k)) break;
    }
  }
  return scan;
}

// Re-checks that every rejected candidate meets its recorded blocker.
bool verify_maximal(BallEngine& engine, const GreedyScan& scan, std::span<const std::size_t> ids,
                    std::span<const double> durations, double eps,
                    std::span<const std::size_t> probe_ids);

}  // namespace flowpack::detail

#endif
