#ifndef FLOWPACK_REPARAM_HPP
#define FLOWPACK_REPARAM_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flowpack/flows.hpp"

namespace flowpack {

struct BallSpec {
  Point center;
  double t = 1.0;
  double eps = 0.1;
  bool closed = true;
};

// Discretized alpha: tau[j] = alpha(grid_times[j]).
struct ReparamPath {
  std::vector<double> grid_times;
  std::vector<double> tau;
};

// Rows are tau = i*dt, plus tau = t when t is off the dt grid; that extra row
// is admissible in the final column only. Column j is s_grid[j]. A path may
// use row i in column j only when i <= row_limit[j]; the limit grows with s so
// that a shorter ball is exactly a prefix of a longer one.
struct FreeSpaceGrid {
  std::vector<double> tau_grid;
  std::vector<double> s_grid;
  std::vector<std::size_t> row_limit;
  std::vector<std::uint8_t> cells;  // row-major, rows = tau_grid.size()

  bool admissible(std::size_t i, std::size_t j) const {
    return cells[i * s_grid.size() + j] != 0;
  }
};

struct ReparamOptions {
  double eta_margin = 0.5;
  double max_cells = 4e8;
};

struct Membership {
  bool contained = false;
  std::optional<ReparamPath> path;
};

inline constexpr double kDistanceSlack = 1e-12;

double default_dt(double eps);

FreeSpaceGrid build_free_space(const FlowSystem& system, const BallSpec& ball, const Point& y,
                               double dt, const ReparamOptions& options = {});

// Minimal monotone path through a free-space grid (rows per column), if any.
std::optional<std::vector<std::size_t>> find_monotone_path(const FreeSpaceGrid& grid);

Membership ball_contains(const FlowSystem& system, const BallSpec& ball, const Point& y,
                         double dt, const ReparamOptions& options = {});

bool check_distortion(const ReparamPath& path, double eta);

double calibrate_theta(const FlowSystem& system, double eta, int trials, std::uint64_t seed,
                       const ReparamOptions& options = {});

// Features of phi_{k*dt}(base), k = 0, 1, ..., computed on first use.
class FeatureTrack {
 public:
  FeatureTrack(const FlowSystem& system, const Point& base, double dt)
      : system_(&system), base_(base), dt_(dt) {}

  const Feature& at(std::size_t k) {
    if (k >= features_.size()) extend(k + 1);
    return features_[k];
  }
  Feature at_time(double s) const { return system_->feature(system_->evaluate(base_, s)); }
  const Point& base() const { return base_; }
  double dt() const { return dt_; }
  std::size_t cached() const { return features_.size(); }

 private:
  void extend(std::size_t n) {
    for (std::size_t k = features_.size(); k < n; ++k)
      features_.push_back(
          system_->feature(system_->evaluate(base_, static_cast<double>(k) * dt_)));
  }

  const FlowSystem* system_;
  Point base_;
  double dt_;
  std::vector<Feature> features_;
};

inline std::size_t row_limit_for(double s, double dt, double eta_margin) {
  return static_cast<std::size_t>(std::floor((1.0 + eta_margin) * s / dt + 1e-9));
}

// Greedy minimal-row alignment over `columns` columns. The reachable rows of
// column j are exactly the admissible rows >= the minimal reachable row of
// column j-1, so tracking that minimum decides reachability in O(rows + columns)
// distance evaluations. Returns the number of leading columns that are
// reachable; `rows` (if given) receives the minimal path over them.
template <class CenterAt, class OtherAt, class LimitAt>
std::size_t alignment_reach(const FlowSystem& system, CenterAt&& center_at, OtherAt&& other_at,
                            LimitAt&& limit_at, std::size_t columns, double eps,
                            std::vector<std::size_t>* rows = nullptr,
                            std::size_t* last_row = nullptr) {
  if (rows) rows->clear();
  if (columns == 0) return 0;
  const double bound = eps + kDistanceSlack;
  std::size_t m = 0;
  for (std::size_t j = 0; j < columns; ++j) {
    const Feature y = other_at(j);
    std::size_t limit = j == 0 ? 0 : limit_at(j);
    std::size_t i = m;
    while (i <= limit && !system.within(center_at(i), y, bound)) ++i;
    if (i > limit) return j;
    m = i;
    if (rows) rows->push_back(m);
    if (last_row) *last_row = m;
  }
  return columns;
}

// Final column of a duration t off the dt grid. Its candidates are the rows
// i*dt for prev_row <= i <= limit plus alpha(t) = t itself, which keeps every
// point inside its own balls. Returns the smallest admissible tau, if any.
template <class CenterAt>
std::optional<double> offgrid_tail(const FlowSystem& system, CenterAt&& center_at,
                                   const Feature& center_t, const Feature& y_t,
                                   std::size_t prev_row, std::size_t limit, double t, double dt,
                                   double eps) {
  const double bound = eps + kDistanceSlack;
  bool tried_t = static_cast<double>(prev_row) * dt > t;
  for (std::size_t i = prev_row; i <= limit; ++i) {
    double tau = static_cast<double>(i) * dt;
    if (!tried_t && t < tau) {
      tried_t = true;
      if (system.within(center_t, y_t, bound)) return t;
    }
    if (system.within(center_at(i), y_t, bound)) return tau;
  }
  if (!tried_t && system.within(center_t, y_t, bound)) return t;
  return std::nullopt;
}

}  // namespace flowpack

#endif
