#include "flowpack/reparam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowpack/errors.hpp"

namespace flowpack {

namespace {

void validate(const BallSpec& ball, double dt) {
  if (!(ball.t > 0.0) || !std::isfinite(ball.t)) throw InputError("ball duration must be positive");
  if (!(ball.eps > 0.0) || !std::isfinite(ball.eps)) throw InputError("ball radius must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("dt must be positive");
}

std::size_t tau_rows(double t, double dt, double eta_margin) {
  return row_limit_for(t, dt, eta_margin) + 1;
}

void check_budget(std::size_t rows, std::size_t cols, const ReparamOptions& options) {
  double cells = static_cast<double>(rows) * static_cast<double>(cols);
  if (cells > options.max_cells)
    throw ResourceError("free-space grid of " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " exceeds the cell budget");
}

bool on_grid(const std::vector<double>& s_grid, double dt) {
  double steps = std::round(s_grid.back() / dt);
  return std::fabs(steps * dt - s_grid.back()) <= 1e-9 * std::max(1.0, s_grid.back());
}

}  // namespace

double default_dt(double eps) { return std::min(0.1, eps / 4.0); }

FreeSpaceGrid build_free_space(const FlowSystem& system, const BallSpec& ball, const Point& y,
                               double dt, const ReparamOptions& options) {
  validate(ball, dt);
  FreeSpaceGrid grid;
  grid.s_grid = time_grid(ball.t, dt);
  const std::size_t cols = grid.s_grid.size();
  const std::size_t uniform = tau_rows(ball.t, dt, options.eta_margin);
  const bool extra = !on_grid(grid.s_grid, dt);
  const std::size_t rows = uniform + (extra ? 1 : 0);
  check_budget(rows, cols, options);
  // Index of the tau = t row when it exists.
  const std::size_t at_t =
      extra ? static_cast<std::size_t>(std::floor(ball.t / dt + 1e-9)) + 1 : rows;
  for (std::size_t i = 0; i < uniform; ++i) {
    if (i == at_t) grid.tau_grid.push_back(ball.t);
    grid.tau_grid.push_back(static_cast<double>(i) * dt);
  }
  if (extra && at_t == uniform) grid.tau_grid.push_back(ball.t);

  grid.row_limit.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    if (j == 0) continue;
    std::size_t limit = row_limit_for(grid.s_grid[j], dt, options.eta_margin);
    grid.row_limit[j] = limit >= at_t ? limit + 1 : limit;
  }

  std::vector<Feature> xs(rows), ys(cols);
  for (std::size_t i = 0; i < rows; ++i)
    xs[i] = system.feature(system.evaluate(ball.center, grid.tau_grid[i]));
  for (std::size_t j = 0; j < cols; ++j)
    ys[j] = system.feature(system.evaluate(y, grid.s_grid[j]));

  grid.cells.assign(rows * cols, 0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      if (i == at_t && j + 1 != cols) continue;
      grid.cells[i * cols + j] = system.distance(xs[i], ys[j]) <= ball.eps + kDistanceSlack;
    }
  return grid;
}

std::optional<std::vector<std::size_t>> find_monotone_path(const FreeSpaceGrid& grid) {
  std::vector<std::size_t> rows;
  std::size_t m = 0;
  for (std::size_t j = 0; j < grid.s_grid.size(); ++j) {
    std::size_t limit = std::min(grid.row_limit[j], grid.tau_grid.size() - 1);
    std::size_t i = m;
    while (i <= limit && !grid.admissible(i, j)) ++i;
    if (i > limit) return std::nullopt;
    m = i;
    rows.push_back(m);
  }
  return rows;
}

Membership ball_contains(const FlowSystem& system, const BallSpec& ball, const Point& y,
                         double dt, const ReparamOptions& options) {
  validate(ball, dt);
  std::vector<double> s_grid = time_grid(ball.t, dt);
  const bool extra = !on_grid(s_grid, dt);
  std::size_t rows = tau_rows(ball.t, dt, options.eta_margin);
  check_budget(rows + (extra ? 1 : 0), s_grid.size(), options);

  FeatureTrack center(system, ball.center, dt);
  Feature other;
  std::size_t other_index = static_cast<std::size_t>(-1);
  auto other_at = [&](std::size_t j) -> const Feature& {
    if (j != other_index) {
      other = system.feature(system.evaluate(y, s_grid[j]));
      other_index = j;
    }
    return other;
  };
  auto center_at = [&](std::size_t i) -> const Feature& { return center.at(i); };
  auto limit_at = [&](std::size_t j) { return row_limit_for(s_grid[j], dt, options.eta_margin); };
  const std::size_t body = extra ? s_grid.size() - 1 : s_grid.size();
  std::vector<std::size_t> path_rows;
  std::size_t reach =
      alignment_reach(system, center_at, other_at, limit_at, body, ball.eps, &path_rows);

  Membership result;
  if (reach < body) return result;
  std::optional<double> tail;
  if (extra) {
    tail = offgrid_tail(system, center_at, center.at_time(ball.t), other_at(body),
                        path_rows.back(), limit_at(body), ball.t, dt, ball.eps);
    if (!tail) return result;
  }
  result.contained = true;
  ReparamPath path;
  path.grid_times = s_grid;
  path.tau.reserve(s_grid.size());
  for (std::size_t r : path_rows) path.tau.push_back(static_cast<double>(r) * dt);
  if (tail) path.tau.push_back(*tail);
  result.path = std::move(path);
  return result;
}

bool check_distortion(const ReparamPath& path, double eta) {
  for (std::size_t j = 0; j < path.tau.size(); ++j) {
    double s = path.grid_times[j];
    double gap = std::fabs(path.tau[j] - s);
    double bound = s > 1.0 ? eta * s : eta;
    if (!(gap < bound)) return false;
  }
  return true;
}

double calibrate_theta(const FlowSystem& system, double eta, int trials, std::uint64_t seed,
                       const ReparamOptions& options) {
  if (!(eta > 0.0 && eta < 1.0)) throw InputError("eta must lie in (0, 1)");
  if (trials < 0) throw InputError("trials must be nonnegative");
  std::string last_failure = "no schedule value tried";
  double theta = system.diameter_bound();
  for (int level = 1; level <= 40; ++level) {
    theta *= 0.5;
    // Every level replays the same random stream so results are monotone in eta.
    Rng rng(seed);
    bool ok = true;
    try {
      for (int k = 0; k < trials && ok; ++k) {
        Point x = system.sample(rng);
        double t = 20.0 * (1.0 - uniform01(rng));
        Point y = system.sample_near(x, theta, rng);
        BallSpec ball{x, t, theta, true};
        Membership m = ball_contains(system, ball, y, default_dt(theta), options);
        if (m.contained && !check_distortion(*m.path, eta)) {
          ok = false;
          last_failure = "theta=" + std::to_string(theta) + " x=" + system.to_chart(x).dump() +
                         " y=" + system.to_chart(y).dump() + " t=" + std::to_string(t);
        }
      }
    } catch (const ResourceError& e) {
      throw CalibrationError(std::string("calibration schedule exhausted (") + e.what() +
                             "); last failing pair " + last_failure);
    }
    if (ok) return theta;
  }
  throw CalibrationError("calibration schedule exhausted; last failing pair " + last_failure);
}

}  // namespace flowpack
