#ifndef FLOWPACK_FLOWS_HPP
#define FLOWPACK_FLOWS_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "flowpack/random.hpp"

namespace flowpack {

// State of a built-in flow. `cells` holds the exact discrete part (fixed-point
// torus angles, or a 256-periodic symbol ring) and `height` the position on the
// suspension fiber.
struct Point {
  std::array<std::uint64_t, 4> cells{};
  double height = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Per-point data a system computes distances from. Caching these along an
// orbit makes each metric evaluation in the alignment DP a few flops.
struct Feature {
  std::uint64_t word = 0;
  std::array<double, 5> v{};
};

struct PeriodicOrbit {
  Point start;
  double period;
};

class FlowSystem {
 public:
  virtual ~FlowSystem() = default;

  virtual std::string name() const = 0;
  virtual nlohmann::ordered_json params() const = 0;

  // phi_t(x), normalized into the fundamental domain.
  Point evaluate(const Point& x, double t) const;

  virtual Feature feature(const Point& x) const = 0;
  virtual double distance(const Feature& a, const Feature& b) const = 0;
  // distance(a, b) <= bound, decided with early exits.
  virtual bool within(const Feature& a, const Feature& b, double bound) const {
    return distance(a, b) <= bound;
  }
  double metric(const Point& a, const Point& b) const {
    return distance(feature(a), feature(b));
  }

  virtual double diameter_bound() const = 0;
  double min_displacement() const { return min_displacement_; }

  // Draw from the system's natural invariant measure.
  virtual Point sample(Rng& rng) const = 0;
  // Draw a point within `radius` of x.
  virtual Point sample_near(const Point& x, double radius, Rng& rng) const = 0;
  // Draw from the fiber through `coordinate`: the circle {x = coordinate} on the
  // torus, the cross-section at that height on suspensions.
  virtual Point sample_fiber(double coordinate, Rng& rng) const = 0;
  virtual Point midpoint(const Point& a, const Point& b) const = 0;
  virtual std::optional<PeriodicOrbit> periodic_orbit() const {
    return std::nullopt;
  }

  virtual nlohmann::json to_chart(const Point& x) const = 0;
  virtual Point from_chart(const nlohmann::json& chart) const = 0;

 protected:
  virtual Point advance(const Point& x, double t) const = 0;
  // Runs certify_fixed_point_free on a fixed sample and records the bound.
  void certify_on_samples(std::size_t count = 64);

  double min_displacement_ = 0.0;
};

// Fixed-point angle helpers. Values live on a 2^-53 grid so that they round
// trip exactly through a double.
std::uint64_t to_turns(double x);
double from_turns(std::uint64_t u);

class TorusLinearFlow final : public FlowSystem {
 public:
  TorusLinearFlow(double vx, double vy);

  static Point at(double x, double y);

  std::string name() const override { return "torus-linear"; }
  nlohmann::ordered_json params() const override;
  Feature feature(const Point& x) const override;
  double distance(const Feature& a, const Feature& b) const override;
  bool within(const Feature& a, const Feature& b, double bound) const override;
  double diameter_bound() const override;
  Point sample(Rng& rng) const override;
  Point sample_near(const Point& x, double radius, Rng& rng) const override;
  Point sample_fiber(double coordinate, Rng& rng) const override;
  Point midpoint(const Point& a, const Point& b) const override;
  nlohmann::json to_chart(const Point& x) const override;
  Point from_chart(const nlohmann::json& chart) const override;

  double vx() const { return vx_; }
  double vy() const { return vy_; }

 protected:
  Point advance(const Point& x, double t) const override;

 private:
  double vx_, vy_;
};

// Suspension of the full two-sided 2-shift under a constant roof. The symbol
// sequence is stored as a 256-periodic ring so that the shift is an exact
// rotation; the metric reads the window of radius W around index 0.
class ShiftSuspension final : public FlowSystem {
 public:
  explicit ShiftSuspension(int window = 16, double roof = 1.0,
                           double metric_scale = 8.0);

  static constexpr int kRing = 256;
  static int symbol(const Point& p, int index);
  // Symbols for indices first_index, first_index+1, ...; all others are 0.
  static Point with_symbols(std::span<const int> symbols, int first_index,
                            double height);
  // (sigma^n a)_i = a_{i+n}.
  static Point shifted(const Point& p, long long n);

  std::string name() const override { return "shift-suspension"; }
  nlohmann::ordered_json params() const override;
  Feature feature(const Point& x) const override;
  double distance(const Feature& a, const Feature& b) const override;
  bool within(const Feature& a, const Feature& b, double bound) const override;
  double diameter_bound() const override;
  Point sample(Rng& rng) const override;
  Point sample_near(const Point& x, double radius, Rng& rng) const override;
  Point sample_fiber(double coordinate, Rng& rng) const override;
  Point midpoint(const Point& a, const Point& b) const override;
  std::optional<PeriodicOrbit> periodic_orbit() const override;
  nlohmann::json to_chart(const Point& x) const override;
  Point from_chart(const nlohmann::json& chart) const override;

  int window() const { return window_; }
  double roof() const { return roof_; }
  double metric_scale() const { return scale_; }

 protected:
  Point advance(const Point& x, double t) const override;

 private:
  int window_;
  double roof_;
  double scale_;
};

// Suspension of the cat map A = [[2,1],[1,1]] on the 2-torus under a
// constant roof.
class CatSuspension final : public FlowSystem {
 public:
  explicit CatSuspension(double roof = 1.0, double metric_scale = 8.0);

  static Point at(double u1, double u2, double h);
  // A^n applied to the torus coordinates (n may be negative).
  static Point mapped(const Point& p, long long n);

  std::string name() const override { return "cat-suspension"; }
  nlohmann::ordered_json params() const override;
  Feature feature(const Point& x) const override;
  double distance(const Feature& a, const Feature& b) const override;
  bool within(const Feature& a, const Feature& b, double bound) const override;
  double diameter_bound() const override;
  Point sample(Rng& rng) const override;
  Point sample_near(const Point& x, double radius, Rng& rng) const override;
  Point sample_fiber(double coordinate, Rng& rng) const override;
  Point midpoint(const Point& a, const Point& b) const override;
  std::optional<PeriodicOrbit> periodic_orbit() const override;
  nlohmann::json to_chart(const Point& x) const override;
  Point from_chart(const nlohmann::json& chart) const override;

  double roof() const { return roof_; }
  double metric_scale() const { return scale_; }

 protected:
  Point advance(const Point& x, double t) const override;

 private:
  double roof_;
  double scale_;
};

// {"id": "torus-linear", "direction": [vx, vy]}
// {"id": "shift-suspension", "window": W, "roof": c, "metric_scale": k}
// {"id": "cat-suspension", "roof": c, "metric_scale": k}
std::unique_ptr<FlowSystem> make_system(const nlohmann::json& spec);

struct Trajectory {
  Point base;
  std::vector<double> times;
  std::vector<Point> points;
};

// 0, dt, 2dt, ... up to t, with t itself as the last (possibly shorter) step.
std::vector<double> time_grid(double t, double dt);

Trajectory sample_trajectory(const FlowSystem& system, const Point& x, double t,
                             double dt);

// min over samples of max_{tau in {0.1,...,1.0}} d(phi_tau x, x).
double certify_fixed_point_free(const FlowSystem& system,
                                std::span<const Point> samples);

}  // namespace flowpack

#endif
