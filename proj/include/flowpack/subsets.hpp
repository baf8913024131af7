#ifndef FLOWPACK_SUBSETS_HPP
#define FLOWPACK_SUBSETS_HPP

#include <memory>
#include <string>
#include <vector>

#include "flowpack/flows.hpp"

namespace flowpack {

// A target set K, accessed only through seeded draws.
class Subset {
 public:
  virtual ~Subset() = default;
  virtual std::string id() const = 0;
  virtual std::vector<Point> draw(std::size_t n, Rng& rng) const = 0;
  // Up to n points of K within `radius` of x (x itself need not be in K).
  virtual std::vector<Point> draw_near(const Point& x, double radius, std::size_t n,
                                       Rng& rng) const = 0;
};

class WholeSpace final : public Subset {
 public:
  explicit WholeSpace(const FlowSystem& system) : system_(&system) {}
  std::string id() const override { return "whole"; }
  std::vector<Point> draw(std::size_t n, Rng& rng) const override;
  std::vector<Point> draw_near(const Point& x, double radius, std::size_t n,
                               Rng& rng) const override;

 private:
  const FlowSystem* system_;
};

class Fiber final : public Subset {
 public:
  Fiber(const FlowSystem& system, double coordinate)
      : system_(&system), coordinate_(coordinate) {}
  std::string id() const override;
  std::vector<Point> draw(std::size_t n, Rng& rng) const override;
  std::vector<Point> draw_near(const Point& x, double radius, std::size_t n,
                               Rng& rng) const override;

 private:
  const FlowSystem* system_;
  double coordinate_;
};

// Metric ball of the given radius around a center.
class Neighborhood final : public Subset {
 public:
  Neighborhood(const FlowSystem& system, const Point& center, double radius)
      : system_(&system), center_(center), radius_(radius) {}
  std::string id() const override;
  std::vector<Point> draw(std::size_t n, Rng& rng) const override;
  std::vector<Point> draw_near(const Point& x, double radius, std::size_t n,
                               Rng& rng) const override;
  const Point& center() const { return center_; }

 private:
  const FlowSystem* system_;
  Point center_;
  double radius_;
};

class FiniteSamples final : public Subset {
 public:
  FiniteSamples(const FlowSystem& system, std::vector<Point> points, std::string name)
      : system_(&system), points_(std::move(points)), name_(std::move(name)) {}
  std::string id() const override { return name_; }
  std::vector<Point> draw(std::size_t n, Rng& rng) const override;
  std::vector<Point> draw_near(const Point& x, double radius, std::size_t n,
                               Rng& rng) const override;
  const std::vector<Point>& points() const { return points_; }

 private:
  const FlowSystem* system_;
  std::vector<Point> points_;
  std::string name_;
};

}  // namespace flowpack

#endif
