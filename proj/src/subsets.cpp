#include "flowpack/subsets.hpp"

#include <sstream>

namespace flowpack {

namespace {

constexpr int kRejectionTries = 64;

}  // namespace

std::vector<Point> WholeSpace::draw(std::size_t n, Rng& rng) const {
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(system_->sample(rng));
  return out;
}

std::vector<Point> WholeSpace::draw_near(const Point& x, double radius, std::size_t n,
                                         Rng& rng) const {
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(system_->sample_near(x, radius, rng));
  return out;
}

std::string Fiber::id() const {
  std::ostringstream os;
  os << "fiber@" << coordinate_;
  return os.str();
}

std::vector<Point> Fiber::draw(std::size_t n, Rng& rng) const {
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(system_->sample_fiber(coordinate_, rng));
  return out;
}

// Projects nearby draws back onto the fiber by re-sampling the fiber
// coordinate and keeping those still within radius.
std::vector<Point> Fiber::draw_near(const Point& x, double radius, std::size_t n,
                                    Rng& rng) const {
  std::vector<Point> out;
  Point anchor = system_->sample_fiber(coordinate_, rng);
  for (std::size_t k = 0; k < n; ++k) {
    for (int attempt = 0; attempt < kRejectionTries; ++attempt) {
      Point y = system_->sample_near(x, radius, rng);
      if (system_->name() == "torus-linear") y.cells[0] = anchor.cells[0];
      else y.height = anchor.height;
      if (system_->metric(x, y) <= radius) {
        out.push_back(y);
        break;
      }
    }
  }
  return out;
}

std::string Neighborhood::id() const {
  std::ostringstream os;
  os << "neighborhood@" << system_->to_chart(center_).dump() << "/" << radius_;
  return os.str();
}

std::vector<Point> Neighborhood::draw(std::size_t n, Rng& rng) const {
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(system_->sample_near(center_, radius_, rng));
  return out;
}

std::vector<Point> Neighborhood::draw_near(const Point& x, double radius, std::size_t n,
                                           Rng& rng) const {
  std::vector<Point> out;
  for (std::size_t k = 0; k < n; ++k)
    for (int attempt = 0; attempt < kRejectionTries; ++attempt) {
      Point y = system_->sample_near(x, radius, rng);
      if (system_->metric(center_, y) <= radius_) {
        out.push_back(y);
        break;
      }
    }
  return out;
}

std::vector<Point> FiniteSamples::draw(std::size_t n, Rng& rng) const {
  if (n >= points_.size()) return points_;
  auto idx = shuffled_indices(points_.size(), rng);
  std::vector<Point> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(points_[idx[k]]);
  return out;
}

std::vector<Point> FiniteSamples::draw_near(const Point& x, double radius, std::size_t n,
                                            Rng& rng) const {
  std::vector<Point> near;
  for (const Point& p : points_)
    if (system_->metric(x, p) <= radius) near.push_back(p);
  if (near.size() <= n) return near;
  auto idx = shuffled_indices(near.size(), rng);
  std::vector<Point> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(near[idx[k]]);
  return out;
}

}  // namespace flowpack
