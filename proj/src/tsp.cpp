#include <algorithm>
#include <cmath>
#include <numeric>

#include "llmap/error.hpp"
#include "llmap/mapping.hpp"

namespace llmap {

namespace {

double dist(const Matrix& p, std::size_t a, std::size_t b) {
  return (p.row(Eigen::Index(a)) - p.row(Eigen::Index(b))).norm();
}

void check_points(const Matrix& points) {
  if (points.rows() < 2) throw DataError("a tour needs at least 2 points");
  if (!points.allFinite()) throw DataError("tour points contain non-finite values");
}

}  // namespace

double tour_length(const Matrix& points, const std::vector<std::size_t>& tour) {
  double total = 0.0;
  for (std::size_t i = 0; i < tour.size(); ++i) total += dist(points, tour[i], tour[(i + 1) % tour.size()]);
  return total;
}

std::vector<std::size_t> nearest_neighbor_tour(const Matrix& points) {
  check_points(points);
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<bool> used(n, false);
  std::vector<std::size_t> tour{0};
  used[0] = true;
  while (tour.size() < n) {
    const std::size_t cur = tour.back();
    std::size_t best = n;
    double best_d = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double dj = dist(points, cur, j);
      if (best == n || dj < best_d) {
        best = j;
        best_d = dj;
      }
    }
    used[best] = true;
    tour.push_back(best);
  }
  return tour;
}

std::vector<std::size_t> two_opt(const Matrix& points, std::vector<std::size_t> tour) {
  check_points(points);
  const std::size_t n = tour.size();
  if (n != static_cast<std::size_t>(points.rows())) throw DataError("tour length does not match point count");
  if (n < 4) return tour;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i + 2 < n && !improved; ++i) {
      for (std::size_t j = i + 2; j < n && !improved; ++j) {
        if (i == 0 && j == n - 1) continue;
        const std::size_t a = tour[i], b = tour[i + 1], c = tour[j], d = tour[(j + 1) % n];
        const double delta = dist(points, a, c) + dist(points, b, d) - dist(points, a, b) - dist(points, c, d);
        if (delta < -1e-12) {
          std::reverse(tour.begin() + static_cast<std::ptrdiff_t>(i + 1),
                       tour.begin() + static_cast<std::ptrdiff_t>(j + 1));
          improved = true;
        }
      }
    }
  }
  return tour;
}

std::vector<std::size_t> tsp_hue_order(const Matrix& points) {
  return two_opt(points, nearest_neighbor_tour(points));
}

std::vector<double> tour_hues(const std::vector<std::size_t>& tour) {
  std::vector<double> hues(tour.size());
  const double n = static_cast<double>(tour.size());
  for (std::size_t pos = 0; pos < tour.size(); ++pos) hues[tour[pos]] = 360.0 * static_cast<double>(pos) / n;
  return hues;
}

}  // namespace llmap
