#include "areid/dbscan.hpp"

#include <deque>
#include <stdexcept>

namespace areid {

namespace {
constexpr int kUnvisited = -2;
}

std::vector<int> Dbscan(std::size_t point_count, const RegionQuery& region_query,
                        std::size_t min_pts) {
  std::vector<int> labels(point_count, kUnvisited);
  int next_cluster = 0;
  for (std::size_t p = 0; p < point_count; ++p) {
    if (labels[p] != kUnvisited) continue;
    const auto neighbours = region_query(p);
    if (neighbours.size() < min_pts) {
      labels[p] = kDbscanNoise;
      continue;
    }
    const int cluster = next_cluster++;
    labels[p] = cluster;
    std::deque<std::size_t> seeds(neighbours.begin(), neighbours.end());
    while (!seeds.empty()) {
      const std::size_t q = seeds.front();
      seeds.pop_front();
      if (labels[q] == kDbscanNoise) labels[q] = cluster;  // border point
      if (labels[q] != kUnvisited) continue;
      labels[q] = cluster;
      const auto reach = region_query(q);
      if (reach.size() >= min_pts) seeds.insert(seeds.end(), reach.begin(), reach.end());
    }
  }
  return labels;
}

std::vector<int> Dbscan(std::span<const double> distances, std::size_t n,
                        const DbscanParams& params) {
  if (distances.size() != n * n) throw std::invalid_argument("distance matrix must be n×n");
  return Dbscan(
      n,
      [&](std::size_t p) {
        std::vector<std::size_t> out;
        for (std::size_t q = 0; q < n; ++q) {
          if (distances[p * n + q] <= params.eps) out.push_back(q);
        }
        return out;
      },
      params.min_pts);
}

}  // namespace areid
