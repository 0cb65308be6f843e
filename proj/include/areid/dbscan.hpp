#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace areid {

struct DbscanParams {
  double eps = 0.01;
  std::size_t min_pts = 2;
};

inline constexpr int kDbscanNoise = -1;

// Returns the eps-neighbourhood of a point, the point itself included.
using RegionQuery = std::function<std::vector<std::size_t>(std::size_t)>;

// Classic DBSCAN. Points are visited in index order, so cluster labels are
// numbered by their lowest core point. Returns one label per point, or
// kDbscanNoise.
std::vector<int> Dbscan(std::size_t point_count, const RegionQuery& region_query,
                        std::size_t min_pts);

// DBSCAN over a dense row-major n×n distance matrix.
std::vector<int> Dbscan(std::span<const double> distances, std::size_t n,
                        const DbscanParams& params);

}  // namespace areid
