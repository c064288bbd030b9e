#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fairaudit::detail {

struct SimplexResult {
  std::vector<double> flow;  // row-major rows x cols
  double objective = 0.0;
  std::size_t iterations = 0;
  double unmet_mass = 0.0;  // flow left on artificial arcs
};

/// Primal network simplex for the uncapacitated bipartite transportation
/// problem. Infinite costs mark forbidden arcs. Supplies and demands must be
/// nonnegative with equal totals.
SimplexResult network_simplex_transport(std::size_t rows, std::size_t cols, std::span<const double> cost,
                                        std::span<const double> supply, std::span<const double> demand,
                                        std::size_t max_iterations);

}  // namespace fairaudit::detail
