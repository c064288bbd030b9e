// Primal network simplex on the complete bipartite graph rows -> cols plus
// an artificial root. The spanning tree is kept strongly feasible (leaving
// arc = last blocking arc along the cycle orientation) which rules out
// cycling on degenerate pivots. Entering arcs use block-search pricing.

#include "network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fairaudit/errors.hpp"

namespace fairaudit::detail {

namespace {

class TransportSimplex {
 public:
  TransportSimplex(std::size_t rows, std::size_t cols, std::span<const double> cost, std::span<const double> supply,
                   std::span<const double> demand)
      : m_(rows), n_(cols), nodes_(rows + cols), root_(rows + cols), real_arcs_(rows * cols), cost_(cost) {
    double max_cost = 0.0;
    for (double c : cost_)
      if (std::isfinite(c)) max_cost = std::max(max_cost, c);
    max_cost_ = max_cost;
    artificial_cost_ = (max_cost + 1.0) * static_cast<double>(nodes_ + 1);
    epsilon_ = 1e-14 * (1.0 + max_cost) * static_cast<double>(std::max<std::size_t>(nodes_, 100));

    flow_.assign(real_arcs_ + nodes_, 0.0);
    artificial_up_.assign(nodes_, 0);
    parent_.assign(nodes_ + 1, kNone);
    parent_arc_.assign(nodes_ + 1, kNone);
    depth_.assign(nodes_ + 1, 0);
    pi_.assign(nodes_ + 1, 0.0);
    adjacency_.assign(nodes_ + 1, {});

    for (std::size_t k = 0; k < nodes_; ++k) {
      const double amount = k < m_ ? supply[k] : demand[k - m_];
      const std::size_t arc = real_arcs_ + k;
      // Positive supply flows node -> root; everything else root -> node so
      // zero-flow tree arcs point away from the root.
      artificial_up_[k] = (k < m_ && amount > 0.0) ? 1 : 0;
      flow_[arc] = amount;
      parent_[k] = root_;
      parent_arc_[k] = arc;
      depth_[k] = 1;
      pi_[k] = artificial_up_[k] ? artificial_cost_ : -artificial_cost_;
      adjacency_[k].push_back(arc);
      adjacency_[root_].push_back(arc);
    }
  }

  SimplexResult run(std::size_t max_iterations) {
    const std::size_t block =
        std::max<std::size_t>(10, static_cast<std::size_t>(std::sqrt(static_cast<double>(real_arcs_))));
    std::size_t iterations = 0;
    for (;;) {
      const std::size_t entering = find_entering(block);
      if (entering == kNone) break;
      if (iterations >= max_iterations)
        throw EstimationError("transport solver did not converge after " + std::to_string(iterations) +
                              " pivots (objective so far " + std::to_string(real_objective()) + ")");
      pivot(entering);
      ++iterations;
    }

    SimplexResult result;
    result.iterations = iterations;
    result.flow.assign(flow_.begin(), flow_.begin() + static_cast<std::ptrdiff_t>(real_arcs_));
    for (auto& f : result.flow)
      if (f < 0.0) f = 0.0;
    for (std::size_t k = 0; k < nodes_; ++k) result.unmet_mass += std::abs(flow_[real_arcs_ + k]);
    result.objective = real_objective();
    return result;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t source(std::size_t arc) const {
    if (arc < real_arcs_) return arc / n_;
    const std::size_t k = arc - real_arcs_;
    return artificial_up_[k] ? k : root_;
  }

  std::size_t target(std::size_t arc) const {
    if (arc < real_arcs_) return m_ + arc % n_;
    const std::size_t k = arc - real_arcs_;
    return artificial_up_[k] ? root_ : k;
  }

  double arc_cost(std::size_t arc) const { return arc < real_arcs_ ? cost_[arc] : artificial_cost_; }

  double real_objective() const {
    double total = 0.0;
    for (std::size_t a = 0; a < real_arcs_; ++a)
      if (flow_[a] > 0.0) total += flow_[a] * cost_[a];
    return total;
  }

  std::size_t find_entering(std::size_t block) {
    std::size_t best = kNone;
    double best_rc = -epsilon_;
    std::size_t counted = 0;
    std::size_t i = next_arc_ / n_, j = next_arc_ % n_;
    for (std::size_t step = 0; step < real_arcs_; ++step) {
      const std::size_t arc = i * n_ + j;
      const double c = cost_[arc];
      if (std::isfinite(c)) {
        const double rc = c - pi_[i] + pi_[m_ + j];
        if (rc < best_rc) {
          best_rc = rc;
          best = arc;
        }
      }
      if (++j == n_) {
        j = 0;
        if (++i == m_) i = 0;
      }
      if (++counted == block) {
        counted = 0;
        if (best != kNone) break;
      }
    }
    next_arc_ = i * n_ + j;
    return best;
  }

  void pivot(std::size_t entering) {
    const std::size_t s = source(entering);
    const std::size_t t = target(entering);

    std::size_t u = s, v = t;
    while (u != v) {
      if (depth_[u] > depth_[v]) {
        u = parent_[u];
      } else if (depth_[v] > depth_[u]) {
        v = parent_[v];
      } else {
        u = parent_[u];
        v = parent_[v];
      }
    }
    const std::size_t join = u;

    // Flow runs join -> ... -> s -> t -> ... -> join. Blocking arcs are tree
    // arcs traversed against their orientation.
    double delta = std::numeric_limits<double>::infinity();
    std::size_t leaving = kNone;
    int side = 0;
    for (std::size_t x = s; x != join; x = parent_[x]) {
      const std::size_t e = parent_arc_[x];
      if (source(e) == x && flow_[e] < delta) {
        delta = flow_[e];
        leaving = x;
        side = 1;
      }
    }
    for (std::size_t x = t; x != join; x = parent_[x]) {
      const std::size_t e = parent_arc_[x];
      if (target(e) == x && flow_[e] <= delta) {
        delta = flow_[e];
        leaving = x;
        side = 2;
      }
    }
    if (leaving == kNone) throw EstimationError("transport problem is unbounded");

    if (delta > 0.0) {
      flow_[entering] += delta;
      for (std::size_t x = s; x != join; x = parent_[x]) {
        const std::size_t e = parent_arc_[x];
        flow_[e] += source(e) == x ? -delta : delta;
      }
      for (std::size_t x = t; x != join; x = parent_[x]) {
        const std::size_t e = parent_arc_[x];
        flow_[e] += target(e) == x ? -delta : delta;
      }
    }

    const std::size_t out_arc = parent_arc_[leaving];
    const std::size_t out_parent = parent_[leaving];
    erase_adjacent(leaving, out_arc);
    erase_adjacent(out_parent, out_arc);
    adjacency_[s].push_back(entering);
    adjacency_[t].push_back(entering);
    if (side == 1)
      rehang(s, t, entering);
    else
      rehang(t, s, entering);
  }

  void erase_adjacent(std::size_t node, std::size_t arc) {
    auto& list = adjacency_[node];
    auto it = std::find(list.begin(), list.end(), arc);
    *it = list.back();
    list.pop_back();
  }

  void set_child(std::size_t child, std::size_t parent, std::size_t arc) {
    parent_[child] = parent;
    parent_arc_[child] = arc;
    depth_[child] = depth_[parent] + 1;
    // Tree arcs have zero reduced cost: c - pi(source) + pi(target) = 0.
    if (source(arc) == parent)
      pi_[child] = pi_[parent] - arc_cost(arc);
    else
      pi_[child] = pi_[parent] + arc_cost(arc);
  }

  // Re-roots the subtree containing `node` under `new_parent` via `arc`.
  void rehang(std::size_t node, std::size_t new_parent, std::size_t arc) {
    stack_.clear();
    set_child(node, new_parent, arc);
    stack_.push_back(node);
    while (!stack_.empty()) {
      const std::size_t x = stack_.back();
      stack_.pop_back();
      for (std::size_t e : adjacency_[x]) {
        if (e == parent_arc_[x]) continue;
        const std::size_t y = source(e) == x ? target(e) : source(e);
        set_child(y, x, e);
        stack_.push_back(y);
      }
    }
  }

  std::size_t m_, n_, nodes_, root_, real_arcs_;
  std::span<const double> cost_;
  double max_cost_ = 0.0;
  double artificial_cost_ = 0.0;
  double epsilon_ = 0.0;
  std::size_t next_arc_ = 0;

  std::vector<double> flow_;
  std::vector<char> artificial_up_;
  std::vector<std::size_t> parent_, parent_arc_, depth_;
  std::vector<double> pi_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<std::size_t> stack_;
};

}  // namespace

SimplexResult network_simplex_transport(std::size_t rows, std::size_t cols, std::span<const double> cost,
                                        std::span<const double> supply, std::span<const double> demand,
                                        std::size_t max_iterations) {
  TransportSimplex solver(rows, cols, cost, supply, demand);
  return solver.run(max_iterations);
}

}  // namespace fairaudit::detail
