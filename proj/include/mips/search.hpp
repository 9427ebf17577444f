#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "mips/ball_tree.hpp"
#include "mips/bounds.hpp"
#include "mips/cone_tree.hpp"
#include "mips/dataset.hpp"

namespace mips {

struct Neighbor {
    std::size_t id = 0;
    double value = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Ranking order: larger value first, then smaller id.
inline bool ranks_before(const Neighbor& a, const Neighbor& b) noexcept {
    return a.value > b.value || (a.value == b.value && a.id < b.id);
}

/// Bounded best-k list for one query. `lambda()` is the k-th best value so
/// far and -inf until k candidates have been seen.
class QueryState {
public:
    explicit QueryState(std::size_t k);

    /// Returns true if the candidate entered the list.
    bool offer(std::size_t id, double value);

    double lambda() const noexcept {
        return candidates_.size() == k_ ? candidates_.back().value : -std::numeric_limits<double>::infinity();
    }
    std::size_t k() const noexcept { return k_; }
    const std::vector<Neighbor>& candidates() const noexcept { return candidates_; }

private:
    std::size_t k_;
    std::vector<Neighbor> candidates_;
};

struct SearchCounters {
    std::uint64_t point_evals = 0;  // inner products against reference points
    std::uint64_t bound_evals = 0;  // MIP bound computations
    std::uint64_t nodes_visited = 0;
    std::uint64_t nodes_pruned = 0;

    SearchCounters& operator+=(const SearchCounters& o) noexcept {
        point_evals += o.point_evals;
        bound_evals += o.bound_evals;
        nodes_visited += o.nodes_visited;
        nodes_pruned += o.nodes_pruned;
        return *this;
    }
};

/// One pruned (query region, reference node) pair with the threshold that
/// justified it. For single-tree search `query` is the query row and
/// `query_node` is -1; for dual-tree search it is the other way round.
struct PruneRecord {
    std::int64_t query = -1;
    std::int64_t query_node = -1;
    std::size_t ref_node = 0;
    double lambda = 0.0;
    double bound = 0.0;
};

struct SearchOptions {
    BoundKind bound = BoundKind::thm1;
    unsigned threads = 1;
    bool record_prunes = false;
    OptimizerSettings optimizer{};
};

struct SearchReport {
    // results[i] is the top-k of query row i, best first; ids are original
    // reference ids.
    std::vector<std::vector<Neighbor>> results;
    SearchCounters counters;
    double seconds = 0.0;        // traversal only
    double build_seconds = 0.0;  // trees built by the call itself
    unsigned threads = 1;
    // Queries answered without search (zero direction).
    std::vector<std::size_t> fallback_queries;
    // Cone nodes whose half-aperture exceeds pi/2.
    std::size_t wide_cones = 0;
    std::vector<PruneRecord> prunes;
    // Query-node thresholds left after a dual-tree traversal, by query node.
    std::vector<double> node_lambdas;
};

QueryState linear_search(Vector q, const Dataset& refs, std::size_t k, SearchCounters* counters = nullptr);

QueryState single_tree_search(Vector q, const BallTree& tree, std::size_t k, SearchCounters* counters = nullptr,
                              std::vector<PruneRecord>* prunes = nullptr, std::int64_t query_row = -1);

SearchReport linear_search_all(const Dataset& queries, const Dataset& refs, std::size_t k, unsigned threads = 1);

SearchReport find_exact_maxip(const Dataset& queries, const BallTree& tree, std::size_t k,
                              const SearchOptions& options = {});

/// Ball query tree. Query tree ids must be the query row positions
/// 0..M-1; results are indexed by them.
SearchReport dual_tree_search(const BallTree& qtree, const BallTree& rtree, std::size_t k,
                              const SearchOptions& options);

/// Cone query tree over the directions of `queries`. Zero queries listed in
/// `qtree.zero_rows` are answered with reference ids 0..k-1 at value 0.
/// Reported values are recomputed against the original query vectors.
SearchReport dual_tree_search(const QueryConeTree& qtree, const Dataset& queries, const BallTree& rtree,
                              std::size_t k, const SearchOptions& options);

/// Builds the query tree (ball or cone) and runs the dual traversal.
SearchReport dual_ball_search(const Dataset& queries, const BallTree& rtree, std::size_t k, std::size_t leaf_size,
                              Rng& rng, const SearchOptions& options);
SearchReport dual_cone_search(const Dataset& queries, const BallTree& rtree, std::size_t k, std::size_t leaf_size,
                              Rng& rng, const SearchOptions& options);

}  // namespace mips
