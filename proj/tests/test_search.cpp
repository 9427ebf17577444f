#include <doctest.h>

#include <algorithm>
#include <limits>

#include "mips/error.hpp"
#include "mips/oracle.hpp"
#include "mips/search.hpp"
#include "support.hpp"

using namespace mips;
using mips::test::gaussian;
using mips::test::make;

namespace {

void require_same(const std::vector<std::vector<Neighbor>>& expected, const std::vector<std::vector<Neighbor>>& got) {
    const auto mismatch = oracle::compare_results(expected, got);
    if (mismatch) FAIL("query " << mismatch->query << " rank " << mismatch->rank << ": " << mismatch->reason);
}

std::vector<std::vector<Neighbor>> per_query_linear(const Dataset& queries, const Dataset& refs, std::size_t k) {
    std::vector<std::vector<Neighbor>> out;
    for (std::size_t i = 0; i < queries.size(); ++i) out.push_back(linear_search(queries.row(i), refs, k).candidates());
    return out;
}

}  // namespace

TEST_CASE("query state keeps the k best with ties to the smaller id") {
    QueryState s(2);
    CHECK(s.lambda() == -std::numeric_limits<double>::infinity());
    s.offer(5, 1.0);
    CHECK(s.lambda() == -std::numeric_limits<double>::infinity());
    s.offer(3, 1.0);
    CHECK(s.lambda() == 1.0);
    CHECK(s.candidates()[0].id == 3);
    CHECK_FALSE(s.offer(7, 1.0));
    CHECK(s.offer(1, 1.0));
    CHECK(s.candidates()[0].id == 1);
    CHECK(s.candidates()[1].id == 3);
    s.offer(9, 2.0);
    CHECK(s.candidates()[0].id == 9);
    CHECK(s.lambda() == 1.0);
}

TEST_CASE("query state threshold never decreases") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (std::size_t k : {1u, 3u, 10u}) {
        QueryState s(k);
        double last = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < 500; ++i) {
            s.offer(i, g(rng));
            CHECK(s.lambda() >= last);
            last = s.lambda();
            CHECK(std::is_sorted(s.candidates().begin(), s.candidates().end(), ranks_before));
        }
    }
}

TEST_CASE("linear search on a three point set") {
    const Dataset refs = make(3, 2, {1, 0, 0, 1, 1, 1});
    const std::vector<double> q{2, 1};
    const QueryState s = linear_search(q, refs, 1);
    REQUIRE(s.candidates().size() == 1);
    CHECK(s.candidates()[0].id == 2);
    CHECK(s.candidates()[0].value == 3.0);

    const QueryState all = linear_search(q, refs, 3);
    CHECK(all.candidates()[0].id == 2);
    CHECK(all.candidates()[1].id == 0);
    CHECK(all.candidates()[2].id == 1);
}

TEST_CASE("linear search rejects k outside [1, N] and counts N products") {
    const Dataset refs = gaussian(20, 3, 1);
    const std::vector<double> q{1, 2, 3};
    CHECK_THROWS_AS(linear_search(q, refs, 0), ContractViolation);
    CHECK_THROWS_AS(linear_search(q, refs, 21), ContractViolation);
    SearchCounters c;
    linear_search(q, refs, 4, &c);
    CHECK(c.point_evals == 20);
}

TEST_CASE("linear search matches the full-sort oracle") {
    const Dataset refs = gaussian(500, 10, 2);
    const Dataset queries = gaussian(20, 10, 3);
    require_same(oracle::brute_force_topk(queries, refs, 5).results, per_query_linear(queries, refs, 5));
}

TEST_CASE("single-tree search equals linear search") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset refs = gaussian(800, 6, seed, 0.5);
        const Dataset queries = gaussian(15, 6, seed + 100);
        Rng rng(seed);
        const BallTree tree = build_ball_tree(refs, 10, rng);
        for (std::size_t k : {1u, 2u, 5u, 10u}) {
            const SearchReport r = find_exact_maxip(queries, tree, k);
            require_same(per_query_linear(queries, refs, k), r.results);
        }
    }
}

TEST_CASE("single-leaf tree degenerates to a scan with no pruning") {
    const Dataset refs = gaussian(15, 4, 7);
    Rng rng(1);
    const BallTree tree = build_ball_tree(refs, 20, rng);
    SearchCounters c;
    const std::vector<double> q{1, -1, 0.5, 2};
    const QueryState s = single_tree_search(q, tree, 3, &c);
    CHECK(c.nodes_pruned == 0);
    CHECK(c.point_evals == 15);
    CHECK(s.candidates() == linear_search(q, refs, 3).candidates());
}

TEST_CASE("threaded single-tree search gives the same report") {
    const Dataset refs = gaussian(2000, 8, 11, 0.3);
    const Dataset queries = gaussian(40, 8, 12);
    Rng rng(5);
    const BallTree tree = build_ball_tree(refs, 20, rng);
    SearchOptions one;
    SearchOptions four;
    four.threads = 4;
    const SearchReport a = find_exact_maxip(queries, tree, 3, one);
    const SearchReport b = find_exact_maxip(queries, tree, 3, four);
    CHECK(a.results == b.results);
    CHECK(a.counters.point_evals == b.counters.point_evals);
    CHECK(a.counters.nodes_pruned == b.counters.nodes_pruned);
    CHECK(b.threads == 4);
}

TEST_CASE("dimension mismatch is a contract violation") {
    const Dataset refs = gaussian(50, 4, 1);
    const Dataset queries = gaussian(5, 3, 2);
    Rng rng(1);
    const BallTree tree = build_ball_tree(refs, 10, rng);
    CHECK_THROWS_AS(find_exact_maxip(queries, tree, 1), ContractViolation);
    CHECK_THROWS_AS(dual_ball_search(queries, tree, 1, 10, rng, {BoundKind::thm2}), ContractViolation);
    CHECK_THROWS_AS(dual_cone_search(queries, tree, 1, 10, rng, {BoundKind::thm3}), ContractViolation);
}

TEST_CASE("bounds incompatible with the traversal are rejected") {
    const Dataset refs = gaussian(50, 4, 1);
    const Dataset queries = gaussian(5, 4, 2);
    Rng rng(1);
    const BallTree tree = build_ball_tree(refs, 10, rng);
    CHECK_THROWS_AS(dual_ball_search(queries, tree, 1, 10, rng, {BoundKind::thm3}), ContractViolation);
    CHECK_THROWS_AS(dual_cone_search(queries, tree, 1, 10, rng, {BoundKind::thm2}), ContractViolation);
    CHECK_THROWS_AS(find_exact_maxip(queries, tree, 1, {BoundKind::thm2}), ContractViolation);
}

TEST_CASE("dual-tree searches equal linear search for every bound") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Dataset refs = gaussian(700, 5, seed, 0.4);
        const Dataset queries = gaussian(120, 5, seed + 50, 0.2);
        Rng rng(seed);
        const BallTree tree = build_ball_tree(refs, 12, rng);
        for (std::size_t k : {1u, 5u}) {
            const auto expected = per_query_linear(queries, refs, k);
            for (BoundKind b : {BoundKind::thm2, BoundKind::opt2, BoundKind::opt1}) {
                CAPTURE(to_string(b));
                require_same(expected, dual_ball_search(queries, tree, k, 8, rng, {b}).results);
            }
            for (BoundKind b : {BoundKind::thm3, BoundKind::opt1}) {
                CAPTURE(to_string(b));
                require_same(expected, dual_cone_search(queries, tree, k, 8, rng, {b}).results);
            }
        }
    }
}

TEST_CASE("top-1 is the first entry of top-5") {
    const Dataset refs = gaussian(600, 4, 21, 0.2);
    const Dataset queries = gaussian(30, 4, 22);
    Rng rng(3);
    const BallTree tree = build_ball_tree(refs, 20, rng);
    const SearchReport one = dual_ball_search(queries, tree, 1, 10, rng, {BoundKind::thm2});
    const SearchReport five = dual_ball_search(queries, tree, 5, 10, rng, {BoundKind::thm2});
    for (std::size_t i = 0; i < queries.size(); ++i) CHECK(one.results[i][0] == five.results[i][0]);
}

TEST_CASE("identical queries prune like the single-tree search") {
    const Dataset refs = gaussian(900, 5, 31, 0.3);
    std::vector<double> row{0.3, -1.0, 2.0, 0.1, 0.7};
    std::vector<double> values;
    for (int i = 0; i < 25; ++i) values.insert(values.end(), row.begin(), row.end());
    const Dataset queries(25, 5, values);
    Rng rng(2);
    const BallTree tree = build_ball_tree(refs, 10, rng);
    const SearchReport dual = dual_ball_search(queries, tree, 3, 5, rng, {BoundKind::thm2});
    const QueryState single = single_tree_search(row, tree, 3);
    for (const auto& r : dual.results) CHECK(r == single.candidates());
}

TEST_CASE("every pruned node held nothing better than the threshold") {
    const Dataset refs = gaussian(1500, 6, 41, 0.5);
    const Dataset queries = gaussian(60, 6, 42, 0.1);
    Rng rng(4);
    const BallTree tree = build_ball_tree(refs, 15, rng);
    auto node_max = [&](std::size_t n, Vector q) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = tree.node(n).begin; j < tree.node(n).end; ++j)
            best = std::max(best, dot(q, tree.data().row(j)));
        return best;
    };

    SearchOptions single;
    single.record_prunes = true;
    const SearchReport s = find_exact_maxip(queries, tree, 3, single);
    REQUIRE_FALSE(s.prunes.empty());
    for (const PruneRecord& p : s.prunes) {
        const Vector q = queries.row(static_cast<std::size_t>(p.query));
        CHECK(node_max(p.ref_node, q) <= p.lambda);
    }

    // Dual prunes: replay against every query under the query node. The
    // recorded threshold is the node's minimum over its queries, so each
    // query's own k-th value at that time was at least as large.
    SearchOptions dual{BoundKind::thm2};
    dual.record_prunes = true;
    Rng qrng(9);
    const BallTree qtree = build_ball_tree(queries, 6, qrng);
    const SearchReport d = dual_tree_search(qtree, tree, 3, dual);
    REQUIRE_FALSE(d.prunes.empty());
    for (const PruneRecord& p : d.prunes) {
        const BallNode& qn = qtree.node(static_cast<std::size_t>(p.query_node));
        for (std::size_t i = qn.begin; i < qn.end; ++i) CHECK(node_max(p.ref_node, qtree.data().row(i)) <= p.lambda);
    }
}

TEST_CASE("dual-tree node thresholds are the minimum over their queries") {
    const Dataset refs = gaussian(800, 4, 51, 0.2);
    const Dataset queries = gaussian(100, 4, 52);
    Rng rng(6);
    const BallTree tree = build_ball_tree(refs, 10, rng);
    const BallTree qtree = build_ball_tree(queries, 7, rng);
    const SearchReport r = dual_tree_search(qtree, tree, 2, {BoundKind::thm2});
    REQUIRE(r.node_lambdas.size() == qtree.nodes().size());
    // The root's final threshold is the smallest final k-th value.
    double min_kth = std::numeric_limits<double>::infinity();
    for (const auto& res : r.results) min_kth = std::min(min_kth, res.back().value);
    CHECK(r.node_lambdas[0] == doctest::Approx(min_kth));
    for (std::size_t i = 0; i < qtree.nodes().size(); ++i) {
        const BallNode& n = qtree.node(i);
        if (n.is_leaf()) continue;
        CHECK(r.node_lambdas[i] ==
              std::min(r.node_lambdas[static_cast<std::size_t>(n.left)], r.node_lambdas[static_cast<std::size_t>(n.right)]));
    }
}

TEST_CASE("dual-cone answers zero queries by the fallback") {
    const Dataset refs = gaussian(300, 3, 61, 0.5);
    const Dataset queries = make(3, 3, {1, 2, 3, 0, 0, 0, -1, 0, 2});
    Rng rng(1);
    const BallTree tree = build_ball_tree(refs, 10, rng);
    const SearchReport r = dual_cone_search(queries, tree, 2, 5, rng, {BoundKind::thm3});
    REQUIRE(r.fallback_queries == std::vector<std::size_t>{1});
    CHECK(r.results[1] == std::vector<Neighbor>{{0, 0.0}, {1, 0.0}});
    // The fallback agrees with the oracle: every product is 0 and ids tie-break.
    const auto expected = oracle::brute_force_topk(queries, refs, 2).results;
    require_same(expected, r.results);
}

TEST_CASE("dual-cone reports values of the unnormalized queries") {
    const Dataset refs = gaussian(400, 4, 71, 0.3);
    const Dataset queries = gaussian(50, 4, 72, 1.0);
    Rng rng(2);
    const BallTree tree = build_ball_tree(refs, 10, rng);
    const SearchReport r = dual_cone_search(queries, tree, 4, 6, rng, {BoundKind::thm3});
    require_same(oracle::brute_force_topk(queries, refs, 4).results, r.results);
}

TEST_CASE("linear search over all queries counts N per query") {
    const Dataset refs = gaussian(123, 3, 81);
    const Dataset queries = gaussian(7, 3, 82);
    const SearchReport r = linear_search_all(queries, refs, 2, 3);
    CHECK(r.counters.point_evals == 123u * 7u);
    require_same(oracle::brute_force_topk(queries, refs, 2).results, r.results);
}
