#include <doctest.h>

#include <cmath>

#include "mips/error.hpp"
#include "mips/oracle.hpp"
#include "support.hpp"

using namespace mips;
using mips::test::make;

TEST_CASE("brute force breaks ties by id") {
    const Dataset refs = make(2, 2, {1, 0, 0, 1});
    const Dataset q = make(1, 2, {1, 1});
    const auto r = oracle::brute_force_topk(q, refs, 2);
    REQUIRE(r.results[0].size() == 2);
    CHECK(r.results[0][0] == Neighbor{0, 1.0});
    CHECK(r.results[0][1] == Neighbor{1, 1.0});
    CHECK(r.inner_products == 2);
}

TEST_CASE("top value is the largest entry of q^T M") {
    const Dataset refs = test::gaussian(40, 3, 1);
    const Dataset q = test::gaussian(5, 3, 2);
    const auto r = oracle::brute_force_topk(q, refs, 1);
    for (std::size_t i = 0; i < 5; ++i) {
        double m = -INFINITY;
        for (std::size_t j = 0; j < 40; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < 3; ++c) s += q.row(i)[c] * refs.row(j)[c];
            m = std::max(m, s);
        }
        CHECK(r.results[i][0].value == m);
    }
}

TEST_CASE("sort and selection paths agree") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Dataset refs = test::gaussian(150, 4, seed);
        const Dataset q = test::gaussian(10, 4, seed + 99);
        const auto a = oracle::brute_force_topk(q, refs, 7);
        const auto b = oracle::brute_force_topk_selection(q, refs, 7);
        CHECK(a.results == b.results);
        CHECK(a.inner_products == b.inner_products);
    }
    // Heavy ties: integer grid values.
    const Dataset refs = make(6, 1, {1, 2, 2, 1, 2, 0});
    const Dataset q = make(1, 1, {1});
    CHECK(oracle::brute_force_topk(q, refs, 4).results == oracle::brute_force_topk_selection(q, refs, 4).results);
}

TEST_CASE("oracle contract errors") {
    const Dataset refs = test::gaussian(3, 2, 1);
    CHECK_THROWS_AS(oracle::brute_force_topk(refs, refs, 4), ContractViolation);
    CHECK_THROWS_AS(oracle::brute_force_topk(test::gaussian(1, 3, 1), refs, 1), ContractViolation);
    CHECK_THROWS_AS(oracle::brute_force_kernel_topk(KernelSpec::linear(), refs, refs, 0), ContractViolation);
}

TEST_CASE("linear Gram brute force equals the inner-product brute force") {
    const Dataset refs = test::gaussian(90, 3, 4);
    const Dataset q = test::gaussian(8, 3, 5);
    CHECK(oracle::brute_force_kernel_topk(KernelSpec::linear(), q, refs, 3).results ==
          oracle::brute_force_topk(q, refs, 3).results);
}

TEST_CASE("result comparison reports the first difference") {
    std::vector<std::vector<Neighbor>> a{{{1, 2.0}, {0, 1.0}}};
    auto b = a;
    CHECK_FALSE(oracle::compare_results(a, b));
    b[0][1].value = 1.0 + 1e-12;
    CHECK_FALSE(oracle::compare_results(a, b));
    b[0][1].value = 1.0 + 1e-6;
    CHECK(oracle::compare_results(a, b)->rank == 1);
    b = a;
    b[0][0].id = 5;
    CHECK(oracle::compare_results(a, b)->rank == 0);
}

TEST_CASE("audit passes sound bounds and catches corrupted ones") {
    const std::vector<double> q{0.5, -1.0, 2.0};
    const std::vector<double> c{1.0, 1.0, 0.0};
    const double r = 0.8;
    const double qn = norm(q);
    const double bound = mip_point_ball(q, qn, c, r);
    const auto good = oracle::audit_bound(bound, oracle::point_ball_sampler(q, c, r), 100000, 3);
    CHECK(good.passed);
    CHECK(good.checked == 100000);
    CHECK_FALSE(good.witness);

    const auto bad = oracle::audit_bound(bound - 2.0 * r * qn, oracle::point_ball_sampler(q, c, r), 100000, 3);
    CHECK_FALSE(bad.passed);
    REQUIRE(bad.witness);
    CHECK(dot(bad.witness->q, bad.witness->p) == bad.witness_value);
    CHECK(bad.witness_value > bound - 2.0 * r * qn);
}

TEST_CASE("zero-radius ball is checked exactly") {
    const Dataset point = make(1, 2, {3, 4});
    const auto fixed_q = [](Rng&) { return std::vector<double>{1, 2}; };
    CHECK(oracle::audit_bound(point, 11.0, fixed_q, 1, 1).passed);
    CHECK_FALSE(oracle::audit_bound(point, 11.0 - 1e-6, fixed_q, 1, 1).passed);
}

TEST_CASE("samplers stay inside their regions") {
    Rng rng(7);
    const std::vector<double> c{1, 2, 3, 4};
    for (int i = 0; i < 2000; ++i) {
        const auto p = oracle::sample_in_ball(c, 0.5, rng);
        CHECK(std::sqrt(squared_distance(p, c)) <= 0.5 + 1e-12);
    }
    const std::vector<double> axis{0, 0, 1};
    for (double cw : {-0.5, 0.3, 0.99, 0.999999}) {
        for (int i = 0; i < 500; ++i) {
            const auto q = oracle::sample_in_cone(axis, cw, rng);
            CHECK(norm(q) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(dot(q, axis) >= cw - 1e-12);
        }
    }
}

TEST_CASE("ball samples fill the ball") {
    // Uniform in a d-ball: P(|x| <= r/2) = 2^-d.
    Rng rng(8);
    const std::vector<double> c{0, 0, 0};
    int inner = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) inner += norm(oracle::sample_in_ball(c, 1.0, rng)) <= 0.5 ? 1 : 0;
    CHECK(static_cast<double>(inner) / n == doctest::Approx(0.125).epsilon(0.05));
}

TEST_CASE("non-metric fixture") {
    const auto f = oracle::non_metric_fixture();
    CHECK(std::abs(f.dist_xy - 0.226) <= 1e-3);
    CHECK(std::abs(f.dist_yz - 0.293) <= 1e-3);
    CHECK(std::abs(f.dist_zx - 0.704) <= 1e-3);
    CHECK(f.triangle_inequality_violated());
    for (const auto& v : f.vectors) CHECK(norm(v) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("tree audits catch corrupted trees") {
    const Dataset d = test::gaussian(300, 3, 9);
    Rng rng(1);
    const BallTree t = build_ball_tree(d, 10, rng);
    REQUIRE(oracle::audit_ball_tree(t, d).passed());

    std::vector<BallNode> nodes = t.nodes();
    std::vector<double> centers;
    for (std::size_t i = 0; i < nodes.size(); ++i) centers.insert(centers.end(), t.center(i).begin(), t.center(i).end());
    nodes[1].radius *= 0.5;
    const BallTree shrunk(t.data(), t.leaf_size(), nodes, centers, t.source_checksum());
    CHECK_FALSE(oracle::audit_ball_tree(shrunk, d).passed());

    nodes = t.nodes();
    nodes[1].end -= 1;
    const BallTree gap(t.data(), t.leaf_size(), nodes, centers, t.source_checksum());
    CHECK_FALSE(oracle::audit_ball_tree(gap, d).passed());

    const BallTree small_leaf(t.data(), 2, t.nodes(), centers, t.source_checksum());
    CHECK_FALSE(oracle::audit_ball_tree(small_leaf, d).passed());

    CHECK_FALSE(oracle::audit_ball_tree(t, test::gaussian(300, 3, 10)).passed());
}
