// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "grid_oracle.hpp"
#include "mips/ball_tree.hpp"
#include "mips/bench.hpp"
#include "mips/bounds.hpp"
#include "mips/cone_tree.hpp"
#include "mips/dataset.hpp"
#include "mips/kernel.hpp"
#include "mips/oracle.hpp"
#include "mips/search.hpp"

using namespace mips;

namespace {

constexpr double kPi = std::numbers::pi;
using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail << "first failure: " << what << "; ";
        pass = pass && ok;
    }
};

std::vector<double> random_vector(std::size_t d, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(d);
    for (double& x : v) x = g(rng);
    return v;
}

Dataset gaussian(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 0.0) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(n * d);
    for (double& x : v) x = g(rng) + shift;
    return Dataset(n, d, std::move(v));
}

Dataset scaled(const Dataset& data, double c) {
    std::vector<double> v(data.values().begin(), data.values().end());
    for (double& x : v) x *= c;
    return Dataset(data.size(), data.dims(), std::move(v));
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<std::vector<Neighbor>> run(Algorithm a, const Dataset& queries, const Dataset& refs, std::size_t k,
                                       std::uint64_t seed, std::size_t leaf = 20) {
    BenchConfig c;
    c.algorithm = a;
    c.k = k;
    c.seed = seed;
    c.leaf_size = leaf;
    return run_search(c, queries, refs).report.results;
}

constexpr Algorithm kTreeAlgorithms[] = {Algorithm::single, Algorithm::dual_ball, Algorithm::dual_cone};

// 1. tree searches equal the brute-force oracle
Verdict exactness() {
    Verdict v;
    const std::size_t ns[] = {100, 1000, 5000};
    const std::size_t ds[] = {2, 5, 20, 50};
    const std::size_t ks[] = {1, 2, 5, 10};
    Rng pick(2024);
    std::size_t compared = 0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = ns[i % 3], d = ds[(i / 3) % 4], k = ks[(i / 12) % 4];
        const std::uint64_t seed = pick();
        const Dataset refs = i % 2 == 0 ? gaussian(n, d, seed, 0.3) : generate_clustered(n, d, 10, 0.5, seed);
        const Dataset queries = gaussian(40, d, seed + 1, i % 4 == 1 ? 0.5 : 0.0);
        const auto expected = oracle::brute_force_topk(queries, refs, k);
        const auto selection = oracle::brute_force_topk_selection(queries, refs, k);
        v.require(!oracle::compare_results(expected.results, selection.results, 0.0),
                  "oracle cross-check, instance " + std::to_string(i));
        for (Algorithm a : kTreeAlgorithms) {
            const auto got = run(a, queries, refs, k, seed);
            const auto m = oracle::compare_results(expected.results, got, 1e-9);
            v.require(!m, std::string(to_string(a)) + " instance " + std::to_string(i) +
                              (m ? " query " + std::to_string(m->query) + ": " + m->reason : ""));
            ++compared;
        }
    }
    v.detail << compared << " searches over 100 instances";
    return v;
}

// 2. audits of every bound plus corrupted controls
Verdict soundness() {
    Verdict v;
    constexpr std::size_t samples = 100000;
    Rng rng(77);
    auto audit = [&](const std::string& name, double bound, const oracle::PairSampler& s, double corrupted,
                     const oracle::PairScore& score = {}) {
        const auto ok = oracle::audit_bound(bound, s, samples, rng(), score);
        v.require(ok.passed && ok.checked == samples, name + " audit");
        const auto bad = oracle::audit_bound(corrupted, s, samples, rng(), score);
        v.require(!bad.passed, name + " negative control was not caught");
    };
    // corrupted bound: halfway from the center value, reached often in 3-D
    auto halfway = [](double center, double bound) { return center + 0.5 * (bound - center); };

    for (int trial = 0; trial < 4; ++trial) {
        const std::size_t d = 3;
        auto q = random_vector(d, rng);
        auto p0 = random_vector(d, rng);
        if (dot(q, p0) < 0.0)
            for (double& x : p0) x = -x;
        const double rp = 0.3 + 0.2 * trial, rq = 0.5 + 0.1 * trial;

        const double pb = mip_point_ball(q, norm(q), p0, rp);
        audit("point-ball", pb, oracle::point_ball_sampler(q, p0, rp), halfway(dot(q, p0), pb));

        const BoundInputs in = make_bound_inputs(q, rq, p0, rp);
        const double bb = mip_ball_ball(in);
        const auto bsampler = oracle::ball_ball_sampler(q, rq, p0, rp);
        audit("ball-ball", bb, bsampler, halfway(dot(q, p0), bb));
        const double o2 = mip_ball_ball_opt2(in), o1 = mip_cone_ball_opt1(in);
        audit("opt2", o2, bsampler, halfway(dot(q, p0), o2));
        audit("opt1", o1, bsampler, halfway(dot(q, p0), o1));

        const double cos_omega = std::cos(0.2 + 0.3 * trial);
        std::vector<double> axis = q;
        const double qn = norm(q);
        for (double& x : axis) x /= qn;
        BoundInputs cin = make_bound_inputs(axis, 0.0, p0, rp);
        cin.cos_omega_q = cos_omega;
        const double cb = mip_cone_ball(cin);
        audit("cone-ball", cb, oracle::cone_ball_sampler(axis, cos_omega, p0, rp), halfway(dot(axis, p0), cb));
    }

    // Kernel bounds over member pairs; the corrupted bound sits just below
    // the exact maximum over all members.
    const Dataset qset = gaussian(30, 3, 5), rset = gaussian(40, 3, 6, 0.4);
    for (const KernelSpec& spec : {KernelSpec::rbf(0.5), KernelSpec::polynomial(1.0, 2)}) {
        const KernelFunction kf(spec);
        Rng build(3);
        const KernelBallTree rt = build_kernel_ball_tree(spec, rset, rset.size(), build);
        const KernelBallTree qt = build_kernel_ball_tree(spec, qset, qset.size(), build);
        const KernelConeTree ct = build_kernel_cone_tree(spec, qset, qset.size(), build);
        const Vector pc = rt.data().row(rt.node(0).center_row);
        const std::string tag = std::string(to_string(spec.kind)) + " ";
        const auto kscore = [spec](Vector a, Vector b) { return kernel_eval(spec, a, b); };
        auto exact_max = [&](const Dataset& qs, const oracle::PairScore& score) {
            double best = -INFINITY;
            for (std::size_t i = 0; i < qs.size(); ++i)
                for (std::size_t j = 0; j < rset.size(); ++j) best = std::max(best, score(qs.row(i), rset.row(j)));
            return best;
        };

        const Dataset single_q = Dataset(1, 3, {0.3, -0.7, 0.2});
        const double kqq = kernel_eval(spec, single_q.row(0), single_q.row(0));
        const double kpb = kernel_mip_point_ball(kf, single_q.row(0), kqq, pc, rt.node(0));
        audit(tag + "kernel point-ball", kpb, oracle::member_pair_sampler(single_q, rset),
              exact_max(single_q, kscore) - 1e-6, kscore);

        const double kbb =
            kernel_mip_ball_ball(kf, qt.data().row(qt.node(0).center_row), qt.node(0), pc, rt.node(0));
        audit(tag + "kernel ball-ball", kbb, oracle::member_pair_sampler(qset, rset), exact_max(qset, kscore) - 1e-6,
              kscore);

        const auto cscore = [spec](Vector a, Vector b) {
            return kernel_eval(spec, a, b) / std::sqrt(kernel_eval(spec, a, a));
        };
        const double kcb =
            kernel_mip_cone_ball(kf, ct.data().row(ct.node(0).axis_row), ct.node(0), pc, rt.node(0));
        audit(tag + "kernel cone-ball", kcb, oracle::member_pair_sampler(qset, rset), exact_max(qset, cscore) - 1e-6,
              cscore);
    }
    v.detail << samples << " samples per audit";
    return v;
}

// 3. reduction identities
Verdict reductions() {
    Verdict v;
    Rng rng(31);
    double worst_cone = 0.0, worst_kernel = 0.0;
    for (int i = 0; i < 500; ++i) {
        const std::size_t d = 2 + i % 7;
        const auto q = random_vector(d, rng, 2.0);
        const auto p0 = random_vector(d, rng, 2.0);
        const double rp = std::abs(random_vector(1, rng)[0]);
        BoundInputs in = make_bound_inputs(q, 0.0, p0, rp);
        v.require(mip_ball_ball(in) == mip_point_ball(q, norm(q), p0, rp), "ball-ball with zero query radius");

        std::vector<double> axis = q;
        const double qn = norm(q);
        for (double& x : axis) x /= qn;
        BoundInputs cin = make_bound_inputs(axis, 0.0, p0, rp);
        cin.cos_omega_q = 1.0;
        worst_cone = std::max(worst_cone, std::abs(mip_cone_ball(cin) - mip_point_ball(axis, 1.0, p0, rp)));
    }
    v.require(worst_cone <= 1e-12, "zero-aperture cone-ball");

    const KernelSpec lin = KernelSpec::linear();
    const KernelFunction kf(lin);
    for (int i = 0; i < 100; ++i) {
        const std::size_t d = 2 + i % 5;
        const Dataset qs = gaussian(20 + i % 13, d, 1000 + i, 0.2);
        const Dataset rs = gaussian(25 + i % 11, d, 2000 + i, 0.5);
        Rng build(i);
        const KernelBallTree qt = build_kernel_ball_tree(lin, qs, qs.size(), build);
        const KernelBallTree rt = build_kernel_ball_tree(lin, rs, rs.size(), build);
        const KernelConeTree ct = build_kernel_cone_tree(lin, qs, qs.size(), build);
        const Vector qc = qt.data().row(qt.node(0).center_row);
        const Vector pc = rt.data().row(rt.node(0).center_row);
        const double rp = rt.node(0).radius, rq = qt.node(0).radius;

        const auto q = random_vector(d, rng);
        worst_kernel = std::max(worst_kernel, std::abs(kernel_mip_point_ball(kf, q, dot(q, q), pc, rt.node(0)) -
                                                       mip_point_ball(q, norm(q), pc, rp)));
        worst_kernel = std::max(worst_kernel, std::abs(kernel_mip_ball_ball(kf, qc, qt.node(0), pc, rt.node(0)) -
                                                       mip_ball_ball(make_bound_inputs(qc, rq, pc, rp))));
        const Vector qa = ct.data().row(ct.node(0).axis_row);
        BoundInputs cin = make_bound_inputs(qa, 0.0, pc, rp);
        cin.cos_omega_q = ct.node(0).min_cosine;
        worst_kernel =
            std::max(worst_kernel, std::abs(kernel_mip_cone_ball(kf, qa, ct.node(0), pc, rt.node(0)) - mip_cone_ball(cin)));
    }
    v.require(worst_kernel <= 1e-12, "linear kernel against explicit bounds");
    v.detail << "max cone gap " << worst_cone << ", max kernel gap " << worst_kernel;
    return v;
}

// 4. optimized bounds against dense grids
Verdict tightening() {
    Verdict v;
    Rng rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst2 = 0.0, worst1 = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double phi = 0.5 * kPi * u(rng);
        BoundInputs in;
        in.p0_norm = 0.1 + 3.0 * u(rng);
        in.q0_norm = 0.1 + 3.0 * u(rng);
        in.dot_q0_p0 = in.p0_norm * in.q0_norm * std::cos(phi);
        in.rp = 0.05 + 2.0 * u(rng);
        in.rq = 0.05 + 2.0 * u(rng);
        const double thm2 = mip_ball_ball(in);
        const double o2 = mip_ball_ball_opt2(in), o1 = mip_cone_ball_opt1(in);
        v.require(o2 <= thm2, "opt2 above the closed form, instance " + std::to_string(i));
        v.require(o1 <= thm2, "opt1 above the closed form, instance " + std::to_string(i));
        const double ref_phi = std::acos(std::clamp(in.dot_q0_p0 / (in.p0_norm * in.q0_norm), -1.0, 1.0));
        worst2 = std::max(worst2, std::abs(o2 - test::grid_max_two_angle(in, ref_phi, 512).value));
        worst1 = std::max(worst1, std::abs(o1 - test::grid_max_one_angle(in, ref_phi, 100000).value));
    }
    v.require(worst2 <= 1e-6, "opt2 against the 2-D grid");
    v.require(worst1 <= 1e-8, "opt1 against the 1-D grid");
    v.detail << "max 2-D gap " << worst2 << ", max 1-D gap " << worst1;
    return v;
}

// 5. tree audits and determinism
Verdict tree_invariants() {
    Verdict v;
    const std::size_t n = 20000;
    const Dataset data = generate_clustered(n, 8, 30, 0.5, 51);
    auto report = [&](const std::string& name, const oracle::TreeAudit& a) {
        v.require(a.passed(), name + (a.passed() ? "" : ": " + a.failures.front()));
        v.detail << name << " " << a.nodes << " nodes, " << a.degenerate_leaves << " degenerate; ";
    };
    {
        Rng r1(5), r2(5);
        const BallTree a = build_ball_tree(data, 20, r1), b = build_ball_tree(data, 20, r2);
        report("ball", oracle::audit_ball_tree(a, data));
        v.require(oracle::identical(a, b), "ball tree determinism");
    }
    {
        const Dataset unit = normalize_directions(data).data;
        Rng r1(6), r2(6);
        const ConeTree a = build_cone_tree(unit, 20, r1), b = build_cone_tree(unit, 20, r2);
        report("cone", oracle::audit_cone_tree(a, unit));
        v.require(oracle::identical(a, b), "cone tree determinism");
    }
    {
        const KernelSpec spec = KernelSpec::rbf(0.1);
        Rng r1(7), r2(7);
        const KernelBallTree a = build_kernel_ball_tree(spec, data, 20, r1);
        const KernelBallTree b = build_kernel_ball_tree(spec, data, 20, r2);
        report("kernel ball", oracle::audit_kernel_ball_tree(a, data));
        v.require(oracle::identical(a, b), "kernel ball tree determinism");
    }
    v.detail << "N=" << n;
    return v;
}

struct ClusteredInstance {
    Dataset refs;
    Dataset queries;
    double linear_seconds = 0.0;
    double single_seconds = 0.0;
    double build_seconds = 0.0;
    double mean_evals = 0.0;
    bool exact = false;
};

ClusteredInstance clustered_instance() {
    ClusteredInstance c{generate_clustered(100000, 20, 50, 0.2, 61), generate_uniform(1000, 20, 62)};
    // best of three for each timing
    c.linear_seconds = c.single_seconds = c.build_seconds = INFINITY;
    SearchReport linear, single;
    for (int rep = 0; rep < 3; ++rep) {
        linear = linear_search_all(c.queries, c.refs, 1);
        c.linear_seconds = std::min(c.linear_seconds, linear.seconds);
        Rng rng(63);
        const auto start = Clock::now();
        const BallTree tree = build_ball_tree(c.refs, 20, rng);
        c.build_seconds = std::min(c.build_seconds, seconds_since(start));
        single = find_exact_maxip(c.queries, tree, 1);
        c.single_seconds = std::min(c.single_seconds, single.seconds);
    }
    c.mean_evals = double(single.counters.point_evals) / double(c.queries.size());
    c.exact = !oracle::compare_results(linear.results, single.results);
    return c;
}

// 6. pruning effectiveness
Verdict pruning(const ClusteredInstance& c) {
    Verdict v;
    const double n = double(c.refs.size());
    v.require(c.exact, "single-tree results differ from the linear scan");
    v.require(c.mean_evals < 0.5 * n, "mean evaluations per query");
    const double speedup = c.linear_seconds / c.single_seconds;
    v.require(speedup > 1.0, "speedup over linear scan");
    v.detail << "mean evals " << c.mean_evals << " (" << 100.0 * c.mean_evals / n << "% of N), speedup " << speedup;
    return v;
}

// 7. build cost relative to a linear scan
Verdict build_ratio(const ClusteredInstance& c) {
    Verdict v;
    const double ratio = c.build_seconds / c.linear_seconds;
    v.require(ratio < 1.0, "build / linear ratio");
    v.detail << "build " << c.build_seconds << "s, linear " << c.linear_seconds << "s, ratio " << ratio;
    return v;
}

// 8. kernel search against the Gram brute force
Verdict kernel_exactness() {
    Verdict v;
    const Dataset refs = gaussian(500, 4, 81);
    const Dataset queries = gaussian(100, 4, 82, 0.3);
    std::size_t runs = 0;
    for (const KernelSpec& spec : {KernelSpec::rbf(0.1), KernelSpec::rbf(1.0), KernelSpec::polynomial(1.0, 2)}) {
        for (std::size_t k : {1u, 3u}) {
            const auto expected = oracle::brute_force_kernel_topk(spec, queries, refs, k);
            for (KernelSearchMode mode : {KernelSearchMode::single, KernelSearchMode::dual_ball, KernelSearchMode::dual_cone}) {
                Rng rng(83);
                const SearchReport got = kernel_search(spec, queries, refs, mode, k, 20, rng);
                bool ids_equal = got.results.size() == expected.results.size();
                for (std::size_t i = 0; ids_equal && i < got.results.size(); ++i) {
                    ids_equal = got.results[i].size() == k;
                    for (std::size_t r = 0; ids_equal && r < k; ++r)
                        ids_equal = got.results[i][r].id == expected.results[i][r].id;
                }
                v.require(ids_equal, std::string(to_string(spec.kind)) + " k=" + std::to_string(k) + " mode " +
                                         std::to_string(int(mode)));
                ++runs;
            }
        }
    }
    v.detail << runs << " kernel searches";
    return v;
}

// 9. non-metric fixture
Verdict non_metric() {
    Verdict v;
    const auto f = oracle::non_metric_fixture();
    v.require(std::abs(f.dist_xy - 0.226) <= 1e-3, "d(x,y)");
    v.require(std::abs(f.dist_yz - 0.293) <= 1e-3, "d(y,z)");
    v.require(std::abs(f.dist_zx - 0.704) <= 1e-3, "d(z,x)");
    v.require(f.dist_xy + f.dist_yz < f.dist_zx, "triangle inequality violation");
    v.detail << "distances " << f.dist_xy << ", " << f.dist_yz << ", " << f.dist_zx;
    return v;
}

// 10. query scaling leaves the argmax unchanged
Verdict norm_independence() {
    Verdict v;
    Rng rng(91);
    std::uniform_real_distribution<double> log_c(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const std::size_t d = 2 + i % 9, n = 200 + 37 * (i % 7);
        const Dataset refs = gaussian(n, d, 9000 + i, 0.2);
        const Dataset queries = gaussian(20, d, 9500 + i);
        const double c = std::pow(10.0, log_c(rng));
        const Dataset big = scaled(queries, c);
        for (Algorithm a : {Algorithm::linear, Algorithm::single, Algorithm::dual_ball, Algorithm::dual_cone}) {
            const auto base = run(a, queries, refs, 1, i, 10);
            const auto after = run(a, big, refs, 1, i, 10);
            for (std::size_t q = 0; q < queries.size(); ++q)
                v.require(base[q][0].id == after[q][0].id, std::string(to_string(a)) + " instance " +
                                                               std::to_string(i) + " query " + std::to_string(q));
        }
    }
    v.detail << "100 instances, scale factors in [1e-3, 1e3]";
    return v;
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const std::function<Verdict()>& check) {
        const auto start = Clock::now();
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << "exception: " << e.what();
        }
        failures += !v.pass;
        std::printf("criterion %d: %s (%.1fs) %s\n", id, v.pass ? "PASS" : "FAIL", seconds_since(start),
                    v.detail.str().c_str());
        std::fflush(stdout);
    };

    report(1, exactness);
    report(2, soundness);
    report(3, reductions);
    report(4, tightening);
    report(5, tree_invariants);
    std::optional<ClusteredInstance> clustered;
    report(6, [&] {
        clustered = clustered_instance();
        return pruning(*clustered);
    });
    report(7, [&] {
        if (!clustered) {
            Verdict v;
            v.require(false, "clustered instance unavailable");
            return v;
        }
        return build_ratio(*clustered);
    });
    report(8, kernel_exactness);
    report(9, non_metric);
    report(10, norm_independence);
    return failures == 0 ? 0 : 1;
}
