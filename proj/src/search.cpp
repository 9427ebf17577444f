#include "mips/search.hpp"

#include <algorithm>
#include <chrono>
#include <string>
#include <thread>

#include "mips/error.hpp"
#include "mips/traversal.hpp"

namespace mips {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_k(std::size_t k, std::size_t n) {
    if (k == 0) throw ContractViolation("k must be at least 1");
    if (k > n)
        throw ContractViolation("k = " + std::to_string(k) + " exceeds the reference set size " + std::to_string(n));
}

void check_dims(std::size_t a, std::size_t b) {
    if (a != b)
        throw ContractViolation("dimension mismatch: queries have " + std::to_string(a) + ", references have " +
                                std::to_string(b));
}

Dataset with_identity_ids(const Dataset& data) {
    std::vector<double> values(data.values().begin(), data.values().end());
    return Dataset(data.size(), data.dims(), std::move(values));
}

struct SingleBallRules {
    const BallTree& t;
    Vector q;
    double q_norm;
    QueryState& state;
    SearchCounters& counters;

    const BallTree& tree() const { return t; }
    double lambda() const { return state.lambda(); }

    double score(std::size_t n) const { return mip_point_ball(q, q_norm, t.center(n), t.node(n).radius); }

    void base_case(std::size_t n) {
        const BallNode& node = t.node(n);
        const Dataset& data = t.data();
        for (std::size_t i = node.begin; i < node.end; ++i) {
            ++counters.point_evals;
            state.offer(data.id(i), dot(q, data.row(i)));
        }
    }
};

template <class QueryTree>
double scan_leaf_pair(const QueryTree& qt, std::size_t qn, const BallTree& rt, std::size_t rn,
                      std::vector<QueryState>& states, SearchCounters& counters) {
    const auto& q = qt.node(qn);
    const BallNode& r = rt.node(rn);
    const Dataset& refs = rt.data();
    double min_lambda = std::numeric_limits<double>::infinity();
    for (std::size_t i = q.begin; i < q.end; ++i) {
        const Vector qv = qt.data().row(i);
        QueryState& st = states[i];
        for (std::size_t j = r.begin; j < r.end; ++j) {
            ++counters.point_evals;
            st.offer(refs.id(j), dot(qv, refs.row(j)));
        }
        min_lambda = std::min(min_lambda, st.lambda());
    }
    return min_lambda;
}

struct DualBallRules {
    const BallTree& qt;
    const BallTree& rt;
    std::vector<QueryState>& states;
    SearchCounters& counters;
    BoundKind bound;
    OptimizerSettings optimizer;

    const BallTree& qtree() const { return qt; }
    const BallTree& rtree() const { return rt; }

    double score(std::size_t qn, std::size_t rn) const {
        const BallNode& q = qt.node(qn);
        const BallNode& r = rt.node(rn);
        BoundInputs in;
        in.dot_q0_p0 = dot(qt.center(qn), rt.center(rn));
        in.q0_norm = q.center_norm;
        in.rq = q.radius;
        in.p0_norm = r.center_norm;
        in.rp = r.radius;
        switch (bound) {
            case BoundKind::opt2: return mip_ball_ball_opt2_detail(in, optimizer).value;
            case BoundKind::opt1: return mip_cone_ball_opt1_detail(in, optimizer).value;
            default: return mip_ball_ball(in);
        }
    }

    double base_case(std::size_t qn, std::size_t rn) { return scan_leaf_pair(qt, qn, rt, rn, states, counters); }
};

struct DualConeRules {
    const ConeTree& qt;
    const BallTree& rt;
    std::vector<QueryState>& states;
    SearchCounters& counters;
    BoundKind bound;
    OptimizerSettings optimizer;

    const ConeTree& qtree() const { return qt; }
    const BallTree& rtree() const { return rt; }

    double score(std::size_t qn, std::size_t rn) const {
        const ConeNode& q = qt.node(qn);
        const BallNode& r = rt.node(rn);
        const double axis_dot = dot(qt.axis(qn), rt.center(rn));
        BoundInputs in;
        in.dot_q0_p0 = axis_dot;
        in.q0_norm = q.axis_norm;
        in.cos_omega_q = q.min_cosine;
        in.p0_norm = r.center_norm;
        in.rp = r.radius;
        const double closed = mip_cone_ball(in);
        if (bound != BoundKind::opt1 || q.axis_norm < kDegenerateAxisNorm || q.min_cosine < 0.0) return closed;
        // Unit queries of the cone lie in the ball enclosing its cap.
        const CapBall cap = cap_enclosing_ball(q.min_cosine);
        BoundInputs ball = in;
        ball.dot_q0_p0 = cap.center_scale * axis_dot / q.axis_norm;
        ball.q0_norm = cap.center_scale;
        ball.rq = cap.radius;
        return std::min(closed, mip_cone_ball_opt1_detail(ball, optimizer).value);
    }

    double base_case(std::size_t qn, std::size_t rn) { return scan_leaf_pair(qt, qn, rt, rn, states, counters); }
};

std::vector<QueryState> fresh_states(std::size_t count, std::size_t k) {
    return std::vector<QueryState>(count, QueryState(k));
}

}  // namespace

QueryState::QueryState(std::size_t k) : k_(k) {
    if (k == 0) throw ContractViolation("k must be at least 1");
    candidates_.reserve(k);
}

bool QueryState::offer(std::size_t id, double value) {
    const Neighbor cand{id, value};
    if (candidates_.size() == k_) {
        if (!ranks_before(cand, candidates_.back())) return false;
        candidates_.pop_back();
    }
    const auto pos = std::upper_bound(candidates_.begin(), candidates_.end(), cand, ranks_before);
    candidates_.insert(pos, cand);
    return true;
}

QueryState linear_search(Vector q, const Dataset& refs, std::size_t k, SearchCounters* counters) {
    check_dims(q.size(), refs.dims());
    check_k(k, refs.size());
    QueryState state(k);
    for (std::size_t i = 0; i < refs.size(); ++i) state.offer(refs.id(i), dot(q, refs.row(i)));
    if (counters) counters->point_evals += refs.size();
    return state;
}

QueryState single_tree_search(Vector q, const BallTree& tree, std::size_t k, SearchCounters* counters,
                              std::vector<PruneRecord>* prunes, std::int64_t query_row) {
    check_dims(q.size(), tree.dims());
    check_k(k, tree.data().size());
    QueryState state(k);
    SearchCounters local;
    SingleBallRules rules{tree, q, norm(q), state, local};
    detail::SingleTreeTraversal<SingleBallRules> traversal(rules, local, prunes, query_row);
    traversal.run();
    if (counters) *counters += local;
    return state;
}

namespace {

template <class PerQuery>
SearchReport run_per_query(const Dataset& queries, unsigned threads, bool record_prunes, PerQuery&& per_query) {
    SearchReport report;
    report.results.resize(queries.size());
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(queries.size())));
    report.threads = threads;
    std::vector<SearchCounters> counters(threads);
    std::vector<std::vector<PruneRecord>> prunes(threads);

    const auto start = Clock::now();
    auto work = [&](unsigned t) {
        for (std::size_t i = t; i < queries.size(); i += threads) {
            QueryState st = per_query(i, counters[t], record_prunes ? &prunes[t] : nullptr);
            report.results[i] = st.candidates();
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }
    report.seconds = seconds_since(start);
    for (unsigned t = 0; t < threads; ++t) {
        report.counters += counters[t];
        report.prunes.insert(report.prunes.end(), prunes[t].begin(), prunes[t].end());
    }
    return report;
}

}  // namespace

SearchReport linear_search_all(const Dataset& queries, const Dataset& refs, std::size_t k, unsigned threads) {
    check_dims(queries.dims(), refs.dims());
    check_k(k, refs.size());
    return run_per_query(queries, threads, false, [&](std::size_t i, SearchCounters& c, std::vector<PruneRecord>*) {
        return linear_search(queries.row(i), refs, k, &c);
    });
}

SearchReport find_exact_maxip(const Dataset& queries, const BallTree& tree, std::size_t k,
                              const SearchOptions& options) {
    check_dims(queries.dims(), tree.dims());
    check_k(k, tree.data().size());
    if (options.bound != BoundKind::thm1) throw ContractViolation("single-tree search takes the thm1 bound");
    return run_per_query(queries, options.threads, options.record_prunes,
                         [&](std::size_t i, SearchCounters& c, std::vector<PruneRecord>* p) {
                             return single_tree_search(queries.row(i), tree, k, &c, p,
                                                       static_cast<std::int64_t>(i));
                         });
}

SearchReport dual_tree_search(const BallTree& qtree, const BallTree& rtree, std::size_t k,
                              const SearchOptions& options) {
    check_dims(qtree.dims(), rtree.dims());
    check_k(k, rtree.data().size());
    if (options.bound != BoundKind::thm2 && options.bound != BoundKind::opt2 && options.bound != BoundKind::opt1)
        throw ContractViolation("ball query trees take the thm2, opt1 or opt2 bound");

    SearchReport report;
    const std::size_t m = qtree.data().size();
    auto states = fresh_states(m, k);
    DualBallRules rules{qtree, rtree, states, report.counters, options.bound, options.optimizer};
    const auto start = Clock::now();
    detail::DualTreeTraversal<DualBallRules> traversal(rules, report.counters,
                                                       options.record_prunes ? &report.prunes : nullptr);
    traversal.run();
    report.seconds = seconds_since(start);
    report.node_lambdas = traversal.take_lambdas();

    report.results.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t qid = qtree.data().id(i);
        if (qid >= m) throw ContractViolation("query tree ids must be row positions 0..M-1");
        report.results[qid] = states[i].candidates();
    }
    return report;
}

SearchReport dual_tree_search(const QueryConeTree& qtree, const Dataset& queries, const BallTree& rtree,
                              std::size_t k, const SearchOptions& options) {
    check_dims(queries.dims(), rtree.dims());
    check_k(k, rtree.data().size());
    if (options.bound != BoundKind::thm3 && options.bound != BoundKind::opt1)
        throw ContractViolation("cone query trees take the thm3 or opt1 bound");

    const ConeTree& ct = qtree.tree;
    SearchReport report;
    const std::size_t m = ct.data().size();
    auto states = fresh_states(m, k);
    DualConeRules rules{ct, rtree, states, report.counters, options.bound, options.optimizer};
    const auto start = Clock::now();
    detail::DualTreeTraversal<DualConeRules> traversal(rules, report.counters,
                                                       options.record_prunes ? &report.prunes : nullptr);
    traversal.run();
    report.seconds = seconds_since(start);
    report.node_lambdas = traversal.take_lambdas();
    for (const ConeNode& n : ct.nodes()) report.wide_cones += n.min_cosine < 0.0 ? 1 : 0;

    // Rank in direction space, report in the caller's units.
    const Dataset& refs = rtree.data();
    std::vector<std::size_t> row_of(refs.size());
    for (std::size_t j = 0; j < refs.size(); ++j) row_of[refs.id(j)] = j;

    report.results.resize(queries.size());
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t qid = ct.data().id(i);
        if (qid >= queries.size()) throw ContractViolation("cone tree ids must be query row positions");
        std::vector<Neighbor> found = states[i].candidates();
        for (Neighbor& nb : found) nb.value = dot(queries.row(qid), refs.row(row_of[nb.id]));
        std::sort(found.begin(), found.end(), ranks_before);
        report.results[qid] = std::move(found);
    }
    for (std::size_t z : qtree.zero_rows) {
        std::vector<Neighbor> fallback(k);
        for (std::size_t j = 0; j < k; ++j) fallback[j] = {j, 0.0};
        report.results[z] = std::move(fallback);
    }
    report.fallback_queries = qtree.zero_rows;
    return report;
}

SearchReport dual_ball_search(const Dataset& queries, const BallTree& rtree, std::size_t k, std::size_t leaf_size,
                              Rng& rng, const SearchOptions& options) {
    check_dims(queries.dims(), rtree.dims());
    const auto start = Clock::now();
    const BallTree qtree = build_ball_tree(with_identity_ids(queries), leaf_size, rng);
    const double build = seconds_since(start);
    SearchReport report = dual_tree_search(qtree, rtree, k, options);
    report.build_seconds = build;
    return report;
}

SearchReport dual_cone_search(const Dataset& queries, const BallTree& rtree, std::size_t k, std::size_t leaf_size,
                              Rng& rng, const SearchOptions& options) {
    check_dims(queries.dims(), rtree.dims());
    check_k(k, rtree.data().size());
    const auto norms = queries.norms();
    if (std::all_of(norms.begin(), norms.end(), [](double n) { return n == 0.0; })) {
        // Nothing to index; every query takes the fallback.
        SearchReport report;
        report.results.resize(queries.size());
        for (std::size_t i = 0; i < queries.size(); ++i) {
            for (std::size_t j = 0; j < k; ++j) report.results[i].push_back({j, 0.0});
            report.fallback_queries.push_back(i);
        }
        return report;
    }
    // Normalization happens inside the build and is timed with it.
    const auto start = Clock::now();
    const QueryConeTree qtree = build_query_cone_tree(with_identity_ids(queries), leaf_size, rng);
    const double build = seconds_since(start);
    SearchReport report = dual_tree_search(qtree, queries, rtree, k, options);
    report.build_seconds = build;
    return report;
}

}  // namespace mips
