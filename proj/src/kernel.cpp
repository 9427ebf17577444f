#include "mips/kernel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "mips/bounds.hpp"
#include "mips/error.hpp"
#include "mips/traversal.hpp"

namespace mips {

void KernelSpec::validate() const {
    switch (kind) {
        case KernelKind::linear: return;
        case KernelKind::rbf:
            if (!(gamma > 0.0)) throw ContractViolation("rbf kernel needs gamma > 0");
            return;
        case KernelKind::polynomial:
            if (!(coef0 >= 0.0)) throw ContractViolation("polynomial kernel needs coef0 >= 0");
            if (degree < 1) throw ContractViolation("polynomial kernel needs degree >= 1");
            return;
    }
}

std::string_view to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::linear: return "linear";
        case KernelKind::rbf: return "rbf";
        case KernelKind::polynomial: return "poly";
    }
    return "unknown";
}

KernelKind parse_kernel_kind(std::string_view name) {
    if (name == "linear") return KernelKind::linear;
    if (name == "rbf" || name == "gaussian") return KernelKind::rbf;
    if (name == "poly" || name == "polynomial") return KernelKind::polynomial;
    throw ContractViolation("unknown kernel '" + std::string(name) + "'");
}

double kernel_eval(const KernelSpec& spec, Vector x, Vector y) {
    if (x.size() != y.size()) throw ContractViolation("kernel arguments differ in dimension");
    switch (spec.kind) {
        case KernelKind::linear: return dot(x, y);
        case KernelKind::rbf: return std::exp(-spec.gamma * squared_distance(x, y));
        case KernelKind::polynomial: {
            const double base = dot(x, y) + spec.coef0;
            double out = 1.0;
            for (unsigned i = 0; i < spec.degree; ++i) out *= base;
            return out;
        }
    }
    return 0.0;
}

namespace {

using Clock = std::chrono::steady_clock;

// Rows addressed through a permutation so that builders can reorder cheaply.
struct RowView {
    const Dataset& data;
    const std::vector<std::size_t>& order;
    const std::vector<double>& self;  // by original row

    Vector row(std::size_t k) const { return data.row(order[k]); }
    double self_kernel(std::size_t k) const { return self[order[k]]; }
};

std::vector<double> self_kernels_of(const KernelSpec& spec, const Dataset& data) {
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = kernel_eval(spec, data.row(i), data.row(i));
    return out;
}

std::vector<double> gram_row_sums(const KernelSpec& spec, const RowView& v, std::size_t begin, std::size_t end,
                                  bool normalize_columns) {
    const std::size_t n = end - begin;
    std::vector<double> scale(n, 1.0);
    if (normalize_columns) {
        for (std::size_t i = 0; i < n; ++i) scale[i] = 1.0 / std::sqrt(v.self_kernel(begin + i));
    }
    std::vector<double> sums(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sums[i] += v.self_kernel(begin + i) * scale[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            const double kij = kernel_eval(spec, v.row(begin + i), v.row(begin + j));
            sums[i] += kij * scale[j];
            sums[j] += kij * scale[i];
        }
    }
    return sums;
}

KernelBallSummary ball_summary(const KernelSpec& spec, const RowView& v, std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    const std::vector<double> sums = gram_row_sums(spec, v, begin, end, false);
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double score = v.self_kernel(begin + i) - 2.0 * sums[i] / static_cast<double>(n);
        if (i == 0 || score < best_score) {
            best_score = score;
            best = i;
        }
    }
    const std::size_t c = begin + best;
    const double kcc = v.self_kernel(c);
    double radius_sq = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
        const double d2 = kcc + v.self_kernel(k) - 2.0 * kernel_eval(spec, v.row(k), v.row(c));
        radius_sq = std::max(radius_sq, d2);
    }
    return {c, std::sqrt(radius_sq)};
}

KernelConeSummary cone_summary(const KernelSpec& spec, const RowView& v, std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    const std::vector<double> sums = gram_row_sums(spec, v, begin, end, true);
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // |mu| is common to every candidate and drops out of the argmax.
        const double score = sums[i] / std::sqrt(v.self_kernel(begin + i));
        if (i == 0 || score > best_score) {
            best_score = score;
            best = i;
        }
    }
    const std::size_t a = begin + best;
    const double kaa = v.self_kernel(a);
    double min_cos = 1.0;
    for (std::size_t k = begin; k < end; ++k) {
        const double c = kernel_eval(spec, v.row(a), v.row(k)) / std::sqrt(kaa * v.self_kernel(k));
        min_cos = std::min(min_cos, c);
    }
    return {a, clamp_unit(min_cos)};
}

void check_positive_self(const std::vector<double>& self) {
    for (std::size_t i = 0; i < self.size(); ++i) {
        if (!(self[i] > 0.0))
            throw ContractViolation("row " + std::to_string(i) + " has K(x, x) = 0; its feature-space direction is undefined");
    }
}

IndexRange checked_range(const Dataset& data, IndexRange range) {
    if (range.begin >= range.end || range.end > data.size())
        throw ContractViolation("kernel summary needs a nonempty range inside the dataset");
    return range;
}

class KernelBallBuilder {
public:
    KernelBallBuilder(const KernelSpec& spec, const Dataset& data, std::size_t leaf_size, Rng& rng)
        : spec_(spec), data_(data), leaf_size_(leaf_size), rng_(rng), order_(data.size()),
          self_(self_kernels_of(spec, data)), view_{data, order_, self_} {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    void build() { build_node(0, data_.size()); }

    std::vector<KernelBallNode> nodes;
    const std::vector<std::size_t>& order() const { return order_; }
    const std::vector<double>& self() const { return self_; }

private:
    double dist2(std::size_t a, std::size_t b) const {
        return view_.self_kernel(a) + view_.self_kernel(b) - 2.0 * kernel_eval(spec_, view_.row(a), view_.row(b));
    }

    std::int32_t build_node(std::size_t begin, std::size_t end) {
        const auto index = static_cast<std::int32_t>(nodes.size());
        nodes.push_back(KernelBallNode{begin, end});
        const KernelBallSummary s = ball_summary(spec_, view_, begin, end);
        {
            KernelBallNode& node = nodes[static_cast<std::size_t>(index)];
            node.center_row = order_[s.center_row];  // original row until finish()
            node.radius = s.radius;
            node.self_kernel = view_.self_kernel(s.center_row);
        }
        if (end - begin <= leaf_size_) return index;

        std::uniform_int_distribution<std::size_t> pick(begin, end - 1);
        const std::size_t x = pick(rng_);
        auto farthest_from = [&](std::size_t from) {
            std::size_t best = begin;
            double best_d = -1.0;
            for (std::size_t k = begin; k < end; ++k) {
                const double d = dist2(from, k);
                if (d > best_d) {
                    best_d = d;
                    best = k;
                }
            }
            return best;
        };
        const std::size_t a = farthest_from(x);
        const std::size_t b = farthest_from(a);
        const std::size_t row_a = order_[a];
        const std::size_t row_b = order_[b];
        const auto mid = std::stable_partition(
            order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(end),
            [&](std::size_t row) {
                const double kp = self_[row];
                const double da = kp + self_[row_a] - 2.0 * kernel_eval(spec_, data_.row(row), data_.row(row_a));
                const double db = kp + self_[row_b] - 2.0 * kernel_eval(spec_, data_.row(row), data_.row(row_b));
                return da <= db;
            });
        const auto split = static_cast<std::size_t>(mid - order_.begin());
        if (split == begin || split == end) {
            nodes[static_cast<std::size_t>(index)].degenerate = true;
            return index;
        }
        const std::int32_t left = build_node(begin, split);
        const std::int32_t right = build_node(split, end);
        nodes[static_cast<std::size_t>(index)].left = left;
        nodes[static_cast<std::size_t>(index)].right = right;
        return index;
    }

    const KernelSpec& spec_;
    const Dataset& data_;
    std::size_t leaf_size_;
    Rng& rng_;
    std::vector<std::size_t> order_;
    std::vector<double> self_;
    RowView view_;
};

class KernelConeBuilder {
public:
    KernelConeBuilder(const KernelSpec& spec, const Dataset& data, std::size_t leaf_size, Rng& rng)
        : spec_(spec), data_(data), leaf_size_(leaf_size), rng_(rng), order_(data.size()),
          self_(self_kernels_of(spec, data)), view_{data, order_, self_} {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        check_positive_self(self_);
    }

    void build() { build_node(0, data_.size()); }

    std::vector<KernelConeNode> nodes;
    const std::vector<std::size_t>& order() const { return order_; }
    const std::vector<double>& self() const { return self_; }

private:
    double cosine_rows(std::size_t r1, std::size_t r2) const {
        return kernel_eval(spec_, data_.row(r1), data_.row(r2)) / std::sqrt(self_[r1] * self_[r2]);
    }

    std::int32_t build_node(std::size_t begin, std::size_t end) {
        const auto index = static_cast<std::int32_t>(nodes.size());
        nodes.push_back(KernelConeNode{begin, end});
        const KernelConeSummary s = cone_summary(spec_, view_, begin, end);
        {
            KernelConeNode& node = nodes[static_cast<std::size_t>(index)];
            node.axis_row = order_[s.axis_row];  // original row until finish()
            node.min_cosine = s.min_cosine;
            node.self_kernel = view_.self_kernel(s.axis_row);
        }
        if (end - begin <= leaf_size_) return index;

        std::uniform_int_distribution<std::size_t> pick(begin, end - 1);
        const std::size_t x = order_[pick(rng_)];
        auto least_aligned = [&](std::size_t from_row) {
            std::size_t best = order_[begin];
            double best_c = 2.0;
            for (std::size_t k = begin; k < end; ++k) {
                const double c = cosine_rows(from_row, order_[k]);
                if (c < best_c) {
                    best_c = c;
                    best = order_[k];
                }
            }
            return best;
        };
        const std::size_t row_a = least_aligned(x);
        const std::size_t row_b = least_aligned(row_a);
        const auto mid = std::stable_partition(
            order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(end),
            [&](std::size_t row) { return cosine_rows(row_a, row) > cosine_rows(row_b, row); });
        const auto split = static_cast<std::size_t>(mid - order_.begin());
        if (split == begin || split == end) {
            nodes[static_cast<std::size_t>(index)].degenerate = true;
            return index;
        }
        const std::int32_t left = build_node(begin, split);
        const std::int32_t right = build_node(split, end);
        nodes[static_cast<std::size_t>(index)].left = left;
        nodes[static_cast<std::size_t>(index)].right = right;
        return index;
    }

    const KernelSpec& spec_;
    const Dataset& data_;
    std::size_t leaf_size_;
    Rng& rng_;
    std::vector<std::size_t> order_;
    std::vector<double> self_;
    RowView view_;
};

std::size_t& representative(KernelBallNode& n) { return n.center_row; }
std::size_t& representative(KernelConeNode& n) { return n.axis_row; }

template <class Builder, class Node>
KernelTree<Node> finish(const KernelSpec& spec, const Dataset& data, std::size_t leaf_size, Builder& builder) {
    std::vector<double> self(data.size());
    std::vector<std::size_t> position(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
        self[k] = builder.self()[builder.order()[k]];
        position[builder.order()[k]] = k;
    }
    for (Node& n : builder.nodes) representative(n) = position[representative(n)];
    return KernelTree<Node>(spec, data.permuted(builder.order()), leaf_size, std::move(builder.nodes),
                            std::move(self));
}

}  // namespace

KernelBallSummary kernel_ball_center(const KernelSpec& spec, const Dataset& data, IndexRange range) {
    spec.validate();
    checked_range(data, range);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::vector<double> self = self_kernels_of(spec, data);
    return ball_summary(spec, RowView{data, order, self}, range.begin, range.end);
}

KernelConeSummary kernel_cone_axis(const KernelSpec& spec, const Dataset& data, IndexRange range) {
    spec.validate();
    checked_range(data, range);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::vector<double> self = self_kernels_of(spec, data);
    for (std::size_t k = range.begin; k < range.end; ++k) {
        if (!(self[k] > 0.0))
            throw ContractViolation("row " + std::to_string(k) + " has K(x, x) = 0; its feature-space direction is undefined");
    }
    return cone_summary(spec, RowView{data, order, self}, range.begin, range.end);
}

KernelBallTree build_kernel_ball_tree(const KernelSpec& spec, Dataset data, std::size_t leaf_size, Rng& rng) {
    spec.validate();
    if (leaf_size == 0) throw ContractViolation("leaf_size must be at least 1");
    KernelBallBuilder builder(spec, data, leaf_size, rng);
    builder.build();
    return finish<KernelBallBuilder, KernelBallNode>(spec, data, leaf_size, builder);
}

KernelConeTree build_kernel_cone_tree(const KernelSpec& spec, Dataset data, std::size_t leaf_size, Rng& rng) {
    spec.validate();
    if (leaf_size == 0) throw ContractViolation("leaf_size must be at least 1");
    KernelConeBuilder builder(spec, data, leaf_size, rng);
    builder.build();
    return finish<KernelConeBuilder, KernelConeNode>(spec, data, leaf_size, builder);
}

double kernel_mip_point_ball(const KernelFunction& kernel, Vector q, double self_kernel_q, Vector center,
                             const KernelBallNode& node) {
    return kernel(q, center) + node.radius * std::sqrt(self_kernel_q);
}

double kernel_mip_ball_ball(const KernelFunction& kernel, Vector q_center, const KernelBallNode& qnode,
                            Vector p_center, const KernelBallNode& rnode) {
    return kernel(q_center, p_center) + rnode.radius * qnode.radius + rnode.radius * std::sqrt(qnode.self_kernel) +
           qnode.radius * std::sqrt(rnode.self_kernel);
}

double kernel_mip_cone_ball(const KernelFunction& kernel, Vector q_axis, const KernelConeNode& qnode,
                            Vector p_center, const KernelBallNode& rnode) {
    BoundInputs in;
    in.dot_q0_p0 = kernel(p_center, q_axis);
    in.q0_norm = std::sqrt(qnode.self_kernel);
    in.p0_norm = std::sqrt(rnode.self_kernel);
    in.rp = rnode.radius;
    in.cos_omega_q = qnode.min_cosine;
    return mip_cone_ball(in);
}

namespace {

struct KernelSingleRules {
    const KernelBallTree& t;
    const KernelFunction& kernel;
    Vector q;
    double self_q;
    QueryState& state;
    SearchCounters& counters;

    const KernelBallTree& tree() const { return t; }
    double lambda() const { return state.lambda(); }
    double score(std::size_t n) const {
        const KernelBallNode& node = t.node(n);
        return kernel_mip_point_ball(kernel, q, self_q, t.data().row(node.center_row), node);
    }
    void base_case(std::size_t n) {
        const KernelBallNode& node = t.node(n);
        for (std::size_t i = node.begin; i < node.end; ++i) {
            ++counters.point_evals;
            state.offer(t.data().id(i), kernel(q, t.data().row(i)));
        }
    }
};

// Leaf-pair scan shared by both dual modes; `scale` maps a raw kernel value
// to the units the query tree ranks in.
template <class QueryTree, class Scale>
double kernel_scan_leaf_pair(const QueryTree& qt, std::size_t qn, const KernelBallTree& rt, std::size_t rn,
                             const KernelFunction& kernel, std::vector<QueryState>& states,
                             SearchCounters& counters, Scale&& scale) {
    const auto& q = qt.node(qn);
    const KernelBallNode& r = rt.node(rn);
    double min_lambda = std::numeric_limits<double>::infinity();
    for (std::size_t i = q.begin; i < q.end; ++i) {
        const Vector qv = qt.data().row(i);
        for (std::size_t j = r.begin; j < r.end; ++j) {
            ++counters.point_evals;
            states[i].offer(rt.data().id(j), scale(i, kernel(qv, rt.data().row(j))));
        }
        min_lambda = std::min(min_lambda, states[i].lambda());
    }
    return min_lambda;
}

struct KernelDualBallRules {
    const KernelBallTree& qt;
    const KernelBallTree& rt;
    const KernelFunction& kernel;
    std::vector<QueryState>& states;
    SearchCounters& counters;

    const KernelBallTree& qtree() const { return qt; }
    const KernelBallTree& rtree() const { return rt; }
    double score(std::size_t qn, std::size_t rn) const {
        const KernelBallNode& q = qt.node(qn);
        const KernelBallNode& r = rt.node(rn);
        return kernel_mip_ball_ball(kernel, qt.data().row(q.center_row), q, rt.data().row(r.center_row), r);
    }
    double base_case(std::size_t qn, std::size_t rn) {
        return kernel_scan_leaf_pair(qt, qn, rt, rn, kernel, states, counters, [](std::size_t, double v) { return v; });
    }
};

struct KernelDualConeRules {
    const KernelConeTree& qt;
    const KernelBallTree& rt;
    const KernelFunction& kernel;
    std::vector<QueryState>& states;
    SearchCounters& counters;

    const KernelConeTree& qtree() const { return qt; }
    const KernelBallTree& rtree() const { return rt; }
    double score(std::size_t qn, std::size_t rn) const {
        const KernelConeNode& q = qt.node(qn);
        const KernelBallNode& r = rt.node(rn);
        return kernel_mip_cone_ball(kernel, qt.data().row(q.axis_row), q, rt.data().row(r.center_row), r);
    }
    double base_case(std::size_t qn, std::size_t rn) {
        return kernel_scan_leaf_pair(qt, qn, rt, rn, kernel, states, counters, [this](std::size_t i, double v) {
            return v / std::sqrt(qt.self_kernel(i));
        });
    }
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

SearchReport kernel_search(const KernelSpec& spec, const Dataset& queries, const Dataset& refs,
                           KernelSearchMode mode, std::size_t k, std::size_t leaf_size, Rng& rng,
                           const SearchOptions& options) {
    spec.validate();
    if (queries.dims() != refs.dims()) throw ContractViolation("dimension mismatch between queries and references");
    if (k == 0 || k > refs.size()) throw ContractViolation("k must lie in [1, N]");

    const Dataset query_rows(queries.size(), queries.dims(),
                             std::vector<double>(queries.values().begin(), queries.values().end()));
    SearchReport report;
    const KernelFunction kernel(spec);
    std::vector<PruneRecord>* prunes = options.record_prunes ? &report.prunes : nullptr;

    auto build_start = Clock::now();
    const KernelBallTree rtree = build_kernel_ball_tree(spec, refs, leaf_size, rng);
    report.results.resize(queries.size());

    if (mode == KernelSearchMode::single) {
        report.build_seconds = seconds_since(build_start);
        const auto start = Clock::now();
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const Vector q = queries.row(i);
            QueryState state(k);
            KernelSingleRules rules{rtree, kernel, q, kernel_eval(spec, q, q), state, report.counters};
            detail::SingleTreeTraversal<KernelSingleRules> traversal(rules, report.counters, prunes,
                                                                     static_cast<std::int64_t>(i));
            traversal.run();
            report.results[i] = state.candidates();
        }
        report.seconds = seconds_since(start);
        return report;
    }

    if (mode == KernelSearchMode::dual_ball) {
        const KernelBallTree qtree = build_kernel_ball_tree(spec, query_rows, leaf_size, rng);
        report.build_seconds = seconds_since(build_start);
        std::vector<QueryState> states(queries.size(), QueryState(k));
        KernelDualBallRules rules{qtree, rtree, kernel, states, report.counters};
        const auto start = Clock::now();
        detail::DualTreeTraversal<KernelDualBallRules> traversal(rules, report.counters, prunes);
        traversal.run();
        report.seconds = seconds_since(start);
        report.node_lambdas = traversal.take_lambdas();
        for (std::size_t i = 0; i < queries.size(); ++i) report.results[qtree.data().id(i)] = states[i].candidates();
        return report;
    }

    // Dual cone: queries with K(q, q) = 0 map to the origin of feature space
    // and score 0 against everything.
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const Vector q = queries.row(i);
        if (kernel_eval(spec, q, q) > 0.0)
            keep.push_back(i);
        else
            report.fallback_queries.push_back(i);
    }
    for (std::size_t z : report.fallback_queries) {
        for (std::size_t j = 0; j < k; ++j) report.results[z].push_back({j, 0.0});
    }
    if (keep.empty()) {
        report.build_seconds = seconds_since(build_start);
        return report;
    }
    const KernelConeTree qtree = build_kernel_cone_tree(spec, query_rows.permuted(keep), leaf_size, rng);
    report.build_seconds = seconds_since(build_start);
    std::vector<QueryState> states(keep.size(), QueryState(k));
    KernelDualConeRules rules{qtree, rtree, kernel, states, report.counters};
    const auto start = Clock::now();
    detail::DualTreeTraversal<KernelDualConeRules> traversal(rules, report.counters, prunes);
    traversal.run();
    report.seconds = seconds_since(start);
    report.node_lambdas = traversal.take_lambdas();
    for (const KernelConeNode& n : qtree.nodes()) report.wide_cones += n.min_cosine < 0.0 ? 1 : 0;

    std::vector<std::size_t> row_of(refs.size());
    for (std::size_t j = 0; j < rtree.data().size(); ++j) row_of[rtree.data().id(j)] = j;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const std::size_t qid = qtree.data().id(i);
        std::vector<Neighbor> found = states[i].candidates();
        for (Neighbor& nb : found) nb.value = kernel_eval(spec, queries.row(qid), rtree.data().row(row_of[nb.id]));
        std::sort(found.begin(), found.end(), ranks_before);
        report.results[qid] = std::move(found);
    }
    return report;
}

}  // namespace mips
