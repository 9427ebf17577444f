#include "mips/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "mips/error.hpp"

namespace mips::oracle {

namespace {

double plain_dot(Vector a, Vector b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

bool better(const Neighbor& a, const Neighbor& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.id < b.id;
}

void check_inputs(const Dataset& queries, const Dataset& refs, std::size_t k) {
    if (queries.dims() != refs.dims())
        throw ContractViolation("queries have " + std::to_string(queries.dims()) + " dims, references " +
                                std::to_string(refs.dims()));
    if (k == 0 || k > refs.size())
        throw ContractViolation("k = " + std::to_string(k) + " outside [1, " + std::to_string(refs.size()) + "]");
}

template <class Score>
OracleResult full_sort(const Dataset& queries, const Dataset& refs, std::size_t k, Score&& score) {
    check_inputs(queries, refs, k);
    OracleResult out;
    out.results.resize(queries.size());
    std::vector<Neighbor> all(refs.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t j = 0; j < refs.size(); ++j) all[j] = {refs.id(j), score(queries.row(i), refs.row(j))};
        out.inner_products += refs.size();
        std::sort(all.begin(), all.end(), better);
        out.results[i].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return out;
}

double oracle_kernel(const KernelSpec& spec, Vector x, Vector y) {
    switch (spec.kind) {
        case KernelKind::linear: return plain_dot(x, y);
        case KernelKind::rbf: {
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double t = x[i] - y[i];
                s += t * t;
            }
            return std::exp(-spec.gamma * s);
        }
        case KernelKind::polynomial: {
            const double base = plain_dot(x, y) + spec.coef0;
            double out = 1.0;
            for (unsigned i = 0; i < spec.degree; ++i) out *= base;
            return out;
        }
    }
    return 0.0;
}

std::vector<double> gaussian_vector(std::size_t d, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(d);
    double n2 = 0.0;
    while (n2 == 0.0) {
        for (double& x : v) x = gauss(rng);
        n2 = plain_dot(v, v);
    }
    return v;
}

std::vector<double> unit(std::vector<double> v) {
    const double n = std::sqrt(plain_dot(v, v));
    if (n == 0.0) throw ContractViolation("cannot normalize a zero vector");
    for (double& x : v) x /= n;
    return v;
}

}  // namespace

OracleResult brute_force_topk(const Dataset& queries, const Dataset& refs, std::size_t k) {
    return full_sort(queries, refs, k, plain_dot);
}

OracleResult brute_force_topk_selection(const Dataset& queries, const Dataset& refs, std::size_t k) {
    check_inputs(queries, refs, k);
    OracleResult out;
    out.results.resize(queries.size());
    std::vector<double> values(refs.size());
    std::vector<bool> taken(refs.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t j = 0; j < refs.size(); ++j) values[j] = plain_dot(queries.row(i), refs.row(j));
        out.inner_products += refs.size();
        std::fill(taken.begin(), taken.end(), false);
        for (std::size_t round = 0; round < k; ++round) {
            std::size_t best = refs.size();
            for (std::size_t j = 0; j < refs.size(); ++j) {
                if (taken[j]) continue;
                if (best == refs.size() || better({refs.id(j), values[j]}, {refs.id(best), values[best]})) best = j;
            }
            taken[best] = true;
            out.results[i].push_back({refs.id(best), values[best]});
        }
    }
    return out;
}

OracleResult brute_force_kernel_topk(const KernelSpec& spec, const Dataset& queries, const Dataset& refs,
                                     std::size_t k) {
    spec.validate();
    check_inputs(queries, refs, k);
    // Materialize the Gram block first so that the scan is a plain sort.
    std::vector<double> gram(queries.size() * refs.size());
    for (std::size_t i = 0; i < queries.size(); ++i)
        for (std::size_t j = 0; j < refs.size(); ++j)
            gram[i * refs.size() + j] = oracle_kernel(spec, queries.row(i), refs.row(j));
    OracleResult out;
    out.results.resize(queries.size());
    out.inner_products = gram.size();
    std::vector<Neighbor> all(refs.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t j = 0; j < refs.size(); ++j) all[j] = {refs.id(j), gram[i * refs.size() + j]};
        std::sort(all.begin(), all.end(), better);
        out.results[i].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return out;
}

std::optional<Mismatch> compare_results(const std::vector<std::vector<Neighbor>>& expected,
                                        const std::vector<std::vector<Neighbor>>& actual, double rel_tol) {
    if (expected.size() != actual.size())
        return Mismatch{0, 0, "expected " + std::to_string(expected.size()) + " queries, got " +
                                  std::to_string(actual.size())};
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (expected[i].size() != actual[i].size())
            return Mismatch{i, 0, "expected " + std::to_string(expected[i].size()) + " neighbors, got " +
                                      std::to_string(actual[i].size())};
        for (std::size_t r = 0; r < expected[i].size(); ++r) {
            const Neighbor& e = expected[i][r];
            const Neighbor& a = actual[i][r];
            std::ostringstream why;
            why.precision(17);
            if (e.id != a.id) {
                why << "id " << a.id << " (" << a.value << ") where " << e.id << " (" << e.value << ") expected";
                return Mismatch{i, r, why.str()};
            }
            const double scale = std::max({1.0, std::abs(e.value), std::abs(a.value)});
            if (std::abs(e.value - a.value) > rel_tol * scale) {
                why << "value " << a.value << " where " << e.value << " expected";
                return Mismatch{i, r, why.str()};
            }
        }
    }
    return std::nullopt;
}

AuditResult audit_bound(double bound_value, const PairSampler& sampler, std::size_t samples, std::uint64_t seed,
                        const PairScore& score, double tol) {
    Rng rng(seed);
    AuditResult out;
    out.bound = bound_value;
    out.max_observed = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples; ++s) {
        RegionPair pair = sampler(rng);
        const double v = score ? score(pair.q, pair.p) : plain_dot(pair.q, pair.p);
        ++out.checked;
        out.max_observed = std::max(out.max_observed, v);
        if (v > bound_value + tol) {
            out.passed = false;
            out.witness_value = v;
            out.witness = std::move(pair);
            return out;
        }
    }
    return out;
}

AuditResult audit_bound(const Dataset& node_points, double bound_value, const QuerySampler& sampler,
                        std::size_t samples, std::uint64_t seed, const PairScore& score, double tol) {
    Rng rng(seed);
    AuditResult out;
    out.bound = bound_value;
    out.max_observed = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples; ++s) {
        const std::vector<double> q = sampler(rng);
        for (std::size_t j = 0; j < node_points.size(); ++j) {
            const Vector p = node_points.row(j);
            const double v = score ? score(q, p) : plain_dot(q, p);
            ++out.checked;
            out.max_observed = std::max(out.max_observed, v);
            if (v > bound_value + tol) {
                out.passed = false;
                out.witness_value = v;
                out.witness = RegionPair{q, std::vector<double>(p.begin(), p.end())};
                return out;
            }
        }
    }
    return out;
}

std::vector<double> sample_in_ball(Vector center, double radius, Rng& rng) {
    std::vector<double> out(center.begin(), center.end());
    if (radius <= 0.0) return out;
    const std::vector<double> dir = unit(gaussian_vector(center.size(), rng));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = radius * std::pow(u(rng), 1.0 / static_cast<double>(center.size()));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += r * dir[i];
    return out;
}

std::vector<double> sample_in_cone(Vector axis, double cos_omega, Rng& rng) {
    const std::size_t d = axis.size();
    if (cos_omega <= -1.0) return unit(gaussian_vector(d, rng));
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<double> v = unit(gaussian_vector(d, rng));
        if (plain_dot(v, axis) >= cos_omega) return v;
    }
    // Narrow cap: pick the angle directly and a perpendicular direction.
    const double omega = std::acos(std::clamp(cos_omega, -1.0, 1.0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double theta = omega * u(rng);
    std::vector<double> perp = gaussian_vector(d, rng);
    const double along = plain_dot(perp, axis);
    for (std::size_t i = 0; i < d; ++i) perp[i] -= along * axis[i];
    const double pn = std::sqrt(plain_dot(perp, perp));
    std::vector<double> out(axis.begin(), axis.end());
    if (pn == 0.0 || d == 1) return out;
    for (std::size_t i = 0; i < d; ++i) out[i] = std::cos(theta) * axis[i] + std::sin(theta) * perp[i] / pn;
    return out;
}

PairSampler point_ball_sampler(std::vector<double> q, std::vector<double> center, double radius) {
    return [q = std::move(q), center = std::move(center), radius](Rng& rng) {
        return RegionPair{q, sample_in_ball(center, radius, rng)};
    };
}

PairSampler ball_ball_sampler(std::vector<double> q_center, double rq, std::vector<double> p_center, double rp) {
    return [qc = std::move(q_center), rq, pc = std::move(p_center), rp](Rng& rng) {
        std::vector<double> q = sample_in_ball(qc, rq, rng);
        return RegionPair{std::move(q), sample_in_ball(pc, rp, rng)};
    };
}

PairSampler cone_ball_sampler(std::vector<double> axis, double cos_omega, std::vector<double> p_center, double rp) {
    return [a = unit(std::move(axis)), cos_omega, pc = std::move(p_center), rp](Rng& rng) {
        std::vector<double> q = sample_in_cone(a, cos_omega, rng);
        return RegionPair{std::move(q), sample_in_ball(pc, rp, rng)};
    };
}

PairSampler member_pair_sampler(const Dataset& queries, const Dataset& refs) {
    return [&queries, &refs](Rng& rng) {
        std::uniform_int_distribution<std::size_t> qi(0, queries.size() - 1);
        std::uniform_int_distribution<std::size_t> pi(0, refs.size() - 1);
        const Vector q = queries.row(qi(rng));
        const Vector p = refs.row(pi(rng));
        return RegionPair{{q.begin(), q.end()}, {p.begin(), p.end()}};
    };
}

NonMetricFixture non_metric_fixture() {
    const double a = std::numbers::pi / 4.0 - 0.1;  // angle(x, y)
    const double b = std::numbers::pi / 4.0;        // angle(y, z)
    const double c = std::numbers::pi / 2.0 - 0.3;  // angle(x, z)
    // z = (cos c, u, w) with <y, z> = cos b fixes u; w completes the norm.
    const double u = (std::cos(b) - std::cos(a) * std::cos(c)) / std::sin(a);
    const double w2 = 1.0 - std::cos(c) * std::cos(c) - u * u;
    if (w2 < 0.0) throw Error("non-metric fixture angles are not realizable");
    NonMetricFixture f;
    f.vectors[0] = {1.0, 0.0, 0.0};
    f.vectors[1] = {std::cos(a), std::sin(a), 0.0};
    f.vectors[2] = {std::cos(c), u, std::sqrt(w2)};
    f.dist_xy = 1.0 - plain_dot(f.vectors[0], f.vectors[1]);
    f.dist_yz = 1.0 - plain_dot(f.vectors[1], f.vectors[2]);
    f.dist_zx = 1.0 - plain_dot(f.vectors[2], f.vectors[0]);
    if (!f.triangle_inequality_violated()) throw Error("non-metric fixture satisfies the triangle inequality");
    return f;
}

// ---- tree audits ----------------------------------------------------------

namespace {

template <class Node>
void audit_layout(const std::vector<Node>& nodes, std::size_t n, std::size_t leaf_size, TreeAudit& out) {
    auto fail = [&](std::size_t i, const std::string& what) {
        out.failures.push_back("node " + std::to_string(i) + ": " + what);
    };
    out.nodes = nodes.size();
    if (nodes.empty()) {
        out.failures.push_back("tree has no nodes");
        return;
    }
    if (nodes[0].begin != 0 || nodes[0].end != n) fail(0, "root does not cover every row");
    std::vector<int> parents(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& node = nodes[i];
        if (node.begin >= node.end) fail(i, "empty range");
        if (node.is_leaf()) {
            ++out.leaves;
            if (node.right >= 0) fail(i, "leaf with a right child");
            if (node.degenerate) {
                ++out.degenerate_leaves;
            } else if (node.count() > leaf_size) {
                fail(i, "leaf holds " + std::to_string(node.count()) + " rows, above leaf size");
            }
            continue;
        }
        if (node.degenerate) fail(i, "internal node flagged degenerate");
        if (node.count() <= leaf_size) fail(i, "internal node small enough to be a leaf");
        const auto l = static_cast<std::size_t>(node.left);
        const auto r = static_cast<std::size_t>(node.right);
        if (node.right < 0 || l >= nodes.size() || r >= nodes.size() || l <= i || r <= i) {
            fail(i, "child index out of range");
            continue;
        }
        ++parents[l];
        ++parents[r];
        if (nodes[l].begin != node.begin || nodes[l].end != nodes[r].begin || nodes[r].end != node.end)
            fail(i, "children do not partition the parent range");
    }
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (parents[i] != 1) fail(i, "reached from " + std::to_string(parents[i]) + " parents");
}

void audit_rows(const Dataset& tree_rows, const Dataset& source, TreeAudit& out) {
    if (tree_rows.size() != source.size() || tree_rows.dims() != source.dims()) {
        out.failures.push_back("tree dataset shape differs from the source");
        return;
    }
    std::vector<bool> seen(source.size(), false);
    for (std::size_t i = 0; i < tree_rows.size(); ++i) {
        const std::size_t id = tree_rows.id(i);
        std::size_t src = source.size();
        // Source ids need not be positions.
        if (id < source.size() && source.id(id) == id) src = id;
        else
            for (std::size_t j = 0; j < source.size(); ++j)
                if (source.id(j) == id) src = j;
        if (src == source.size() || seen[src]) {
            out.failures.push_back("row " + std::to_string(i) + " has unknown or repeated id " + std::to_string(id));
            continue;
        }
        seen[src] = true;
        const Vector a = tree_rows.row(i);
        const Vector b = source.row(src);
        if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0)
            out.failures.push_back("row " + std::to_string(i) + " differs from source id " + std::to_string(id));
    }
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

TreeAudit audit_ball_tree(const BallTree& tree, const Dataset& source, double tol) {
    TreeAudit out;
    audit_layout(tree.nodes(), tree.data().size(), tree.leaf_size(), out);
    audit_rows(tree.data(), source, out);
    const Dataset& data = tree.data();
    const std::size_t d = data.dims();
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const BallNode& node = tree.node(i);
        const Vector c = tree.center(i);
        std::vector<double> mean(d, 0.0);
        double max_dist = 0.0;
        for (std::size_t r = node.begin; r < node.end; ++r) {
            const Vector p = data.row(r);
            for (std::size_t j = 0; j < d; ++j) mean[j] += p[j];
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += (p[j] - c[j]) * (p[j] - c[j]);
            max_dist = std::max(max_dist, std::sqrt(s));
        }
        double scale = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            mean[j] /= static_cast<double>(node.count());
            scale = std::max(scale, std::abs(mean[j]));
        }
        for (std::size_t j = 0; j < d; ++j) {
            if (std::abs(mean[j] - c[j]) > tol * scale) {
                out.failures.push_back("node " + std::to_string(i) + ": center is not the member mean");
                break;
            }
        }
        if (max_dist > node.radius + tol * std::max(1.0, node.radius))
            out.failures.push_back("node " + std::to_string(i) + ": a member lies outside the ball");
        if (!near(max_dist, node.radius, tol))
            out.failures.push_back("node " + std::to_string(i) + ": radius is not the farthest member distance");
        if (!near(std::sqrt(plain_dot(c, c)), node.center_norm, tol))
            out.failures.push_back("node " + std::to_string(i) + ": cached center norm is stale");
    }
    return out;
}

TreeAudit audit_cone_tree(const ConeTree& tree, const Dataset& source, double tol) {
    TreeAudit out;
    audit_layout(tree.nodes(), tree.data().size(), tree.leaf_size(), out);
    audit_rows(tree.data(), source, out);
    const Dataset& data = tree.data();
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const ConeNode& node = tree.node(i);
        const Vector a = tree.axis(i);
        const double an = std::sqrt(plain_dot(a, a));
        if (!near(an, node.axis_norm, tol))
            out.failures.push_back("node " + std::to_string(i) + ": cached axis norm is stale");
        if (node.min_cosine < -1.0 || node.min_cosine > 1.0)
            out.failures.push_back("node " + std::to_string(i) + ": cosine outside [-1, 1]");
        if (an < kDegenerateAxisNorm) {
            if (node.min_cosine != -1.0)
                out.failures.push_back("node " + std::to_string(i) + ": zero axis without a full cone");
            continue;
        }
        for (std::size_t r = node.begin; r < node.end; ++r) {
            const double cosine = plain_dot(a, data.row(r)) / an;
            if (cosine < node.min_cosine - tol) {
                out.failures.push_back("node " + std::to_string(i) + ": a member lies outside the cone");
                break;
            }
        }
    }
    return out;
}

TreeAudit audit_kernel_ball_tree(const KernelBallTree& tree, const Dataset& source, double tol) {
    TreeAudit out;
    audit_layout(tree.nodes(), tree.data().size(), tree.leaf_size(), out);
    audit_rows(tree.data(), source, out);
    const Dataset& data = tree.data();
    const KernelSpec& spec = tree.spec();
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const KernelBallNode& node = tree.node(i);
        if (node.center_row < node.begin || node.center_row >= node.end) {
            out.failures.push_back("node " + std::to_string(i) + ": center is not a member");
            continue;
        }
        const Vector c = data.row(node.center_row);
        const double kcc = oracle_kernel(spec, c, c);
        if (!near(kcc, node.self_kernel, tol))
            out.failures.push_back("node " + std::to_string(i) + ": cached K(c, c) is stale");
        double max_d2 = 0.0;
        for (std::size_t r = node.begin; r < node.end; ++r) {
            const Vector p = data.row(r);
            max_d2 = std::max(max_d2, kcc + oracle_kernel(spec, p, p) - 2.0 * oracle_kernel(spec, c, p));
        }
        const double scale = std::max(1.0, kcc);
        if (max_d2 > node.radius * node.radius + tol * scale)
            out.failures.push_back("node " + std::to_string(i) + ": a member lies outside the feature-space ball");
    }
    return out;
}

TreeAudit audit_kernel_cone_tree(const KernelConeTree& tree, const Dataset& source, double tol) {
    TreeAudit out;
    audit_layout(tree.nodes(), tree.data().size(), tree.leaf_size(), out);
    audit_rows(tree.data(), source, out);
    const Dataset& data = tree.data();
    const KernelSpec& spec = tree.spec();
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const KernelConeNode& node = tree.node(i);
        if (node.axis_row < node.begin || node.axis_row >= node.end) {
            out.failures.push_back("node " + std::to_string(i) + ": axis is not a member");
            continue;
        }
        const Vector a = data.row(node.axis_row);
        const double kaa = oracle_kernel(spec, a, a);
        for (std::size_t r = node.begin; r < node.end; ++r) {
            const Vector p = data.row(r);
            const double cosine = oracle_kernel(spec, a, p) / std::sqrt(kaa * oracle_kernel(spec, p, p));
            if (cosine < node.min_cosine - tol) {
                out.failures.push_back("node " + std::to_string(i) + ": a member lies outside the feature-space cone");
                break;
            }
        }
    }
    return out;
}

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

template <class Node>
bool same_layout(const Node& a, const Node& b) {
    return a.begin == b.begin && a.end == b.end && a.left == b.left && a.right == b.right &&
           a.degenerate == b.degenerate;
}

bool same_ids(const Dataset& a, const Dataset& b) { return a == b; }  // compares ids too

bool same_vector(Vector a, Vector b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

bool identical(const BallTree& a, const BallTree& b) {
    if (a.nodes().size() != b.nodes().size() || a.leaf_size() != b.leaf_size() || !same_ids(a.data(), b.data()))
        return false;
    for (std::size_t i = 0; i < a.nodes().size(); ++i) {
        const BallNode& x = a.node(i);
        const BallNode& y = b.node(i);
        if (!same_layout(x, y) || !same_bits(x.radius, y.radius) || !same_bits(x.center_norm, y.center_norm) ||
            !same_vector(a.center(i), b.center(i)))
            return false;
    }
    return true;
}

bool identical(const ConeTree& a, const ConeTree& b) {
    if (a.nodes().size() != b.nodes().size() || a.leaf_size() != b.leaf_size() || !same_ids(a.data(), b.data()))
        return false;
    for (std::size_t i = 0; i < a.nodes().size(); ++i) {
        const ConeNode& x = a.node(i);
        const ConeNode& y = b.node(i);
        if (!same_layout(x, y) || !same_bits(x.min_cosine, y.min_cosine) || !same_bits(x.axis_norm, y.axis_norm) ||
            !same_vector(a.axis(i), b.axis(i)))
            return false;
    }
    return true;
}

bool identical(const KernelBallTree& a, const KernelBallTree& b) {
    if (a.nodes().size() != b.nodes().size() || a.leaf_size() != b.leaf_size() || !same_ids(a.data(), b.data()))
        return false;
    for (std::size_t i = 0; i < a.nodes().size(); ++i) {
        const KernelBallNode& x = a.node(i);
        const KernelBallNode& y = b.node(i);
        if (!same_layout(x, y) || x.center_row != y.center_row || !same_bits(x.radius, y.radius)) return false;
    }
    return true;
}

bool identical(const KernelConeTree& a, const KernelConeTree& b) {
    if (a.nodes().size() != b.nodes().size() || a.leaf_size() != b.leaf_size() || !same_ids(a.data(), b.data()))
        return false;
    for (std::size_t i = 0; i < a.nodes().size(); ++i) {
        const KernelConeNode& x = a.node(i);
        const KernelConeNode& y = b.node(i);
        if (!same_layout(x, y) || x.axis_row != y.axis_row || !same_bits(x.min_cosine, y.min_cosine)) return false;
    }
    return true;
}

}  // namespace mips::oracle
