#pragma once

// Brute-force references and geometric fixtures. Nothing here reuses the
// search or bound code it is meant to check.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mips/ball_tree.hpp"
#include "mips/cone_tree.hpp"
#include "mips/dataset.hpp"
#include "mips/kernel.hpp"
#include "mips/search.hpp"

namespace mips::oracle {

struct OracleResult {
    // results[i]: top-k of query row i, values descending, ties by id.
    std::vector<std::vector<Neighbor>> results;
    std::uint64_t inner_products = 0;
};

/// All N inner products per query followed by a full sort.
OracleResult brute_force_topk(const Dataset& queries, const Dataset& refs, std::size_t k);

/// Same answer by k rounds of max-selection; used to cross-check the above.
OracleResult brute_force_topk_selection(const Dataset& queries, const Dataset& refs, std::size_t k);

/// Full Gram matrix between queries and references, then a full sort.
OracleResult brute_force_kernel_topk(const KernelSpec& spec, const Dataset& queries, const Dataset& refs,
                                     std::size_t k);

/// First differing (query, rank) between two result sets, or nothing when
/// ids match everywhere and values agree within `rel_tol` relative.
struct Mismatch {
    std::size_t query = 0;
    std::size_t rank = 0;
    std::string reason;
};
std::optional<Mismatch> compare_results(const std::vector<std::vector<Neighbor>>& expected,
                                        const std::vector<std::vector<Neighbor>>& actual, double rel_tol = 1e-9);

// ---- bound audits ---------------------------------------------------------

struct RegionPair {
    std::vector<double> q;
    std::vector<double> p;
};

using PairSampler = std::function<RegionPair(Rng&)>;
using QuerySampler = std::function<std::vector<double>(Rng&)>;
using PairScore = std::function<double(Vector q, Vector p)>;

struct AuditResult {
    bool passed = true;
    std::size_t checked = 0;       // score evaluations
    double bound = 0.0;
    double max_observed = 0.0;
    std::optional<RegionPair> witness;
    double witness_value = 0.0;
};

/// Draws `samples` (q, p) pairs and fails on the first whose score exceeds
/// bound_value + tol. The score defaults to the inner product.
AuditResult audit_bound(double bound_value, const PairSampler& sampler, std::size_t samples, std::uint64_t seed,
                        const PairScore& score = {}, double tol = 1e-9);

/// Draws `samples` queries and scores each against every node point.
AuditResult audit_bound(const Dataset& node_points, double bound_value, const QuerySampler& sampler,
                        std::size_t samples, std::uint64_t seed, const PairScore& score = {}, double tol = 1e-9);

/// Uniform point in the ball: Gaussian direction, radius scaled by U^(1/d).
std::vector<double> sample_in_ball(Vector center, double radius, Rng& rng);

/// Unit vector within angle acos(cos_omega) of the unit `axis`, uniform on
/// the cap by rejection. Narrow caps switch to a direct angular proposal.
std::vector<double> sample_in_cone(Vector axis, double cos_omega, Rng& rng);

PairSampler point_ball_sampler(std::vector<double> q, std::vector<double> center, double radius);
PairSampler ball_ball_sampler(std::vector<double> q_center, double rq, std::vector<double> p_center, double rp);
/// `axis` is normalized first.
PairSampler cone_ball_sampler(std::vector<double> axis, double cos_omega, std::vector<double> p_center, double rp);
/// Uniform member pairs of two point sets.
PairSampler member_pair_sampler(const Dataset& queries, const Dataset& refs);

// ---- fixtures -------------------------------------------------------------

struct NonMetricFixture {
    std::array<std::vector<double>, 3> vectors;  // x, y, z
    double dist_xy = 0.0;
    double dist_yz = 0.0;
    double dist_zx = 0.0;

    bool triangle_inequality_violated() const noexcept { return dist_xy + dist_yz < dist_zx; }
};

/// Unit x, y, z with angle(x, y) = pi/4 - 0.1, angle(y, z) = pi/4,
/// angle(x, z) = pi/2 - 0.3 under the cosine distance 1 - <a, b>.
/// Throws if the triangle inequality happens to hold.
NonMetricFixture non_metric_fixture();

// ---- tree audits ----------------------------------------------------------

struct TreeAudit {
    std::vector<std::string> failures;
    std::size_t nodes = 0;
    std::size_t leaves = 0;
    std::size_t degenerate_leaves = 0;

    bool passed() const noexcept { return failures.empty(); }
};

/// Checks the node layout (root covers everything, children split the
/// parent's range contiguously, leaf sizes), that the tree's rows are the
/// source rows under its id permutation, and geometric containment.
TreeAudit audit_ball_tree(const BallTree& tree, const Dataset& source, double tol = 1e-9);
TreeAudit audit_cone_tree(const ConeTree& tree, const Dataset& source, double tol = 1e-9);
TreeAudit audit_kernel_ball_tree(const KernelBallTree& tree, const Dataset& source, double tol = 1e-9);
TreeAudit audit_kernel_cone_tree(const KernelConeTree& tree, const Dataset& source, double tol = 1e-9);

/// Bitwise equality of layout, summaries and row order.
bool identical(const BallTree& a, const BallTree& b);
bool identical(const ConeTree& a, const ConeTree& b);
bool identical(const KernelBallTree& a, const KernelBallTree& b);
bool identical(const KernelConeTree& a, const KernelConeTree& b);

}  // namespace mips::oracle
