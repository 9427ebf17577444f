#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "mips/ball_tree.hpp"
#include "mips/dataset.hpp"
#include "mips/search.hpp"

namespace mips {

enum class KernelKind { linear, rbf, polynomial };

struct KernelSpec {
    KernelKind kind = KernelKind::linear;
    double gamma = 1.0;     // rbf: exp(-gamma ||x - y||^2)
    double coef0 = 0.0;     // polynomial: (<x, y> + coef0)^degree
    unsigned degree = 2;

    static KernelSpec linear() { return {}; }
    static KernelSpec rbf(double gamma) { return {KernelKind::rbf, gamma, 0.0, 2}; }
    static KernelSpec polynomial(double coef0, unsigned degree) {
        return {KernelKind::polynomial, 1.0, coef0, degree};
    }

    /// Throws ContractViolation for gamma <= 0, coef0 < 0 or degree 0.
    void validate() const;
};

std::string_view to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view name);

double kernel_eval(const KernelSpec& spec, Vector x, Vector y);

/// Kernel evaluation with a call counter, one per search or audit.
class KernelFunction {
public:
    explicit KernelFunction(KernelSpec spec) : spec_(spec) { spec_.validate(); }

    double operator()(Vector x, Vector y) const {
        ++evaluations_;
        return kernel_eval(spec_, x, y);
    }

    const KernelSpec& spec() const noexcept { return spec_; }
    std::uint64_t evaluations() const noexcept { return evaluations_; }

private:
    KernelSpec spec_;
    mutable std::uint64_t evaluations_ = 0;
};

/// Ball in feature space centred on a member point (the medoid of the
/// implicit feature-space mean).
struct KernelBallNode {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t center_row = 0;  // row in the tree's dataset
    double radius = 0.0;
    double self_kernel = 0.0;    // K(center, center)
    std::int32_t left = -1;
    std::int32_t right = -1;
    bool degenerate = false;

    bool is_leaf() const noexcept { return left < 0; }
    std::size_t count() const noexcept { return end - begin; }
};

/// Cone in feature space whose axis is a member point.
struct KernelConeNode {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t axis_row = 0;
    double min_cosine = 1.0;
    double self_kernel = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    bool degenerate = false;

    bool is_leaf() const noexcept { return left < 0; }
    std::size_t count() const noexcept { return end - begin; }
};

template <class Node>
class KernelTree {
public:
    KernelTree(KernelSpec spec, Dataset data, std::size_t leaf_size, std::vector<Node> nodes,
               std::vector<double> self_kernels)
        : spec_(spec),
          data_(std::move(data)),
          leaf_size_(leaf_size),
          nodes_(std::move(nodes)),
          self_kernels_(std::move(self_kernels)) {}

    const KernelSpec& spec() const noexcept { return spec_; }
    const Dataset& data() const noexcept { return data_; }
    std::size_t leaf_size() const noexcept { return leaf_size_; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const Node& node(std::size_t i) const noexcept { return nodes_[i]; }
    /// K(x, x) for every row, computed once at build time.
    double self_kernel(std::size_t row) const noexcept { return self_kernels_[row]; }

private:
    KernelSpec spec_;
    Dataset data_;
    std::size_t leaf_size_;
    std::vector<Node> nodes_;
    std::vector<double> self_kernels_;
};

using KernelBallTree = KernelTree<KernelBallNode>;
using KernelConeTree = KernelTree<KernelConeNode>;

struct KernelBallSummary {
    std::size_t center_row;
    double radius;
};

/// Medoid of the feature-space mean over rows of `range`, ties to the
/// smaller row, and the enclosing radius around it. Quadratic in the range.
KernelBallSummary kernel_ball_center(const KernelSpec& spec, const Dataset& data, IndexRange range);

struct KernelConeSummary {
    std::size_t axis_row;
    double min_cosine;
};

/// Member with the largest feature-space cosine to the mean of the
/// normalized members, and the smallest member cosine to it.
KernelConeSummary kernel_cone_axis(const KernelSpec& spec, const Dataset& data, IndexRange range);

KernelBallTree build_kernel_ball_tree(const KernelSpec& spec, Dataset data, std::size_t leaf_size, Rng& rng);

/// Rows with K(x, x) = 0 have no feature-space direction and are rejected.
KernelConeTree build_kernel_cone_tree(const KernelSpec& spec, Dataset data, std::size_t leaf_size, Rng& rng);

/// K(q, p_c) + R sqrt(K(q, q)); one kernel evaluation.
double kernel_mip_point_ball(const KernelFunction& kernel, Vector q, double self_kernel_q, Vector center,
                             const KernelBallNode& node);

/// K(q_c, p_c) + Rp Rq + Rp sqrt(K(q_c, q_c)) + Rq sqrt(K(p_c, p_c)).
double kernel_mip_ball_ball(const KernelFunction& kernel, Vector q_center, const KernelBallNode& qnode,
                            Vector p_center, const KernelBallNode& rnode);

/// Cone-ball bound in feature space; bounds K(q, p) / sqrt(K(q, q)).
double kernel_mip_cone_ball(const KernelFunction& kernel, Vector q_axis, const KernelConeNode& qnode,
                            Vector p_center, const KernelBallNode& rnode);

enum class KernelSearchMode { single, dual_ball, dual_cone };

/// Exact max-kernel search. Builds the reference tree (and query tree for
/// the dual modes) and reports K(q, r) values indexed by query row.
SearchReport kernel_search(const KernelSpec& spec, const Dataset& queries, const Dataset& refs,
                           KernelSearchMode mode, std::size_t k, std::size_t leaf_size, Rng& rng,
                           const SearchOptions& options = {});

}  // namespace mips
