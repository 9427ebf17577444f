#pragma once

// Depth-first branch-and-bound skeletons shared by the explicit and the
// kernelized searches. Rules supply the bound, the leaf scan, and node
// access; the skeletons own the visiting order and prune bookkeeping.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "mips/search.hpp"

namespace mips::detail {

// Rules for a single query:
//   tree()                 -> object with node(i) (is_leaf/left/right)
//   score(node)            -> upper bound for that node
//   base_case(node)        -> scan the leaf
//   lambda()               -> current k-th best value
template <class Rules>
class SingleTreeTraversal {
public:
    SingleTreeTraversal(Rules& rules, SearchCounters& counters, std::vector<PruneRecord>* prunes,
                        std::int64_t query_row)
        : rules_(rules), counters_(counters), prunes_(prunes), query_row_(query_row) {}

    void run() {
        ++counters_.bound_evals;
        visit(0, rules_.score(0));
    }

private:
    void visit(std::size_t n, double score) {
        ++counters_.nodes_visited;
        const double lambda = rules_.lambda();
        if (!(lambda < score)) {
            ++counters_.nodes_pruned;
            if (prunes_) prunes_->push_back({query_row_, -1, n, lambda, score});
            return;
        }
        const auto& node = rules_.tree().node(n);
        if (node.is_leaf()) {
            rules_.base_case(n);
            return;
        }
        const auto l = static_cast<std::size_t>(node.left);
        const auto r = static_cast<std::size_t>(node.right);
        const double sl = rules_.score(l);
        const double sr = rules_.score(r);
        counters_.bound_evals += 2;
        if (sl <= sr) {
            visit(r, sr);
            visit(l, sl);
        } else {
            visit(l, sl);
            visit(r, sr);
        }
    }

    Rules& rules_;
    SearchCounters& counters_;
    std::vector<PruneRecord>* prunes_;
    std::int64_t query_row_;
};

// Rules for a query tree against a reference tree:
//   qtree(), rtree()
//   score(qn, rn)
//   base_case(qn, rn)      -> scans every query of qn over rn, returns the
//                             minimum threshold over qn's queries
template <class Rules>
class DualTreeTraversal {
public:
    DualTreeTraversal(Rules& rules, SearchCounters& counters, std::vector<PruneRecord>* prunes)
        : rules_(rules),
          counters_(counters),
          prunes_(prunes),
          lambda_(rules.qtree().nodes().size(), -std::numeric_limits<double>::infinity()) {}

    void run() {
        ++counters_.bound_evals;
        visit(0, 0, rules_.score(0, 0));
    }

    std::vector<double> take_lambdas() { return std::move(lambda_); }

private:
    void visit(std::size_t qn, std::size_t rn, double score) {
        ++counters_.nodes_visited;
        if (!(lambda_[qn] < score)) {
            ++counters_.nodes_pruned;
            if (prunes_) prunes_->push_back({-1, static_cast<std::int64_t>(qn), rn, lambda_[qn], score});
            return;
        }
        const auto& q = rules_.qtree().node(qn);
        const auto& t = rules_.rtree().node(rn);
        if (q.is_leaf() && t.is_leaf()) {
            lambda_[qn] = rules_.base_case(qn, rn);
        } else if (t.is_leaf()) {
            const auto ql = static_cast<std::size_t>(q.left);
            const auto qr = static_cast<std::size_t>(q.right);
            counters_.bound_evals += 2;
            visit(ql, rn, rules_.score(ql, rn));
            visit(qr, rn, rules_.score(qr, rn));
            lambda_[qn] = std::min(lambda_[ql], lambda_[qr]);
        } else if (q.is_leaf()) {
            visit_ordered(qn, t);
        } else {
            const auto ql = static_cast<std::size_t>(q.left);
            const auto qr = static_cast<std::size_t>(q.right);
            visit_ordered(ql, t);
            visit_ordered(qr, t);
            lambda_[qn] = std::min(lambda_[ql], lambda_[qr]);
        }
    }

    template <class RefNode>
    void visit_ordered(std::size_t qn, const RefNode& t) {
        const auto tl = static_cast<std::size_t>(t.left);
        const auto tr = static_cast<std::size_t>(t.right);
        const double il = rules_.score(qn, tl);
        const double ir = rules_.score(qn, tr);
        counters_.bound_evals += 2;
        if (il <= ir) {
            visit(qn, tr, ir);
            visit(qn, tl, il);
        } else {
            visit(qn, tl, il);
            visit(qn, tr, ir);
        }
    }

    Rules& rules_;
    SearchCounters& counters_;
    std::vector<PruneRecord>* prunes_;
    std::vector<double> lambda_;
};

}  // namespace mips::detail
