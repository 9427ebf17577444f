#include "mips/ball_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mips/error.hpp"

namespace mips {

namespace {

template <class RowAt>
std::pair<std::size_t, std::size_t> farthest_pair(RowAt&& row_at, std::size_t begin, std::size_t end,
                                                  Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(begin, end - 1);
    const std::size_t x = pick(rng);

    auto farthest_from = [&](std::size_t from) {
        std::size_t best = begin;
        double best_dist = -1.0;
        for (std::size_t k = begin; k < end; ++k) {
            const double dist = squared_distance(row_at(from), row_at(k));
            if (dist > best_dist) {
                best_dist = dist;
                best = k;
            }
        }
        return best;
    };
    const std::size_t a = farthest_from(x);
    const std::size_t b = farthest_from(a);
    return {a, b};
}

class BallBuilder {
public:
    BallBuilder(const Dataset& data, std::size_t leaf_size, Rng& rng)
        : data_(data), leaf_size_(leaf_size), rng_(rng), order_(data.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    void build() { build_node(0, data_.size()); }

    std::vector<BallNode> nodes;
    std::vector<double> centers;
    const std::vector<std::size_t>& order() const { return order_; }

private:
    Vector row_at(std::size_t k) const { return data_.row(order_[k]); }

    std::int32_t build_node(std::size_t begin, std::size_t end) {
        const std::size_t d = data_.dims();
        const auto index = static_cast<std::int32_t>(nodes.size());
        nodes.push_back(BallNode{begin, end});
        centers.resize(centers.size() + d, 0.0);

        std::vector<double> mean(d, 0.0);
        for (std::size_t k = begin; k < end; ++k) {
            const Vector r = row_at(k);
            for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
        }
        const auto count = static_cast<double>(end - begin);
        for (double& m : mean) m /= count;
        double radius_sq = 0.0;
        for (std::size_t k = begin; k < end; ++k)
            radius_sq = std::max(radius_sq, squared_distance(row_at(k), mean));

        {
            BallNode& node = nodes[static_cast<std::size_t>(index)];
            node.radius = std::sqrt(radius_sq);
            node.center_norm = norm(mean);
            std::copy(mean.begin(), mean.end(), centers.begin() + static_cast<std::ptrdiff_t>(index * d));
        }

        if (end - begin <= leaf_size_) return index;

        const auto [a, b] = farthest_pair([this](std::size_t k) { return row_at(k); }, begin, end, rng_);
        const std::vector<double> pa(row_at(a).begin(), row_at(a).end());
        const std::vector<double> pb(row_at(b).begin(), row_at(b).end());
        // Ties go to the first pivot's side.
        const auto mid = std::stable_partition(
            order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(end),
            [&](std::size_t row) {
                const Vector p = data_.row(row);
                return squared_distance(p, pa) <= squared_distance(p, pb);
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

    const Dataset& data_;
    std::size_t leaf_size_;
    Rng& rng_;
    std::vector<std::size_t> order_;
};

}  // namespace

BallTree::BallTree(Dataset data, std::size_t leaf_size, std::vector<BallNode> nodes,
                   std::vector<double> centers, std::uint64_t source_checksum)
    : data_(std::move(data)),
      leaf_size_(leaf_size),
      nodes_(std::move(nodes)),
      centers_(std::move(centers)),
      source_checksum_(source_checksum) {
    if (nodes_.empty()) throw ContractViolation("ball tree needs at least a root node");
    if (centers_.size() != nodes_.size() * data_.dims())
        throw ContractViolation("ball tree centers do not match node count");
}

std::pair<std::size_t, std::size_t> make_ball_split(const Dataset& data, IndexRange range, Rng& rng) {
    if (range.end > data.size() || range.begin >= range.end || range.size() < 2)
        throw ContractViolation("make_ball_split needs a range of at least 2 points");
    return farthest_pair([&](std::size_t k) { return data.row(k); }, range.begin, range.end, rng);
}

BallTree build_ball_tree(Dataset data, std::size_t leaf_size, Rng& rng) {
    if (leaf_size == 0) throw ContractViolation("leaf_size must be at least 1");
    const std::uint64_t checksum = data.checksum();
    BallBuilder builder(data, leaf_size, rng);
    builder.build();
    Dataset reordered = data.permuted(builder.order());
    return BallTree(std::move(reordered), leaf_size, std::move(builder.nodes), std::move(builder.centers),
                    checksum);
}

}  // namespace mips
