#include "mips/cone_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mips/error.hpp"

namespace mips {

namespace {

template <class RowAt>
std::pair<std::size_t, std::size_t> widest_pair(RowAt&& row_at, std::size_t begin, std::size_t end, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(begin, end - 1);
    const std::size_t x = pick(rng);

    // Rows are unit vectors, so the cosine is the plain inner product.
    auto least_aligned = [&](std::size_t from) {
        std::size_t best = begin;
        double best_cos = 2.0;
        for (std::size_t k = begin; k < end; ++k) {
            const double c = dot(row_at(from), row_at(k));
            if (c < best_cos) {
                best_cos = c;
                best = k;
            }
        }
        return best;
    };
    const std::size_t a = least_aligned(x);
    const std::size_t b = least_aligned(a);
    return {a, b};
}

void check_unit_rows(const Dataset& data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (std::abs(data.norm(i) - 1.0) > kUnitNormTolerance)
            throw ContractViolation("cone tree row " + std::to_string(i) + " (id " + std::to_string(data.id(i)) +
                                    ") is not unit norm: " + std::to_string(data.norm(i)));
    }
}

class ConeBuilder {
public:
    ConeBuilder(const Dataset& data, std::size_t leaf_size, Rng& rng)
        : data_(data), leaf_size_(leaf_size), rng_(rng), order_(data.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    void build() { build_node(0, data_.size()); }

    std::vector<ConeNode> nodes;
    std::vector<double> axes;
    const std::vector<std::size_t>& order() const { return order_; }

private:
    Vector row_at(std::size_t k) const { return data_.row(order_[k]); }

    std::int32_t build_node(std::size_t begin, std::size_t end) {
        const std::size_t d = data_.dims();
        const auto index = static_cast<std::int32_t>(nodes.size());
        nodes.push_back(ConeNode{begin, end});
        axes.resize(axes.size() + d, 0.0);

        std::vector<double> mean(d, 0.0);
        for (std::size_t k = begin; k < end; ++k) {
            const Vector r = row_at(k);
            for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
        }
        const auto count = static_cast<double>(end - begin);
        for (double& m : mean) m /= count;
        const double axis_norm = norm(mean);

        double min_cos = 1.0;
        if (axis_norm < kDegenerateAxisNorm) {
            // Members cancel out; no usable direction, cover everything.
            min_cos = -1.0;
        } else {
            for (std::size_t k = begin; k < end; ++k)
                min_cos = std::min(min_cos, dot(row_at(k), mean) / axis_norm);
            min_cos = clamp_unit(min_cos);
        }

        {
            ConeNode& node = nodes[static_cast<std::size_t>(index)];
            node.axis_norm = axis_norm;
            node.min_cosine = min_cos;
            std::copy(mean.begin(), mean.end(), axes.begin() + static_cast<std::ptrdiff_t>(index * d));
        }

        if (end - begin <= leaf_size_) return index;
        if (axis_norm < kDegenerateAxisNorm) {
            nodes[static_cast<std::size_t>(index)].degenerate = true;
            return index;
        }

        const auto [a, b] = widest_pair([this](std::size_t k) { return row_at(k); }, begin, end, rng_);
        const std::vector<double> pa(row_at(a).begin(), row_at(a).end());
        const std::vector<double> pb(row_at(b).begin(), row_at(b).end());
        // Strictly closer in angle to the first pivot goes left; ties go right.
        const auto mid = std::stable_partition(
            order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(end),
            [&](std::size_t row) {
                const Vector p = data_.row(row);
                return dot(pa, p) > dot(pb, p);
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

ConeTree::ConeTree(Dataset data, std::size_t leaf_size, std::vector<ConeNode> nodes, std::vector<double> axes,
                   std::uint64_t source_checksum)
    : data_(std::move(data)),
      leaf_size_(leaf_size),
      nodes_(std::move(nodes)),
      axes_(std::move(axes)),
      source_checksum_(source_checksum) {
    if (nodes_.empty()) throw ContractViolation("cone tree needs at least a root node");
    if (axes_.size() != nodes_.size() * data_.dims())
        throw ContractViolation("cone tree axes do not match node count");
}

std::pair<std::size_t, std::size_t> make_cone_split(const Dataset& data, IndexRange range, Rng& rng) {
    if (range.end > data.size() || range.begin >= range.end || range.size() < 2)
        throw ContractViolation("make_cone_split needs a range of at least 2 points");
    for (std::size_t k = range.begin; k < range.end; ++k) {
        if (data.norm(k) == 0.0)
            throw ContractViolation("make_cone_split: row " + std::to_string(k) + " has zero norm");
    }
    return widest_pair([&](std::size_t k) { return data.row(k); }, range.begin, range.end, rng);
}

namespace {
ConeTree build_cone_tree_with_checksum(Dataset data, std::size_t leaf_size, Rng& rng, std::uint64_t checksum) {
    if (leaf_size == 0) throw ContractViolation("leaf_size must be at least 1");
    check_unit_rows(data);
    ConeBuilder builder(data, leaf_size, rng);
    builder.build();
    Dataset reordered = data.permuted(builder.order());
    return ConeTree(std::move(reordered), leaf_size, std::move(builder.nodes), std::move(builder.axes), checksum);
}
}  // namespace

ConeTree build_cone_tree(Dataset data, std::size_t leaf_size, Rng& rng) {
    const std::uint64_t checksum = data.checksum();
    return build_cone_tree_with_checksum(std::move(data), leaf_size, rng, checksum);
}

QueryConeTree build_query_cone_tree(const Dataset& queries, std::size_t leaf_size, Rng& rng) {
    NormalizedDataset normalized = normalize_directions(queries);
    if (normalized.zero_rows.size() == queries.size())
        throw EmptyInputError("every query is the zero vector; no cone tree can be built");
    std::vector<std::size_t> keep;
    keep.reserve(queries.size() - normalized.zero_rows.size());
    std::size_t z = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (z < normalized.zero_rows.size() && normalized.zero_rows[z] == i) {
            ++z;
            continue;
        }
        keep.push_back(i);
    }
    Dataset picked = normalized.data.permuted(keep);
    std::vector<double> values(picked.values().begin(), picked.values().end());
    Dataset directions(keep.size(), queries.dims(), std::move(values), keep);
    ConeTree tree = build_cone_tree_with_checksum(std::move(directions), leaf_size, rng, queries.checksum());
    return {std::move(tree), std::move(normalized.zero_rows)};
}

}  // namespace mips
