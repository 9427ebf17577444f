#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "mips/dataset.hpp"

namespace mips {

using Rng = std::mt19937_64;

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
};

/// Ball over rows [begin, end) of the owning tree's dataset.
struct BallNode {
    std::size_t begin = 0;
    std::size_t end = 0;
    double radius = 0.0;
    double center_norm = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    // Leaf forced above leaf_size because the split heuristic could not
    // separate the points.
    bool degenerate = false;

    bool is_leaf() const noexcept { return left < 0; }
    std::size_t count() const noexcept { return end - begin; }
};

class BallTree {
public:
    BallTree(Dataset data, std::size_t leaf_size, std::vector<BallNode> nodes,
             std::vector<double> centers, std::uint64_t source_checksum);

    const Dataset& data() const noexcept { return data_; }
    std::size_t leaf_size() const noexcept { return leaf_size_; }
    std::size_t dims() const noexcept { return data_.dims(); }

    const std::vector<BallNode>& nodes() const noexcept { return nodes_; }
    const BallNode& node(std::size_t i) const noexcept { return nodes_[i]; }
    Vector center(std::size_t i) const noexcept { return {centers_.data() + i * dims(), dims()}; }

    /// Checksum of the dataset as it was handed to the builder, before the
    /// rows were reordered.
    std::uint64_t source_checksum() const noexcept { return source_checksum_; }

private:
    Dataset data_;
    std::size_t leaf_size_;
    std::vector<BallNode> nodes_;  // preorder, root at 0
    std::vector<double> centers_;
    std::uint64_t source_checksum_;
};

/// Farthest-point pivot pair over rows [range.begin, range.end) of `data`.
/// Equal pivots (same coordinates) mean the range cannot be split.
std::pair<std::size_t, std::size_t> make_ball_split(const Dataset& data, IndexRange range, Rng& rng);

BallTree build_ball_tree(Dataset data, std::size_t leaf_size, Rng& rng);

}  // namespace mips
