#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "mips/ball_tree.hpp"
#include "mips/dataset.hpp"

namespace mips {

/// Open cone over unit directions in rows [begin, end). The axis is the raw
/// mean of the member directions and is generally shorter than 1.
struct ConeNode {
    std::size_t begin = 0;
    std::size_t end = 0;
    double axis_norm = 0.0;
    double min_cosine = 1.0;  // cos of the half-aperture
    std::int32_t left = -1;
    std::int32_t right = -1;
    bool degenerate = false;

    bool is_leaf() const noexcept { return left < 0; }
    std::size_t count() const noexcept { return end - begin; }
};

class ConeTree {
public:
    ConeTree(Dataset data, std::size_t leaf_size, std::vector<ConeNode> nodes, std::vector<double> axes,
             std::uint64_t source_checksum);

    const Dataset& data() const noexcept { return data_; }
    std::size_t leaf_size() const noexcept { return leaf_size_; }
    std::size_t dims() const noexcept { return data_.dims(); }

    const std::vector<ConeNode>& nodes() const noexcept { return nodes_; }
    const ConeNode& node(std::size_t i) const noexcept { return nodes_[i]; }
    Vector axis(std::size_t i) const noexcept { return {axes_.data() + i * dims(), dims()}; }

    std::uint64_t source_checksum() const noexcept { return source_checksum_; }

private:
    Dataset data_;
    std::size_t leaf_size_;
    std::vector<ConeNode> nodes_;
    std::vector<double> axes_;
    std::uint64_t source_checksum_;
};

inline constexpr double kUnitNormTolerance = 1e-9;
inline constexpr double kDegenerateAxisNorm = 1e-12;

/// Most-separated direction pair over rows of `range`; rows must be unit norm.
std::pair<std::size_t, std::size_t> make_cone_split(const Dataset& data, IndexRange range, Rng& rng);

/// Every row must be unit norm (see normalize_directions); zero rows have to
/// be filtered out by the caller.
ConeTree build_cone_tree(Dataset data, std::size_t leaf_size, Rng& rng);

/// Convenience used by the query side of cone-tree search: normalizes,
/// drops zero rows and builds. Ids of the tree rows refer to `queries` row
/// positions.
struct QueryConeTree {
    ConeTree tree;
    std::vector<std::size_t> zero_rows;
};

QueryConeTree build_query_cone_tree(const Dataset& queries, std::size_t leaf_size, Rng& rng);

}  // namespace mips
