#pragma once

// Binary tree files: a header naming the tree kind, the tree's own copy of
// the rows in traversal order with their original ids, and the nodes in
// preorder. Integers and doubles are little-endian.

#include <cstdint>
#include <filesystem>
#include <variant>

#include "mips/ball_tree.hpp"
#include "mips/cone_tree.hpp"

namespace mips {

enum class TreeKind : std::uint32_t { ball = 0, cone = 1 };

void save_tree(const BallTree& tree, const std::filesystem::path& path);
/// Cone trees are stored with the positions of the zero rows that were
/// dropped before the build.
void save_tree(const QueryConeTree& tree, const std::filesystem::path& path);

using AnyTree = std::variant<BallTree, QueryConeTree>;

/// Throws IoError, FormatError or TruncationError.
AnyTree load_tree(const std::filesystem::path& path);

BallTree load_ball_tree(const std::filesystem::path& path);
QueryConeTree load_cone_tree(const std::filesystem::path& path);

/// FNV-1a over the file bytes; equal for bit-identical trees.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace mips
