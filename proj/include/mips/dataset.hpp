#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mips/linalg.hpp"

namespace mips {

/// Dense row-major N x d matrix of doubles with cached row norms.
///
/// `ids` records the original row identifier of every row, so that a tree
/// which physically reorders rows can still report results in terms of the
/// caller's indexing. Ids are distinct; a subset of rows keeps the ids of
/// the set it was taken from.
class Dataset {
public:
    Dataset(std::size_t rows, std::size_t dims, std::vector<double> values);
    Dataset(std::size_t rows, std::size_t dims, std::vector<double> values,
            std::vector<std::size_t> ids);

    std::size_t size() const noexcept { return rows_; }
    std::size_t dims() const noexcept { return dims_; }

    Vector row(std::size_t i) const noexcept { return {values_.data() + i * dims_, dims_}; }
    double norm(std::size_t i) const noexcept { return norms_[i]; }
    std::size_t id(std::size_t i) const noexcept { return ids_[i]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> norms() const noexcept { return norms_; }
    std::span<const std::size_t> ids() const noexcept { return ids_; }

    /// Rows taken in `order`; ids follow their rows.
    Dataset permuted(std::span<const std::size_t> order) const;

    /// FNV-1a over shape and the raw little-endian payload, in row order.
    std::uint64_t checksum() const noexcept;

    friend bool operator==(const Dataset& a, const Dataset& b);

private:
    std::size_t rows_;
    std::size_t dims_;
    std::vector<double> values_;
    std::vector<double> norms_;
    std::vector<std::size_t> ids_;
};

struct DatasetPair {
    Dataset references;
    Dataset queries;

    DatasetPair(Dataset refs, Dataset qs);
};

Dataset load_csv(const std::filesystem::path& path, char delimiter = ',');
void save_csv(const Dataset& data, const std::filesystem::path& path, char delimiter = ',');

Dataset load_binary(const std::filesystem::path& path);
void save_binary(const Dataset& data, const std::filesystem::path& path);

/// Dispatches on extension: `.csv`, `.txt` and `.tsv` are text, everything else binary.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

Dataset generate_uniform(std::size_t n, std::size_t d, std::uint64_t seed);

/// Mixture of isotropic Gaussians, centers uniform on [0,10]^d.
Dataset generate_clustered(std::size_t n, std::size_t d, std::size_t n_clusters, double spread,
                           std::uint64_t seed);

struct ClusteredDataset {
    Dataset data;
    std::vector<std::size_t> labels;  // cluster of each row
    std::vector<double> centers;      // n_clusters x d
};

/// generate_clustered together with the cluster assignment.
ClusteredDataset generate_clustered_labeled(std::size_t n, std::size_t d, std::size_t n_clusters, double spread,
                                           std::uint64_t seed);

struct NormalizedDataset {
    Dataset data;
    std::vector<std::size_t> zero_rows;  // row positions left untouched
};

NormalizedDataset normalize_directions(const Dataset& data);

/// Seeded random split of `data` into two sets; the second receives
/// round(fraction * N) rows. Both halves get fresh identity ids.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction, std::uint64_t seed);

}  // namespace mips
