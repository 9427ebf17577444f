#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mips/dataset.hpp"

namespace mips::test {

inline Dataset make(std::size_t rows, std::size_t dims, std::vector<double> values) {
    return Dataset(rows, dims, std::move(values));
}

/// Gaussian rows, optionally shifted so inner products are not centred.
inline Dataset gaussian(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(n * d);
    for (double& x : v) x = g(rng) + shift;
    return Dataset(n, d, std::move(v));
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("mips_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace mips::test
