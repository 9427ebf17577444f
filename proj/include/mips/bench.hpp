#pragma once

// Experiment driver behind the command-line tool: one configured search
// run, result files, and the algorithm x k sweep.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mips/ball_tree.hpp"
#include "mips/cone_tree.hpp"
#include "mips/dataset.hpp"
#include "mips/kernel.hpp"
#include "mips/search.hpp"

namespace mips {

enum class Algorithm { linear, single, dual_ball, dual_cone };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

/// thm1 for single, thm2 for dual-ball, thm3 for dual-cone.
BoundKind default_bound(Algorithm algorithm);

/// Throws ContractViolation unless the bound fits the traversal: thm1 with
/// single, thm2/opt2/opt1 with dual-ball, thm3/opt1 with dual-cone.
void check_bound(Algorithm algorithm, BoundKind bound);

struct BenchConfig {
    Algorithm algorithm = Algorithm::single;
    std::optional<BoundKind> bound;
    std::optional<KernelSpec> kernel;
    std::size_t k = 1;
    std::size_t leaf_size = 20;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    BoundKind effective_bound() const { return bound.value_or(default_bound(algorithm)); }
    void validate() const;
};

/// Trees loaded from disk; anything missing is built inside the run.
struct PrebuiltTrees {
    const BallTree* reference = nullptr;
    const BallTree* query_ball = nullptr;
    const QueryConeTree* query_cone = nullptr;
};

struct RunResult {
    SearchReport report;
    double build_seconds = 0.0;  // every tree built by this run
    double query_seconds = 0.0;
};

/// Runs one configured search. Kernel configs other than linear go through
/// the kernelized pipeline and ignore prebuilt trees.
RunResult run_search(const BenchConfig& config, const Dataset& queries, const Dataset& refs,
                     PrebuiltTrees trees = {});

/// One line per query: `query,id,value,id,value,...` best first, values in
/// shortest round-trip form. A header line names the columns.
void write_results_csv(const std::vector<std::vector<Neighbor>>& results, std::ostream& out);
void write_results_csv(const std::vector<std::vector<Neighbor>>& results, const std::filesystem::path& path);
std::vector<std::vector<Neighbor>> read_results_csv(const std::filesystem::path& path);

/// FNV-1a over ids and value bits of every result row.
std::uint64_t results_checksum(const std::vector<std::vector<Neighbor>>& results);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

struct BenchRow {
    std::string dataset;
    Algorithm algorithm = Algorithm::single;
    BoundKind bound = BoundKind::thm1;
    std::size_t k = 1;
    double build_seconds = 0.0;
    double query_seconds = 0.0;
    double linear_seconds = 0.0;
    double speedup = 0.0;      // linear / query
    double build_ratio = 0.0;  // build / linear
    SearchCounters counters;
    std::uint64_t result_checksum = 0;
    bool matches_linear = false;
    unsigned threads = 1;
};

struct BenchMatrix {
    std::string dataset = "data";
    std::vector<Algorithm> algorithms{Algorithm::single, Algorithm::dual_ball, Algorithm::dual_cone};
    std::vector<std::size_t> ks{1, 2, 5, 10};
    BenchConfig base;  // algorithm and k are overridden per row
};

/// One row per (algorithm, k). The linear scan runs once per k and its
/// time is shared by all rows with that k.
std::vector<BenchRow> run_bench(const BenchMatrix& matrix, const Dataset& queries, const Dataset& refs);

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out);

}  // namespace mips
