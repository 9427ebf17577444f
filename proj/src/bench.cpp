#include "mips/bench.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mips/error.hpp"

namespace mips {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

bool is_kernelized(const BenchConfig& c) { return c.kernel && c.kernel->kind != KernelKind::linear; }

RunResult run_kernel_linear(const KernelSpec& spec, const Dataset& queries, const Dataset& refs, std::size_t k) {
    RunResult out;
    if (k == 0 || k > refs.size()) throw ContractViolation("k must lie in [1, N]");
    const auto start = Clock::now();
    out.report.results.resize(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        QueryState s(k);
        for (std::size_t j = 0; j < refs.size(); ++j) s.offer(refs.id(j), kernel_eval(spec, queries.row(i), refs.row(j)));
        out.report.results[i] = s.candidates();
    }
    out.report.counters.point_evals = queries.size() * refs.size();
    out.query_seconds = out.report.seconds = seconds_since(start);
    return out;
}

RunResult run_kernelized(const BenchConfig& c, const Dataset& queries, const Dataset& refs) {
    if (c.algorithm == Algorithm::linear) return run_kernel_linear(*c.kernel, queries, refs, c.k);
    const KernelSearchMode mode = c.algorithm == Algorithm::single      ? KernelSearchMode::single
                                  : c.algorithm == Algorithm::dual_ball ? KernelSearchMode::dual_ball
                                                                        : KernelSearchMode::dual_cone;
    Rng rng(c.seed);
    RunResult out;
    out.report = kernel_search(*c.kernel, queries, refs, mode, c.k, c.leaf_size, rng);
    out.build_seconds = out.report.build_seconds;
    out.query_seconds = out.report.seconds;
    return out;
}

void check_tree_source(const char* what, std::uint64_t tree_checksum, const Dataset& data) {
    if (tree_checksum != data.checksum())
        throw ContractViolation(std::string(what) + " tree was built over different data (checksum mismatch)");
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::linear: return "linear";
        case Algorithm::single: return "single";
        case Algorithm::dual_ball: return "dual-ball";
        case Algorithm::dual_cone: return "dual-cone";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
    if (name == "linear") return Algorithm::linear;
    if (name == "single") return Algorithm::single;
    if (name == "dual-ball") return Algorithm::dual_ball;
    if (name == "dual-cone") return Algorithm::dual_cone;
    throw ContractViolation("unknown algorithm '" + std::string(name) + "'");
}

BoundKind default_bound(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::dual_ball: return BoundKind::thm2;
        case Algorithm::dual_cone: return BoundKind::thm3;
        default: return BoundKind::thm1;
    }
}

void check_bound(Algorithm algorithm, BoundKind bound) {
    bool ok = false;
    switch (algorithm) {
        case Algorithm::linear: ok = bound == BoundKind::thm1; break;
        case Algorithm::single: ok = bound == BoundKind::thm1; break;
        case Algorithm::dual_ball:
            ok = bound == BoundKind::thm2 || bound == BoundKind::opt2 || bound == BoundKind::opt1;
            break;
        case Algorithm::dual_cone: ok = bound == BoundKind::thm3 || bound == BoundKind::opt1; break;
    }
    if (!ok)
        throw ContractViolation("bound " + std::string(to_string(bound)) + " does not apply to " +
                                std::string(to_string(algorithm)));
}

void BenchConfig::validate() const {
    if (k == 0) throw ContractViolation("k must be at least 1");
    if (leaf_size == 0) throw ContractViolation("leaf size must be at least 1");
    if (threads == 0) throw ContractViolation("threads must be at least 1");
    if (algorithm == Algorithm::linear) {
        if (bound) throw ContractViolation("linear search takes no bound");
    } else {
        check_bound(algorithm, effective_bound());
    }
    if (kernel) {
        kernel->validate();
        if (kernel->kind != KernelKind::linear && bound && bound != default_bound(algorithm))
            throw ContractViolation("kernelized search supports only the default bound of each algorithm");
    }
}

RunResult run_search(const BenchConfig& config, const Dataset& queries, const Dataset& refs, PrebuiltTrees trees) {
    config.validate();
    if (queries.dims() != refs.dims()) throw ContractViolation("queries and references differ in dimension");
    if (is_kernelized(config)) return run_kernelized(config, queries, refs);

    RunResult out;
    if (config.algorithm == Algorithm::linear) {
        out.report = linear_search_all(queries, refs, config.k, config.threads);
        out.query_seconds = out.report.seconds;
        return out;
    }

    Rng rng(config.seed);
    std::optional<BallTree> built;
    const BallTree* rtree = trees.reference;
    if (rtree) {
        check_tree_source("reference", rtree->source_checksum(), refs);
    } else {
        const auto start = Clock::now();
        built.emplace(build_ball_tree(refs, config.leaf_size, rng));
        out.build_seconds += seconds_since(start);
        rtree = &*built;
    }

    SearchOptions options;
    options.bound = config.effective_bound();
    options.threads = config.threads;
    switch (config.algorithm) {
        case Algorithm::single: out.report = find_exact_maxip(queries, *rtree, config.k, options); break;
        case Algorithm::dual_ball:
            if (trees.query_ball) {
                check_tree_source("query", trees.query_ball->source_checksum(), queries);
                out.report = dual_tree_search(*trees.query_ball, *rtree, config.k, options);
            } else {
                out.report = dual_ball_search(queries, *rtree, config.k, config.leaf_size, rng, options);
            }
            break;
        case Algorithm::dual_cone:
            if (trees.query_cone) {
                check_tree_source("query", trees.query_cone->tree.source_checksum(), queries);
                out.report = dual_tree_search(*trees.query_cone, queries, *rtree, config.k, options);
            } else {
                out.report = dual_cone_search(queries, *rtree, config.k, config.leaf_size, rng, options);
            }
            break;
        case Algorithm::linear: break;
    }
    out.build_seconds += out.report.build_seconds;
    out.query_seconds = out.report.seconds;
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

void write_results_csv(const std::vector<std::vector<Neighbor>>& results, std::ostream& out) {
    const std::size_t k = results.empty() ? 0 : results.front().size();
    out << "query";
    for (std::size_t r = 1; r <= k; ++r) out << ",id_" << r << ",value_" << r;
    out << '\n';
    for (std::size_t i = 0; i < results.size(); ++i) {
        out << i;
        for (const Neighbor& n : results[i]) out << ',' << n.id << ',' << format_double(n.value);
        out << '\n';
    }
}

void write_results_csv(const std::vector<std::vector<Neighbor>>& results, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_results_csv(results, out);
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::vector<Neighbor>> read_results_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<Neighbor>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() % 2 != 1) throw ParseError("expected query followed by id,value pairs", line_no);
        std::size_t query = 0;
        auto parse_size = [&](std::string_view f, std::size_t& v) {
            const auto r = std::from_chars(f.data(), f.data() + f.size(), v);
            if (r.ec != std::errc() || r.ptr != f.data() + f.size()) throw ParseError("bad integer field", line_no);
        };
        parse_size(fields[0], query);
        if (query != out.size()) throw ParseError("query rows out of order", line_no);
        std::vector<Neighbor> row;
        for (std::size_t f = 1; f + 1 < fields.size(); f += 2) {
            Neighbor n;
            parse_size(fields[f], n.id);
            const auto r = std::from_chars(fields[f + 1].data(), fields[f + 1].data() + fields[f + 1].size(), n.value);
            if (r.ec != std::errc() || r.ptr != fields[f + 1].data() + fields[f + 1].size())
                throw ParseError("bad value field", line_no);
            row.push_back(n);
        }
        out.push_back(std::move(row));
    }
    if (in.bad()) throw IoError("failed reading " + path.string());
    return out;
}

std::uint64_t results_checksum(const std::vector<std::vector<Neighbor>>& results) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&](std::uint64_t w) {
        for (int i = 0; i < 8; ++i) {
            h ^= (w >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    for (const auto& row : results) {
        mix(row.size());
        for (const Neighbor& n : row) {
            mix(n.id);
            mix(std::bit_cast<std::uint64_t>(n.value));
        }
    }
    return h;
}

std::vector<BenchRow> run_bench(const BenchMatrix& matrix, const Dataset& queries, const Dataset& refs) {
    std::vector<BenchRow> rows;
    for (std::size_t k : matrix.ks) {
        BenchConfig linear = matrix.base;
        linear.algorithm = Algorithm::linear;
        linear.bound.reset();
        linear.k = k;
        const RunResult base = run_search(linear, queries, refs);
        const std::uint64_t base_sum = results_checksum(base.report.results);
        for (Algorithm a : matrix.algorithms) {
            BenchConfig c = matrix.base;
            c.algorithm = a;
            c.k = k;
            if (a == Algorithm::linear) c.bound.reset();
            else if (c.bound && (c.bound == BoundKind::thm1 || c.bound == BoundKind::thm2 || c.bound == BoundKind::thm3))
                c.bound.reset();  // the default closed form of each traversal
            const RunResult r = a == Algorithm::linear ? base : run_search(c, queries, refs);
            BenchRow row;
            row.dataset = matrix.dataset;
            row.algorithm = a;
            row.bound = c.effective_bound();
            row.k = k;
            row.build_seconds = r.build_seconds;
            row.query_seconds = r.query_seconds;
            row.linear_seconds = base.query_seconds;
            row.speedup = r.query_seconds > 0.0 ? base.query_seconds / r.query_seconds : 0.0;
            row.build_ratio = base.query_seconds > 0.0 ? r.build_seconds / base.query_seconds : 0.0;
            row.counters = r.report.counters;
            row.result_checksum = results_checksum(r.report.results);
            row.matches_linear = row.result_checksum == base_sum;
            row.threads = r.report.threads;
            rows.push_back(row);
        }
    }
    return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
    out << "dataset,algorithm,bound,k,build_seconds,query_seconds,linear_seconds,speedup,build_ratio,"
           "point_evals,bound_evals,nodes_visited,nodes_pruned,threads,result_checksum,matches_linear\n";
    for (const BenchRow& r : rows) {
        out << r.dataset << ',' << to_string(r.algorithm) << ',' << to_string(r.bound) << ',' << r.k << ','
            << format_double(r.build_seconds) << ',' << format_double(r.query_seconds) << ','
            << format_double(r.linear_seconds) << ',' << format_double(r.speedup) << ','
            << format_double(r.build_ratio) << ',' << r.counters.point_evals << ',' << r.counters.bound_evals << ','
            << r.counters.nodes_visited << ',' << r.counters.nodes_pruned << ',' << r.threads << ',' << std::hex
            << r.result_checksum << std::dec << ',' << (r.matches_linear ? "true" : "false") << '\n';
    }
}

}  // namespace mips
