// mips: command-line front end. Subcommands gen, build, search, bench, verify.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mips/bench.hpp"
#include "mips/cone_tree.hpp"
#include "mips/dataset.hpp"
#include "mips/error.hpp"
#include "mips/oracle.hpp"
#include "mips/serialize.hpp"

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr int exit_ok = 0;
constexpr int exit_io = 1;
constexpr int exit_contract = 2;
constexpr int exit_verify_failed = 3;

struct CommonFlags {
    std::string algorithm = "single";
    std::string bound;
    std::string kernel;
    double gamma = 1.0;
    double coef0 = 0.0;
    unsigned degree = 2;
    std::size_t k = 1;
    std::size_t leaf_size = 20;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string format = "json";
    std::string out;
};

void add_search_flags(CLI::App& cmd, CommonFlags& f) {
    cmd.add_option("--algorithm", f.algorithm, "linear, single, dual-ball or dual-cone")
        ->check(CLI::IsMember({"linear", "single", "dual-ball", "dual-cone"}));
    cmd.add_option("--bound", f.bound, "thm1, thm2, thm3, opt1 or opt2 (default depends on algorithm)")
        ->check(CLI::IsMember({"thm1", "thm2", "thm3", "opt1", "opt2"}));
    cmd.add_option("--kernel", f.kernel, "linear, rbf or poly")->check(CLI::IsMember({"linear", "rbf", "poly"}));
    cmd.add_option("--gamma", f.gamma, "rbf width");
    cmd.add_option("--coef0", f.coef0, "polynomial offset");
    cmd.add_option("--degree", f.degree, "polynomial degree");
    cmd.add_option("--k", f.k, "neighbors per query");
    cmd.add_option("--leaf-size", f.leaf_size, "maximum points per leaf");
    cmd.add_option("--seed", f.seed, "pivot selection seed");
    cmd.add_option("--threads", f.threads, "worker threads for single-tree and linear search");
}

void add_format_flag(CLI::App& cmd, CommonFlags& f) {
    cmd.add_option("--format", f.format, "report format")->check(CLI::IsMember({"csv", "json"}));
}

mips::BenchConfig to_config(const CommonFlags& f) {
    mips::BenchConfig c;
    c.algorithm = mips::parse_algorithm(f.algorithm);
    if (!f.bound.empty()) c.bound = mips::parse_bound_kind(f.bound);
    if (!f.kernel.empty()) {
        mips::KernelSpec spec;
        spec.kind = mips::parse_kernel_kind(f.kernel);
        spec.gamma = f.gamma;
        spec.coef0 = f.coef0;
        spec.degree = f.degree;
        c.kernel = spec;
    }
    c.k = f.k;
    c.leaf_size = f.leaf_size;
    c.seed = f.seed;
    c.threads = f.threads;
    c.validate();
    return c;
}

json config_json(const mips::BenchConfig& c) {
    json j;
    j["algorithm"] = std::string(mips::to_string(c.algorithm));
    if (c.algorithm != mips::Algorithm::linear) j["bound"] = std::string(mips::to_string(c.effective_bound()));
    j["k"] = c.k;
    j["leaf_size"] = c.leaf_size;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    if (c.kernel) {
        json k;
        k["kind"] = std::string(mips::to_string(c.kernel->kind));
        k["gamma"] = c.kernel->gamma;
        k["coef0"] = c.kernel->coef0;
        k["degree"] = c.kernel->degree;
        j["kernel"] = k;
    }
    return j;
}

json counters_json(const mips::SearchCounters& c) {
    return json{{"point_evals", c.point_evals},
                {"bound_evals", c.bound_evals},
                {"nodes_visited", c.nodes_visited},
                {"nodes_pruned", c.nodes_pruned}};
}

std::string hex(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << v;
    return s.str();
}

// Flattens nested objects into key,value lines.
void flatten(const json& j, const std::string& prefix, std::ostream& out) {
    if (j.is_object()) {
        for (const auto& [key, value] : j.items()) flatten(value, prefix.empty() ? key : prefix + "." + key, out);
    } else if (j.is_array()) {
        std::string joined;
        for (const auto& v : j) joined += (joined.empty() ? "" : ";") + (v.is_string() ? v.get<std::string>() : v.dump());
        out << prefix << ',' << joined << '\n';
    } else {
        out << prefix << ',' << (j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
    }
}

void emit_report(const json& report, const std::string& format, const std::string& path) {
    std::ostringstream text;
    if (format == "csv") {
        text << "key,value\n";
        flatten(report, "", text);
    } else {
        text << report.dump(2) << '\n';
    }
    if (path.empty()) {
        std::cout << text.str();
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw mips::IoError("cannot open " + path + " for writing");
    out << text.str();
}

mips::Dataset load(const std::string& path) {
    try {
        return mips::load_dataset(path);
    } catch (const mips::IoError& e) {
        const std::string msg = e.what();
        if (msg.find(path) != std::string::npos) throw;
        throw mips::IoError(path + ": " + msg);
    }
}

// gen

struct GenFlags {
    std::string kind = "uniform";
    std::size_t n = 1000;
    std::size_t d = 10;
    std::size_t clusters = 50;
    double spread = 0.2;
    std::uint64_t seed = 0;
    std::string out;
    double split = 0.0;
    std::string queries_out;
};

int cmd_gen(const GenFlags& g) {
    const mips::Dataset data = g.kind == "uniform" ? mips::generate_uniform(g.n, g.d, g.seed)
                                                   : mips::generate_clustered(g.n, g.d, g.clusters, g.spread, g.seed);
    if (g.split > 0.0) {
        if (g.queries_out.empty()) throw mips::ContractViolation("--split needs --queries-out");
        auto [refs, queries] = mips::split_dataset(data, g.split, g.seed);
        mips::save_dataset(refs, g.out);
        mips::save_dataset(queries, g.queries_out);
        std::cout << "wrote " << refs.size() << " references to " << g.out << " and " << queries.size()
                  << " queries to " << g.queries_out << '\n';
    } else {
        mips::save_dataset(data, g.out);
        std::cout << "wrote " << data.size() << " rows to " << g.out << '\n';
    }
    return exit_ok;
}

// build

struct BuildFlags {
    std::string data;
    std::string tree = "ball";
    std::string report;
};

template <class Node>
json shape_json(const std::vector<Node>& nodes) {
    std::size_t leaves = 0, degenerate = 0;
    for (const Node& n : nodes) {
        leaves += n.is_leaf();
        degenerate += n.degenerate;
    }
    return json{{"nodes", nodes.size()}, {"leaves", leaves}, {"degenerate_leaves", degenerate}};
}

int cmd_build(const BuildFlags& b, const CommonFlags& f) {
    if (f.out.empty()) throw mips::ContractViolation("build needs --out for the tree file");
    if (f.leaf_size == 0) throw mips::ContractViolation("leaf size must be at least 1");
    const mips::Dataset data = load(b.data);
    mips::Rng rng(f.seed);
    json report;
    report["config"] = json{{"tree", b.tree}, {"leaf_size", f.leaf_size}, {"seed", f.seed}, {"data", b.data}};
    double seconds = 0.0;
    json shape;
    if (b.tree == "ball") {
        const auto start = Clock::now();
        const mips::BallTree tree = mips::build_ball_tree(data, f.leaf_size, rng);
        seconds = std::chrono::duration<double>(Clock::now() - start).count();
        mips::save_tree(tree, f.out);
        shape = shape_json(tree.nodes());
    } else {
        // normalization happens inside the timed region
        const auto start = Clock::now();
        const mips::QueryConeTree tree = mips::build_query_cone_tree(data, f.leaf_size, rng);
        seconds = std::chrono::duration<double>(Clock::now() - start).count();
        mips::save_tree(tree, f.out);
        shape = shape_json(tree.tree.nodes());
        shape["zero_rows"] = tree.zero_rows.size();
    }
    report["build"] = json{{"seconds", seconds}, {"tree_path", f.out}, {"file_checksum", hex(mips::file_checksum(f.out))},
                           {"data_checksum", hex(data.checksum())}};
    report["build"].update(shape);
    emit_report(report, f.format, b.report);
    return exit_ok;
}

// search

struct SearchFlags {
    std::string refs;
    std::string queries;
    std::string tree;
    std::string query_tree;
    std::string report;
    bool baseline = false;
};

int cmd_search(const SearchFlags& s, const CommonFlags& f) {
    const mips::BenchConfig config = to_config(f);
    const mips::Dataset refs = load(s.refs);
    const mips::Dataset queries = load(s.queries);
    if (refs.dims() != queries.dims())
        throw mips::ContractViolation("dimension mismatch: references have " + std::to_string(refs.dims()) +
                                      ", queries have " + std::to_string(queries.dims()));

    std::optional<mips::BallTree> rtree;
    std::optional<mips::AnyTree> qtree;
    mips::PrebuiltTrees trees;
    if (!s.tree.empty()) {
        rtree = mips::load_ball_tree(s.tree);
        if (rtree->dims() != refs.dims()) throw mips::ContractViolation("tree and references differ in dimension");
        trees.reference = &*rtree;
    }
    if (!s.query_tree.empty()) {
        qtree = mips::load_tree(s.query_tree);
        if (auto* b = std::get_if<mips::BallTree>(&*qtree)) {
            if (config.algorithm != mips::Algorithm::dual_ball)
                throw mips::ContractViolation("a query ball tree needs --algorithm dual-ball");
            trees.query_ball = b;
        } else {
            if (config.algorithm != mips::Algorithm::dual_cone)
                throw mips::ContractViolation("a query cone tree needs --algorithm dual-cone");
            trees.query_cone = &std::get<mips::QueryConeTree>(*qtree);
        }
    }

    const mips::RunResult run = mips::run_search(config, queries, refs, trees);
    if (!f.out.empty()) mips::write_results_csv(run.report.results, std::filesystem::path(f.out));

    json report;
    report["config"] = config_json(config);
    report["config"]["threads"] = run.report.threads;
    report["build"] = json{{"seconds", run.build_seconds}, {"prebuilt_reference", trees.reference != nullptr},
                           {"prebuilt_query", trees.query_ball || trees.query_cone}};
    json query{{"seconds", run.query_seconds},
               {"queries", queries.size()},
               {"fallback_queries", run.report.fallback_queries},
               {"wide_cones", run.report.wide_cones},
               {"result_checksum", hex(mips::results_checksum(run.report.results))}};
    if (s.baseline) {
        mips::BenchConfig linear = config;
        linear.algorithm = mips::Algorithm::linear;
        linear.bound.reset();
        const mips::RunResult base = mips::run_search(linear, queries, refs);
        query["linear_seconds"] = base.query_seconds;
        query["speedup"] = run.query_seconds > 0 ? base.query_seconds / run.query_seconds : 0.0;
        query["build_ratio"] = base.query_seconds > 0 ? run.build_seconds / base.query_seconds : 0.0;
    }
    report["query"] = query;
    report["results_path"] = f.out;
    report["counters"] = counters_json(run.report.counters);
    emit_report(report, f.format, s.report);
    return exit_ok;
}

// bench

struct BenchFlags {
    std::string refs;
    std::string queries;
    std::string dataset;
    std::vector<std::string> algorithms{"single", "dual-ball", "dual-cone"};
    std::vector<std::size_t> ks{1, 2, 5, 10};
};

int cmd_bench(const BenchFlags& b, const CommonFlags& f) {
    mips::BenchMatrix matrix;
    CommonFlags base_flags = f;
    base_flags.algorithm = "single";
    base_flags.bound.clear();
    matrix.base = to_config(base_flags);
    if (!f.bound.empty()) matrix.base.bound = mips::parse_bound_kind(f.bound);
    matrix.algorithms.clear();
    for (const std::string& a : b.algorithms) {
        const mips::Algorithm alg = mips::parse_algorithm(a);
        if (matrix.base.bound && alg != mips::Algorithm::linear) mips::check_bound(alg, *matrix.base.bound);
        matrix.algorithms.push_back(alg);
    }
    matrix.ks = b.ks;
    for (std::size_t k : matrix.ks)
        if (k == 0) throw mips::ContractViolation("k must be at least 1");
    matrix.dataset = b.dataset.empty() ? std::filesystem::path(b.refs).stem().string() : b.dataset;

    const mips::Dataset refs = load(b.refs);
    const mips::Dataset queries = load(b.queries);
    if (refs.dims() != queries.dims()) throw mips::ContractViolation("queries and references differ in dimension");
    const std::vector<mips::BenchRow> rows = mips::run_bench(matrix, queries, refs);

    std::ostringstream text;
    if (f.format == "csv") {
        mips::write_bench_csv(rows, text);
    } else {
        json arr = json::array();
        for (const mips::BenchRow& r : rows) {
            arr.push_back(json{{"dataset", r.dataset},
                               {"algorithm", std::string(mips::to_string(r.algorithm))},
                               {"bound", std::string(mips::to_string(r.bound))},
                               {"k", r.k},
                               {"build_seconds", r.build_seconds},
                               {"query_seconds", r.query_seconds},
                               {"linear_seconds", r.linear_seconds},
                               {"speedup", r.speedup},
                               {"build_ratio", r.build_ratio},
                               {"counters", counters_json(r.counters)},
                               {"threads", r.threads},
                               {"result_checksum", hex(r.result_checksum)},
                               {"matches_linear", r.matches_linear}});
        }
        text << json{{"config", config_json(matrix.base)}, {"rows", arr}}.dump(2) << '\n';
    }
    if (f.out.empty()) {
        std::cout << text.str();
    } else {
        std::ofstream out(f.out, std::ios::trunc);
        if (!out) throw mips::IoError("cannot open " + f.out + " for writing");
        out << text.str();
    }
    return exit_ok;
}

// verify

struct VerifyFlags {
    std::string refs;
    std::string queries;
    std::string results;
};

int cmd_verify(const VerifyFlags& v, const CommonFlags& f) {
    const mips::Dataset refs = load(v.refs);
    const mips::Dataset queries = load(v.queries);
    if (refs.dims() != queries.dims()) throw mips::ContractViolation("queries and references differ in dimension");
    if (f.k == 0 || f.k > refs.size()) throw mips::ContractViolation("k must lie in [1, N]");
    bool all = true;
    auto line = [&](const std::string& name, bool ok, const std::string& detail = {}) {
        all = all && ok;
        std::cout << (ok ? "PASS " : "FAIL ") << name << (detail.empty() ? "" : ": " + detail) << '\n';
    };

    std::optional<mips::KernelSpec> kernel;
    if (!f.kernel.empty()) kernel = to_config(f).kernel;
    const bool kernelized = kernel && kernel->kind != mips::KernelKind::linear;

    mips::oracle::OracleResult expected;
    if (kernelized) {
        expected = mips::oracle::brute_force_kernel_topk(*kernel, queries, refs, f.k);
    } else {
        expected = mips::oracle::brute_force_topk(queries, refs, f.k);
        const auto selection = mips::oracle::brute_force_topk_selection(queries, refs, f.k);
        const auto cross = mips::oracle::compare_results(expected.results, selection.results);
        line("oracle cross-check", !cross, cross ? cross->reason : "");

        mips::Rng rng(f.seed);
        const mips::BallTree ball = mips::build_ball_tree(refs, f.leaf_size, rng);
        const auto ball_audit = mips::oracle::audit_ball_tree(ball, refs);
        line("ball tree audit", ball_audit.passed(),
             ball_audit.passed() ? "" : ball_audit.failures.front());
        const mips::QueryConeTree cone = mips::build_query_cone_tree(queries, f.leaf_size, rng);
        const auto cone_audit = mips::oracle::audit_cone_tree(cone.tree, mips::normalize_directions(queries).data);
        line("cone tree audit", cone_audit.passed(),
             cone_audit.passed() ? "" : cone_audit.failures.front());
    }

    for (const char* name : {"linear", "single", "dual-ball", "dual-cone"}) {
        mips::BenchConfig c;
        c.algorithm = mips::parse_algorithm(name);
        c.kernel = kernel;
        c.k = f.k;
        c.leaf_size = f.leaf_size;
        c.seed = f.seed;
        c.threads = f.threads;
        const mips::RunResult run = mips::run_search(c, queries, refs);
        const auto mismatch = mips::oracle::compare_results(expected.results, run.report.results);
        line(std::string(name) + " vs oracle", !mismatch,
             mismatch ? "query " + std::to_string(mismatch->query) + " rank " + std::to_string(mismatch->rank) + ": " +
                            mismatch->reason
                      : "");
    }

    if (!v.results.empty()) {
        const auto stored = mips::read_results_csv(v.results);
        const auto mismatch = mips::oracle::compare_results(expected.results, stored);
        line("results file " + v.results, !mismatch,
             mismatch ? "query " + std::to_string(mismatch->query) + " rank " + std::to_string(mismatch->rank) + ": " +
                            mismatch->reason
                      : "");
    }
    return all ? exit_ok : exit_verify_failed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact maximum inner-product search with ball and cone trees"};
    app.require_subcommand(1);

    CommonFlags common;

    GenFlags gen;
    auto* g = app.add_subcommand("gen", "generate a synthetic dataset");
    g->add_option("--kind", gen.kind, "uniform or clustered")->check(CLI::IsMember({"uniform", "clustered"}));
    g->add_option("--n", gen.n, "rows");
    g->add_option("--d", gen.d, "dimensions");
    g->add_option("--clusters", gen.clusters, "clusters (clustered only)");
    g->add_option("--spread", gen.spread, "cluster standard deviation (clustered only)");
    g->add_option("--seed", gen.seed, "generator and split seed");
    g->add_option("--out", gen.out, "output dataset (.csv for text, anything else binary)")->required();
    g->add_option("--split", gen.split, "fraction of rows sent to --queries-out");
    g->add_option("--queries-out", gen.queries_out, "query half of a seeded split");

    BuildFlags build;
    auto* b = app.add_subcommand("build", "build a reference ball tree or query cone tree and save it");
    b->add_option("--data", build.data, "dataset file")->required();
    b->add_option("--tree", build.tree, "ball or cone")->check(CLI::IsMember({"ball", "cone"}));
    b->add_option("--leaf-size", common.leaf_size, "maximum points per leaf");
    b->add_option("--seed", common.seed, "pivot selection seed");
    b->add_option("--out", common.out, "tree file")->required();
    b->add_option("--report", build.report, "report file (default stdout)");
    add_format_flag(*b, common);

    SearchFlags search;
    auto* s = app.add_subcommand("search", "run one search and write the results file");
    s->add_option("--refs", search.refs, "reference dataset")->required();
    s->add_option("--queries", search.queries, "query dataset")->required();
    s->add_option("--tree", search.tree, "prebuilt reference ball tree");
    s->add_option("--query-tree", search.query_tree, "prebuilt query tree (ball for dual-ball, cone for dual-cone)");
    s->add_option("--out", common.out, "results file");
    s->add_option("--report", search.report, "report file (default stdout)");
    s->add_flag("--baseline", search.baseline, "also time a linear scan and report speedup");
    add_search_flags(*s, common);
    add_format_flag(*s, common);

    BenchFlags bench;
    auto* be = app.add_subcommand("bench", "sweep algorithms and k against a linear scan");
    be->add_option("--refs", bench.refs, "reference dataset")->required();
    be->add_option("--queries", bench.queries, "query dataset")->required();
    be->add_option("--dataset", bench.dataset, "dataset label (default refs file stem)");
    be->add_option("--algorithms", bench.algorithms, "algorithms to sweep")
        ->check(CLI::IsMember({"linear", "single", "dual-ball", "dual-cone"}));
    be->add_option("--ks", bench.ks, "values of k");
    be->add_option("--bound", common.bound, "bound override, applied where compatible")
        ->check(CLI::IsMember({"thm1", "thm2", "thm3", "opt1", "opt2"}));
    be->add_option("--kernel", common.kernel, "linear, rbf or poly")->check(CLI::IsMember({"linear", "rbf", "poly"}));
    be->add_option("--gamma", common.gamma, "rbf width");
    be->add_option("--coef0", common.coef0, "polynomial offset");
    be->add_option("--degree", common.degree, "polynomial degree");
    be->add_option("--leaf-size", common.leaf_size, "maximum points per leaf");
    be->add_option("--seed", common.seed, "pivot selection seed");
    be->add_option("--threads", common.threads, "worker threads for single-tree and linear search");
    be->add_option("--out", common.out, "table file (default stdout)");
    add_format_flag(*be, common);

    VerifyFlags verify;
    auto* v = app.add_subcommand("verify", "check trees and every algorithm against the brute-force oracle");
    v->add_option("--refs", verify.refs, "reference dataset")->required();
    v->add_option("--queries", verify.queries, "query dataset")->required();
    v->add_option("--results", verify.results, "results file to check as well");
    v->add_option("--k", common.k, "neighbors per query");
    v->add_option("--leaf-size", common.leaf_size, "maximum points per leaf");
    v->add_option("--seed", common.seed, "pivot selection seed");
    v->add_option("--threads", common.threads, "worker threads");
    v->add_option("--kernel", common.kernel, "linear, rbf or poly")->check(CLI::IsMember({"linear", "rbf", "poly"}));
    v->add_option("--gamma", common.gamma, "rbf width");
    v->add_option("--coef0", common.coef0, "polynomial offset");
    v->add_option("--degree", common.degree, "polynomial degree");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_contract;
    }

    try {
        if (*g) return cmd_gen(gen);
        if (*b) return cmd_build(build, common);
        if (*s) return cmd_search(search, common);
        if (*be) return cmd_bench(bench, common);
        if (*v) return cmd_verify(verify, common);
    } catch (const mips::ContractViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_contract;
    } catch (const mips::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    }
    return exit_ok;
}
