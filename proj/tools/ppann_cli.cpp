// Role-based command line for the encrypted-search toolkit.
//
//   data owner: keygen, encrypt-db, build-index, tune-beta
//   user:       trapgen
//   server:     search, bench, tune-kprime
//   analysis:   attack-demo
//
// A TOML-style key=value config file can preload any flag via --config.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ppann/attacks.hpp"
#include "ppann/bench.hpp"
#include "ppann/common.hpp"
#include "ppann/dataset.hpp"
#include "ppann/dce.hpp"
#include "ppann/dcpe.hpp"
#include "ppann/search.hpp"

namespace fs = std::filesystem;
using namespace ppann;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 42;
    unsigned threads = 0;
};

void add_dataset_flags(CLI::App* cmd, bench::RunConfig& cfg) {
    cmd->add_option("--base", cfg.base_path, "base vectors (fvecs)");
    cmd->add_option("--queries", cfg.queries_path, "query vectors (fvecs)");
    cmd->add_option("--ground-truth", cfg.ground_truth_path, "ground truth ids (ivecs)");
    cmd->add_option("--synthetic-n", cfg.synthetic_n, "synthetic base size when --base is absent");
    cmd->add_option("--synthetic-d", cfg.synthetic_d, "synthetic dimension");
    cmd->add_option("--synthetic-queries", cfg.synthetic_queries, "synthetic query count");
}

int cmd_keygen(const GlobalOpts& g, const bench::RunConfig& cfg, const std::string& out_dir) {
    dataset::Dataset ds = bench::resolve_dataset(cfg, false, false);
    const auto d = static_cast<std::uint32_t>(ds.base.at(0).size());
    const std::uint32_t d_dce = d + d % 2;
    fs::create_directories(out_dir);

    SeededRng root(g.seed);
    dce::DceSecretKey dce_key = dce::keygen(d_dce, root.derive(2).next_u64());
    dce::save_key_file((fs::path(out_dir) / "dce_key.bin").string(), dce_key);

    dcpe::SapKey sap_key =
        dcpe::sap_keygen(cfg.s, cfg.beta, dataset::max_abs_coordinate(ds.base), d);
    dcpe::save_key_file((fs::path(out_dir) / "sap_key.bin").string(), sap_key);

    std::cout << "wrote dce_key.bin (d=" << d_dce << ") and sap_key.bin (s=" << sap_key.s
              << ", beta=" << sap_key.beta << ") to " << out_dir << "\n";
    return 0;
}

int cmd_encrypt_db(const bench::RunConfig& cfg) {
    dataset::Dataset ds = bench::resolve_dataset(cfg, false, false);
    bench::owner_pipeline(cfg, ds.base);
    std::cout << "encrypted " << ds.base.size() << " vectors; artifacts in " << cfg.artifact_dir
              << "\n";
    return 0;
}

int cmd_build_index(const bench::RunConfig& cfg) {
    // rebuilds the graph over an existing SAP store and refreshes the manifest
    const fs::path dir(cfg.artifact_dir);
    auto manifest = bench::load_manifest((dir / "manifest.json").string());
    auto sap_store = dcpe::load_store_file((dir / "sap_store.bin").string());
    hnsw::SapMetric metric(sap_store);
    auto graph = hnsw::HnswGraph::build(metric, sap_store.size(), cfg.m, cfg.ef_construction,
                                        SeededRng(cfg.seed).derive(4).next_u64());
    graph.save_file((dir / "graph.bin").string());
    for (auto& e : manifest.entries) {
        if (e.name == "graph") e.hash = bench::hash_file_hex((dir / e.path).string());
    }
    bench::save_manifest((dir / "manifest.json").string(), manifest);
    std::cout << "built HNSW (m=" << cfg.m << ", efConstruction=" << cfg.ef_construction << ") over "
              << sap_store.size() << " ciphertexts\n";
    return 0;
}

int cmd_trapgen(const GlobalOpts& g, const bench::RunConfig& cfg, const std::string& key_dir,
                const std::string& out_path, std::uint32_t k, std::uint32_t k_prime,
                std::uint32_t ef_search, std::uint32_t query_index) {
    dataset::Dataset ds = bench::resolve_dataset(cfg, true, false);
    const Vec64& q = ds.queries.at(query_index);

    auto dce_key = dce::load_key_file((fs::path(key_dir) / "dce_key.bin").string());
    auto sap_key = dcpe::load_key_file((fs::path(key_dir) / "sap_key.bin").string());

    SeededRng rng = SeededRng(g.seed).derive(5).derive(query_index);
    search::QueryRequest req;
    req.d = static_cast<std::uint32_t>(q.size());
    req.k = k;
    req.k_prime = k_prime ? k_prime : 8 * k;
    req.ef_search = std::max(ef_search, req.k_prime);
    req.qc = bench::make_query(q, dce_key, sap_key, k, rng);

    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + out_path);
    search::save_query_request(os, req);
    std::cout << "wrote encrypted query request to " << out_path << "\n";
    return 0;
}

int cmd_search(const std::string& artifact_dir, const std::string& request_path,
               const std::string& response_path) {
    auto db = bench::load_server_database(artifact_dir);
    std::ifstream is(request_path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + request_path);
    auto req = search::load_query_request(is);

    auto res = search::run_search(db, req.qc, req.k_prime, req.ef_search);
    if (!response_path.empty()) {
        std::ofstream os(response_path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open for writing: " + response_path);
        search::save_query_response(os, res.ids);
    }
    std::cout << "ids:";
    for (auto id : res.ids) std::cout << ' ' << id;
    std::cout << "\nfilter_candidates=" << res.stats.filter_candidates
              << " dce_comparisons=" << res.stats.dce_comparisons
              << " elapsed_ms=" << res.stats.elapsed_seconds * 1e3 << "\n";
    return 0;
}

int cmd_bench(const bench::RunConfig& cfg, const std::string& csv_path) {
    auto report = bench::run_bench(cfg);
    bench::print_table(std::cout, report);
    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) throw std::runtime_error("cannot open for writing: " + csv_path);
        bench::write_csv(os, report);
        std::cout << "csv written to " << csv_path << "\n";
    }
    return 0;
}

int cmd_tune_beta(const bench::RunConfig& cfg, double target) {
    dataset::Dataset ds = bench::resolve_dataset(cfg, true, true);
    auto result = search::tune_beta(ds.base, ds.queries, ds.ground_truth, cfg.k, target, cfg.s,
                                    cfg.seed, cfg.threads);
    std::cout << "beta=" << result.beta << " filter_recall=" << result.achieved_recall
              << " evaluations=" << result.evaluations
              << (result.reached ? "" : "  [target not reached, best shown]") << "\n";
    return result.reached ? 0 : 2;
}

int cmd_tune_kprime(const bench::RunConfig& cfg, double target) {
    dataset::Dataset ds = bench::resolve_dataset(cfg, true, true);
    const fs::path manifest_path = fs::path(cfg.artifact_dir) / "manifest.json";
    if (!fs::exists(manifest_path)) bench::owner_pipeline(cfg, ds.base);
    auto db = bench::load_server_database(cfg.artifact_dir);

    auto dce_key = dce::load_key_file((fs::path(cfg.artifact_dir) / "dce_key.bin").string());
    auto sap_key = dcpe::load_key_file((fs::path(cfg.artifact_dir) / "sap_key.bin").string());
    SeededRng qroot = SeededRng(cfg.seed).derive(5);
    std::vector<search::QueryCiphertext> encrypted;
    for (std::size_t i = 0; i < ds.queries.size(); ++i) {
        SeededRng sub = qroot.derive(i);
        encrypted.push_back(bench::make_query(ds.queries[i], dce_key, sap_key, cfg.k, sub));
    }

    auto result = search::tune_k_prime(db, encrypted, ds.ground_truth, cfg.k, target,
                                       cfg.ratio_grid, cfg.ef_grid);
    std::cout << "ratio_k,ef_search,recall,qps\n";
    for (const auto& p : result.curve) {
        std::cout << p.ratio << ',' << p.ef_search << ',' << p.recall << ',' << p.qps << "\n";
    }
    std::cout << "chosen Ratio_k=" << result.ratio << " best_recall=" << result.best_recall
              << (result.reached ? "" : "  [target not reached]") << "\n";
    return result.reached ? 0 : 2;
}

int cmd_attack_demo(const GlobalOpts& g, const std::string& variant_name, std::uint32_t dim,
                    const std::string& csv_path) {
    auto variant = attacks::variant_from_string(variant_name);
    auto report = attacks::run_attack_demo(variant, dim, g.seed);

    std::cout << "variant          " << attacks::to_string(report.variant) << "\n"
              << "dimension        " << report.d << "\n"
              << "leaked vectors   " << report.leaked_count << "\n"
              << "query error      " << report.max_query_error << " (max relative)\n"
              << "db vector error  " << report.db_vector_error << " (relative)\n"
              << "elapsed          " << report.elapsed_seconds << " s\n";

    // machine-readable row: variant,d,seed,leaked,query_err,db_err,seconds
    std::string row = attacks::to_string(report.variant) + "," + std::to_string(report.d) + "," +
                      std::to_string(report.seed) + "," + std::to_string(report.leaked_count) + "," +
                      std::to_string(report.max_query_error) + "," +
                      std::to_string(report.db_vector_error) + "," +
                      std::to_string(report.elapsed_seconds);
    std::cout << "csv: " << row << "\n";
    if (!csv_path.empty()) {
        std::ofstream os(csv_path, std::ios::app);
        os << row << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"privacy-preserving approximate nearest neighbor search toolkit"};
    app.require_subcommand(1);
    app.set_config("--config");

    GlobalOpts g;
    app.add_option("--seed", g.seed, "root RNG seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads (0 = auto, PPANN_THREADS overrides)");

    bench::RunConfig cfg;
    std::string out_dir = "artifacts";
    std::string request_path = "query.bin";
    std::string response_path;
    std::string csv_path;
    std::string variant = "linear";
    std::uint32_t dim = 16;
    std::uint32_t k_prime = 0;
    std::uint32_t ef_search = 0;
    std::uint32_t query_index = 0;
    double target_filter_recall = 0.5;
    double target_recall = 0.9;

    auto* keygen = app.add_subcommand("keygen", "generate DCE and SAP keys (data owner)");
    add_dataset_flags(keygen, cfg);
    keygen->add_option("--out", out_dir, "output directory");
    keygen->add_option("--s", cfg.s, "SAP scaling factor")->capture_default_str();
    keygen->add_option("--beta", cfg.beta, "SAP perturbation factor")->capture_default_str();

    auto* encrypt = app.add_subcommand("encrypt-db", "encrypt the base and build all artifacts");
    add_dataset_flags(encrypt, cfg);
    encrypt->add_option("--artifacts", cfg.artifact_dir, "artifact directory")->capture_default_str();
    encrypt->add_option("--s", cfg.s, "SAP scaling factor");
    encrypt->add_option("--beta", cfg.beta, "SAP perturbation factor");
    encrypt->add_option("--m", cfg.m, "HNSW degree parameter");
    encrypt->add_option("--ef-construction", cfg.ef_construction, "HNSW build beam width");

    auto* build = app.add_subcommand("build-index", "rebuild the HNSW graph over the SAP store");
    build->add_option("--artifacts", cfg.artifact_dir, "artifact directory");
    build->add_option("--m", cfg.m, "HNSW degree parameter");
    build->add_option("--ef-construction", cfg.ef_construction, "HNSW build beam width");

    auto* trap = app.add_subcommand("trapgen", "encrypt one query into a request file (user)");
    add_dataset_flags(trap, cfg);
    trap->add_option("--keys", out_dir, "key directory");
    trap->add_option("--out", request_path, "request file");
    trap->add_option("--k", cfg.k, "neighbors to request");
    trap->add_option("--k-prime", k_prime, "filter candidates (default 8k)");
    trap->add_option("--ef-search", ef_search, "beam width (default k')");
    trap->add_option("--query-index", query_index, "which query vector to encrypt");

    auto* srch = app.add_subcommand("search", "answer a request over server artifacts");
    srch->add_option("--artifacts", cfg.artifact_dir, "artifact directory");
    srch->add_option("--request", request_path, "request file");
    srch->add_option("--response", response_path, "response file (optional)");

    auto* bench_cmd = app.add_subcommand("bench", "recall/QPS grid benchmark");
    add_dataset_flags(bench_cmd, cfg);
    bench_cmd->add_option("--artifacts", cfg.artifact_dir, "artifact directory");
    bench_cmd->add_option("--k", cfg.k, "neighbors per query");
    bench_cmd->add_option("--ef-grid", cfg.ef_grid, "ef_search grid");
    bench_cmd->add_option("--ratio-grid", cfg.ratio_grid, "Ratio_k grid");
    bench_cmd->add_option("--s", cfg.s, "SAP scaling factor");
    bench_cmd->add_option("--beta", cfg.beta, "SAP perturbation factor");
    bench_cmd->add_option("--m", cfg.m, "HNSW degree parameter");
    bench_cmd->add_option("--ef-construction", cfg.ef_construction, "HNSW build beam width");
    bench_cmd->add_option("--repetitions", cfg.repetitions, "timing repetitions");
    bench_cmd->add_option("--csv", csv_path, "write rows to this CSV file");

    auto* tbeta = app.add_subcommand("tune-beta", "bisect beta for a target filter recall");
    add_dataset_flags(tbeta, cfg);
    tbeta->add_option("--k", cfg.k, "neighbors per query");
    tbeta->add_option("--s", cfg.s, "SAP scaling factor");
    tbeta->add_option("--target", target_filter_recall, "target filter-only recall")
        ->capture_default_str();

    auto* tkp = app.add_subcommand("tune-kprime", "grid search Ratio_k for a target recall");
    add_dataset_flags(tkp, cfg);
    tkp->add_option("--artifacts", cfg.artifact_dir, "artifact directory");
    tkp->add_option("--k", cfg.k, "neighbors per query");
    tkp->add_option("--ef-grid", cfg.ef_grid, "ef_search grid");
    tkp->add_option("--ratio-grid", cfg.ratio_grid, "Ratio_k grid");
    tkp->add_option("--s", cfg.s, "SAP scaling factor");
    tkp->add_option("--beta", cfg.beta, "SAP perturbation factor");
    tkp->add_option("--target", target_recall, "target recall@k")->capture_default_str();

    auto* attack = app.add_subcommand("attack-demo", "known-plaintext recovery demonstration");
    attack->add_option("--variant", variant, "linear|exp|log|square")->capture_default_str();
    attack->add_option("--dim", dim, "vector dimension")->capture_default_str();
    attack->add_option("--csv", csv_path, "append the machine-readable row to this file");

    CLI11_PARSE(app, argc, argv);

    cfg.seed = g.seed;
    cfg.threads = g.threads;

    try {
        if (keygen->parsed()) return cmd_keygen(g, cfg, out_dir);
        if (encrypt->parsed()) return cmd_encrypt_db(cfg);
        if (build->parsed()) return cmd_build_index(cfg);
        if (trap->parsed())
            return cmd_trapgen(g, cfg, out_dir, request_path, cfg.k, k_prime, ef_search, query_index);
        if (srch->parsed()) return cmd_search(cfg.artifact_dir, request_path, response_path);
        if (bench_cmd->parsed()) return cmd_bench(cfg, csv_path);
        if (tbeta->parsed()) return cmd_tune_beta(cfg, target_filter_recall);
        if (tkp->parsed()) return cmd_tune_kprime(cfg, target_recall);
        if (attack->parsed()) return cmd_attack_demo(g, variant, dim, csv_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
