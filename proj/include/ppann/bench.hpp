#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ppann/common.hpp"
#include "ppann/dataset.hpp"
#include "ppann/search.hpp"

// Owner-side pipeline (encrypt + index + persist), server-side artifact
// loading, and the recall/QPS benchmark harness.

namespace ppann::bench {

struct RunConfig {
    // dataset; empty paths fall back to seeded synthetic data
    std::string base_path;
    std::string queries_path;
    std::string ground_truth_path;
    std::uint32_t synthetic_n = 10000;
    std::uint32_t synthetic_d = 32;
    std::uint32_t synthetic_queries = 100;

    std::uint32_t k = 10;
    std::vector<std::uint32_t> ef_grid = {64, 128, 256, 512};
    std::vector<std::uint32_t> ratio_grid = {1, 2, 4, 8};
    double beta = 1.0;
    double s = 1024.0;
    std::uint32_t m = 16;
    std::uint32_t ef_construction = 200;
    std::uint64_t seed = 42;
    unsigned threads = 0;
    std::uint32_t repetitions = 5;
    std::string artifact_dir = "artifacts";
};

// 64-bit FNV-1a, rendered as hex; manifests use it to pin artifact bytes.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string hash_file_hex(const std::string& path);

struct ManifestEntry {
    std::string name;
    std::string path;  // relative to the manifest directory
    std::string role;  // "server" or "owner"
    std::string format;
    std::string hash;
};

struct Manifest {
    int format_version = 1;
    std::uint32_t n = 0;
    std::uint32_t d = 0;
    std::uint32_t d_dce = 0;
    bool padded = false;
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> entries;

    const ManifestEntry& find(const std::string& name) const;
};

void save_manifest(const std::string& path, const Manifest& m);
Manifest load_manifest(const std::string& path);
// Throws if any artifact's bytes no longer match its recorded hash.
void verify_manifest(const std::string& dir, const Manifest& m);

// Encrypts the base, builds the graph, persists every artifact under
// config.artifact_dir and returns the manifest. Deterministic per seed.
Manifest owner_pipeline(const RunConfig& config, const std::vector<Vec64>& base);

// Loads only server-role artifacts; owner key files are never touched.
search::EncryptedDatabase load_server_database(const std::string& dir);

// User-side query encryption; pads odd dimensions for the DCE layer.
search::QueryCiphertext make_query(const Vec64& q, const dce::DceSecretKey& dce_key,
                                   const dcpe::SapKey& sap_key, std::uint32_t k, SeededRng& rng);

struct BenchRow {
    std::string mode;  // "e2e" or "filter"
    std::uint32_t ef_search = 0;
    std::uint32_t ratio_k = 0;
    std::uint32_t k_prime = 0;
    double beta = 0;
    double recall_at_k = 0;
    double qps = 0;
    double mean_dce_comparisons = 0;
    double p50_ms = 0;
    double p95_ms = 0;
};

struct BenchReport {
    int csv_version = 1;
    std::uint32_t k = 0;
    std::vector<BenchRow> rows;
};

void write_csv(std::ostream& os, const BenchReport& report);
void print_table(std::ostream& os, const BenchReport& report);

// Loads (or builds) artifacts, encrypts the query set, then runs the
// ef_search x Ratio_k grid single-threaded, averaged over config.repetitions
// runs. Also emits the filter-only recall curve used for beta tuning plots.
BenchReport run_bench(const RunConfig& config);

// Dataset resolution shared by the CLI paths.
dataset::Dataset resolve_dataset(const RunConfig& config, bool need_queries,
                                 bool need_ground_truth);

}  // namespace ppann::bench
