#include "ppann/bench.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ppann::bench {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_file_hex(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("hash_file: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof(buf));
        std::streamsize got = is.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

const ManifestEntry& Manifest::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return e;
    }
    throw std::runtime_error("manifest: no entry named " + name);
}

void save_manifest(const std::string& path, const Manifest& m) {
    json j;
    j["format_version"] = m.format_version;
    j["n"] = m.n;
    j["d"] = m.d;
    j["d_dce"] = m.d_dce;
    j["padded"] = m.padded;
    j["seed"] = m.seed;
    j["artifacts"] = json::array();
    for (const auto& e : m.entries) {
        j["artifacts"].push_back({{"name", e.name},
                                  {"path", e.path},
                                  {"role", e.role},
                                  {"format", e.format},
                                  {"hash", e.hash}});
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << j.dump(2) << "\n";
}

Manifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    json j = json::parse(is);
    Manifest m;
    m.format_version = j.at("format_version").get<int>();
    m.n = j.at("n").get<std::uint32_t>();
    m.d = j.at("d").get<std::uint32_t>();
    m.d_dce = j.at("d_dce").get<std::uint32_t>();
    m.padded = j.at("padded").get<bool>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("artifacts")) {
        m.entries.push_back({e.at("name").get<std::string>(), e.at("path").get<std::string>(),
                             e.at("role").get<std::string>(), e.at("format").get<std::string>(),
                             e.at("hash").get<std::string>()});
    }
    return m;
}

void verify_manifest(const std::string& dir, const Manifest& m) {
    for (const auto& e : m.entries) {
        std::string full = (fs::path(dir) / e.path).string();
        std::string hash = hash_file_hex(full);
        if (hash != e.hash) {
            throw std::runtime_error("manifest: hash mismatch for " + e.name + " (" + full + ")");
        }
    }
}

namespace {

Vec64 pad_even(const Vec64& v) {
    if (v.size() % 2 == 0) return v;
    Vec64 out = v;
    out.push_back(0.0);
    return out;
}

std::vector<Vec64> pad_even_all(const std::vector<Vec64>& vecs) {
    std::vector<Vec64> out;
    out.reserve(vecs.size());
    for (const auto& v : vecs) out.push_back(pad_even(v));
    return out;
}

// fixed derivation streams for the pipeline stages
constexpr std::uint64_t kStreamSap = 1;
constexpr std::uint64_t kStreamDceKey = 2;
constexpr std::uint64_t kStreamDceEnc = 3;
constexpr std::uint64_t kStreamGraph = 4;
constexpr std::uint64_t kStreamQueries = 5;

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return 0;
    std::sort(values.begin(), values.end());
    double idx = p * (values.size() - 1);
    auto lo = static_cast<std::size_t>(idx);
    auto hi = std::min(lo + 1, values.size() - 1);
    double frac = idx - static_cast<double>(lo);
    return values[lo] * (1 - frac) + values[hi] * frac;
}

}  // namespace

Manifest owner_pipeline(const RunConfig& config, const std::vector<Vec64>& base) {
    if (base.empty()) throw std::invalid_argument("owner_pipeline: empty base");
    fs::create_directories(config.artifact_dir);
    const fs::path dir(config.artifact_dir);

    const auto n = static_cast<std::uint32_t>(base.size());
    const auto d = static_cast<std::uint32_t>(base[0].size());
    const std::uint32_t d_dce = d + d % 2;
    SeededRng root(config.seed);

    dcpe::SapKey sap_key = dcpe::sap_keygen(config.s, config.beta, dataset::max_abs_coordinate(base), d);
    dcpe::save_key_file((dir / "sap_key.bin").string(), sap_key);

    dcpe::SapStore sap_store =
        dcpe::encrypt_database(base, sap_key, root.derive(kStreamSap).next_u64(), config.threads);
    dcpe::save_store_file((dir / "sap_store.bin").string(), sap_store);

    dce::DceSecretKey dce_key = dce::keygen(d_dce, root.derive(kStreamDceKey).next_u64());
    dce::save_key_file((dir / "dce_key.bin").string(), dce_key);

    dce::DceStore dce_store =
        dce::encrypt_database(d == d_dce ? base : pad_even_all(base), dce_key,
                              root.derive(kStreamDceEnc).next_u64(), config.threads);
    dce::save_store_file((dir / "dce_store.bin").string(), dce_store);

    hnsw::SapMetric metric(sap_store);
    hnsw::HnswGraph graph = hnsw::HnswGraph::build(metric, n, config.m, config.ef_construction,
                                                   root.derive(kStreamGraph).next_u64());
    graph.save_file((dir / "graph.bin").string());

    Manifest manifest;
    manifest.n = n;
    manifest.d = d;
    manifest.d_dce = d_dce;
    manifest.padded = d != d_dce;
    manifest.seed = config.seed;
    auto add = [&](const std::string& name, const std::string& file, const std::string& role,
                   const std::string& format) {
        manifest.entries.push_back({name, file, role, format, hash_file_hex((dir / file).string())});
    };
    add("sap_store", "sap_store.bin", "server", "SAPC");
    add("dce_store", "dce_store.bin", "server", "DCEC");
    add("graph", "graph.bin", "server", "HNSW");
    add("sap_key", "sap_key.bin", "owner", "SAPK");
    add("dce_key", "dce_key.bin", "owner", "DCEK");
    save_manifest((dir / "manifest.json").string(), manifest);
    return manifest;
}

search::EncryptedDatabase load_server_database(const std::string& dir) {
    Manifest manifest = load_manifest((fs::path(dir) / "manifest.json").string());
    search::EncryptedDatabase db;
    db.n = manifest.n;
    db.d = manifest.d;
    db.d_dce = manifest.d_dce;
    auto server_path = [&](const std::string& name) {
        const ManifestEntry& e = manifest.find(name);
        if (e.role != "server") {
            throw std::runtime_error("load_server_database: refusing non-server artifact " + name);
        }
        std::string full = (fs::path(dir) / e.path).string();
        if (hash_file_hex(full) != e.hash) {
            throw std::runtime_error("load_server_database: hash mismatch for " + name);
        }
        return full;
    };
    db.sap_store = dcpe::load_store_file(server_path("sap_store"));
    db.dce_store = dce::load_store_file(server_path("dce_store"));
    db.graph = hnsw::HnswGraph::load_file(server_path("graph"));
    db.check_consistent();
    return db;
}

search::QueryCiphertext make_query(const Vec64& q, const dce::DceSecretKey& dce_key,
                                   const dcpe::SapKey& sap_key, std::uint32_t k, SeededRng& rng) {
    search::QueryCiphertext qc;
    qc.k = k;
    qc.trapdoor = dce::trapgen(q.size() == dce_key.d ? q : pad_even(q), dce_key, rng);
    qc.sap_q = dcpe::sap_encrypt(q, sap_key, rng);
    return qc;
}

dataset::Dataset resolve_dataset(const RunConfig& config, bool need_queries, bool need_ground_truth) {
    dataset::Dataset ds;
    if (!config.base_path.empty()) {
        ds.base = dataset::read_fvecs(config.base_path);
    } else {
        ds.base = dataset::synthetic_gaussian(config.synthetic_n, config.synthetic_d, config.seed);
    }
    if (need_queries) {
        if (!config.queries_path.empty()) {
            ds.queries = dataset::read_fvecs(config.queries_path);
        } else {
            ds.queries = dataset::synthetic_gaussian(
                config.synthetic_queries, static_cast<std::uint32_t>(ds.base.at(0).size()),
                SeededRng(config.seed).derive(kStreamQueries).next_u64());
        }
    }
    if (need_ground_truth) {
        if (!config.ground_truth_path.empty()) {
            for (const auto& row : dataset::read_ivecs(config.ground_truth_path)) {
                std::vector<std::uint32_t> ids(row.begin(), row.end());
                ids.resize(std::min<std::size_t>(ids.size(), config.k));
                ds.ground_truth.push_back(std::move(ids));
            }
        } else {
            ds.ground_truth =
                dataset::brute_force_knn_batch(ds.base, ds.queries, config.k, config.threads);
        }
    }
    return ds;
}

void write_csv(std::ostream& os, const BenchReport& report) {
    os << "# ppann-bench-csv v" << report.csv_version << " k=" << report.k << "\n";
    os << "mode,ef_search,ratio_k,k_prime,beta,recall_at_k,qps,mean_dce_comparisons,p50_ms,p95_ms\n";
    for (const auto& r : report.rows) {
        os << r.mode << ',' << r.ef_search << ',' << r.ratio_k << ',' << r.k_prime << ',' << r.beta
           << ',' << r.recall_at_k << ',' << r.qps << ',' << r.mean_dce_comparisons << ',' << r.p50_ms
           << ',' << r.p95_ms << "\n";
    }
}

void print_table(std::ostream& os, const BenchReport& report) {
    os << std::left << std::setw(8) << "mode" << std::setw(10) << "ef" << std::setw(8) << "ratio"
       << std::setw(8) << "k'" << std::setw(12) << "recall@" << report.k << std::setw(12) << "qps"
       << std::setw(12) << "dce/query" << std::setw(10) << "p50ms" << std::setw(10) << "p95ms"
       << "\n";
    for (const auto& r : report.rows) {
        os << std::left << std::setw(8) << r.mode << std::setw(10) << r.ef_search << std::setw(8)
           << r.ratio_k << std::setw(8) << r.k_prime << std::setw(13)
           << (std::to_string(r.recall_at_k).substr(0, 6)) << std::setw(12)
           << (std::to_string(r.qps).substr(0, 9)) << std::setw(12) << r.mean_dce_comparisons
           << std::setw(10) << r.p50_ms << std::setw(10) << r.p95_ms << "\n";
    }
}

BenchReport run_bench(const RunConfig& config) {
    const fs::path manifest_path = fs::path(config.artifact_dir) / "manifest.json";
    dataset::Dataset ds = resolve_dataset(config, true, true);
    if (!fs::exists(manifest_path)) {
        owner_pipeline(config, ds.base);
    }
    search::EncryptedDatabase db = load_server_database(config.artifact_dir);

    dce::DceSecretKey dce_key =
        dce::load_key_file((fs::path(config.artifact_dir) / "dce_key.bin").string());
    dcpe::SapKey sap_key =
        dcpe::load_key_file((fs::path(config.artifact_dir) / "sap_key.bin").string());

    SeededRng qroot = SeededRng(config.seed).derive(kStreamQueries);
    std::vector<search::QueryCiphertext> encrypted;
    encrypted.reserve(ds.queries.size());
    for (std::size_t i = 0; i < ds.queries.size(); ++i) {
        SeededRng sub = qroot.derive(i);
        encrypted.push_back(make_query(ds.queries[i], dce_key, sap_key, config.k, sub));
    }

    BenchReport report;
    report.k = config.k;
    const std::uint32_t reps = std::max<std::uint32_t>(1, config.repetitions);

    for (std::uint32_t ratio : config.ratio_grid) {
        const std::uint32_t k_prime = ratio * config.k;
        for (std::uint32_t ef : config.ef_grid) {
            const std::uint32_t ef_eff = std::max(ef, k_prime);
            std::vector<double> latencies_ms;
            latencies_ms.reserve(ds.queries.size() * reps);
            double total_seconds = 0;
            double recall_acc = 0;
            double comps_acc = 0;
            // single-threaded query loop; timing covers searches only
            for (std::uint32_t rep = 0; rep < reps; ++rep) {
                for (std::size_t i = 0; i < encrypted.size(); ++i) {
                    auto t0 = Clock::now();
                    auto res = search::run_search(db, encrypted[i], k_prime, ef_eff);
                    double sec = std::chrono::duration<double>(Clock::now() - t0).count();
                    total_seconds += sec;
                    latencies_ms.push_back(sec * 1e3);
                    comps_acc += static_cast<double>(res.stats.dce_comparisons);
                    if (rep == 0) {
                        recall_acc += dataset::recall_at_k(res.ids, ds.ground_truth[i], config.k);
                    }
                }
            }
            const double total_queries = static_cast<double>(encrypted.size() * reps);
            report.rows.push_back({"e2e", ef_eff, ratio, k_prime, config.beta,
                                   recall_acc / static_cast<double>(encrypted.size()),
                                   total_queries / std::max(total_seconds, 1e-12),
                                   comps_acc / total_queries, percentile(latencies_ms, 0.50),
                                   percentile(latencies_ms, 0.95)});
        }
    }

    // filter-only curve (refine disabled): the graph's own answer at k
    hnsw::SapMetric metric(db.sap_store);
    for (std::uint32_t ef : config.ef_grid) {
        const std::uint32_t ef_eff = std::max(ef, config.k);
        std::vector<double> latencies_ms;
        double total_seconds = 0;
        double recall_acc = 0;
        for (std::size_t i = 0; i < encrypted.size(); ++i) {
            auto t0 = Clock::now();
            auto ids = db.graph.knn_search(metric, encrypted[i].sap_q.c,
                                           {.ef_search = ef_eff, .k_prime = config.k});
            double sec = std::chrono::duration<double>(Clock::now() - t0).count();
            total_seconds += sec;
            latencies_ms.push_back(sec * 1e3);
            recall_acc += dataset::recall_at_k(ids, ds.ground_truth[i], config.k);
        }
        report.rows.push_back({"filter", ef_eff, 1, config.k, config.beta,
                               recall_acc / static_cast<double>(encrypted.size()),
                               static_cast<double>(encrypted.size()) / std::max(total_seconds, 1e-12),
                               0.0, percentile(latencies_ms, 0.50), percentile(latencies_ms, 0.95)});
    }
    return report;
}

}  // namespace ppann::bench
