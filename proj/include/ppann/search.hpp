#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ppann/common.hpp"
#include "ppann/dce.hpp"
#include "ppann/dcpe.hpp"
#include "ppann/hnsw.hpp"

// Filter-and-refine search over the three-part index: a k'-candidate filter
// pass on the SAP ciphertext graph, then an exact refine pass that keeps the
// best k candidates using only DCE comparisons. The server-side inputs are
// ciphertexts end to end; no plaintext or distance value ever materializes.

namespace ppann::search {

struct EncryptedDatabase {
    std::uint32_t n = 0;
    std::uint32_t d = 0;       // plaintext dimension
    std::uint32_t d_dce = 0;   // d rounded up to even for the DCE layer
    dcpe::SapStore sap_store;
    dce::DceStore dce_store;
    hnsw::HnswGraph graph;

    bool padded() const { return d_dce != d; }
    void check_consistent() const;
};

struct QueryCiphertext {
    dce::DceTrapdoor trapdoor;
    dcpe::SapCiphertext sap_q;
    std::uint32_t k = 0;
};

struct SearchStats {
    std::uint32_t filter_candidates = 0;
    std::uint64_t dce_comparisons = 0;
    double elapsed_seconds = 0;
};

struct SearchResult {
    std::vector<std::uint32_t> ids;  // best first, |ids| == min(k, n)
    SearchStats stats;
};

SearchResult run_search(const EncryptedDatabase& db, const QueryCiphertext& qc,
                        std::uint32_t k_prime, std::uint32_t ef_search);

// Refine pass alone: orders candidates by DCE comparison and keeps the best
// k. Exposed for tests that pin the candidate set.
std::vector<std::uint32_t> refine_candidates(const dce::DceStore& store,
                                             const std::vector<std::uint32_t>& candidates,
                                             const dce::DceTrapdoor& tq, std::uint32_t k,
                                             std::uint64_t* comparison_count = nullptr);

// Filter-phase upper bound: exact scan over SAP ciphertexts (what an
// unbounded ef_search converges to).
std::vector<std::uint32_t> filter_scan(const dcpe::SapStore& store, const dcpe::SapCiphertext& cq,
                                       std::uint32_t k);

struct BetaTuneResult {
    double beta = 0;
    double achieved_recall = 0;
    bool reached = false;
    std::uint32_t evaluations = 0;
};

// Data-owner-side bisection: find beta whose filter-only recall@k (exhaustive
// candidates) lands within +/- 0.05 of the target. Recall decreases in beta.
BetaTuneResult tune_beta(const std::vector<Vec64>& base, const std::vector<Vec64>& queries,
                         const std::vector<std::vector<std::uint32_t>>& ground_truth,
                         std::uint32_t k, double target_filter_recall, double s,
                         std::uint64_t seed, unsigned threads = 0);

// Filter-only recall@k at one beta (helper shared by tuning and the trend checks).
double filter_only_recall(const std::vector<Vec64>& base, const std::vector<Vec64>& queries,
                          const std::vector<std::vector<std::uint32_t>>& ground_truth,
                          std::uint32_t k, double s, double beta, std::uint64_t seed,
                          unsigned threads = 0);

struct KPrimeTunePoint {
    std::uint32_t ratio = 0;
    std::uint32_t ef_search = 0;
    double recall = 0;
    double qps = 0;
};

struct KPrimeTuneResult {
    std::uint32_t ratio = 0;  // smallest grid ratio reaching the target
    bool reached = false;
    double best_recall = 0;
    std::vector<KPrimeTunePoint> curve;
};

KPrimeTuneResult tune_k_prime(const EncryptedDatabase& db, const std::vector<QueryCiphertext>& queries,
                              const std::vector<std::vector<std::uint32_t>>& ground_truth,
                              std::uint32_t k, double target_recall,
                              const std::vector<std::uint32_t>& ratios,
                              const std::vector<std::uint32_t>& ef_grid);

// Query request/response wire format (little-endian):
//   request  "PPQ1" u32 d, u32 k, u32 k_prime, u32 ef_search,
//            (2*d_dce+16) trapdoor doubles, d SAP-query doubles
//   response "PPR1" u32 k, then k u32 ids
struct QueryRequest {
    std::uint32_t d = 0;
    std::uint32_t k = 0;
    std::uint32_t k_prime = 0;
    std::uint32_t ef_search = 0;
    QueryCiphertext qc;
};

void save_query_request(std::ostream& os, const QueryRequest& req);
QueryRequest load_query_request(std::istream& is);
void save_query_response(std::ostream& os, const std::vector<std::uint32_t>& ids);
std::vector<std::uint32_t> load_query_response(std::istream& is);

}  // namespace ppann::search
