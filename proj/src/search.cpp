#include "ppann/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ppann/dataset.hpp"

namespace ppann::search {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

void EncryptedDatabase::check_consistent() const {
    if (sap_store.size() != n || dce_store.size() != n || graph.size() != n) {
        throw std::runtime_error("EncryptedDatabase: store sizes disagree");
    }
    if (sap_store.d() != d || dce_store.d() != d_dce) {
        throw std::runtime_error("EncryptedDatabase: store dimensions disagree");
    }
    for (std::uint32_t id = 0; id < n; ++id) {
        if (!graph.contains(id)) throw std::runtime_error("EncryptedDatabase: graph misses an id");
    }
}

std::vector<std::uint32_t> refine_candidates(const dce::DceStore& store,
                                             const std::vector<std::uint32_t>& candidates,
                                             const dce::DceTrapdoor& tq, std::uint32_t k,
                                             std::uint64_t* comparison_count) {
    std::uint64_t comparisons = 0;
    // total order: closer wins, exact ties (Z == 0) fall back to ascending id
    auto ordered_before = [&](std::uint32_t a, std::uint32_t b) {
        ++comparisons;
        double z = dce::distance_comp(store, a, b, tq);
        return z < 0 || (z == 0 && a < b);
    };

    // best..worst, at most k entries, maintained by binary insertion so each
    // candidate costs at most ceil(log2 k) comparisons once the list is full
    std::vector<std::uint32_t> best;
    best.reserve(k);
    for (std::uint32_t cand : candidates) {
        if (best.size() >= k) {
            // ties keep the incumbent (Z >= 0 means "not closer")
            ++comparisons;
            double z = dce::distance_comp(store, cand, best.back(), tq);
            if (!(z < 0)) continue;
            best.pop_back();
        }
        auto pos = std::lower_bound(best.begin(), best.end(), cand,
                                    [&](std::uint32_t member, std::uint32_t c) {
                                        return ordered_before(member, c);
                                    });
        best.insert(pos, cand);
    }
    if (comparison_count) *comparison_count = comparisons;
    return best;
}

std::vector<std::uint32_t> filter_scan(const dcpe::SapStore& store, const dcpe::SapCiphertext& cq,
                                       std::uint32_t k) {
    k = std::min<std::uint32_t>(k, store.size());
    std::vector<std::pair<double, std::uint32_t>> scored(store.size());
    for (std::uint32_t id = 0; id < store.size(); ++id) {
        scored[id] = {store.dist_to(cq.c, id), id};
    }
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end());
    std::vector<std::uint32_t> out(k);
    for (std::uint32_t i = 0; i < k; ++i) out[i] = scored[i].second;
    return out;
}

SearchResult run_search(const EncryptedDatabase& db, const QueryCiphertext& qc,
                        std::uint32_t k_prime, std::uint32_t ef_search) {
    if (qc.k < 1) throw std::invalid_argument("search: k must be >= 1");
    if (k_prime < qc.k) throw std::invalid_argument("search: require k_prime >= k");
    if (ef_search < k_prime) throw std::invalid_argument("search: require ef_search >= k_prime");
    if (qc.sap_q.c.size() != db.d) throw std::invalid_argument("search: SAP query dimension mismatch");
    if (qc.trapdoor.t.size() != 2 * db.d_dce + 16) {
        throw std::invalid_argument("search: trapdoor dimension mismatch");
    }

    auto t0 = Clock::now();
    SearchResult result;

    hnsw::SapMetric metric(db.sap_store);
    auto filtered = db.graph.knn_search(metric, qc.sap_q.c,
                                        {.ef_search = ef_search, .k_prime = k_prime});

    // the beam cannot emit duplicates, but the refine contract assumes none
    std::vector<std::uint8_t> seen(db.n, 0);
    std::vector<std::uint32_t> unique_ids;
    unique_ids.reserve(filtered.size());
    for (std::uint32_t id : filtered) {
        if (!seen[id]) {
            seen[id] = 1;
            unique_ids.push_back(id);
        }
    }
    result.stats.filter_candidates = static_cast<std::uint32_t>(unique_ids.size());

    const std::uint32_t k_eff = std::min(qc.k, db.n);
    result.ids = refine_candidates(db.dce_store, unique_ids, qc.trapdoor, k_eff,
                                   &result.stats.dce_comparisons);
    result.stats.elapsed_seconds = seconds_since(t0);
    return result;
}

double filter_only_recall(const std::vector<Vec64>& base, const std::vector<Vec64>& queries,
                          const std::vector<std::vector<std::uint32_t>>& ground_truth,
                          std::uint32_t k, double s, double beta, std::uint64_t seed,
                          unsigned threads) {
    const auto d = static_cast<std::uint32_t>(base.at(0).size());
    dcpe::SapKey key = dcpe::sap_keygen(s, beta, dataset::max_abs_coordinate(base), d);
    dcpe::SapStore store = dcpe::encrypt_database(base, key, seed, threads);

    SeededRng qroot = SeededRng(seed).derive(0x51554552ULL);
    std::vector<double> recalls(queries.size(), 0.0);
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        SeededRng sub = qroot.derive(i);
        dcpe::SapCiphertext cq = dcpe::sap_encrypt(queries[i], key, sub);
        auto ids = filter_scan(store, cq, k);
        recalls[i] = dataset::recall_at_k(ids, ground_truth[i], k);
    });
    double acc = 0.0;
    for (double r : recalls) acc += r;
    return acc / static_cast<double>(recalls.size());
}

BetaTuneResult tune_beta(const std::vector<Vec64>& base, const std::vector<Vec64>& queries,
                         const std::vector<std::vector<std::uint32_t>>& ground_truth,
                         std::uint32_t k, double target_filter_recall, double s,
                         std::uint64_t seed, unsigned threads) {
    if (queries.empty() || ground_truth.size() != queries.size()) {
        throw std::invalid_argument("tune_beta: queries and ground truth required");
    }
    constexpr double kBand = 0.05;
    BetaTuneResult result;

    auto eval = [&](double beta) {
        ++result.evaluations;
        return filter_only_recall(base, queries, ground_truth, k, s, beta, seed, threads);
    };

    // expand upward until recall falls below the target band
    double lo = 0.0;
    double hi = 1.0;
    double recall_hi = eval(hi);
    int expansions = 0;
    while (recall_hi > target_filter_recall + kBand && expansions < 60) {
        lo = hi;
        hi *= 2.0;
        recall_hi = eval(hi);
        ++expansions;
    }
    if (recall_hi >= target_filter_recall - kBand) {
        result.beta = hi;
        result.achieved_recall = recall_hi;
        result.reached = recall_hi <= target_filter_recall + kBand;
        if (result.reached) return result;
    }

    // bisection; filter recall is non-increasing in beta
    double best_beta = hi;
    double best_recall = recall_hi;
    for (int iter = 0; iter < 40; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (mid <= 0) break;
        double recall = eval(mid);
        if (std::abs(recall - target_filter_recall) < std::abs(best_recall - target_filter_recall)) {
            best_beta = mid;
            best_recall = recall;
        }
        if (std::abs(recall - target_filter_recall) <= kBand) {
            result.beta = mid;
            result.achieved_recall = recall;
            result.reached = true;
            return result;
        }
        if (recall > target_filter_recall) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    result.beta = best_beta;
    result.achieved_recall = best_recall;
    result.reached = false;
    return result;
}

KPrimeTuneResult tune_k_prime(const EncryptedDatabase& db, const std::vector<QueryCiphertext>& queries,
                              const std::vector<std::vector<std::uint32_t>>& ground_truth,
                              std::uint32_t k, double target_recall,
                              const std::vector<std::uint32_t>& ratios,
                              const std::vector<std::uint32_t>& ef_grid) {
    if (queries.empty() || ground_truth.size() != queries.size()) {
        throw std::invalid_argument("tune_k_prime: queries and ground truth required");
    }
    if (ratios.empty() || ef_grid.empty()) {
        throw std::invalid_argument("tune_k_prime: grids must be non-empty");
    }

    KPrimeTuneResult result;
    std::uint32_t best_ratio = ratios.front();

    for (std::uint32_t ratio : ratios) {
        const std::uint32_t k_prime = ratio * k;
        double ratio_best = 0.0;
        for (std::uint32_t ef : ef_grid) {
            const std::uint32_t ef_eff = std::max(ef, k_prime);
            double acc = 0.0;
            auto t0 = Clock::now();
            for (std::size_t i = 0; i < queries.size(); ++i) {
                QueryCiphertext qc = queries[i];
                qc.k = k;
                auto res = run_search(db, qc, k_prime, ef_eff);
                acc += dataset::recall_at_k(res.ids, ground_truth[i], k);
            }
            double elapsed = seconds_since(t0);
            double recall = acc / static_cast<double>(queries.size());
            result.curve.push_back({ratio, ef_eff, recall,
                                    static_cast<double>(queries.size()) / std::max(elapsed, 1e-12)});
            ratio_best = std::max(ratio_best, recall);
        }
        if (ratio_best > result.best_recall) {
            result.best_recall = ratio_best;
            best_ratio = ratio;
        }
        if (!result.reached && ratio_best >= target_recall) {
            result.reached = true;
            result.ratio = ratio;
        }
    }
    if (!result.reached) result.ratio = best_ratio;
    return result;
}

void save_query_request(std::ostream& os, const QueryRequest& req) {
    io::write_magic(os, "PPQ1");
    io::write_u32(os, req.d);
    io::write_u32(os, req.k);
    io::write_u32(os, req.k_prime);
    io::write_u32(os, req.ef_search);
    const std::uint32_t d_dce = req.d + req.d % 2;
    if (req.qc.trapdoor.t.size() != 2 * d_dce + 16 || req.qc.sap_q.c.size() != req.d) {
        throw std::invalid_argument("save_query_request: ciphertext dimensions inconsistent with d");
    }
    for (double x : req.qc.trapdoor.t) io::write_f64(os, x);
    for (double x : req.qc.sap_q.c) io::write_f64(os, x);
}

QueryRequest load_query_request(std::istream& is) {
    io::expect_magic(is, "PPQ1", "query request");
    QueryRequest req;
    req.d = io::read_u32(is);
    req.k = io::read_u32(is);
    req.k_prime = io::read_u32(is);
    req.ef_search = io::read_u32(is);
    req.qc.k = req.k;
    const std::uint32_t d_dce = req.d + req.d % 2;
    req.qc.trapdoor.t.resize(2 * d_dce + 16);
    for (auto& x : req.qc.trapdoor.t) x = io::read_f64(is);
    req.qc.sap_q.c.resize(req.d);
    for (auto& x : req.qc.sap_q.c) x = io::read_f64(is);
    return req;
}

void save_query_response(std::ostream& os, const std::vector<std::uint32_t>& ids) {
    io::write_magic(os, "PPR1");
    io::write_u32(os, static_cast<std::uint32_t>(ids.size()));
    for (std::uint32_t id : ids) io::write_u32(os, id);
}

std::vector<std::uint32_t> load_query_response(std::istream& is) {
    io::expect_magic(is, "PPR1", "query response");
    std::uint32_t k = io::read_u32(is);
    std::vector<std::uint32_t> ids(k);
    for (auto& id : ids) id = io::read_u32(is);
    return ids;
}

}  // namespace ppann::search
