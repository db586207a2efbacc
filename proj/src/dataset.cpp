#include "ppann/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ppann::dataset {

namespace {

// Shared reader for the *vecs family; Record is float or int32.
template <typename Record>
std::vector<std::vector<Record>> read_xvecs(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    is.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(is.tellg());
    is.seekg(0, std::ios::beg);

    std::vector<std::vector<Record>> out;
    if (file_size == 0) return out;

    std::int32_t dim = 0;
    is.read(reinterpret_cast<char*>(&dim), 4);
    if (!is) throw std::runtime_error(path + ": truncated record header");
    if (dim <= 0) throw std::runtime_error(path + ": non-positive dimension");

    const std::uint64_t record_bytes = 4ull + 4ull * static_cast<std::uint64_t>(dim);
    if (file_size % record_bytes != 0) {
        throw std::runtime_error(path + ": file length is not a multiple of the record size");
    }
    const std::uint64_t count = file_size / record_bytes;
    out.reserve(count);

    std::vector<Record> rec(static_cast<std::size_t>(dim));
    for (std::uint64_t i = 0; i < count; ++i) {
        if (i > 0) {
            std::int32_t d2 = 0;
            is.read(reinterpret_cast<char*>(&d2), 4);
            if (!is) throw std::runtime_error(path + ": truncated record header");
            if (d2 != dim) throw std::runtime_error(path + ": inconsistent dimensions across records");
        }
        is.read(reinterpret_cast<char*>(rec.data()),
                static_cast<std::streamsize>(sizeof(Record) * rec.size()));
        if (!is) throw std::runtime_error(path + ": truncated record payload");
        out.push_back(rec);
    }
    return out;
}

}  // namespace

std::vector<Vec64> read_fvecs(const std::string& path) {
    auto raw = read_xvecs<float>(path);
    std::vector<Vec64> out;
    out.reserve(raw.size());
    for (const auto& rec : raw) out.emplace_back(rec.begin(), rec.end());
    return out;
}

std::vector<std::vector<std::int32_t>> read_ivecs(const std::string& path) {
    return read_xvecs<std::int32_t>(path);
}

void write_fvecs(const std::string& path, const std::vector<Vec64>& vecs) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& v : vecs) {
        auto dim = static_cast<std::int32_t>(v.size());
        os.write(reinterpret_cast<const char*>(&dim), 4);
        for (double x : v) {
            float f = static_cast<float>(x);
            os.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
}

void write_ivecs(const std::string& path, const std::vector<std::vector<std::int32_t>>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& row : rows) {
        auto dim = static_cast<std::int32_t>(row.size());
        os.write(reinterpret_cast<const char*>(&dim), 4);
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * 4));
    }
}

std::vector<std::uint32_t> brute_force_knn(const std::vector<Vec64>& base, const Vec64& q,
                                           std::uint32_t k) {
    if (k > base.size()) throw std::invalid_argument("brute_force_knn: k exceeds base size");
    std::vector<std::pair<double, std::uint32_t>> scored(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        scored[i] = {sq_dist(base[i], q), static_cast<std::uint32_t>(i)};
    }
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end());
    std::vector<std::uint32_t> out(k);
    for (std::uint32_t i = 0; i < k; ++i) out[i] = scored[i].second;
    return out;
}

std::vector<std::vector<std::uint32_t>> brute_force_knn_batch(const std::vector<Vec64>& base,
                                                              const std::vector<Vec64>& queries,
                                                              std::uint32_t k, unsigned threads) {
    std::vector<std::vector<std::uint32_t>> out(queries.size());
    parallel_for(queries.size(), threads,
                 [&](std::size_t i) { out[i] = brute_force_knn(base, queries[i], k); });
    return out;
}

double recall_at_k(const std::vector<std::uint32_t>& result_ids,
                   const std::vector<std::uint32_t>& truth_ids, std::uint32_t k) {
    if (k == 0 || truth_ids.size() != k) {
        throw std::invalid_argument("recall_at_k: truth must contain exactly k ids");
    }
    std::vector<std::uint32_t> truth_sorted(truth_ids);
    std::sort(truth_sorted.begin(), truth_sorted.end());
    std::size_t hit = 0;
    for (std::uint32_t id : result_ids) {
        if (std::binary_search(truth_sorted.begin(), truth_sorted.end(), id)) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(k);
}

double mean_recall(const std::vector<std::vector<std::uint32_t>>& results,
                   const std::vector<std::vector<std::uint32_t>>& truth, std::uint32_t k) {
    if (results.size() != truth.size() || results.empty()) {
        throw std::invalid_argument("mean_recall: result/truth size mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) acc += recall_at_k(results[i], truth[i], k);
    return acc / static_cast<double>(results.size());
}

std::vector<Vec64> synthetic_gaussian(std::uint32_t n, std::uint32_t d, std::uint64_t seed,
                                      double sigma) {
    std::vector<Vec64> out(n);
    SeededRng root(seed);
    for (std::uint32_t i = 0; i < n; ++i) {
        SeededRng sub = root.derive(i);
        out[i].resize(d);
        for (auto& x : out[i]) x = sigma * sub.gaussian();
    }
    return out;
}

double max_abs_coordinate(const std::vector<Vec64>& vecs) {
    double m = 0.0;
    for (const auto& v : vecs) {
        for (double x : v) m = std::max(m, std::abs(x));
    }
    return m;
}

}  // namespace ppann::dataset
