#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppann/common.hpp"

namespace ppann::dataset {

// fvecs: per record a 4-byte little-endian signed dim D, then D 4-byte
// IEEE-754 floats; ivecs identical with 4-byte signed ints. All records in a
// file share the same D. Floats are widened to double on load.
std::vector<Vec64> read_fvecs(const std::string& path);
std::vector<std::vector<std::int32_t>> read_ivecs(const std::string& path);
void write_fvecs(const std::string& path, const std::vector<Vec64>& vecs);
void write_ivecs(const std::string& path, const std::vector<std::vector<std::int32_t>>& rows);

struct Dataset {
    std::vector<Vec64> base;
    std::vector<Vec64> queries;
    std::vector<std::vector<std::uint32_t>> ground_truth;  // optional, computable

    std::uint32_t dim() const { return base.empty() ? 0 : static_cast<std::uint32_t>(base[0].size()); }
};

// Exact top-k by squared distance, ties by ascending id.
std::vector<std::uint32_t> brute_force_knn(const std::vector<Vec64>& base, const Vec64& q,
                                           std::uint32_t k);

std::vector<std::vector<std::uint32_t>> brute_force_knn_batch(const std::vector<Vec64>& base,
                                                              const std::vector<Vec64>& queries,
                                                              std::uint32_t k,
                                                              unsigned threads = 0);

double recall_at_k(const std::vector<std::uint32_t>& result_ids,
                   const std::vector<std::uint32_t>& truth_ids, std::uint32_t k);

double mean_recall(const std::vector<std::vector<std::uint32_t>>& results,
                   const std::vector<std::vector<std::uint32_t>>& truth, std::uint32_t k);

// Seeded Gaussian vectors, the desk-scale stand-in for the public corpora.
std::vector<Vec64> synthetic_gaussian(std::uint32_t n, std::uint32_t d, std::uint64_t seed,
                                      double sigma = 1.0);

double max_abs_coordinate(const std::vector<Vec64>& vecs);

}  // namespace ppann::dataset
