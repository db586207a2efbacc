#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "ppann/common.hpp"

// Scale-and-Perturb encryption: c = s*p + lambda with ||lambda|| <= s*beta/4.
// Distance comparisons over ciphertexts are preserved whenever the
// Euclidean gap exceeds beta (the beta-DCP property); the filter phase of
// the search pipeline runs entirely on these ciphertexts.

namespace ppann::dcpe {

struct SapKey {
    double s = 0;      // scaling factor
    double beta = 0;   // perturbation factor
    double max_abs = 0;  // max |coordinate| over the database, for range validation
    std::uint32_t d = 0;
    bool range_warning = false;  // beta outside [sqrt(M), 2*M*sqrt(d)]
};

struct SapCiphertext {
    Vec64 c;
};

// Non-positive s or beta is an error; beta outside the recommended range
// only warns, since in practice beta is tuned for a target filter recall.
SapKey sap_keygen(double s, double beta, double dataset_max_abs, std::uint32_t d);

SapCiphertext sap_encrypt(const Vec64& p, const SapKey& key, SeededRng& rng);

struct SapEncryptDetails {
    SapCiphertext ct;
    double radius = 0;  // ||c - s*p||, drawn as (s*beta/4) * U(0,1)^(1/d)
};
SapEncryptDetails sap_encrypt_details(const Vec64& p, const SapKey& key, SeededRng& rng);

// Euclidean (non-squared) distance between ciphertexts. Squaring is
// monotone, so comparisons agree with the squared form, and this keeps the
// metric in the same units as beta.
double approx_dist(const SapCiphertext& a, const SapCiphertext& b);

// Flat n x d ciphertext store, row i owned by vector id i.
class SapStore {
public:
    SapStore() = default;
    SapStore(std::uint32_t n, std::uint32_t d);

    std::uint32_t size() const { return n_; }
    std::uint32_t d() const { return d_; }
    const double* row(std::uint32_t id) const;
    Vec64 get(std::uint32_t id) const;
    void set(std::uint32_t id, const Vec64& c);
    void append(const Vec64& c);

    double dist(std::uint32_t a, std::uint32_t b) const;
    double dist_to(const Vec64& q, std::uint32_t a) const;

    bool operator==(const SapStore&) const = default;

private:
    std::uint32_t n_ = 0;
    std::uint32_t d_ = 0;
    std::vector<double> data_;
};

SapStore encrypt_database(const std::vector<Vec64>& base, const SapKey& key, std::uint64_t seed,
                          unsigned threads = 0);

// File formats (little-endian):
//   key   "SAPK" f64 s, f64 beta, f64 max_abs, u32 d   (owner-side only)
//   store "SAPC" u32 n, u32 d, then n*d doubles
void save_key_file(const std::string& path, const SapKey& key);
SapKey load_key_file(const std::string& path);
void save_store(std::ostream& os, const SapStore& store);
SapStore load_store(std::istream& is);
void save_store_file(const std::string& path, const SapStore& store);
SapStore load_store_file(const std::string& path);

}  // namespace ppann::dcpe
