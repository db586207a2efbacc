#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "ppann/common.hpp"

// Distance Comparison Encryption: four-vector ciphertexts per database
// point and one-vector trapdoors per query whose combination yields
// Z = 2 * r_o * r_p * r_q * (dist(o,q) - dist(p,q)), so the sign of Z
// answers "is o closer to q than p" exactly, without revealing distances.

namespace ppann::dce {

struct DceSecretKey {
    std::uint32_t d = 0;  // even; callers pad odd dimensions first
    Mat64 m1, m1_inv;     // (d/2+4) x (d/2+4)
    Mat64 m2, m2_inv;
    Mat64 m3_up;          // first d+8 rows of M3, (d+8) x (2d+16)
    Mat64 m3_down;        // last d+8 rows
    Mat64 m3_inv;         // (2d+16) x (2d+16)
    Perm pi1;             // over d
    Perm pi2;             // over d+8
    double r1 = 0, r2 = 0, r3 = 0, r4 = 0;
    Vec64 kv1, kv2, kv3, kv4;  // dim 2d+16, kv1 o kv3 == kv2 o kv4

    std::uint32_t half_dim() const { return d / 2 + 4; }
    std::uint32_t randomized_dim() const { return d + 8; }
    std::uint32_t cipher_dim() const { return 2 * d + 16; }

    bool operator==(const DceSecretKey&) const = default;
};

struct DceCiphertext {
    Vec64 c1, c2, c3, c4;  // each dim 2d+16
};

struct DceTrapdoor {
    Vec64 t;  // dim 2d+16
};

enum class Role { Database, Query };

// Output of the randomization phase, dim d+8. Exposed so white-box tests
// can check the inner-product cancellation directly.
struct RandomizedVector {
    Vec64 v;
};

DceSecretKey keygen(std::uint32_t d, std::uint64_t seed);

RandomizedVector randomize(const Vec64& v, const DceSecretKey& sk, Role role, SeededRng& rng);

DceCiphertext encrypt_db(const Vec64& p, const DceSecretKey& sk, SeededRng& rng);
DceTrapdoor trapgen(const Vec64& q, const DceSecretKey& sk, SeededRng& rng);

// Introspection variants used by validation tests.
struct EncryptDetails {
    DceCiphertext ct;
    RandomizedVector randomized;
    double r_p = 0;
};
struct TrapdoorDetails {
    DceTrapdoor td;
    RandomizedVector randomized;
    double r_q = 0;
};
EncryptDetails encrypt_db_details(const Vec64& p, const DceSecretKey& sk, SeededRng& rng);
TrapdoorDetails trapgen_details(const Vec64& q, const DceSecretKey& sk, SeededRng& rng);

// Z = (co.c1 o cp.c3 - co.c2 o cp.c4)^T t; Z < 0 iff dist(o,q) < dist(p,q).
double distance_comp(const DceCiphertext& co, const DceCiphertext& cp, const DceTrapdoor& tq);

// Multiply-accumulate lanes per comparison: two product streams over 2d+16 entries.
constexpr std::uint64_t distance_comp_mac_count(std::uint32_t d) {
    return 2ull * (2ull * d + 16ull);
}

enum class Comparison { Closer, NotCloser };

// Closer iff Z < -eps; ties and near-zero Z report NotCloser.
Comparison is_closer(const DceCiphertext& co, const DceCiphertext& cp, const DceTrapdoor& tq,
                     double eps = 0.0);

// Contiguous store of n ciphertexts, record i owned by vector id i.
class DceStore {
public:
    DceStore() = default;
    DceStore(std::uint32_t n, std::uint32_t d);

    std::uint32_t size() const { return n_; }
    std::uint32_t d() const { return d_; }
    std::uint32_t cipher_dim() const { return 2 * d_ + 16; }

    void set(std::uint32_t id, const DceCiphertext& ct);
    DceCiphertext get(std::uint32_t id) const;
    const double* record(std::uint32_t id) const;
    void append(const DceCiphertext& ct);

    // raw views into the four blocks of record id
    const double* c1(std::uint32_t id) const { return record(id); }
    const double* c2(std::uint32_t id) const { return record(id) + cipher_dim(); }
    const double* c3(std::uint32_t id) const { return record(id) + 2 * cipher_dim(); }
    const double* c4(std::uint32_t id) const { return record(id) + 3 * cipher_dim(); }

    bool operator==(const DceStore&) const = default;

private:
    std::uint32_t n_ = 0;
    std::uint32_t d_ = 0;
    std::vector<double> data_;
};

double distance_comp(const DceStore& store, std::uint32_t o, std::uint32_t p, const DceTrapdoor& tq);

// Encrypts a flat n x d plaintext block in parallel; vector i uses the
// sub-stream derived from (seed, i), so results do not depend on thread count.
DceStore encrypt_database(const std::vector<Vec64>& base, const DceSecretKey& sk,
                          std::uint64_t seed, unsigned threads = 0);

// File formats (little-endian):
//   key   "DCEK" u8 version, u32 d, then fields in declaration order
//   store "DCEC" u32 n, u32 d, then n records of 4*(2d+16) doubles
void save_key(std::ostream& os, const DceSecretKey& sk);
DceSecretKey load_key(std::istream& is);
void save_key_file(const std::string& path, const DceSecretKey& sk);
DceSecretKey load_key_file(const std::string& path);

void save_store(std::ostream& os, const DceStore& store);
DceStore load_store(std::istream& is);
void save_store_file(const std::string& path, const DceStore& store);
DceStore load_store_file(const std::string& path);

}  // namespace ppann::dce
