#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppann/common.hpp"

// Reference ASPE scheme plus the known-plaintext attacks against its
// distance-transformation variants. Each attack assembles a linear system
// from leaked plaintexts (or recovered queries) and solves for the hidden
// vector, demonstrating that leaking any of the four transformations of
// distances allows full plaintext recovery.

namespace ppann::attacks {

enum class LeakVariant { Linear, Exponential, Logarithmic, Square };

LeakVariant variant_from_string(const std::string& name);
std::string to_string(LeakVariant v);

// Transformation scalars, fixed per experiment. Linear/Exponential/
// Logarithmic use (a, b); Square uses (r1, r2, r3).
struct LeakScalars {
    double a = 1.0;
    double b = 0.0;
    double r1 = 1.0;
    double r2 = 0.0;
    double r3 = 0.0;
};

struct AspeKey {
    Mat64 m;      // (d+2) x (d+2), invertible
    Mat64 m_inv;
    std::uint32_t d = 0;
};

AspeKey aspe_keygen(std::uint32_t d, std::uint64_t seed);

// enc(p)^T . trap(q) == ||p||^2 - 2 p.q  (squared distance minus ||q||^2,
// which is all a comparison needs).
Vec64 aspe_encrypt(const Vec64& p, const AspeKey& key);
Vec64 aspe_trapgen(const Vec64& q, const AspeKey& key);

// The information about dist(p, q) revealed by the enhanced schemes.
//   Linear:      a * dist + b           (dist = squared Euclidean)
//   Exponential: exp(a * dist + b)
//   Logarithmic: ln(a * dist + b),      requires a * dist + b > 0
//   Square:      r1 * (dist' + r2)^2 + r3  with dist' = ||p||^2 - 2 p.q
double leak(LeakVariant variant, const Vec64& p, const Vec64& q, const LeakScalars& scalars);

// Rows for the linear-family systems: [-2 p^T, ||p||^2, 1].
Vec64 augment_plaintext(const Vec64& p);

// Collapsed monomial basis for the squared-leak attack, dimension
// (d^2+5d+6)/2: [||p||^4; ||p||^2 p; ||p||^2; 4 p_i^2; 8 p_i p_j (i<j);
// -4 p_i; 1]. The query-side expansion mirrors it so the inner product
// reproduces the squared-leak polynomial exactly.
Vec64 expand_square_basis(const Vec64& p);
Vec64 expand_square_query(const Vec64& q, const LeakScalars& scalars);

constexpr std::size_t square_basis_dim(std::size_t d) { return (d * d + 5 * d + 6) / 2; }

// Leaked plaintexts required to recover a query.
std::size_t required_leaks(LeakVariant variant, std::size_t d);

struct RecoveredQuery {
    Vec64 q;
    Vec64 solution;     // full solved unknown vector
    double condition;   // 1-norm condition estimate of the coefficient matrix
};

// Solves the (pre-transformed) leak system M_c x = b built from leaked
// plaintexts and extracts q from the solved unknowns.
RecoveredQuery recover_query(LeakVariant variant, const std::vector<Vec64>& leaked_db,
                             const std::vector<double>& leaks);

struct RecoveredDatabaseVector {
    Vec64 p;
    double condition;
};

// Mirror-image solve: rows come from recovered queries, the unknown is the
// database vector's expansion. The Square variant additionally needs the
// recovered transformation scalars (recover_square_scalars).
RecoveredDatabaseVector recover_database_vector(LeakVariant variant,
                                                const std::vector<RecoveredQuery>& queries,
                                                const std::vector<double>& leaks);

// For the Square variant the solved query vector also pins r1, r2; r3 then
// follows from any single leak. Needed to rebuild the q-side rows above.
struct SquareScalars {
    double r1 = 0;
    double r2 = 0;
    double r3 = 0;
};
SquareScalars recover_square_scalars(const RecoveredQuery& rq, const Vec64& leaked_plaintext,
                                     double leak_value);

RecoveredDatabaseVector recover_database_vector(const std::vector<RecoveredQuery>& queries,
                                                const std::vector<double>& leaks,
                                                const SquareScalars& scalars);

// One seeded end-to-end attack run: build an instance, recover every query,
// then recover a held-out database vector. Used by the demo CLI and tests.
struct AttackReport {
    LeakVariant variant;
    std::uint32_t d = 0;
    std::uint64_t seed = 0;
    double max_query_error = 0;     // max relative error over recovered queries
    double db_vector_error = 0;     // relative error of the held-out recovery
    double elapsed_seconds = 0;
    std::size_t leaked_count = 0;
};

AttackReport run_attack_demo(LeakVariant variant, std::uint32_t d, std::uint64_t seed);

}  // namespace ppann::attacks
