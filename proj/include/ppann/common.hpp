#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

// Core numeric kernel: dense vectors/matrices over doubles, seeded
// randomness, permutations, invertible-matrix generation and the
// element-wise operations the encryption layers are built from.

namespace ppann {

using Vec64 = std::vector<double>;

// Row-major dense matrix of doubles.
struct Mat64 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat64() = default;
    Mat64(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    bool operator==(const Mat64&) const = default;
};

// Bijection on {0..n-1}. apply() writes out[i] = in[map[i]]; applying the
// same permutation to both sides of an inner product preserves it.
struct Perm {
    std::vector<std::uint32_t> map;

    std::size_t size() const { return map.size(); }
    Vec64 apply(const Vec64& in) const;
    Vec64 apply_inverse(const Vec64& in) const;
    bool is_valid() const;

    bool operator==(const Perm&) const = default;
};

// Deterministic counter-based generator (splitmix64). Identical seed gives
// an identical draw sequence regardless of platform; sub-streams for
// parallel work are derived with derive(), never by sharing an instance.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    double uniform01();                        // [0, 1)
    double uniform(double lo, double hi);
    std::uint32_t uniform_below(std::uint32_t n);  // [0, n)
    double gaussian();
    // magnitude uniform in [lo, hi], random sign
    double signed_magnitude(double lo, double hi);

    SeededRng derive(std::uint64_t stream) const;

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// dist(p, q) = sum_i (p_i - q_i)^2
double sq_dist(const Vec64& p, const Vec64& q);
double euclid_dist(const Vec64& p, const Vec64& q);

enum class EwOp { Add, Sub, Mul, Div };

// Entry floor for element-wise division; key vectors are generated away
// from zero so legitimate inputs never trip it.
inline constexpr double kDivFloor = 1e-6;

Vec64 elementwise(EwOp op, const Vec64& a, const Vec64& b);
Vec64 ew_add(const Vec64& a, const Vec64& b);
Vec64 ew_sub(const Vec64& a, const Vec64& b);
Vec64 ew_mul(const Vec64& a, const Vec64& b);
Vec64 ew_div(const Vec64& a, const Vec64& b);

double dot(const Vec64& a, const Vec64& b);
double sq_norm(const Vec64& v);

struct InvertiblePair {
    Mat64 m;
    Mat64 inv;
};

// Entries uniform in [-1, 1]; regenerated until the 1-norm condition number
// is <= 1e6 and ||M * Minv - I||_max <= 1e-9. Throws after bounded retries.
InvertiblePair gen_invertible_matrix(std::size_t n, SeededRng& rng);

// Fisher-Yates over the seeded stream.
Perm gen_permutation(std::size_t n, SeededRng& rng);

// row vector x (dim = m.rows) times m -> dim m.cols
Vec64 row_times_mat(const Vec64& x, const Mat64& m);
// m times column vector x (dim = m.cols) -> dim m.rows
Vec64 mat_times_col(const Mat64& m, const Vec64& x);

bool all_finite(const Vec64& v);

// Bounded worker pool; thread resolution order: explicit > PPANN_THREADS > hardware.
unsigned resolve_threads(unsigned requested);
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

namespace io {

// Little-endian primitives. Vectors serialize as u32 dim + raw f64 payload,
// matrices as u32 rows + u32 cols + payload, permutations as u32 n + u32 ids.
void write_u8(std::ostream& os, std::uint8_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
void write_vec64(std::ostream& os, const Vec64& v);
void write_mat64(std::ostream& os, const Mat64& m);
void write_perm(std::ostream& os, const Perm& p);
void write_magic(std::ostream& os, const char magic[4]);

std::uint8_t read_u8(std::istream& is);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);
Vec64 read_vec64(std::istream& is);
Mat64 read_mat64(std::istream& is);
Perm read_perm(std::istream& is);
void expect_magic(std::istream& is, const char magic[4], const std::string& what);

}  // namespace io

}  // namespace ppann
