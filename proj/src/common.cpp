#include "ppann/common.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace ppann {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void check_same_dim(const Vec64& a, const Vec64& b, const char* what) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
}

}  // namespace

std::uint64_t SeededRng::next_u64() { return splitmix64(state_); }

double SeededRng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

std::uint32_t SeededRng::uniform_below(std::uint32_t n) {
    // rejection sampling keeps the draw unbiased
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<std::uint32_t>(x % n);
}

double SeededRng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

double SeededRng::signed_magnitude(double lo, double hi) {
    double mag = uniform(lo, hi);
    return (next_u64() & 1) ? mag : -mag;
}

SeededRng SeededRng::derive(std::uint64_t stream) const {
    std::uint64_t s = state_;
    std::uint64_t a = splitmix64(s);
    s ^= stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
    std::uint64_t b = splitmix64(s);
    return SeededRng(a ^ (b + stream));
}

Vec64 Perm::apply(const Vec64& in) const {
    if (in.size() != map.size()) throw std::invalid_argument("Perm::apply: dimension mismatch");
    Vec64 out(in.size());
    for (std::size_t i = 0; i < map.size(); ++i) out[i] = in[map[i]];
    return out;
}

Vec64 Perm::apply_inverse(const Vec64& in) const {
    if (in.size() != map.size()) throw std::invalid_argument("Perm::apply_inverse: dimension mismatch");
    Vec64 out(in.size());
    for (std::size_t i = 0; i < map.size(); ++i) out[map[i]] = in[i];
    return out;
}

bool Perm::is_valid() const {
    std::vector<bool> seen(map.size(), false);
    for (auto v : map) {
        if (v >= map.size() || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

double sq_dist(const Vec64& p, const Vec64& q) {
    check_same_dim(p, q, "sq_dist");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = p[i] - q[i];
        acc += d * d;
    }
    return acc;
}

double euclid_dist(const Vec64& p, const Vec64& q) { return std::sqrt(sq_dist(p, q)); }

Vec64 elementwise(EwOp op, const Vec64& a, const Vec64& b) {
    check_same_dim(a, b, "elementwise");
    Vec64 out(a.size());
    switch (op) {
        case EwOp::Add:
            for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
            break;
        case EwOp::Sub:
            for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
            break;
        case EwOp::Mul:
            for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
            break;
        case EwOp::Div:
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (std::abs(b[i]) < kDivFloor) {
                    throw std::invalid_argument("elementwise div: divisor entry below magnitude floor");
                }
                out[i] = a[i] / b[i];
            }
            break;
    }
    return out;
}

Vec64 ew_add(const Vec64& a, const Vec64& b) { return elementwise(EwOp::Add, a, b); }
Vec64 ew_sub(const Vec64& a, const Vec64& b) { return elementwise(EwOp::Sub, a, b); }
Vec64 ew_mul(const Vec64& a, const Vec64& b) { return elementwise(EwOp::Mul, a, b); }
Vec64 ew_div(const Vec64& a, const Vec64& b) { return elementwise(EwOp::Div, a, b); }

double dot(const Vec64& a, const Vec64& b) {
    check_same_dim(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double sq_norm(const Vec64& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc;
}

InvertiblePair gen_invertible_matrix(std::size_t n, SeededRng& rng) {
    if (n < 1) throw std::invalid_argument("gen_invertible_matrix: n must be >= 1");
    constexpr int kMaxAttempts = 16;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Mat64 m(n, n);
        for (auto& x : m.data) x = rng.uniform(-1.0, 1.0);

        if (n == 1) {
            if (std::abs(m.data[0]) < 0.1) continue;
            Mat64 inv(1, 1);
            inv.data[0] = 1.0 / m.data[0];
            return {std::move(m), std::move(inv)};
        }

        using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const EMat> em(m.data.data(), n, n);
        Eigen::PartialPivLU<EMat> lu(em);
        EMat einv = lu.inverse();
        if (!einv.allFinite()) continue;

        double cond1 = (em.cwiseAbs().colwise().sum().maxCoeff()) *
                       (einv.cwiseAbs().colwise().sum().maxCoeff());
        if (!(cond1 <= 1e6)) continue;

        double resid = (em * einv - EMat::Identity(n, n)).cwiseAbs().maxCoeff();
        if (!(resid <= 1e-9)) continue;

        Mat64 inv(n, n);
        Eigen::Map<EMat>(inv.data.data(), n, n) = einv;
        return {std::move(m), std::move(inv)};
    }
    throw std::runtime_error("gen_invertible_matrix: failed to generate a well-conditioned matrix");
}

Perm gen_permutation(std::size_t n, SeededRng& rng) {
    if (n < 1) throw std::invalid_argument("gen_permutation: n must be >= 1");
    Perm p;
    p.map.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.map[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uint32_t j = rng.uniform_below(static_cast<std::uint32_t>(i + 1));
        std::swap(p.map[i], p.map[j]);
    }
    return p;
}

Vec64 row_times_mat(const Vec64& x, const Mat64& m) {
    if (x.size() != m.rows) throw std::invalid_argument("row_times_mat: dimension mismatch");
    Vec64 out(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double xr = x[r];
        const double* row = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) out[c] += xr * row[c];
    }
    return out;
}

Vec64 mat_times_col(const Mat64& m, const Vec64& x) {
    if (x.size() != m.cols) throw std::invalid_argument("mat_times_col: dimension mismatch");
    Vec64 out(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
    return out;
}

bool all_finite(const Vec64& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("PPANN_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    unsigned count = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

namespace io {

namespace {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("binary read: truncated stream");
    return v;
}

}  // namespace

void write_u8(std::ostream& os, std::uint8_t v) { write_raw(os, v); }
void write_u32(std::ostream& os, std::uint32_t v) { write_raw(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { write_raw(os, v); }
void write_f64(std::ostream& os, double v) { write_raw(os, v); }

void write_vec64(std::ostream& os, const Vec64& v) {
    write_u32(os, static_cast<std::uint32_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void write_mat64(std::ostream& os, const Mat64& m) {
    write_u32(os, static_cast<std::uint32_t>(m.rows));
    write_u32(os, static_cast<std::uint32_t>(m.cols));
    os.write(reinterpret_cast<const char*>(m.data.data()),
             static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

void write_perm(std::ostream& os, const Perm& p) {
    write_u32(os, static_cast<std::uint32_t>(p.map.size()));
    os.write(reinterpret_cast<const char*>(p.map.data()),
             static_cast<std::streamsize>(p.map.size() * sizeof(std::uint32_t)));
}

void write_magic(std::ostream& os, const char magic[4]) { os.write(magic, 4); }

std::uint8_t read_u8(std::istream& is) { return read_raw<std::uint8_t>(is); }
std::uint32_t read_u32(std::istream& is) { return read_raw<std::uint32_t>(is); }
std::uint64_t read_u64(std::istream& is) { return read_raw<std::uint64_t>(is); }
double read_f64(std::istream& is) { return read_raw<double>(is); }

Vec64 read_vec64(std::istream& is) {
    std::uint32_t dim = read_u32(is);
    Vec64 v(dim);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    if (!is) throw std::runtime_error("read_vec64: truncated stream");
    return v;
}

Mat64 read_mat64(std::istream& is) {
    std::uint32_t rows = read_u32(is);
    std::uint32_t cols = read_u32(is);
    Mat64 m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("read_mat64: truncated stream");
    return m;
}

Perm read_perm(std::istream& is) {
    std::uint32_t n = read_u32(is);
    Perm p;
    p.map.resize(n);
    is.read(reinterpret_cast<char*>(p.map.data()),
            static_cast<std::streamsize>(n * sizeof(std::uint32_t)));
    if (!is) throw std::runtime_error("read_perm: truncated stream");
    return p;
}

void expect_magic(std::istream& is, const char magic[4], const std::string& what) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0) {
        throw std::runtime_error(what + ": bad magic bytes");
    }
}

}  // namespace io

}  // namespace ppann
