#include "ppann/dce.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ppann::dce {

namespace {

constexpr std::uint8_t kKeyVersion = 1;

void check_dim(const Vec64& v, std::uint32_t d, const char* what) {
    if (v.size() != d) {
        throw std::invalid_argument(std::string(what) + ": expected dim " + std::to_string(d) +
                                    ", got " + std::to_string(v.size()));
    }
}

// Interleaved pairwise sums/differences; negated on the query side so that
// check(p) . check(q) == -2 p.q.
Vec64 pair_sum_diff(const Vec64& v, bool negate) {
    Vec64 out(v.size());
    double s = negate ? -1.0 : 1.0;
    for (std::size_t i = 0; i + 1 < v.size(); i += 2) {
        out[i] = s * (v[i] + v[i + 1]);
        out[i + 1] = s * (v[i] - v[i + 1]);
    }
    return out;
}

}  // namespace

DceSecretKey keygen(std::uint32_t d, std::uint64_t seed) {
    if (d < 2) throw std::invalid_argument("dce::keygen: d must be >= 2");
    if (d % 2 != 0) {
        throw std::invalid_argument(
            "dce::keygen: d must be even; zero-pad vectors to d+1 before key generation");
    }
    SeededRng rng(seed);
    DceSecretKey sk;
    sk.d = d;

    const std::uint32_t half = sk.half_dim();
    const std::uint32_t wide = sk.cipher_dim();

    auto p1 = gen_invertible_matrix(half, rng);
    sk.m1 = std::move(p1.m);
    sk.m1_inv = std::move(p1.inv);
    auto p2 = gen_invertible_matrix(half, rng);
    sk.m2 = std::move(p2.m);
    sk.m2_inv = std::move(p2.inv);

    auto p3 = gen_invertible_matrix(wide, rng);
    sk.m3_inv = std::move(p3.inv);
    sk.m3_up = Mat64(sk.randomized_dim(), wide);
    sk.m3_down = Mat64(sk.randomized_dim(), wide);
    const std::size_t half_payload = static_cast<std::size_t>(sk.randomized_dim()) * wide;
    std::copy(p3.m.data.begin(), p3.m.data.begin() + half_payload, sk.m3_up.data.begin());
    std::copy(p3.m.data.begin() + half_payload, p3.m.data.end(), sk.m3_down.data.begin());

    sk.pi1 = gen_permutation(d, rng);
    sk.pi2 = gen_permutation(sk.randomized_dim(), rng);

    sk.r1 = rng.uniform(-1.0, 1.0);
    sk.r2 = rng.uniform(-1.0, 1.0);
    sk.r3 = rng.uniform(-1.0, 1.0);
    sk.r4 = rng.signed_magnitude(0.5, 2.0);

    // kv entries keep magnitude in [0.5, 2]; kv2 is drawn so that the
    // quotient kv4 = (kv1 o kv3) / kv2 stays in range as well.
    sk.kv1.resize(wide);
    sk.kv2.resize(wide);
    sk.kv3.resize(wide);
    sk.kv4.resize(wide);
    for (std::uint32_t i = 0; i < wide; ++i) {
        sk.kv1[i] = rng.signed_magnitude(0.5, 2.0);
        sk.kv3[i] = rng.signed_magnitude(0.5, 2.0);
        double prod = sk.kv1[i] * sk.kv3[i];
        double lo = std::max(0.5, std::abs(prod) / 2.0);
        double hi = std::min(2.0, std::abs(prod) * 2.0);
        sk.kv2[i] = rng.signed_magnitude(lo, hi);
        sk.kv4[i] = prod / sk.kv2[i];
    }
    return sk;
}

RandomizedVector randomize(const Vec64& v, const DceSecretKey& sk, Role role, SeededRng& rng) {
    check_dim(v, sk.d, "dce::randomize");
    const std::uint32_t half_data = sk.d / 2;

    Vec64 hatted = sk.pi1.apply(pair_sum_diff(v, role == Role::Query));

    Vec64 part1(sk.half_dim());
    Vec64 part2(sk.half_dim());
    std::copy(hatted.begin(), hatted.begin() + half_data, part1.begin());
    std::copy(hatted.begin() + half_data, hatted.end(), part2.begin());

    if (role == Role::Database) {
        double alpha1 = rng.uniform(-1.0, 1.0);
        double alpha2 = rng.uniform(-1.0, 1.0);
        double rp1 = rng.uniform(-1.0, 1.0);
        double rp2 = rng.uniform(-1.0, 1.0);
        double rp3 = rng.uniform(-1.0, 1.0);
        double gamma = (sq_norm(v) - rp1 * sk.r1 - rp2 * sk.r2 - rp3 * sk.r3) / sk.r4;
        part1[half_data] = alpha1;
        part1[half_data + 1] = -alpha1;
        part1[half_data + 2] = rp1;
        part1[half_data + 3] = rp2;
        part2[half_data] = alpha2;
        part2[half_data + 1] = alpha2;
        part2[half_data + 2] = rp3;
        part2[half_data + 3] = gamma;

        Vec64 mixed1 = row_times_mat(part1, sk.m1);
        Vec64 mixed2 = row_times_mat(part2, sk.m2);
        mixed1.insert(mixed1.end(), mixed2.begin(), mixed2.end());
        return {sk.pi2.apply(mixed1)};
    }

    double beta1 = rng.uniform(-1.0, 1.0);
    double beta2 = rng.uniform(-1.0, 1.0);
    part1[half_data] = beta1;
    part1[half_data + 1] = beta1;
    part1[half_data + 2] = sk.r1;
    part1[half_data + 3] = sk.r2;
    part2[half_data] = beta2;
    part2[half_data + 1] = -beta2;
    part2[half_data + 2] = sk.r3;
    part2[half_data + 3] = sk.r4;

    Vec64 mixed1 = mat_times_col(sk.m1_inv, part1);
    Vec64 mixed2 = mat_times_col(sk.m2_inv, part2);
    mixed1.insert(mixed1.end(), mixed2.begin(), mixed2.end());
    return {sk.pi2.apply(mixed1)};
}

EncryptDetails encrypt_db_details(const Vec64& p, const DceSecretKey& sk, SeededRng& rng) {
    EncryptDetails out;
    out.randomized = randomize(p, sk, Role::Database, rng);
    out.r_p = rng.uniform(0.5, 2.0);

    Vec64 up = row_times_mat(out.randomized.v, sk.m3_up);
    Vec64 down = row_times_mat(out.randomized.v, sk.m3_down);

    const std::uint32_t wide = sk.cipher_dim();
    out.ct.c1.resize(wide);
    out.ct.c2.resize(wide);
    out.ct.c3.resize(wide);
    out.ct.c4.resize(wide);
    for (std::uint32_t i = 0; i < wide; ++i) {
        out.ct.c1[i] = out.r_p * (up[i] + 1.0) / sk.kv1[i];
        out.ct.c2[i] = out.r_p * (up[i] - 1.0) / sk.kv2[i];
        out.ct.c3[i] = out.r_p * (down[i] + 1.0) / sk.kv3[i];
        out.ct.c4[i] = out.r_p * (down[i] - 1.0) / sk.kv4[i];
    }
    return out;
}

DceCiphertext encrypt_db(const Vec64& p, const DceSecretKey& sk, SeededRng& rng) {
    return encrypt_db_details(p, sk, rng).ct;
}

TrapdoorDetails trapgen_details(const Vec64& q, const DceSecretKey& sk, SeededRng& rng) {
    TrapdoorDetails out;
    out.randomized = randomize(q, sk, Role::Query, rng);
    out.r_q = rng.uniform(0.5, 2.0);

    Vec64 stacked(sk.cipher_dim());
    const std::uint32_t rdim = sk.randomized_dim();
    for (std::uint32_t i = 0; i < rdim; ++i) {
        stacked[i] = out.randomized.v[i];
        stacked[rdim + i] = -out.randomized.v[i];
    }
    Vec64 mixed = mat_times_col(sk.m3_inv, stacked);
    out.td.t.resize(sk.cipher_dim());
    for (std::uint32_t i = 0; i < sk.cipher_dim(); ++i) {
        out.td.t[i] = out.r_q * mixed[i] * sk.kv2[i] * sk.kv4[i];
    }
    return out;
}

DceTrapdoor trapgen(const Vec64& q, const DceSecretKey& sk, SeededRng& rng) {
    return trapgen_details(q, sk, rng).td;
}

namespace {

// Two multiply-accumulate streams per lane; their difference is Z.
double distance_comp_raw(const double* c1, const double* c2, const double* c3, const double* c4,
                         const double* t, std::size_t n) {
    double acc_pos = 0.0;
    double acc_neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc_pos += c1[i] * c3[i] * t[i];
        acc_neg += c2[i] * c4[i] * t[i];
    }
    return acc_pos - acc_neg;
}

}  // namespace

double distance_comp(const DceCiphertext& co, const DceCiphertext& cp, const DceTrapdoor& tq) {
    const std::size_t n = tq.t.size();
    if (co.c1.size() != n || co.c2.size() != n || cp.c3.size() != n || cp.c4.size() != n) {
        throw std::invalid_argument("dce::distance_comp: dimension mismatch");
    }
    return distance_comp_raw(co.c1.data(), co.c2.data(), cp.c3.data(), cp.c4.data(), tq.t.data(), n);
}

double distance_comp(const DceStore& store, std::uint32_t o, std::uint32_t p, const DceTrapdoor& tq) {
    if (tq.t.size() != store.cipher_dim()) {
        throw std::invalid_argument("dce::distance_comp: trapdoor dimension mismatch");
    }
    return distance_comp_raw(store.c1(o), store.c2(o), store.c3(p), store.c4(p), tq.t.data(),
                             store.cipher_dim());
}

Comparison is_closer(const DceCiphertext& co, const DceCiphertext& cp, const DceTrapdoor& tq,
                     double eps) {
    if (eps < 0) throw std::invalid_argument("dce::is_closer: eps must be >= 0");
    return distance_comp(co, cp, tq) < -eps ? Comparison::Closer : Comparison::NotCloser;
}

DceStore::DceStore(std::uint32_t n, std::uint32_t d)
    : n_(n), d_(d), data_(static_cast<std::size_t>(n) * 4 * (2 * d + 16), 0.0) {}

void DceStore::set(std::uint32_t id, const DceCiphertext& ct) {
    const std::size_t w = cipher_dim();
    double* dst = data_.data() + static_cast<std::size_t>(id) * 4 * w;
    std::copy(ct.c1.begin(), ct.c1.end(), dst);
    std::copy(ct.c2.begin(), ct.c2.end(), dst + w);
    std::copy(ct.c3.begin(), ct.c3.end(), dst + 2 * w);
    std::copy(ct.c4.begin(), ct.c4.end(), dst + 3 * w);
}

DceCiphertext DceStore::get(std::uint32_t id) const {
    const std::size_t w = cipher_dim();
    const double* src = record(id);
    DceCiphertext ct;
    ct.c1.assign(src, src + w);
    ct.c2.assign(src + w, src + 2 * w);
    ct.c3.assign(src + 2 * w, src + 3 * w);
    ct.c4.assign(src + 3 * w, src + 4 * w);
    return ct;
}

const double* DceStore::record(std::uint32_t id) const {
    if (id >= n_) throw std::out_of_range("DceStore: id out of range");
    return data_.data() + static_cast<std::size_t>(id) * 4 * cipher_dim();
}

void DceStore::append(const DceCiphertext& ct) {
    if (ct.c1.size() != cipher_dim()) throw std::invalid_argument("DceStore::append: dim mismatch");
    data_.resize(data_.size() + 4 * static_cast<std::size_t>(cipher_dim()));
    ++n_;
    set(n_ - 1, ct);
}

DceStore encrypt_database(const std::vector<Vec64>& base, const DceSecretKey& sk,
                          std::uint64_t seed, unsigned threads) {
    DceStore store(static_cast<std::uint32_t>(base.size()), sk.d);
    SeededRng root(seed);
    parallel_for(base.size(), threads, [&](std::size_t i) {
        SeededRng sub = root.derive(i);
        store.set(static_cast<std::uint32_t>(i), encrypt_db(base[i], sk, sub));
    });
    return store;
}

void save_key(std::ostream& os, const DceSecretKey& sk) {
    io::write_magic(os, "DCEK");
    io::write_u8(os, kKeyVersion);
    io::write_u32(os, sk.d);
    io::write_mat64(os, sk.m1);
    io::write_mat64(os, sk.m1_inv);
    io::write_mat64(os, sk.m2);
    io::write_mat64(os, sk.m2_inv);
    io::write_mat64(os, sk.m3_up);
    io::write_mat64(os, sk.m3_down);
    io::write_mat64(os, sk.m3_inv);
    io::write_perm(os, sk.pi1);
    io::write_perm(os, sk.pi2);
    io::write_f64(os, sk.r1);
    io::write_f64(os, sk.r2);
    io::write_f64(os, sk.r3);
    io::write_f64(os, sk.r4);
    io::write_vec64(os, sk.kv1);
    io::write_vec64(os, sk.kv2);
    io::write_vec64(os, sk.kv3);
    io::write_vec64(os, sk.kv4);
}

DceSecretKey load_key(std::istream& is) {
    io::expect_magic(is, "DCEK", "dce key");
    std::uint8_t version = io::read_u8(is);
    if (version != kKeyVersion) throw std::runtime_error("dce key: unsupported version");
    DceSecretKey sk;
    sk.d = io::read_u32(is);
    sk.m1 = io::read_mat64(is);
    sk.m1_inv = io::read_mat64(is);
    sk.m2 = io::read_mat64(is);
    sk.m2_inv = io::read_mat64(is);
    sk.m3_up = io::read_mat64(is);
    sk.m3_down = io::read_mat64(is);
    sk.m3_inv = io::read_mat64(is);
    sk.pi1 = io::read_perm(is);
    sk.pi2 = io::read_perm(is);
    sk.r1 = io::read_f64(is);
    sk.r2 = io::read_f64(is);
    sk.r3 = io::read_f64(is);
    sk.r4 = io::read_f64(is);
    sk.kv1 = io::read_vec64(is);
    sk.kv2 = io::read_vec64(is);
    sk.kv3 = io::read_vec64(is);
    sk.kv4 = io::read_vec64(is);
    return sk;
}

void save_store(std::ostream& os, const DceStore& store) {
    io::write_magic(os, "DCEC");
    io::write_u32(os, store.size());
    io::write_u32(os, store.d());
    const std::size_t w = 4ull * store.cipher_dim();
    for (std::uint32_t id = 0; id < store.size(); ++id) {
        os.write(reinterpret_cast<const char*>(store.record(id)),
                 static_cast<std::streamsize>(w * sizeof(double)));
    }
}

DceStore load_store(std::istream& is) {
    io::expect_magic(is, "DCEC", "dce store");
    std::uint32_t n = io::read_u32(is);
    std::uint32_t d = io::read_u32(is);
    DceStore store(n, d);
    const std::size_t w = 4ull * store.cipher_dim();
    std::vector<double> rec(w);
    for (std::uint32_t id = 0; id < n; ++id) {
        is.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(w * sizeof(double)));
        if (!is) throw std::runtime_error("dce store: truncated stream");
        DceCiphertext ct;
        const std::size_t cw = store.cipher_dim();
        ct.c1.assign(rec.begin(), rec.begin() + cw);
        ct.c2.assign(rec.begin() + cw, rec.begin() + 2 * cw);
        ct.c3.assign(rec.begin() + 2 * cw, rec.begin() + 3 * cw);
        ct.c4.assign(rec.begin() + 3 * cw, rec.begin() + 4 * cw);
        store.set(id, ct);
    }
    return store;
}

namespace {

template <typename Fn>
void with_ofstream(const std::string& path, Fn&& fn) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    fn(os);
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path);
}

template <typename Fn>
auto with_ifstream(const std::string& path, Fn&& fn) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return fn(is);
}

}  // namespace

void save_key_file(const std::string& path, const DceSecretKey& sk) {
    with_ofstream(path, [&](std::ostream& os) { save_key(os, sk); });
}

DceSecretKey load_key_file(const std::string& path) {
    return with_ifstream(path, [](std::istream& is) { return load_key(is); });
}

void save_store_file(const std::string& path, const DceStore& store) {
    with_ofstream(path, [&](std::ostream& os) { save_store(os, store); });
}

DceStore load_store_file(const std::string& path) {
    return with_ifstream(path, [](std::istream& is) { return load_store(is); });
}

}  // namespace ppann::dce
