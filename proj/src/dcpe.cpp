#include "ppann/dcpe.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace ppann::dcpe {

SapKey sap_keygen(double s, double beta, double dataset_max_abs, std::uint32_t d) {
    if (!(s > 0)) throw std::invalid_argument("sap_keygen: scaling factor must be positive");
    if (!(beta > 0)) throw std::invalid_argument("sap_keygen: perturbation factor must be positive");
    if (d < 1) throw std::invalid_argument("sap_keygen: dimension must be positive");
    SapKey key{s, beta, dataset_max_abs, d, false};
    double lo = std::sqrt(dataset_max_abs);
    double hi = 2.0 * dataset_max_abs * std::sqrt(static_cast<double>(d));
    if (beta < lo || beta > hi) {
        key.range_warning = true;
        std::cerr << "sap_keygen: beta=" << beta << " outside recommended range [" << lo << ", "
                  << hi << "]\n";
    }
    return key;
}

SapEncryptDetails sap_encrypt_details(const Vec64& p, const SapKey& key, SeededRng& rng) {
    if (p.size() != key.d) throw std::invalid_argument("sap_encrypt: dimension mismatch");
    const std::uint32_t d = key.d;

    Vec64 u(d);
    double norm_sq = 0.0;
    do {
        for (auto& x : u) x = rng.gaussian();
        norm_sq = sq_norm(u);
    } while (norm_sq == 0.0);
    double norm = std::sqrt(norm_sq);

    double x_prime = rng.uniform01();
    double radius = (key.s * key.beta / 4.0) * std::pow(x_prime, 1.0 / static_cast<double>(d));

    SapEncryptDetails out;
    out.radius = radius;
    out.ct.c.resize(d);
    for (std::uint32_t i = 0; i < d; ++i) {
        out.ct.c[i] = key.s * p[i] + radius * u[i] / norm;
    }
    return out;
}

SapCiphertext sap_encrypt(const Vec64& p, const SapKey& key, SeededRng& rng) {
    return sap_encrypt_details(p, key, rng).ct;
}

double approx_dist(const SapCiphertext& a, const SapCiphertext& b) {
    return euclid_dist(a.c, b.c);
}

SapStore::SapStore(std::uint32_t n, std::uint32_t d)
    : n_(n), d_(d), data_(static_cast<std::size_t>(n) * d, 0.0) {}

const double* SapStore::row(std::uint32_t id) const {
    if (id >= n_) throw std::out_of_range("SapStore: id out of range");
    return data_.data() + static_cast<std::size_t>(id) * d_;
}

Vec64 SapStore::get(std::uint32_t id) const {
    const double* r = row(id);
    return Vec64(r, r + d_);
}

void SapStore::set(std::uint32_t id, const Vec64& c) {
    if (c.size() != d_) throw std::invalid_argument("SapStore::set: dim mismatch");
    std::copy(c.begin(), c.end(), data_.begin() + static_cast<std::size_t>(id) * d_);
}

void SapStore::append(const Vec64& c) {
    if (c.size() != d_) throw std::invalid_argument("SapStore::append: dim mismatch");
    data_.insert(data_.end(), c.begin(), c.end());
    ++n_;
}

double SapStore::dist(std::uint32_t a, std::uint32_t b) const {
    const double* ra = row(a);
    const double* rb = row(b);
    double acc = 0.0;
    for (std::uint32_t i = 0; i < d_; ++i) {
        double diff = ra[i] - rb[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

double SapStore::dist_to(const Vec64& q, std::uint32_t a) const {
    if (q.size() != d_) throw std::invalid_argument("SapStore::dist_to: dim mismatch");
    const double* ra = row(a);
    double acc = 0.0;
    for (std::uint32_t i = 0; i < d_; ++i) {
        double diff = q[i] - ra[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

SapStore encrypt_database(const std::vector<Vec64>& base, const SapKey& key, std::uint64_t seed,
                          unsigned threads) {
    SapStore store(static_cast<std::uint32_t>(base.size()), key.d);
    SeededRng root(seed);
    parallel_for(base.size(), threads, [&](std::size_t i) {
        SeededRng sub = root.derive(i);
        store.set(static_cast<std::uint32_t>(i), sap_encrypt(base[i], key, sub).c);
    });
    return store;
}

void save_key_file(const std::string& path, const SapKey& key) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    io::write_magic(os, "SAPK");
    io::write_f64(os, key.s);
    io::write_f64(os, key.beta);
    io::write_f64(os, key.max_abs);
    io::write_u32(os, key.d);
}

SapKey load_key_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    io::expect_magic(is, "SAPK", "sap key");
    SapKey key;
    key.s = io::read_f64(is);
    key.beta = io::read_f64(is);
    key.max_abs = io::read_f64(is);
    key.d = io::read_u32(is);
    return key;
}

void save_store(std::ostream& os, const SapStore& store) {
    io::write_magic(os, "SAPC");
    io::write_u32(os, store.size());
    io::write_u32(os, store.d());
    for (std::uint32_t id = 0; id < store.size(); ++id) {
        os.write(reinterpret_cast<const char*>(store.row(id)),
                 static_cast<std::streamsize>(store.d() * sizeof(double)));
    }
}

SapStore load_store(std::istream& is) {
    io::expect_magic(is, "SAPC", "sap store");
    std::uint32_t n = io::read_u32(is);
    std::uint32_t d = io::read_u32(is);
    SapStore store(n, d);
    Vec64 row(d);
    for (std::uint32_t id = 0; id < n; ++id) {
        is.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(d * sizeof(double)));
        if (!is) throw std::runtime_error("sap store: truncated stream");
        store.set(id, row);
    }
    return store;
}

void save_store_file(const std::string& path, const SapStore& store) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    save_store(os, store);
}

SapStore load_store_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return load_store(is);
}

}  // namespace ppann::dcpe
