#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ppann/dcpe.hpp"

using namespace ppann;
using namespace ppann::dcpe;

namespace {

Vec64 random_vec(SeededRng& rng, std::size_t d, double scale = 1.0) {
    Vec64 v(d);
    for (auto& x : v) x = scale * rng.uniform(-1.0, 1.0);
    return v;
}

}  // namespace

TEST_CASE("sap_keygen validation") {
    // paper-style setting: s=1024 with SIFT-like coordinates
    SapKey key = sap_keygen(1024, 450, 218, 128);
    CHECK(key.s == 1024);
    CHECK_FALSE(key.range_warning);

    CHECK_THROWS_AS(sap_keygen(1024, 0.0, 218, 128), std::invalid_argument);
    CHECK_THROWS_AS(sap_keygen(0.0, 450, 218, 128), std::invalid_argument);
    CHECK_THROWS_AS(sap_keygen(-1, 450, 218, 128), std::invalid_argument);

    SapKey warned = sap_keygen(1024, 1e7, 218, 128);
    CHECK(warned.range_warning);
}

TEST_CASE("noise radius bound and unit-vector scaling") {
    const std::uint32_t d = 8;
    SapKey key = sap_keygen(16, 2.0, 1.0, d);
    SeededRng rng(41);
    const double bound = key.s * key.beta / 4.0;
    for (int it = 0; it < 10000; ++it) {
        Vec64 p = random_vec(rng, d);
        auto det = sap_encrypt_details(p, key, rng);
        Vec64 noise(d);
        for (std::size_t i = 0; i < d; ++i) noise[i] = det.ct.c[i] - key.s * p[i];
        double norm = std::sqrt(sq_norm(noise));
        CHECK(norm <= bound * (1 + 1e-12));
        CHECK(norm == doctest::Approx(det.radius).epsilon(1e-12));
    }
}

TEST_CASE("noise radius distribution has CDF t^d") {
    const std::uint32_t d = 8;
    SapKey key = sap_keygen(4, 1.0, 1.0, d);
    SeededRng rng(43);
    const double bound = key.s * key.beta / 4.0;
    const int n = 100000;
    std::vector<double> scaled(n);
    Vec64 origin(d, 0.0);
    for (int i = 0; i < n; ++i) {
        scaled[i] = sap_encrypt_details(origin, key, rng).radius / bound;
    }
    std::sort(scaled.begin(), scaled.end());
    double ks = 0;
    for (int i = 0; i < n; ++i) {
        double expected_cdf = std::pow(scaled[i], static_cast<double>(d));
        double lo = static_cast<double>(i) / n;
        double hi = static_cast<double>(i + 1) / n;
        ks = std::max({ks, std::abs(expected_cdf - lo), std::abs(expected_cdf - hi)});
    }
    CHECK(ks < 0.02);
}

TEST_CASE("approx_dist basics and scaled-distance band") {
    SapKey key = sap_keygen(8, 1.0, 2.0, 4);
    SeededRng rng(45);
    Vec64 p = random_vec(rng, 4, 2.0);
    SapCiphertext cp = sap_encrypt(p, key, rng);
    CHECK(approx_dist(cp, cp) == 0.0);
    CHECK_THROWS_AS(approx_dist(cp, SapCiphertext{{1.0, 2.0}}), std::invalid_argument);

    // |approx/s - true Euclidean| <= beta/2 (two noise balls of radius beta/4)
    for (int it = 0; it < 500; ++it) {
        Vec64 a = random_vec(rng, 4, 3.0);
        Vec64 b = random_vec(rng, 4, 3.0);
        double approx = approx_dist(sap_encrypt(a, key, rng), sap_encrypt(b, key, rng)) / key.s;
        double exact = euclid_dist(a, b);
        CHECK(std::abs(approx - exact) <= key.beta / 2.0 + 1e-12);
    }
}

TEST_CASE("distance comparisons survive any gap above beta") {
    const std::uint32_t d = 8;
    const double beta = 1.5;
    SapKey key = sap_keygen(32, beta, 10.0, d);
    SeededRng rng(47);
    int sampled = 0;
    int violations = 0;
    while (sampled < 10000) {
        Vec64 o = random_vec(rng, d, 10.0);
        Vec64 p = random_vec(rng, d, 10.0);
        Vec64 q = random_vec(rng, d, 10.0);
        if (euclid_dist(o, q) >= euclid_dist(p, q) - beta) continue;
        ++sampled;
        SapCiphertext co = sap_encrypt(o, key, rng);
        SapCiphertext cp = sap_encrypt(p, key, rng);
        SapCiphertext cq = sap_encrypt(q, key, rng);
        if (!(approx_dist(co, cq) < approx_dist(cp, cq))) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("nearest neighbor over ciphertexts is beta-optimal") {
    const std::uint32_t d = 6;
    const double beta = 0.8;
    SapKey key = sap_keygen(4, beta, 5.0, d);
    SeededRng rng(49);

    std::vector<Vec64> base;
    for (int i = 0; i < 1000; ++i) base.push_back(random_vec(rng, d, 5.0));
    std::vector<SapCiphertext> cts;
    for (const auto& b : base) cts.push_back(sap_encrypt(b, key, rng));

    for (int it = 0; it < 20; ++it) {
        Vec64 q = random_vec(rng, d, 5.0);
        SapCiphertext cq = sap_encrypt(q, key, rng);
        std::size_t best = 0;
        double best_d = approx_dist(cts[0], cq);
        for (std::size_t i = 1; i < cts.size(); ++i) {
            double dd = approx_dist(cts[i], cq);
            if (dd < best_d) {
                best_d = dd;
                best = i;
            }
        }
        // dist(q, u*) <= dist(q, p) + beta for every p
        double chosen = euclid_dist(q, base[best]);
        for (const auto& p : base) {
            CHECK(chosen <= euclid_dist(q, p) + beta + 1e-12);
        }
    }
}

TEST_CASE("sap encryption is deterministic per seed and store round-trips") {
    const std::uint32_t d = 5;
    SapKey key = sap_keygen(2, 1.0, 1.0, d);
    SeededRng rng(51);
    std::vector<Vec64> base;
    for (int i = 0; i < 12; ++i) base.push_back(random_vec(rng, d));

    SapStore a = encrypt_database(base, key, 99, 1);
    SapStore b = encrypt_database(base, key, 99, 3);
    CHECK(a == b);

    std::stringstream s1, s2;
    save_store(s1, a);
    SapStore back = load_store(s1);
    CHECK(back == a);
    save_store(s2, back);
    CHECK(s1.str() == s2.str());
}

TEST_CASE("sap key file round trip") {
    SapKey key = sap_keygen(1024, 450, 218, 128);
    std::string path = "sap_key_test.bin";
    save_key_file(path, key);
    SapKey back = load_key_file(path);
    CHECK(back.s == key.s);
    CHECK(back.beta == key.beta);
    CHECK(back.max_abs == key.max_abs);
    CHECK(back.d == key.d);
    std::remove(path.c_str());
}
