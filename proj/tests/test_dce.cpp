#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ppann/dce.hpp"

using namespace ppann;
using namespace ppann::dce;

namespace {

Vec64 random_vec(SeededRng& rng, std::size_t d, double scale = 1.0) {
    Vec64 v(d);
    for (auto& x : v) x = scale * rng.uniform(-1.0, 1.0);
    return v;
}

double rel_gap(double a, double b) {
    double m = std::max(std::abs(a), std::abs(b));
    return m == 0 ? 0 : std::abs(a - b) / m;
}

}  // namespace

TEST_CASE("keygen shapes and constraints at d=4") {
    DceSecretKey sk = keygen(4, 2024);
    CHECK(sk.m1.rows == 6);
    CHECK(sk.m1.cols == 6);
    CHECK(sk.m2.rows == 6);
    CHECK(sk.m3_up.rows == 12);
    CHECK(sk.m3_up.cols == 24);
    CHECK(sk.m3_down.rows == 12);
    CHECK(sk.m3_inv.rows == 24);
    CHECK(sk.pi1.size() == 4);
    CHECK(sk.pi2.size() == 12);
    CHECK(sk.kv1.size() == 24);
    CHECK(sk.r4 != 0.0);

    for (std::size_t i = 0; i < sk.kv1.size(); ++i) {
        for (const Vec64* kv : {&sk.kv1, &sk.kv2, &sk.kv3, &sk.kv4}) {
            double m = std::abs((*kv)[i]);
            CHECK(m >= 0.5);
            CHECK(m <= 2.0);
        }
        // kv1 o kv3 == kv2 o kv4, exact up to one rounding of the quotient
        double lhs = sk.kv1[i] * sk.kv3[i];
        double rhs = sk.kv2[i] * sk.kv4[i];
        CHECK(rel_gap(lhs, rhs) <= 4e-16);
    }
}

TEST_CASE("keygen rejects odd and tiny dimensions") {
    CHECK_THROWS_AS(keygen(5, 1), std::invalid_argument);
    CHECK_THROWS_AS(keygen(0, 1), std::invalid_argument);
    CHECK_THROWS_WITH_AS(keygen(7, 1), doctest::Contains("zero-pad"), std::invalid_argument);
}

TEST_CASE("keygen is deterministic per seed") {
    DceSecretKey a = keygen(8, 77);
    DceSecretKey b = keygen(8, 77);
    std::stringstream sa, sb;
    save_key(sa, a);
    save_key(sb, b);
    CHECK(sa.str() == sb.str());
    DceSecretKey c = keygen(8, 78);
    CHECK(a != c);
}

TEST_CASE("randomization kernel: database-vs-query dot product") {
    // randomize(p, db) . randomize(q, query) == ||p||^2 - 2 p.q
    for (std::uint32_t d : {2u, 4u, 16u, 64u}) {
        DceSecretKey sk = keygen(d, 1000 + d);
        SeededRng rng(55 + d);
        for (int it = 0; it < 20; ++it) {
            Vec64 p = random_vec(rng, d, 2.0);
            Vec64 q = random_vec(rng, d, 2.0);
            RandomizedVector pr = randomize(p, sk, Role::Database, rng);
            RandomizedVector qr = randomize(q, sk, Role::Query, rng);
            CHECK(pr.v.size() == d + 8);
            CHECK(qr.v.size() == d + 8);
            double got = dot(pr.v, qr.v);
            double want = sq_norm(p) - 2.0 * dot(p, q);
            CHECK(rel_gap(got, want) <= 1e-6);
        }
    }
}

TEST_CASE("randomization zero case and per-call freshness") {
    DceSecretKey sk = keygen(8, 4);
    SeededRng rng(9);
    Vec64 zero(8, 0.0);
    RandomizedVector pz = randomize(zero, sk, Role::Database, rng);
    RandomizedVector qz = randomize(zero, sk, Role::Query, rng);
    CHECK(std::abs(dot(pz.v, qz.v)) <= 1e-9);

    Vec64 p = random_vec(rng, 8);
    RandomizedVector r1 = randomize(p, sk, Role::Database, rng);
    RandomizedVector r2 = randomize(p, sk, Role::Database, rng);
    CHECK(r1.v != r2.v);
}

TEST_CASE("ciphertext and trapdoor dimensions at d=128") {
    DceSecretKey sk = keygen(128, 5);
    SeededRng rng(6);
    Vec64 p = random_vec(rng, 128);
    DceCiphertext ct = encrypt_db(p, sk, rng);
    CHECK(ct.c1.size() == 272);
    CHECK(ct.c2.size() == 272);
    CHECK(ct.c3.size() == 272);
    CHECK(ct.c4.size() == 272);
    // 4 * 272 == 8d + 64 stored reals
    CHECK(4 * ct.c1.size() == 8 * 128 + 64);
    DceTrapdoor td = trapgen(p, sk, rng);
    CHECK(td.t.size() == 2 * 128 + 16);

    DceCiphertext ct2 = encrypt_db(p, sk, rng);
    CHECK(ct.c1 != ct2.c1);
}

TEST_CASE("white-box reconstruction identity of the transform") {
    // (c1 of o) o (c3 of p) - (c2 of o) o (c4 of p) == r_o * r_p * F2(o_bar, p_bar)
    const std::uint32_t d = 16;
    DceSecretKey sk = keygen(d, 321);
    SeededRng rng(322);
    Vec64 o = random_vec(rng, d);
    Vec64 p = random_vec(rng, d);
    EncryptDetails eo = encrypt_db_details(o, sk, rng);
    EncryptDetails ep = encrypt_db_details(p, sk, rng);

    Vec64 up_o = row_times_mat(eo.randomized.v, sk.m3_up);
    Vec64 down_p = row_times_mat(ep.randomized.v, sk.m3_down);
    Vec64 got = ew_sub(ew_mul(eo.ct.c1, ep.ct.c3), ew_mul(eo.ct.c2, ep.ct.c4));
    for (std::size_t i = 0; i < got.size(); ++i) {
        // F2 lane: F1 / (kv1 o kv3) with F1 = 2*up_o + 2*down_p
        double f2 = (2.0 * up_o[i] + 2.0 * down_p[i]) / (sk.kv1[i] * sk.kv3[i]);
        double want = eo.r_p * ep.r_p * f2;
        CHECK(rel_gap(got[i], want) <= 1e-6);
    }
}

TEST_CASE("distance_comp agrees with the plaintext oracle") {
    for (std::uint32_t d : {2u, 4u, 32u}) {
        DceSecretKey sk = keygen(d, 9000 + d);
        SeededRng rng(9001 + d);
        int checked = 0;
        for (int it = 0; it < 400; ++it) {
            Vec64 o = random_vec(rng, d, 3.0);
            Vec64 p = random_vec(rng, d, 3.0);
            Vec64 q = random_vec(rng, d, 3.0);
            double do_q = sq_dist(o, q);
            double dp_q = sq_dist(p, q);
            if (rel_gap(do_q, dp_q) <= 1e-9) continue;
            DceCiphertext co = encrypt_db(o, sk, rng);
            DceCiphertext cp = encrypt_db(p, sk, rng);
            DceTrapdoor tq = trapgen(q, sk, rng);
            double z = distance_comp(co, cp, tq);
            CHECK((z < 0) == (do_q < dp_q));
            ++checked;
        }
        CHECK(checked > 300);
    }
}

TEST_CASE("forced ordering and self comparison") {
    DceSecretKey sk = keygen(4, 11);
    SeededRng rng(12);
    Vec64 o{0, 0, 0, 0};
    Vec64 p{1, 0, 0, 0};
    Vec64 q{0, 0, 0, 0};
    DceCiphertext co = encrypt_db(o, sk, rng);
    DceCiphertext cp = encrypt_db(p, sk, rng);
    DceTrapdoor tq = trapgen(q, sk, rng);
    CHECK(distance_comp(co, cp, tq) < 0);   // dist(o,q)=0 < dist(p,q)=1
    CHECK(std::abs(distance_comp(co, co, tq)) <= 1e-6);
}

TEST_CASE("trapdoor freshness preserves every comparison sign") {
    const std::uint32_t d = 8;
    DceSecretKey sk = keygen(d, 500);
    SeededRng rng(501);
    Vec64 q = random_vec(rng, d);
    DceTrapdoor t1 = trapgen(q, sk, rng);
    DceTrapdoor t2 = trapgen(q, sk, rng);
    CHECK(t1.t != t2.t);

    int agreements = 0;
    for (int it = 0; it < 1000; ++it) {
        Vec64 o = random_vec(rng, d);
        Vec64 p = random_vec(rng, d);
        DceCiphertext co = encrypt_db(o, sk, rng);
        DceCiphertext cp = encrypt_db(p, sk, rng);
        double z1 = distance_comp(co, cp, t1);
        double z2 = distance_comp(co, cp, t2);
        if ((z1 < 0) == (z2 < 0)) ++agreements;
    }
    CHECK(agreements == 1000);

    Vec64 zero(d, 0.0);
    DceTrapdoor tz = trapgen(zero, sk, rng);
    CHECK(sq_norm(tz.t) > 0);
}

TEST_CASE("scale freedom: positive rescaling never flips the sign") {
    const std::uint32_t d = 8;
    DceSecretKey sk = keygen(d, 600);
    SeededRng rng(601);
    for (int it = 0; it < 100; ++it) {
        Vec64 o = random_vec(rng, d);
        Vec64 p = random_vec(rng, d);
        Vec64 q = random_vec(rng, d);
        DceCiphertext co = encrypt_db(o, sk, rng);
        DceCiphertext cp = encrypt_db(p, sk, rng);
        DceTrapdoor tq = trapgen(q, sk, rng);
        double z = distance_comp(co, cp, tq);

        auto scale_ct = [](DceCiphertext ct, double f) {
            for (auto* v : {&ct.c1, &ct.c2, &ct.c3, &ct.c4}) {
                for (auto& x : *v) x *= f;
            }
            return ct;
        };
        DceCiphertext co2 = scale_ct(co, 3.5);
        DceCiphertext cp2 = scale_ct(cp, 0.25);
        DceTrapdoor tq2 = tq;
        for (auto& x : tq2.t) x *= 7.0;
        double z2 = distance_comp(co2, cp2, tq2);
        CHECK(std::signbit(z) == std::signbit(z2));
    }
}

TEST_CASE("is_closer threshold semantics") {
    const std::uint32_t d = 4;
    DceSecretKey sk = keygen(d, 700);
    SeededRng rng(701);

    Vec64 q(d, 0.0);
    Vec64 o{1, 0, 0, 0};
    Vec64 p{0, 2, 0, 0};
    DceCiphertext co = encrypt_db(o, sk, rng);
    DceCiphertext cp = encrypt_db(p, sk, rng);
    DceTrapdoor tq = trapgen(q, sk, rng);
    CHECK(is_closer(co, cp, tq, 1e-9) == Comparison::Closer);
    CHECK(is_closer(cp, co, tq, 1e-9) == Comparison::NotCloser);

    // near-tie: o and p equidistant up to a 1e-12 perturbation
    Vec64 o2{1, 0, 0, 0};
    Vec64 p2{0, std::sqrt(1.0 + 1e-12), 0, 0};
    DceCiphertext co2 = encrypt_db(o2, sk, rng);
    DceCiphertext cp2 = encrypt_db(p2, sk, rng);
    double z = distance_comp(co2, cp2, tq);
    for (double eps : {0.0, 1e-15, 1e-12, 1e-6, 1.0}) {
        CHECK((is_closer(co2, cp2, tq, eps) == Comparison::Closer) == (z < -eps));
    }
    // an exactly-zero Z reports NotCloser under strict sign
    CHECK(is_closer(co2, co2, tq, 1e6) == Comparison::NotCloser);

    CHECK_THROWS_AS(is_closer(co, cp, tq, -1.0), std::invalid_argument);
}

TEST_CASE("structural multiply-accumulate count") {
    // the comparison runs exactly two product-accumulate streams per lane
    for (std::uint32_t d : {4u, 32u, 128u, 960u}) {
        CHECK(distance_comp_mac_count(d) == 4 * d + 32);
    }

    const std::uint32_t d = 8;
    DceSecretKey sk = keygen(d, 800);
    SeededRng rng(801);
    Vec64 o = random_vec(rng, d);
    Vec64 p = random_vec(rng, d);
    Vec64 q = random_vec(rng, d);
    DceCiphertext co = encrypt_db(o, sk, rng);
    DceCiphertext cp = encrypt_db(p, sk, rng);
    DceTrapdoor tq = trapgen(q, sk, rng);

    // instrumented re-implementation: count each fused lane op
    std::uint64_t macs = 0;
    double acc_pos = 0, acc_neg = 0;
    for (std::size_t i = 0; i < tq.t.size(); ++i) {
        acc_pos += co.c1[i] * cp.c3[i] * tq.t[i];
        ++macs;
        acc_neg += co.c2[i] * cp.c4[i] * tq.t[i];
        ++macs;
    }
    CHECK(macs == distance_comp_mac_count(d));
    CHECK(acc_pos - acc_neg == doctest::Approx(distance_comp(co, cp, tq)).epsilon(1e-12));
}

TEST_CASE("key and store serialization round trip") {
    DceSecretKey sk = keygen(6, 901);
    std::stringstream ss;
    save_key(ss, sk);
    DceSecretKey back = load_key(ss);
    CHECK(back == sk);

    SeededRng rng(902);
    DceStore store(3, 6);
    for (std::uint32_t i = 0; i < 3; ++i) {
        store.set(i, encrypt_db(random_vec(rng, 6), sk, rng));
    }
    std::stringstream s2, s3;
    save_store(s2, store);
    DceStore store2 = load_store(s2);
    CHECK(store2 == store);
    save_store(s3, store2);
    CHECK(s2.str() == s3.str());

    // store-based comparison matches the object-based one
    DceTrapdoor tq = trapgen(random_vec(rng, 6), sk, rng);
    CHECK(distance_comp(store, 0, 1, tq) ==
          doctest::Approx(distance_comp(store.get(0), store.get(1), tq)).epsilon(1e-15));
}

TEST_CASE("parallel database encryption is thread-count invariant") {
    DceSecretKey sk = keygen(8, 1001);
    SeededRng rng(1002);
    std::vector<Vec64> base;
    for (int i = 0; i < 40; ++i) base.push_back(random_vec(rng, 8));
    DceStore a = encrypt_database(base, sk, 7, 1);
    DceStore b = encrypt_database(base, sk, 7, 4);
    CHECK(a == b);
}
