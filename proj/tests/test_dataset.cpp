#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ppann/dataset.hpp"

using namespace ppann;
using namespace ppann::dataset;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("fvecs decoding matches the documented byte layout") {
    TempFile f("handmade.fvecs");
    // one record: dim=2, floats 1.0 and 2.0
    write_bytes(f.path, {0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40});
    auto vecs = read_fvecs(f.path);
    REQUIRE(vecs.size() == 1);
    CHECK(vecs[0] == Vec64{1.0, 2.0});
}

TEST_CASE("fvecs edge cases") {
    TempFile f("edge.fvecs");

    SUBCASE("empty file gives an empty dataset") {
        write_bytes(f.path, {});
        CHECK(read_fvecs(f.path).empty());
    }

    SUBCASE("length must be a multiple of the record size") {
        write_bytes(f.path, {0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3F, 0x00, 0x00});
        CHECK_THROWS_WITH_AS(read_fvecs(f.path), doctest::Contains("multiple"), std::runtime_error);
    }

    SUBCASE("non-positive dimension is rejected") {
        write_bytes(f.path, {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3F});
        CHECK_THROWS_AS(read_fvecs(f.path), std::runtime_error);
    }

    SUBCASE("dimension must be consistent across records") {
        write_bytes(f.path, {0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3F,
                             0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3F});
        CHECK_THROWS_AS(read_fvecs(f.path), std::runtime_error);
    }
}

TEST_CASE("fvecs and ivecs round trip byte-identically") {
    TempFile f1("rt.fvecs"), f2("rt2.fvecs"), g1("rt.ivecs");
    auto base = synthetic_gaussian(20, 7, 5);
    write_fvecs(f1.path, base);
    auto back = read_fvecs(f1.path);
    write_fvecs(f2.path, back);

    std::ifstream a(f1.path, std::ios::binary), b(f2.path, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);

    std::vector<std::vector<std::int32_t>> rows{{1, 2, 3}, {7, 8, 9}};
    write_ivecs(g1.path, rows);
    CHECK(read_ivecs(g1.path) == rows);
}

TEST_CASE("brute_force_knn basics") {
    std::vector<Vec64> base{{0.0}, {1.0}, {2.0}};
    CHECK(brute_force_knn(base, {0.6}, 2) == std::vector<std::uint32_t>{1, 0});
    CHECK(brute_force_knn(base, {0.6}, 3) == std::vector<std::uint32_t>{1, 0, 2});
    CHECK_THROWS_AS(brute_force_knn(base, {0.6}, 4), std::invalid_argument);

    // ties break by ascending id
    std::vector<Vec64> tied{{1.0}, {-1.0}, {1.0}};
    CHECK(brute_force_knn(tied, {0.0}, 3) == std::vector<std::uint32_t>{0, 1, 2});
}

TEST_CASE("brute_force_knn agrees with an independent quadratic scan") {
    auto base = synthetic_gaussian(1000, 64, 17);
    auto queries = synthetic_gaussian(20, 64, 18);
    const std::uint32_t k = 10;
    for (const auto& q : queries) {
        auto fast = brute_force_knn(base, q, k);
        // oracle: selection by repeated full scans
        std::vector<bool> taken(base.size(), false);
        std::vector<std::uint32_t> slow;
        for (std::uint32_t round = 0; round < k; ++round) {
            double best = 1e300;
            std::uint32_t best_id = 0;
            for (std::size_t i = 0; i < base.size(); ++i) {
                if (taken[i]) continue;
                double dsq = 0;
                for (std::size_t j = 0; j < q.size(); ++j) {
                    double diff = base[i][j] - q[j];
                    dsq += diff * diff;
                }
                if (dsq < best) {
                    best = dsq;
                    best_id = static_cast<std::uint32_t>(i);
                }
            }
            taken[best_id] = true;
            slow.push_back(best_id);
        }
        CHECK(fast == slow);
    }
}

TEST_CASE("recall_at_k") {
    CHECK(recall_at_k({1, 2, 9}, {1, 2, 3}, 3) == doctest::Approx(2.0 / 3.0));
    CHECK(recall_at_k({1, 2, 3}, {3, 2, 1}, 3) == 1.0);
    CHECK(recall_at_k({4, 5, 6}, {1, 2, 3}, 3) == 0.0);
    CHECK_THROWS_AS(recall_at_k({1}, {1, 2}, 3), std::invalid_argument);
}

TEST_CASE("batch ground truth is thread-count invariant") {
    auto base = synthetic_gaussian(200, 8, 3);
    auto queries = synthetic_gaussian(10, 8, 4);
    CHECK(brute_force_knn_batch(base, queries, 5, 1) == brute_force_knn_batch(base, queries, 5, 4));
}
