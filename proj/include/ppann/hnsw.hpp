#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "ppann/common.hpp"
#include "ppann/dcpe.hpp"

// Multi-layer proximity graph over an opaque id-addressed metric. The graph
// stores ids only; vector payloads stay in whatever store the metric wraps
// (SAP ciphertexts in production, plaintexts in oracle tests).

namespace ppann::hnsw {

inline constexpr std::uint32_t kNoNode = std::numeric_limits<std::uint32_t>::max();

class IdMetric {
public:
    virtual ~IdMetric() = default;
    virtual double between(std::uint32_t a, std::uint32_t b) const = 0;
    virtual double to_query(const Vec64& q, std::uint32_t a) const = 0;
};

class SapMetric final : public IdMetric {
public:
    explicit SapMetric(const dcpe::SapStore& store) : store_(&store) {}
    double between(std::uint32_t a, std::uint32_t b) const override { return store_->dist(a, b); }
    double to_query(const Vec64& q, std::uint32_t a) const override { return store_->dist_to(q, a); }

private:
    const dcpe::SapStore* store_;
};

// Euclidean metric over raw vectors, used by oracle-side tests.
class PlainMetric final : public IdMetric {
public:
    explicit PlainMetric(const std::vector<Vec64>& vecs) : vecs_(&vecs) {}
    double between(std::uint32_t a, std::uint32_t b) const override {
        return euclid_dist((*vecs_)[a], (*vecs_)[b]);
    }
    double to_query(const Vec64& q, std::uint32_t a) const override {
        return euclid_dist(q, (*vecs_)[a]);
    }

private:
    const std::vector<Vec64>* vecs_;
};

struct SearchParams {
    std::uint32_t ef_search = 0;
    std::uint32_t k_prime = 0;
};

class HnswGraph {
public:
    HnswGraph() = default;
    HnswGraph(std::uint32_t m, std::uint32_t ef_construction, std::uint64_t seed);

    // Inserts ids 0..n-1 one by one. Deterministic given the seed.
    static HnswGraph build(const IdMetric& metric, std::uint32_t n, std::uint32_t m,
                           std::uint32_t ef_construction, std::uint64_t seed);

    void insert(const IdMetric& metric, std::uint32_t id);
    void erase(const IdMetric& metric, std::uint32_t id);

    // Greedy descent through the upper layers, then a layer-0 beam of width
    // ef_search; returns k_prime ids sorted ascending by distance to q.
    std::vector<std::uint32_t> knn_search(const IdMetric& metric, const Vec64& q,
                                          SearchParams params) const;

    bool contains(std::uint32_t id) const;
    std::uint32_t size() const { return present_; }
    std::uint32_t id_capacity() const { return static_cast<std::uint32_t>(nodes_.size()); }
    std::uint32_t entry_point() const { return entry_; }
    std::int32_t max_level() const { return max_level_; }
    std::uint32_t m() const { return m_; }
    std::uint32_t ef_construction() const { return ef_construction_; }
    std::int32_t node_level(std::uint32_t id) const;
    const std::vector<std::uint32_t>& neighbors(std::uint32_t id, std::int32_t layer) const;

    // Throws if any structural invariant is broken (degree caps, layer
    // nesting, membership of referenced ids, entry point consistency).
    void validate() const;

    void save(std::ostream& os) const;
    static HnswGraph load(std::istream& is);
    void save_file(const std::string& path) const;
    static HnswGraph load_file(const std::string& path);

    bool operator==(const HnswGraph&) const = default;

private:
    struct Node {
        std::int32_t level = -1;  // -1 = absent
        std::vector<std::vector<std::uint32_t>> links;

        bool operator==(const Node&) const = default;
    };

    std::uint32_t degree_cap(std::int32_t layer) const { return layer == 0 ? 2 * m_ : m_; }
    std::int32_t sample_level(std::uint32_t id) const;

    template <typename DistFn>
    std::vector<std::pair<double, std::uint32_t>> search_layer(DistFn&& dist, std::uint32_t ep,
                                                               std::uint32_t ef,
                                                               std::int32_t layer,
                                                               std::uint32_t skip = kNoNode) const;
    template <typename DistFn>
    std::uint32_t greedy_descend(DistFn&& dist, std::uint32_t ep, std::int32_t from_layer,
                                 std::int32_t to_layer, std::uint32_t skip = kNoNode) const;

    std::vector<std::uint32_t> select_neighbors(const IdMetric& metric,
                                                std::vector<std::pair<double, std::uint32_t>> cands,
                                                std::uint32_t max_out) const;
    void shrink_links(const IdMetric& metric, std::uint32_t id, std::int32_t layer);
    void relink(const IdMetric& metric, std::uint32_t id, std::int32_t layer);

    std::vector<Node> nodes_;
    std::uint32_t m_ = 16;
    std::uint32_t ef_construction_ = 200;
    std::uint64_t seed_ = 0;
    double level_mult_ = 0.0;
    std::int32_t max_level_ = -1;
    std::uint32_t entry_ = kNoNode;
    std::uint32_t present_ = 0;
};

}  // namespace ppann::hnsw
