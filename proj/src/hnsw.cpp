#include "ppann/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <stdexcept>

namespace ppann::hnsw {

namespace {

using DistId = std::pair<double, std::uint32_t>;  // (distance, id), lexicographic ties by id

constexpr std::uint8_t kGraphVersion = 1;

}  // namespace

HnswGraph::HnswGraph(std::uint32_t m, std::uint32_t ef_construction, std::uint64_t seed)
    : m_(m), ef_construction_(ef_construction), seed_(seed) {
    if (m < 2) throw std::invalid_argument("HnswGraph: m must be >= 2");
    if (ef_construction < 1) throw std::invalid_argument("HnswGraph: ef_construction must be >= 1");
    level_mult_ = 1.0 / std::log(static_cast<double>(m));
}

HnswGraph HnswGraph::build(const IdMetric& metric, std::uint32_t n, std::uint32_t m,
                           std::uint32_t ef_construction, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("HnswGraph::build: empty store");
    HnswGraph g(m, ef_construction, seed);
    g.nodes_.reserve(n);
    for (std::uint32_t id = 0; id < n; ++id) g.insert(metric, id);
    return g;
}

std::int32_t HnswGraph::sample_level(std::uint32_t id) const {
    // level is a function of (seed, id), so a vector keeps its level whether
    // it arrives during build or through a later insert
    SeededRng rng = SeededRng(seed_).derive(0x4c45564cULL).derive(id);
    double u = rng.uniform01();
    auto level = static_cast<std::int32_t>(-std::log(1.0 - u) * level_mult_);
    return std::min(level, 48);
}

bool HnswGraph::contains(std::uint32_t id) const {
    return id < nodes_.size() && nodes_[id].level >= 0;
}

std::int32_t HnswGraph::node_level(std::uint32_t id) const {
    return id < nodes_.size() ? nodes_[id].level : -1;
}

const std::vector<std::uint32_t>& HnswGraph::neighbors(std::uint32_t id, std::int32_t layer) const {
    if (!contains(id) || layer < 0 || layer > nodes_[id].level) {
        throw std::out_of_range("HnswGraph::neighbors: no such node/layer");
    }
    return nodes_[id].links[static_cast<std::size_t>(layer)];
}

template <typename DistFn>
std::vector<DistId> HnswGraph::search_layer(DistFn&& dist, std::uint32_t ep, std::uint32_t ef,
                                            std::int32_t layer, std::uint32_t skip) const {
    std::vector<std::uint8_t> visited(nodes_.size(), 0);
    if (skip != kNoNode) visited[skip] = 1;

    std::priority_queue<DistId, std::vector<DistId>, std::greater<>> candidates;  // closest first
    std::priority_queue<DistId> results;                                          // farthest on top

    double d0 = dist(ep);
    visited[ep] = 1;
    candidates.emplace(d0, ep);
    results.emplace(d0, ep);

    while (!candidates.empty()) {
        DistId cur = candidates.top();
        if (results.size() >= ef && cur.first > results.top().first) break;
        candidates.pop();

        for (std::uint32_t nb : nodes_[cur.second].links[static_cast<std::size_t>(layer)]) {
            if (visited[nb]) continue;
            visited[nb] = 1;
            double d = dist(nb);
            if (results.size() < ef || d < results.top().first ||
                (d == results.top().first && nb < results.top().second)) {
                candidates.emplace(d, nb);
                results.emplace(d, nb);
                if (results.size() > ef) results.pop();
            }
        }
    }

    std::vector<DistId> out(results.size());
    for (std::size_t i = results.size(); i > 0; --i) {
        out[i - 1] = results.top();
        results.pop();
    }
    return out;
}

template <typename DistFn>
std::uint32_t HnswGraph::greedy_descend(DistFn&& dist, std::uint32_t ep, std::int32_t from_layer,
                                        std::int32_t to_layer, std::uint32_t skip) const {
    double best = dist(ep);
    for (std::int32_t layer = from_layer; layer > to_layer; --layer) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (std::uint32_t nb : nodes_[ep].links[static_cast<std::size_t>(layer)]) {
                if (nb == skip) continue;
                double d = dist(nb);
                if (d < best || (d == best && nb < ep)) {
                    best = d;
                    ep = nb;
                    improved = true;
                }
            }
        }
    }
    return ep;
}

std::vector<std::uint32_t> HnswGraph::select_neighbors(const IdMetric& metric,
                                                       std::vector<DistId> cands,
                                                       std::uint32_t max_out) const {
    // diverse selection: keep a candidate only if no already-kept neighbor
    // is closer to it than the candidate is to the query point
    std::sort(cands.begin(), cands.end());
    std::vector<std::uint32_t> selected;
    selected.reserve(std::min<std::size_t>(cands.size(), max_out));
    for (const auto& [d_cand, cand] : cands) {
        if (selected.size() >= max_out) break;
        bool keep = true;
        for (std::uint32_t s : selected) {
            if (metric.between(cand, s) < d_cand) {
                keep = false;
                break;
            }
        }
        if (keep) selected.push_back(cand);
    }
    return selected;
}

void HnswGraph::shrink_links(const IdMetric& metric, std::uint32_t id, std::int32_t layer) {
    auto& links = nodes_[id].links[static_cast<std::size_t>(layer)];
    if (links.size() <= degree_cap(layer)) return;
    std::vector<DistId> cands;
    cands.reserve(links.size());
    for (std::uint32_t nb : links) cands.emplace_back(metric.between(id, nb), nb);
    links = select_neighbors(metric, std::move(cands), degree_cap(layer));
}

void HnswGraph::insert(const IdMetric& metric, std::uint32_t id) {
    if (contains(id)) throw std::invalid_argument("HnswGraph::insert: duplicate id");
    if (id >= nodes_.size()) nodes_.resize(id + 1);

    Node& node = nodes_[id];
    node.level = sample_level(id);
    node.links.assign(static_cast<std::size_t>(node.level) + 1, {});
    ++present_;

    if (entry_ == kNoNode) {
        entry_ = id;
        max_level_ = node.level;
        return;
    }

    auto dist_to_new = [&](std::uint32_t other) { return metric.between(id, other); };

    std::uint32_t ep = entry_;
    if (max_level_ > node.level) {
        ep = greedy_descend(dist_to_new, ep, max_level_, node.level);
    }

    for (std::int32_t layer = std::min(node.level, max_level_); layer >= 0; --layer) {
        auto cands = search_layer(dist_to_new, ep, ef_construction_, layer, id);
        auto selected = select_neighbors(metric, cands, m_);
        node.links[static_cast<std::size_t>(layer)] = selected;
        for (std::uint32_t nb : selected) {
            nodes_[nb].links[static_cast<std::size_t>(layer)].push_back(id);
            shrink_links(metric, nb, layer);
        }
        if (!cands.empty()) ep = cands.front().second;
    }

    if (node.level > max_level_) {
        max_level_ = node.level;
        entry_ = id;
    }
}

void HnswGraph::relink(const IdMetric& metric, std::uint32_t id, std::int32_t layer) {
    auto& out_links = nodes_[id].links[static_cast<std::size_t>(layer)];

    // starting point for the neighbor search: the entry, or when the node IS
    // the entry, the highest-level other node
    std::uint32_t start = entry_;
    std::int32_t start_level = max_level_;
    if (start == id) {
        start = kNoNode;
        start_level = -1;
        for (std::uint32_t cand = 0; cand < nodes_.size(); ++cand) {
            if (cand != id && nodes_[cand].level > start_level) {
                start = cand;
                start_level = nodes_[cand].level;
            }
        }
    }
    if (start == kNoNode || start_level < layer) {
        out_links.clear();
        return;
    }

    auto dist_to_node = [&](std::uint32_t other) { return metric.between(id, other); };
    std::uint32_t ep = start;
    if (start_level > layer) ep = greedy_descend(dist_to_node, ep, start_level, layer, id);

    auto cands = search_layer(dist_to_node, ep, ef_construction_, layer, id);
    auto selected = select_neighbors(metric, cands, m_);
    out_links = selected;
    for (std::uint32_t nb : selected) {
        auto& back = nodes_[nb].links[static_cast<std::size_t>(layer)];
        if (std::find(back.begin(), back.end(), id) == back.end()) {
            back.push_back(id);
            shrink_links(metric, nb, layer);
        }
    }
}

void HnswGraph::erase(const IdMetric& metric, std::uint32_t id) {
    if (!contains(id)) throw std::invalid_argument("HnswGraph::erase: id not present");

    // in-neighbors per layer, gathered before any edge is touched
    std::vector<std::pair<std::int32_t, std::uint32_t>> affected;  // (layer, in-neighbor)
    for (std::uint32_t w = 0; w < nodes_.size(); ++w) {
        if (w == id || nodes_[w].level < 0) continue;
        for (std::int32_t layer = 0; layer <= nodes_[w].level; ++layer) {
            auto& links = nodes_[w].links[static_cast<std::size_t>(layer)];
            auto it = std::find(links.begin(), links.end(), id);
            if (it != links.end()) {
                links.erase(it);
                affected.emplace_back(layer, w);
            }
        }
    }

    nodes_[id].level = -1;
    nodes_[id].links.clear();
    --present_;

    if (present_ == 0) {
        entry_ = kNoNode;
        max_level_ = -1;
        return;
    }

    if (entry_ == id) {
        std::int32_t best_level = -1;
        std::uint32_t best_id = kNoNode;
        for (std::uint32_t w = 0; w < nodes_.size(); ++w) {
            if (nodes_[w].level > best_level) {
                best_level = nodes_[w].level;
                best_id = w;
            }
        }
        entry_ = best_id;
        max_level_ = best_level;
    }

    // top-down, then by id, so re-linking is reproducible
    std::sort(affected.begin(), affected.end(),
              [](const auto& a, const auto& b) {
                  return a.first != b.first ? a.first > b.first : a.second < b.second;
              });
    for (const auto& [layer, w] : affected) relink(metric, w, layer);
}

std::vector<std::uint32_t> HnswGraph::knn_search(const IdMetric& metric, const Vec64& q,
                                                 SearchParams params) const {
    if (params.k_prime < 1 || params.ef_search < params.k_prime) {
        throw std::invalid_argument("knn_search: require ef_search >= k_prime >= 1");
    }
    if (present_ == 0) return {};

    auto dist_to_q = [&](std::uint32_t node) { return metric.to_query(q, node); };
    std::uint32_t ep = greedy_descend(dist_to_q, entry_, max_level_, 0);
    auto found = search_layer(dist_to_q, ep, params.ef_search, 0);

    std::vector<std::uint32_t> out;
    out.reserve(std::min<std::size_t>(found.size(), params.k_prime));
    for (const auto& [d, node] : found) {
        if (out.size() >= params.k_prime) break;
        out.push_back(node);
    }
    return out;
}

void HnswGraph::validate() const {
    std::uint32_t counted = 0;
    std::int32_t top = -1;
    for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
        const Node& node = nodes_[id];
        if (node.level < 0) {
            if (!node.links.empty()) throw std::runtime_error("validate: absent node has links");
            continue;
        }
        ++counted;
        top = std::max(top, node.level);
        if (node.links.size() != static_cast<std::size_t>(node.level) + 1) {
            throw std::runtime_error("validate: links not sized level+1");
        }
        for (std::int32_t layer = 0; layer <= node.level; ++layer) {
            const auto& links = node.links[static_cast<std::size_t>(layer)];
            if (links.size() > degree_cap(layer)) throw std::runtime_error("validate: degree cap exceeded");
            std::vector<std::uint32_t> copy = links;
            std::sort(copy.begin(), copy.end());
            if (std::adjacent_find(copy.begin(), copy.end()) != copy.end()) {
                throw std::runtime_error("validate: duplicate neighbor");
            }
            for (std::uint32_t nb : links) {
                if (nb == id) throw std::runtime_error("validate: self loop");
                if (!contains(nb)) throw std::runtime_error("validate: neighbor not present");
                if (nodes_[nb].level < layer) {
                    throw std::runtime_error("validate: neighbor below layer (nesting broken)");
                }
            }
        }
    }
    if (counted != present_) throw std::runtime_error("validate: present count mismatch");
    if (present_ == 0) {
        if (entry_ != kNoNode || max_level_ != -1) throw std::runtime_error("validate: bad empty state");
        return;
    }
    if (!contains(entry_)) throw std::runtime_error("validate: entry point missing");
    if (nodes_[entry_].level != max_level_ || top != max_level_) {
        throw std::runtime_error("validate: entry/max level mismatch");
    }
}

void HnswGraph::save(std::ostream& os) const {
    io::write_magic(os, "HNSW");
    io::write_u8(os, kGraphVersion);
    io::write_u32(os, static_cast<std::uint32_t>(nodes_.size()));
    io::write_u32(os, m_);
    io::write_u32(os, ef_construction_);
    io::write_u32(os, max_level_ < 0 ? kNoNode : static_cast<std::uint32_t>(max_level_));
    io::write_u32(os, entry_);
    io::write_u64(os, seed_);

    for (const Node& node : nodes_) {
        io::write_u32(os, node.level < 0 ? kNoNode : static_cast<std::uint32_t>(node.level));
    }
    for (std::int32_t layer = 0; layer <= max_level_; ++layer) {
        std::uint64_t offset = 0;
        io::write_u64(os, offset);
        for (const Node& node : nodes_) {
            if (node.level >= layer) offset += node.links[static_cast<std::size_t>(layer)].size();
            io::write_u64(os, offset);
        }
        for (const Node& node : nodes_) {
            if (node.level < layer) continue;
            const auto& links = node.links[static_cast<std::size_t>(layer)];
            os.write(reinterpret_cast<const char*>(links.data()),
                     static_cast<std::streamsize>(links.size() * sizeof(std::uint32_t)));
        }
    }
}

HnswGraph HnswGraph::load(std::istream& is) {
    io::expect_magic(is, "HNSW", "hnsw graph");
    std::uint8_t version = io::read_u8(is);
    if (version != kGraphVersion) throw std::runtime_error("hnsw graph: unsupported version");

    std::uint32_t n = io::read_u32(is);
    std::uint32_t m = io::read_u32(is);
    std::uint32_t efc = io::read_u32(is);
    std::uint32_t max_level_raw = io::read_u32(is);
    std::uint32_t entry = io::read_u32(is);
    std::uint64_t seed = io::read_u64(is);

    HnswGraph g(m, efc, seed);
    g.nodes_.resize(n);
    g.entry_ = entry;
    g.max_level_ = max_level_raw == kNoNode ? -1 : static_cast<std::int32_t>(max_level_raw);

    g.present_ = 0;
    for (std::uint32_t id = 0; id < n; ++id) {
        std::uint32_t lvl = io::read_u32(is);
        if (lvl == kNoNode) continue;
        g.nodes_[id].level = static_cast<std::int32_t>(lvl);
        g.nodes_[id].links.assign(lvl + 1, {});
        ++g.present_;
    }
    for (std::int32_t layer = 0; layer <= g.max_level_; ++layer) {
        std::vector<std::uint64_t> offsets(n + 1);
        for (auto& o : offsets) o = io::read_u64(is);
        for (std::uint32_t id = 0; id < n; ++id) {
            std::uint64_t count = offsets[id + 1] - offsets[id];
            if (count == 0) continue;
            if (g.nodes_[id].level < layer) throw std::runtime_error("hnsw graph: edges below node level");
            auto& links = g.nodes_[id].links[static_cast<std::size_t>(layer)];
            links.resize(count);
            is.read(reinterpret_cast<char*>(links.data()),
                    static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
            if (!is) throw std::runtime_error("hnsw graph: truncated stream");
        }
    }
    return g;
}

void HnswGraph::save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    save(os);
}

HnswGraph HnswGraph::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return load(is);
}

}  // namespace ppann::hnsw
