#include "jaf/knowledge_graph.hpp"

#include <algorithm>
#include <map>

namespace jaf {

namespace {

using Edge = std::pair<int, int>;  // i < j

void add_edge(std::map<Edge, int>& candidates, int i, int j, int priority) {
    if (i == j) return;
    Edge e{std::min(i, j), std::max(i, j)};
    auto it = candidates.find(e);
    if (it == candidates.end()) {
        candidates[e] = priority;
    } else {
        it->second = std::min(it->second, priority);
    }
}

}  // namespace

KnowledgeGraph build_graph(const Cohort& cohort, const std::vector<RelationSpec>& relations,
                           const PruneConfig& prune) {
    const int n = static_cast<int>(cohort.size());
    std::map<Edge, int> candidates;

    for (const auto& rel : relations) {
        switch (rel.kind) {
            case RelationSpec::Kind::SharedCategorical: {
                std::map<std::string, std::vector<int>> by_value;
                for (int i = 0; i < n; ++i) {
                    const std::string& v = side_value(cohort.instances[i], rel.field);
                    if (v != kUnknownValue) by_value[v].push_back(i);
                }
                for (const auto& [value, members] : by_value) {
                    for (std::size_t a = 0; a < members.size(); ++a) {
                        for (std::size_t b = a + 1; b < members.size(); ++b) {
                            add_edge(candidates, members[a], members[b], rel.weight_priority);
                        }
                    }
                }
                break;
            }
            case RelationSpec::Kind::KnnEmbedding: {
                if (!cohort.instances.front().embedding) {
                    throw ConfigError("knn-embedding relation requires cohort embeddings");
                }
                std::vector<Eigen::VectorXd> unit(n);
                for (int i = 0; i < n; ++i) {
                    const Eigen::VectorXd& e = *cohort.instances[i].embedding;
                    double norm = e.norm();
                    unit[i] = norm > 0 ? Eigen::VectorXd(e / norm) : e;
                }
                for (int i = 0; i < n; ++i) {
                    std::vector<std::pair<double, int>> sims;
                    for (int j = 0; j < n; ++j) {
                        if (j == i) continue;
                        sims.emplace_back(unit[i].dot(unit[j]), j);
                    }
                    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                    });
                    int take = std::min<int>(rel.k, static_cast<int>(sims.size()));
                    for (int t = 0; t < take; ++t) {
                        add_edge(candidates, i, sims[t].second, rel.weight_priority);
                    }
                }
                break;
            }
            case RelationSpec::Kind::MetadataEqual: {
                std::map<std::string, std::vector<int>> by_value;
                for (int i = 0; i < n; ++i) {
                    auto it = cohort.instances[i].metadata.find(rel.field);
                    if (it != cohort.instances[i].metadata.end()) {
                        by_value[it->second].push_back(i);
                    }
                }
                for (const auto& [value, members] : by_value) {
                    for (std::size_t a = 0; a < members.size(); ++a) {
                        for (std::size_t b = a + 1; b < members.size(); ++b) {
                            add_edge(candidates, members[a], members[b], rel.weight_priority);
                        }
                    }
                }
                break;
            }
        }
    }

    if (prune.partition_key) {
        for (auto it = candidates.begin(); it != candidates.end();) {
            const auto& mi = cohort.instances[it->first.first].metadata;
            const auto& mj = cohort.instances[it->first.second].metadata;
            auto vi = mi.find(*prune.partition_key);
            auto vj = mj.find(*prune.partition_key);
            std::string a = vi != mi.end() ? vi->second : std::string();
            std::string b = vj != mj.end() ? vj->second : std::string();
            if (a != b) {
                it = candidates.erase(it);
            } else {
                ++it;
            }
        }
    }

    std::vector<int> degree(n, 0);
    for (const auto& [e, prio] : candidates) {
        ++degree[e.first];
        ++degree[e.second];
    }

    // Iteratively drop the worst-priority edge at any over-cap node. Among
    // ties, the lexicographically larger index pair goes first.
    for (;;) {
        bool over = false;
        std::optional<Edge> victim;
        int victim_prio = 0;
        for (const auto& [e, prio] : candidates) {
            if (degree[e.first] <= prune.max_degree && degree[e.second] <= prune.max_degree) {
                continue;
            }
            over = true;
            if (!victim || prio > victim_prio ||
                (prio == victim_prio && e > *victim)) {
                victim = e;
                victim_prio = prio;
            }
        }
        if (!over) break;
        --degree[victim->first];
        --degree[victim->second];
        candidates.erase(*victim);
    }

    KnowledgeGraph g;
    g.n = n;
    g.adjacency.assign(n, {});
    for (const auto& [e, prio] : candidates) {
        g.adjacency[e.first].push_back(e.second);
        g.adjacency[e.second].push_back(e.first);
    }
    for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
    return g;
}

std::vector<int> sample_neighbors(const KnowledgeGraph& graph, int i, int k, Rng& rng) {
    if (i < 0 || i >= graph.n) throw Error("sample_neighbors: index out of range");
    if (k <= 0) return {};
    return rng.sample_without_replacement(graph.adjacency[i], static_cast<std::size_t>(k));
}

nlohmann::ordered_json graph_to_json(const KnowledgeGraph& graph) {
    auto edges = nlohmann::ordered_json::array();
    for (int i = 0; i < graph.n; ++i) {
        for (int j : graph.adjacency[i]) {
            if (j > i) edges.push_back({i, j});
        }
    }
    return {{"n", graph.n}, {"edges", edges}};
}

KnowledgeGraph graph_from_json(const nlohmann::ordered_json& j) {
    KnowledgeGraph g;
    g.n = j.at("n").get<int>();
    g.adjacency.assign(g.n, {});
    for (const auto& e : j.at("edges")) {
        int a = e.at(0).get<int>();
        int b = e.at(1).get<int>();
        g.adjacency[a].push_back(b);
        g.adjacency[b].push_back(a);
    }
    for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
    return g;
}

}  // namespace jaf
