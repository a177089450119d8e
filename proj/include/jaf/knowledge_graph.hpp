#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "jaf/cohort.hpp"
#include "jaf/rng.hpp"

namespace jaf {

// Declarative edge source for the cohort knowledge graph.
struct RelationSpec {
    enum class Kind { SharedCategorical, KnnEmbedding, MetadataEqual };
    Kind kind = Kind::SharedCategorical;
    std::string field;       // shared-categorical / metadata-equal
    int k = 0;               // knn-embedding
    int weight_priority = 0; // lower = kept first under degree caps
};

struct PruneConfig {
    int max_degree = 8;
    std::optional<std::string> partition_key;  // edges crossing distinct values dropped
};

// Binary undirected adjacency over cohort indices.
struct KnowledgeGraph {
    int n = 0;
    std::vector<std::vector<int>> adjacency;  // sorted, symmetric, no self-loops
};

// Union of candidate edges from all relations, partition filter, then
// symmetric degree capping (iteratively drop the lowest-priority edge at any
// over-cap node, ties broken by the larger index pair). Deterministic.
KnowledgeGraph build_graph(const Cohort& cohort, const std::vector<RelationSpec>& relations,
                           const PruneConfig& prune);

// Uniform sample without replacement of min(k, |N(i)|) neighbors of i.
std::vector<int> sample_neighbors(const KnowledgeGraph& graph, int i, int k, Rng& rng);

nlohmann::ordered_json graph_to_json(const KnowledgeGraph& graph);
KnowledgeGraph graph_from_json(const nlohmann::ordered_json& j);

}  // namespace jaf
