#include <doctest.h>

#include "jaf/knowledge_graph.hpp"

using namespace jaf;

namespace {

Cohort graph_cohort(int n) {
    Cohort c;
    c.cohort_id = "g";
    c.schema.query_side = {"family"};
    for (int i = 0; i < n; ++i) {
        QueryResponsePair p;
        p.id = "n" + std::to_string(i);
        p.query_text = "q";
        p.response_text = "r";
        p.side_info.query_side["family"] = i % 2 == 0 ? "iam" : "net";
        p.metadata["tenant"] = i < n / 2 ? "t1" : "t2";
        c.instances.push_back(std::move(p));
    }
    return c;
}

bool is_symmetric(const KnowledgeGraph& g) {
    for (int i = 0; i < g.n; ++i) {
        for (int j : g.adjacency[i]) {
            if (j == i) return false;
            const auto& back = g.adjacency[j];
            if (std::find(back.begin(), back.end(), i) == back.end()) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("shared categorical values create edges") {
    Cohort c = graph_cohort(4);
    KnowledgeGraph g = build_graph(c, {{RelationSpec::Kind::SharedCategorical, "family", 0, 0}},
                                   PruneConfig{8, std::nullopt});
    CHECK(g.adjacency[0] == std::vector<int>{2});  // both "iam"
    CHECK(g.adjacency[1] == std::vector<int>{3});  // both "net"
}

TEST_CASE("partition key drops cross-tenant edges") {
    Cohort c = graph_cohort(4);  // tenants: t1 t1 t2 t2, families alternate
    KnowledgeGraph g = build_graph(c, {{RelationSpec::Kind::SharedCategorical, "family", 0, 0}},
                                   PruneConfig{8, "tenant"});
    // family edges (0,2) and (1,3) both cross tenants
    for (int i = 0; i < g.n; ++i) CHECK(g.adjacency[i].empty());
}

TEST_CASE("degree cap retains edges by priority then tie rule") {
    Cohort c = graph_cohort(6);
    for (auto& p : c.instances) p.side_info.query_side["family"] = "iam";  // clique via family
    c.instances[0].metadata["pin"] = "x";
    c.instances[1].metadata["pin"] = "x";
    std::vector<RelationSpec> rels = {
        {RelationSpec::Kind::SharedCategorical, "family", 0, 5},
        {RelationSpec::Kind::MetadataEqual, "pin", 0, 0},
    };
    KnowledgeGraph g = build_graph(c, rels, PruneConfig{2, std::nullopt});
    for (int i = 0; i < g.n; ++i) CHECK(static_cast<int>(g.adjacency[i].size()) <= 2);
    // the priority-0 edge (0,1) survives capping
    CHECK(std::find(g.adjacency[0].begin(), g.adjacency[0].end(), 1) != g.adjacency[0].end());
    CHECK(is_symmetric(g));
}

TEST_CASE("knn relation uses cosine similarity and needs embeddings") {
    Cohort c = graph_cohort(4);
    CHECK_THROWS_AS(
        build_graph(c, {{RelationSpec::Kind::KnnEmbedding, "", 1, 0}}, PruneConfig{8, std::nullopt}),
        ConfigError);
    Eigen::MatrixXd pts(4, 2);
    pts << 1, 0, 0.9, 0.1, 0, 1, 0.1, 0.9;
    for (int i = 0; i < 4; ++i) c.instances[static_cast<std::size_t>(i)].embedding = pts.row(i).transpose();
    KnowledgeGraph g = build_graph(c, {{RelationSpec::Kind::KnnEmbedding, "", 1, 0}},
                                   PruneConfig{8, std::nullopt});
    CHECK(g.adjacency[0] == std::vector<int>{1});
    CHECK(g.adjacency[2] == std::vector<int>{3});
    CHECK(is_symmetric(g));
}

TEST_CASE("random graphs stay symmetric and capped") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 5 + static_cast<int>(rng.next_index(20));
        Cohort c = graph_cohort(n);
        for (auto& p : c.instances) {
            p.side_info.query_side["family"] = "f" + std::to_string(rng.next_index(3));
        }
        int cap = 1 + static_cast<int>(rng.next_index(4));
        KnowledgeGraph g = build_graph(c, {{RelationSpec::Kind::SharedCategorical, "family", 0, 0}},
                                       PruneConfig{cap, std::nullopt});
        CHECK(is_symmetric(g));
        for (int i = 0; i < g.n; ++i) CHECK(static_cast<int>(g.adjacency[i].size()) <= cap);
    }
}

TEST_CASE("neighbor sampling is bounded, exclusive and seed-deterministic") {
    Cohort c = graph_cohort(10);
    for (auto& p : c.instances) p.side_info.query_side["family"] = "iam";
    KnowledgeGraph g = build_graph(c, {{RelationSpec::Kind::SharedCategorical, "family", 0, 0}},
                                   PruneConfig{9, std::nullopt});

    Rng r1(7), r2(7);
    auto s1 = sample_neighbors(g, 0, 4, r1);
    auto s2 = sample_neighbors(g, 0, 4, r2);
    CHECK(s1 == s2);
    CHECK(s1.size() == 4);
    for (int j : s1) {
        CHECK(j != 0);
        CHECK(std::find(g.adjacency[0].begin(), g.adjacency[0].end(), j) != g.adjacency[0].end());
    }

    // up-to-k semantics and empty adjacency
    Rng r3(7);
    CHECK(sample_neighbors(g, 0, 100, r3).size() == g.adjacency[0].size());
    KnowledgeGraph empty;
    empty.n = 3;
    empty.adjacency.assign(3, {});
    Rng r4(7);
    CHECK(sample_neighbors(empty, 1, 4, r4).empty());
}

TEST_CASE("graph JSON round-trip") {
    Cohort c = graph_cohort(6);
    KnowledgeGraph g = build_graph(c, {{RelationSpec::Kind::SharedCategorical, "family", 0, 0}},
                                   PruneConfig{8, std::nullopt});
    KnowledgeGraph g2 = graph_from_json(graph_to_json(g));
    CHECK(g2.n == g.n);
    CHECK(g2.adjacency == g.adjacency);
}
