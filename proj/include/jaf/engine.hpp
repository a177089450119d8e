#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "jaf/agents.hpp"
#include "jaf/cohort.hpp"
#include "jaf/hash_forest.hpp"
#include "jaf/knowledge_graph.hpp"
#include "jaf/neighborhood.hpp"

namespace jaf {

// Per-round neighbor provider. prepare() is called with the current cohort
// before each round so response-derived features stay fresh; sample() draws
// one neighborhood from the caller's stream.
class NeighborSource {
public:
    virtual ~NeighborSource() = default;
    virtual void prepare(const Cohort& cohort) = 0;
    virtual std::vector<int> sample(int focal, Rng& rng) const = 0;
};

class GraphSource : public NeighborSource {
public:
    GraphSource(KnowledgeGraph graph, int k) : graph_(std::move(graph)), k_(k) {}
    void prepare(const Cohort& cohort) override {}
    std::vector<int> sample(int focal, Rng& rng) const override;

private:
    KnowledgeGraph graph_;
    int k_;
};

// LSH buckets with predicates held fixed; codes are recomputed from the
// updated cohort on every prepare().
class LshSource : public NeighborSource {
public:
    LshSource(HashForest forest, SamplerConfig cfg)
        : forest_(std::move(forest)), cfg_(std::move(cfg)) {}
    void prepare(const Cohort& cohort) override;
    std::vector<int> sample(int focal, Rng& rng) const override;

private:
    HashForest forest_;
    SamplerConfig cfg_;
    BucketIndex index_;
};

class LabelOverlapSource : public NeighborSource {
public:
    explicit LabelOverlapSource(SamplerConfig cfg) : cfg_(std::move(cfg)) {}
    void prepare(const Cohort& cohort) override { cohort_ = &cohort; }
    std::vector<int> sample(int focal, Rng& rng) const override;

private:
    SamplerConfig cfg_;
    const Cohort* cohort_ = nullptr;
};

// Empty neighborhoods everywhere (isolated judging baseline).
class IsolatedSource : public NeighborSource {
public:
    void prepare(const Cohort& cohort) override {}
    std::vector<int> sample(int focal, Rng& rng) const override { return {}; }
};

struct RefinementConfig {
    int t_min = 1;
    int t_max = 5;
    std::uint64_t seed = 0;
    // Re-derives side info from current responses before each prepare();
    // needed when the overlap field or hash features come from responses.
    std::function<void(Cohort&)> refresh_side_info;
};

struct VerdictRecord {
    std::string id;
    JudgeVerdict::Label label = JudgeVerdict::Label::Accept;
    std::string critique;
    std::vector<std::string> neighbor_ids;
};

struct RoundRecord {
    int round = 0;
    std::vector<VerdictRecord> verdicts;  // active instances only, cohort order
};

struct RefinementTrace {
    std::vector<RoundRecord> rounds;
    int t_star = 0;
    std::vector<std::pair<std::string, std::string>> final_responses;  // (id, R_i^*)
    int judge_calls = 0;
};

struct AcceptanceProfile {
    std::vector<std::string> ids;
    std::vector<int> accepts;
    int runs = 0;
    std::vector<double> p_hat;
};

// One judge call per instance over the prepared source; verdicts in cohort
// order.
std::vector<JudgeVerdict> run_single_pass(const Cohort& cohort, NeighborSource& source,
                                          Judge& judge, std::uint64_t seed);

// Iterative refinement with per-instance freezing. Rounds are atomic: an
// AgentError aborts the round with no partial state updates.
RefinementTrace run_refinement(Cohort& cohort, PrimaryAgent& primary, Judge& judge,
                               NeighborSource& source, const RefinementConfig& cfg);

// R independent randomized judge evaluations per instance over fixed
// responses; p_hat = accepts / runs.
AcceptanceProfile evaluate_probabilistic(const Cohort& final_cohort, Judge& judge,
                                         NeighborSource& source, int runs, std::uint64_t seed);

nlohmann::ordered_json trace_to_json(const RefinementTrace& trace);
nlohmann::ordered_json profile_to_json(const AcceptanceProfile& profile);
AcceptanceProfile profile_from_json(const nlohmann::ordered_json& j);

// One JSON object per judge verdict, for audit logs.
std::string verdicts_to_jsonl(const RefinementTrace& trace);

}  // namespace jaf
