#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jaf/cohort.hpp"
#include "jaf/rng.hpp"

namespace jaf {

struct JudgeVerdict {
    enum class Label { Accept, Refine };
    Label label = Label::Accept;
    std::string critique;  // non-empty when label = Refine
    std::optional<std::string> raw;
};

struct JudgeRequest {
    QueryResponsePair focal;
    std::vector<std::pair<QueryResponsePair, std::string>> neighbors;  // pair + summary
    int round = 0;
    std::uint64_t salt = 0;  // per-call stream derivation for randomized judges
};

struct RefineRequest {
    std::string instance_id;
    std::string query;
    std::string prior_response;
    std::string critique;
    std::vector<std::pair<std::string, std::string>> history;  // (response, critique) per round
    std::uint64_t salt = 0;
};

class Judge {
public:
    virtual ~Judge() = default;
    virtual JudgeVerdict judge(const JudgeRequest& req) = 0;
};

class PrimaryAgent {
public:
    virtual ~PrimaryAgent() = default;
    virtual std::string refine(const RefineRequest& req) = 0;
};

// Synthetic world for desk-scale experiments: a hidden categorical truth per
// instance, a noisy primary, and a judge whose error shrinks as its neighbor
// context gets more reliable.
struct SimWorld {
    std::map<std::string, std::string> truth;
    double primary_error_rate = 0.5;  // epsilon_0
    double judge_error_rate = 0.3;    // epsilon_J
    double context_benefit = 0.8;     // beta
    double refine_adoption = 1.0;     // rho
    std::uint64_t seed = 0;
    std::vector<std::string> vocabulary;
};

// Extracts the claimed answer from an "ANSWER: <token>" response; empty
// string when absent.
std::string extract_answer(const std::string& response_text);

// Extracts the corrected answer from a "CORRECT_ANSWER: <token>" critique.
std::string extract_correction(const std::string& critique);

// Error model: effective error = eps_J * (1 - beta * neighbor_correct_fraction);
// the oracle decision (accept iff correct) flips with that probability. The
// critique carries the supplied truth when refining.
JudgeVerdict simulated_judge_decision(const SimWorld& world, bool focal_correct,
                                      double neighbor_correct_fraction, const std::string& truth,
                                      Rng& rng);

class SimulatedJudge : public Judge {
public:
    explicit SimulatedJudge(SimWorld world) : world_(std::move(world)) {}
    JudgeVerdict judge(const JudgeRequest& req) override;

private:
    SimWorld world_;
};

class SimulatedPrimary : public PrimaryAgent {
public:
    explicit SimulatedPrimary(SimWorld world) : world_(std::move(world)) {}
    std::string refine(const RefineRequest& req) override;

private:
    SimWorld world_;
};

// Synthetic cohort: queries asking for a required component, responses
// claiming one, the claimed component mirrored into the response-side
// "components" field. Returns the cohort and the world holding the truths.
std::pair<Cohort, SimWorld> make_sim_cohort(int n, double primary_error_rate,
                                            double judge_error_rate, double context_benefit,
                                            double refine_adoption, std::uint64_t seed);

// Re-derives the response-side overlap field from the current response text
// (used after refinement rounds change responses).
void refresh_sim_side_info(Cohort& cohort);

struct HttpAgentConfig {
    std::string endpoint;  // falls back to JAF_LLM_ENDPOINT
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;
    int max_retries = 2;
    double backoff_seconds = 0.5;
    std::string judge_template_path;   // optional; built-in default otherwise
    std::string refine_template_path;  // optional
    int summary_max_chars = 160;
};

// One chat-completion round trip; retries transient failures with
// exponential backoff. Throws AgentError on exhaustion or malformed replies.
std::string llm_chat(const HttpAgentConfig& cfg, const std::string& system_prompt,
                     const std::string& user_prompt);

// Parses the rigid two-line verdict protocol: a "VERDICT: ACCEPT" or
// "VERDICT: REFINE" line, then an optional block starting "CRITIQUE:".
JudgeVerdict parse_verdict(const std::string& text);

// Fills {focal_query}, {focal_response}, {neighbors} in a template.
std::string render_template(const std::string& templ,
                            const std::map<std::string, std::string>& values);

class HttpJudge : public Judge {
public:
    explicit HttpJudge(HttpAgentConfig cfg);
    JudgeVerdict judge(const JudgeRequest& req) override;

private:
    HttpAgentConfig cfg_;
    std::string template_;
};

class HttpPrimary : public PrimaryAgent {
public:
    explicit HttpPrimary(HttpAgentConfig cfg);
    std::string refine(const RefineRequest& req) override;

private:
    HttpAgentConfig cfg_;
    std::string template_;
};

}  // namespace jaf
