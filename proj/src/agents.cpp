#include "jaf/agents.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace jaf {

std::string extract_answer(const std::string& response_text) {
    static const std::regex re(R"((?:^|[^A-Z_])ANSWER:\s*([A-Za-z0-9_]+))");
    std::smatch m;
    if (std::regex_search(response_text, m, re)) return m[1].str();
    return "";
}

std::string extract_correction(const std::string& critique) {
    static const std::regex re(R"(CORRECT_ANSWER:\s*([A-Za-z0-9_]+))");
    std::smatch m;
    if (std::regex_search(critique, m, re)) return m[1].str();
    return "";
}

JudgeVerdict simulated_judge_decision(const SimWorld& world, bool focal_correct,
                                      double neighbor_correct_fraction, const std::string& truth,
                                      Rng& rng) {
    double effective_error =
        world.judge_error_rate * (1.0 - world.context_benefit * neighbor_correct_fraction);
    bool flip = rng.next_double() < effective_error;
    bool accept = focal_correct != flip;
    JudgeVerdict v;
    if (accept) {
        v.label = JudgeVerdict::Label::Accept;
    } else {
        v.label = JudgeVerdict::Label::Refine;
        v.critique = "CORRECT_ANSWER: " + truth;
    }
    return v;
}

JudgeVerdict SimulatedJudge::judge(const JudgeRequest& req) {
    auto it = world_.truth.find(req.focal.id);
    if (it == world_.truth.end()) {
        throw AgentError("simulated judge has no truth for instance " + req.focal.id);
    }
    const std::string& truth = it->second;
    bool focal_correct = extract_answer(req.focal.response_text) == truth;
    double fraction = 0.0;
    if (!req.neighbors.empty()) {
        int correct = 0;
        for (const auto& [pair, summary] : req.neighbors) {
            auto nt = world_.truth.find(pair.id);
            if (nt != world_.truth.end() && extract_answer(pair.response_text) == nt->second) {
                ++correct;
            }
        }
        fraction = static_cast<double>(correct) / static_cast<double>(req.neighbors.size());
    }
    Rng rng(derive_stream(world_.seed ^ req.salt, "sim-judge"));
    return simulated_judge_decision(world_, focal_correct, fraction, truth, rng);
}

std::string SimulatedPrimary::refine(const RefineRequest& req) {
    std::string correction = extract_correction(req.critique);
    if (correction.empty()) return req.prior_response;
    Rng rng(derive_stream(world_.seed ^ req.salt, "sim-primary"));
    if (rng.next_double() < world_.refine_adoption) {
        return "ANSWER: " + correction;
    }
    return req.prior_response;
}

namespace {

const std::vector<std::string> kSimVocabulary = {
    "etcd", "nginx", "redis", "postgres", "kafka",
    "vault", "consul", "envoy", "grafana", "prometheus"};

}  // namespace

std::pair<Cohort, SimWorld> make_sim_cohort(int n, double primary_error_rate,
                                            double judge_error_rate, double context_benefit,
                                            double refine_adoption, std::uint64_t seed) {
    SimWorld world;
    world.primary_error_rate = primary_error_rate;
    world.judge_error_rate = judge_error_rate;
    world.context_benefit = context_benefit;
    world.refine_adoption = refine_adoption;
    world.seed = seed;
    world.vocabulary = kSimVocabulary;

    Cohort cohort;
    cohort.cohort_id = "sim-" + std::to_string(seed);
    cohort.schema.response_side = {"components"};

    Rng rng(derive_stream(seed, "sim-cohort"));
    for (int i = 0; i < n; ++i) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "inst-%04d", i);
        QueryResponsePair p;
        p.id = idbuf;
        p.query_text = "Which component does service svc-" + std::to_string(i) + " require?";
        const std::string& truth = world.vocabulary[rng.next_index(world.vocabulary.size())];
        world.truth[p.id] = truth;
        std::string answer = truth;
        if (rng.next_double() < primary_error_rate) {
            std::size_t off = 1 + rng.next_index(world.vocabulary.size() - 1);
            for (std::size_t v = 0; v < world.vocabulary.size(); ++v) {
                if (world.vocabulary[v] == truth) {
                    answer = world.vocabulary[(v + off) % world.vocabulary.size()];
                    break;
                }
            }
        }
        p.response_text = "ANSWER: " + answer;
        p.metadata["service"] = "svc-" + std::to_string(i);
        cohort.instances.push_back(std::move(p));
    }
    refresh_sim_side_info(cohort);
    validate_cohort(cohort);
    return {std::move(cohort), std::move(world)};
}

void refresh_sim_side_info(Cohort& cohort) {
    for (auto& p : cohort.instances) {
        std::string a = extract_answer(p.response_text);
        p.side_info.response_side["components"] = a.empty() ? kUnknownValue : a;
    }
}

std::string render_template(const std::string& templ,
                            const std::map<std::string, std::string>& values) {
    std::string out = templ;
    for (const auto& [name, value] : values) {
        std::string token = "{" + name + "}";
        std::size_t pos = 0;
        while ((pos = out.find(token, pos)) != std::string::npos) {
            out.replace(pos, token.size(), value);
            pos += value.size();
        }
    }
    return out;
}

JudgeVerdict parse_verdict(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::optional<JudgeVerdict::Label> label;
    std::string critique;
    bool in_critique = false;
    auto rstrip = [](std::string s) {
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
        return s;
    };
    while (std::getline(in, line)) {
        line = rstrip(line);
        if (!label) {
            if (line == "VERDICT: ACCEPT") label = JudgeVerdict::Label::Accept;
            if (line == "VERDICT: REFINE") label = JudgeVerdict::Label::Refine;
            continue;
        }
        if (!in_critique) {
            if (line.rfind("CRITIQUE:", 0) == 0) {
                in_critique = true;
                critique = line.substr(9);
                if (!critique.empty() && critique.front() == ' ') critique.erase(0, 1);
            }
            continue;
        }
        critique += "\n" + line;
    }
    if (!label) throw ParseError("no VERDICT line in judge reply");
    if (*label == JudgeVerdict::Label::Refine && critique.empty()) {
        throw ParseError("REFINE verdict without a CRITIQUE block");
    }
    JudgeVerdict v;
    v.label = *label;
    v.critique = critique;
    v.raw = text;
    return v;
}

namespace {

std::string load_template(const std::string& path, const char* fallback) {
    if (path.empty()) return fallback;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read prompt template: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kJudgeTemplate = R"(Review the focal query-response pair. Peer pairs from the same cohort are
included for context; look for cross-instance inconsistencies.

Focal query:
{focal_query}

Focal response:
{focal_response}

Peers:
{neighbors}

Reply with exactly one line "VERDICT: ACCEPT" or "VERDICT: REFINE",
and when refining add a block starting "CRITIQUE:" explaining what to fix.
)";

const char* kRefineTemplate = R"(Revise your previous response to the query below using the reviewer critique.

Query:
{focal_query}

Previous response:
{focal_response}

Critique:
{critique}

Earlier attempts:
{history}

Reply with the revised response only.
)";

std::string truncate(const std::string& s, int max_chars) {
    if (static_cast<int>(s.size()) <= max_chars) return s;
    return s.substr(0, static_cast<std::size_t>(max_chars)) + "...";
}

}  // namespace

std::string llm_chat(const HttpAgentConfig& cfg, const std::string& system_prompt,
                     const std::string& user_prompt) {
    std::string endpoint = cfg.endpoint;
    if (endpoint.empty()) {
        const char* env = std::getenv("JAF_LLM_ENDPOINT");
        if (env) endpoint = env;
    }
    if (endpoint.empty()) throw AgentError("no LLM endpoint configured");

    // Split "scheme://host:port/path" into client base and request path.
    std::size_t scheme_end = endpoint.find("://");
    std::size_t path_start =
        endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    std::string base = path_start == std::string::npos ? endpoint : endpoint.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/v1/chat/completions"
                                                       : endpoint.substr(path_start);

    nlohmann::ordered_json body;
    body["model"] = cfg.model;
    body["messages"] = {{{"role", "system"}, {"content", system_prompt}},
                        {{"role", "user"}, {"content", user_prompt}}};
    body["temperature"] = cfg.temperature;

    httplib::Headers headers;
    if (const char* key = std::getenv("JAF_LLM_API_KEY")) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = cfg.backoff_seconds * std::pow(2.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        httplib::Client client(base);
        client.set_read_timeout(60, 0);
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            auto j = nlohmann::ordered_json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw AgentError(std::string("malformed completion response: ") + e.what());
        }
    }
    throw AgentError("chat completion failed after retries: " + last_error);
}

HttpJudge::HttpJudge(HttpAgentConfig cfg) : cfg_(std::move(cfg)) {
    template_ = load_template(cfg_.judge_template_path, kJudgeTemplate);
}

JudgeVerdict HttpJudge::judge(const JudgeRequest& req) {
    std::string neighbors;
    if (req.neighbors.empty()) {
        neighbors = "(none)";
    } else {
        for (const auto& [pair, summary] : req.neighbors) {
            neighbors += "- [" + pair.id + "] Q: " + truncate(pair.query_text, cfg_.summary_max_chars) +
                         " | R: " + truncate(pair.response_text, cfg_.summary_max_chars);
            if (!summary.empty()) neighbors += " | " + summary;
            neighbors += "\n";
        }
    }
    std::string prompt = render_template(template_, {{"focal_query", req.focal.query_text},
                                                     {"focal_response", req.focal.response_text},
                                                     {"neighbors", neighbors}});
    const std::string system_prompt = "You judge query-response pairs for correctness.";
    std::string reply = llm_chat(cfg_, system_prompt, prompt);
    try {
        return parse_verdict(reply);
    } catch (const ParseError&) {
        // one re-prompt with a format reminder before giving up
        std::string retry_prompt =
            prompt + "\nYour previous reply did not follow the format. Start with a line "
                     "\"VERDICT: ACCEPT\" or \"VERDICT: REFINE\".";
        reply = llm_chat(cfg_, system_prompt, retry_prompt);
        try {
            return parse_verdict(reply);
        } catch (const ParseError& e) {
            throw AgentError(std::string("unparseable judge verdict: ") + e.what());
        }
    }
}

HttpPrimary::HttpPrimary(HttpAgentConfig cfg) : cfg_(std::move(cfg)) {
    template_ = load_template(cfg_.refine_template_path, kRefineTemplate);
}

std::string HttpPrimary::refine(const RefineRequest& req) {
    std::string history;
    if (req.history.empty()) {
        history = "(none)";
    } else {
        for (const auto& [response, critique] : req.history) {
            history += "- response: " + truncate(response, cfg_.summary_max_chars) +
                       " | critique: " + truncate(critique, cfg_.summary_max_chars) + "\n";
        }
    }
    std::string prompt = render_template(template_, {{"focal_query", req.query},
                                                     {"focal_response", req.prior_response},
                                                     {"critique", req.critique},
                                                     {"history", history}});
    return llm_chat(cfg_, "You revise responses based on reviewer critiques.", prompt);
}

}  // namespace jaf
