#include "jaf/engine.hpp"

#include <algorithm>

namespace jaf {

std::vector<int> GraphSource::sample(int focal, Rng& rng) const {
    return sample_neighbors(graph_, focal, k_, rng);
}

void LshSource::prepare(const Cohort& cohort) {
    index_ = bucket_index(assign_codes(forest_, features_of(cohort)));
}

std::vector<int> LshSource::sample(int focal, Rng& rng) const {
    return sample_lsh_neighborhood(index_, focal, cfg_, rng);
}

std::vector<int> LabelOverlapSource::sample(int focal, Rng& rng) const {
    return sample_label_neighborhood(*cohort_, focal, cfg_, rng);
}

namespace {

std::string neighbor_summary(const QueryResponsePair& pair) {
    std::string out;
    for (const auto& [field, value] : pair.side_info.response_side) {
        if (!out.empty()) out += ", ";
        out += field + "=" + value;
    }
    return out;
}

JudgeRequest make_request(const Cohort& cohort, int focal, const std::vector<int>& neighbors,
                          int round, std::uint64_t salt) {
    JudgeRequest req;
    req.focal = cohort.instances[static_cast<std::size_t>(focal)];
    for (int j : neighbors) {
        const auto& p = cohort.instances[static_cast<std::size_t>(j)];
        req.neighbors.emplace_back(p, neighbor_summary(p));
    }
    req.round = round;
    req.salt = salt;
    return req;
}

const char* label_name(JudgeVerdict::Label l) {
    return l == JudgeVerdict::Label::Accept ? "accept" : "refine";
}

}  // namespace

std::vector<JudgeVerdict> run_single_pass(const Cohort& cohort, NeighborSource& source,
                                          Judge& judge, std::uint64_t seed) {
    source.prepare(cohort);
    std::vector<JudgeVerdict> verdicts;
    verdicts.reserve(cohort.size());
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const std::string& id = cohort.instances[i].id;
        Rng nbr_rng(derive_stream(seed, "nbr:" + id + ":0"));
        std::vector<int> neighbors = source.sample(static_cast<int>(i), nbr_rng);
        JudgeRequest req = make_request(cohort, static_cast<int>(i), neighbors, 0,
                                        derive_stream(seed, "judge:" + id + ":0"));
        try {
            verdicts.push_back(judge.judge(req));
        } catch (const AgentError& e) {
            throw AgentError("instance " + id + ": " + e.what());
        }
    }
    return verdicts;
}

RefinementTrace run_refinement(Cohort& cohort, PrimaryAgent& primary, Judge& judge,
                               NeighborSource& source, const RefinementConfig& cfg) {
    if (cfg.t_min < 1 || cfg.t_min > cfg.t_max) {
        throw ConfigError("refinement requires 1 <= t_min <= t_max");
    }
    const std::size_t n = cohort.size();
    std::vector<bool> frozen(n, false);
    std::vector<int> accept_count(n, 0);
    std::vector<std::vector<std::pair<std::string, std::string>>> history(n);

    RefinementTrace trace;
    trace.t_star = cfg.t_max - 1;

    for (int t = 0; t < cfg.t_max; ++t) {
        bool all_frozen = std::all_of(frozen.begin(), frozen.end(), [](bool f) { return f; });
        if (all_frozen) break;

        if (cfg.refresh_side_info) cfg.refresh_side_info(cohort);
        source.prepare(cohort);

        // Judging loop: no state mutation until every active instance has a
        // verdict and every refinement has a staged response, so an
        // AgentError aborts the round atomically.
        struct Staged {
            std::size_t index;
            JudgeVerdict verdict;
            std::vector<int> neighbors;
            std::string new_response;
        };
        std::vector<Staged> staged;
        for (std::size_t i = 0; i < n; ++i) {
            if (frozen[i]) continue;
            const std::string& id = cohort.instances[i].id;
            Rng nbr_rng(derive_stream(cfg.seed, "nbr:" + id + ":" + std::to_string(t)));
            std::vector<int> neighbors = source.sample(static_cast<int>(i), nbr_rng);
            JudgeRequest req =
                make_request(cohort, static_cast<int>(i), neighbors, t,
                             derive_stream(cfg.seed, "judge:" + id + ":" + std::to_string(t)));
            try {
                staged.push_back({i, judge.judge(req), std::move(neighbors), {}});
            } catch (const AgentError& e) {
                throw AgentError("round " + std::to_string(t) + ", instance " + id + ": " +
                                 e.what());
            }
        }
        for (auto& s : staged) {
            if (s.verdict.label != JudgeVerdict::Label::Refine) continue;
            const auto& inst = cohort.instances[s.index];
            RefineRequest req;
            req.instance_id = inst.id;
            req.query = inst.query_text;
            req.prior_response = inst.response_text;
            req.critique = s.verdict.critique;
            req.history = history[s.index];
            req.salt = derive_stream(cfg.seed, "refine:" + inst.id + ":" + std::to_string(t));
            try {
                s.new_response = primary.refine(req);
            } catch (const AgentError& e) {
                throw AgentError("round " + std::to_string(t) + ", instance " + inst.id + ": " +
                                 e.what());
            }
        }

        // Commit loop.
        RoundRecord record;
        record.round = t;
        for (auto& s : staged) {
            auto& inst = cohort.instances[s.index];
            VerdictRecord v;
            v.id = inst.id;
            v.label = s.verdict.label;
            v.critique = s.verdict.critique;
            for (int j : s.neighbors) {
                v.neighbor_ids.push_back(cohort.instances[static_cast<std::size_t>(j)].id);
            }
            record.verdicts.push_back(std::move(v));
            ++trace.judge_calls;

            if (s.verdict.label == JudgeVerdict::Label::Accept) {
                if (++accept_count[s.index] >= cfg.t_min) frozen[s.index] = true;
            } else {
                accept_count[s.index] = 0;
                history[s.index].emplace_back(inst.response_text, s.verdict.critique);
                inst.response_text = s.new_response;
            }
        }
        trace.rounds.push_back(std::move(record));
        trace.t_star = t;
    }

    for (const auto& inst : cohort.instances) {
        trace.final_responses.emplace_back(inst.id, inst.response_text);
    }
    return trace;
}

AcceptanceProfile evaluate_probabilistic(const Cohort& final_cohort, Judge& judge,
                                         NeighborSource& source, int runs, std::uint64_t seed) {
    if (runs < 1) throw ConfigError("evaluation requires runs >= 1");
    source.prepare(final_cohort);

    AcceptanceProfile profile;
    profile.runs = runs;
    for (std::size_t i = 0; i < final_cohort.size(); ++i) {
        const std::string& id = final_cohort.instances[i].id;
        int accepts = 0;
        for (int r = 0; r < runs; ++r) {
            Rng nbr_rng(derive_stream(seed, "eval:" + id + ":" + std::to_string(r)));
            std::vector<int> neighbors = source.sample(static_cast<int>(i), nbr_rng);
            JudgeRequest req =
                make_request(final_cohort, static_cast<int>(i), neighbors, 0,
                             derive_stream(seed, "evalj:" + id + ":" + std::to_string(r)));
            try {
                if (judge.judge(req).label == JudgeVerdict::Label::Accept) ++accepts;
            } catch (const AgentError& e) {
                throw AgentError("run " + std::to_string(r) + ", instance " + id + ": " + e.what());
            }
        }
        profile.ids.push_back(id);
        profile.accepts.push_back(accepts);
        profile.p_hat.push_back(static_cast<double>(accepts) / runs);
    }
    return profile;
}

nlohmann::ordered_json trace_to_json(const RefinementTrace& trace) {
    nlohmann::ordered_json j;
    j["t_star"] = trace.t_star;
    j["judge_calls"] = trace.judge_calls;
    auto rounds = nlohmann::ordered_json::array();
    for (const auto& round : trace.rounds) {
        nlohmann::ordered_json jr;
        jr["round"] = round.round;
        auto verdicts = nlohmann::ordered_json::array();
        for (const auto& v : round.verdicts) {
            verdicts.push_back({{"id", v.id},
                                {"label", label_name(v.label)},
                                {"critique", v.critique},
                                {"neighbors", v.neighbor_ids}});
        }
        jr["verdicts"] = std::move(verdicts);
        rounds.push_back(std::move(jr));
    }
    j["rounds"] = std::move(rounds);
    auto finals = nlohmann::ordered_json::array();
    for (const auto& [id, response] : trace.final_responses) {
        finals.push_back({{"id", id}, {"response", response}});
    }
    j["final_responses"] = std::move(finals);
    return j;
}

nlohmann::ordered_json profile_to_json(const AcceptanceProfile& profile) {
    nlohmann::ordered_json j;
    j["runs"] = profile.runs;
    auto instances = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < profile.ids.size(); ++i) {
        instances.push_back({{"id", profile.ids[i]},
                             {"accepts", profile.accepts[i]},
                             {"p_hat", profile.p_hat[i]}});
    }
    j["instances"] = std::move(instances);
    return j;
}

AcceptanceProfile profile_from_json(const nlohmann::ordered_json& j) {
    AcceptanceProfile p;
    try {
        p.runs = j.at("runs").get<int>();
        for (const auto& ji : j.at("instances")) {
            p.ids.push_back(ji.at("id").get<std::string>());
            p.accepts.push_back(ji.at("accepts").get<int>());
            p.p_hat.push_back(ji.at("p_hat").get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed profile JSON: ") + e.what());
    }
    return p;
}

std::string verdicts_to_jsonl(const RefinementTrace& trace) {
    std::string out;
    for (const auto& round : trace.rounds) {
        for (const auto& v : round.verdicts) {
            nlohmann::ordered_json j = {{"round", round.round},
                                        {"id", v.id},
                                        {"label", label_name(v.label)},
                                        {"critique", v.critique}};
            out += j.dump() + "\n";
        }
    }
    return out;
}

}  // namespace jaf
