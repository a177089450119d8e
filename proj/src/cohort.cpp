#include "jaf/cohort.hpp"

#include <fstream>
#include <regex>
#include <sstream>

namespace jaf {

bool operator==(const QueryResponsePair& a, const QueryResponsePair& b) {
    bool emb_equal = a.embedding.has_value() == b.embedding.has_value() &&
                     (!a.embedding || *a.embedding == *b.embedding);
    return a.id == b.id && a.query_text == b.query_text && a.response_text == b.response_text &&
           a.side_info == b.side_info && emb_equal && a.metadata == b.metadata;
}

bool operator==(const FeatureVector& a, const FeatureVector& b) {
    return a.numeric == b.numeric && a.categorical == b.categorical;
}

bool operator==(const Cohort& a, const Cohort& b) {
    return a.cohort_id == b.cohort_id && a.instances == b.instances && a.schema == b.schema &&
           a.embedding_dim == b.embedding_dim;
}

int Cohort::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i].id == id) return static_cast<int>(i);
    }
    return -1;
}

namespace {

std::map<std::string, std::string> string_map_from_json(const nlohmann::ordered_json& j) {
    std::map<std::string, std::string> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        out[it.key()] = it.value().get<std::string>();
    }
    return out;
}

}  // namespace

Cohort cohort_from_json(const nlohmann::ordered_json& j) {
    Cohort c;
    try {
        c.cohort_id = j.at("cohort_id").get<std::string>();
        if (!j.at("embedding_dim").is_null()) {
            c.embedding_dim = j.at("embedding_dim").get<int>();
        }
        const auto& schema = j.at("schema");
        c.schema.query_side = schema.at("query_side").get<std::vector<std::string>>();
        c.schema.response_side = schema.at("response_side").get<std::vector<std::string>>();
        for (const auto& ji : j.at("instances")) {
            QueryResponsePair p;
            p.id = ji.at("id").get<std::string>();
            p.query_text = ji.at("query").get<std::string>();
            p.response_text = ji.at("response").get<std::string>();
            const auto& si = ji.at("side_info");
            p.side_info.query_side = string_map_from_json(si.at("query_side"));
            p.side_info.response_side = string_map_from_json(si.at("response_side"));
            if (ji.contains("embedding") && !ji.at("embedding").is_null()) {
                auto vals = ji.at("embedding").get<std::vector<double>>();
                p.embedding = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<long>(vals.size()));
            }
            if (ji.contains("metadata")) {
                p.metadata = string_map_from_json(ji.at("metadata"));
            }
            c.instances.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed cohort JSON: ") + e.what());
    }
    validate_cohort(c);
    return c;
}

nlohmann::ordered_json cohort_to_json(const Cohort& cohort) {
    nlohmann::ordered_json j;
    j["cohort_id"] = cohort.cohort_id;
    if (cohort.embedding_dim) {
        j["embedding_dim"] = *cohort.embedding_dim;
    } else {
        j["embedding_dim"] = nullptr;
    }
    j["schema"] = {{"query_side", cohort.schema.query_side},
                   {"response_side", cohort.schema.response_side}};
    auto instances = nlohmann::ordered_json::array();
    for (const auto& p : cohort.instances) {
        nlohmann::ordered_json ji;
        ji["id"] = p.id;
        ji["query"] = p.query_text;
        ji["response"] = p.response_text;
        ji["side_info"] = {{"query_side", p.side_info.query_side},
                           {"response_side", p.side_info.response_side}};
        if (p.embedding) {
            std::vector<double> vals(p.embedding->data(), p.embedding->data() + p.embedding->size());
            ji["embedding"] = vals;
        } else {
            ji["embedding"] = nullptr;
        }
        ji["metadata"] = p.metadata;
        instances.push_back(std::move(ji));
    }
    j["instances"] = std::move(instances);
    return j;
}

Cohort load_cohort(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open cohort file: " + path.string());
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed JSON in ") + path.string() + ": " + e.what());
    }
    return cohort_from_json(j);
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write cohort file: " + path.string());
    out << cohort_to_json(cohort).dump(2) << "\n";
}

void validate_cohort(const Cohort& cohort) {
    if (cohort.instances.empty()) throw SchemaError("cohort must be non-empty");
    std::map<std::string, int> seen;
    for (const auto& p : cohort.instances) {
        if (++seen[p.id] > 1) throw SchemaError("duplicate instance id: " + p.id);
        for (const auto& f : cohort.schema.query_side) {
            if (!p.side_info.query_side.count(f)) {
                throw SchemaError("instance " + p.id + " missing query-side field " + f);
            }
        }
        for (const auto& f : cohort.schema.response_side) {
            if (!p.side_info.response_side.count(f)) {
                throw SchemaError("instance " + p.id + " missing response-side field " + f);
            }
        }
    }
    std::optional<long> dim;
    bool any_with = false, any_without = false;
    for (const auto& p : cohort.instances) {
        if (p.embedding) {
            any_with = true;
            if (dim && *dim != p.embedding->size()) {
                throw SchemaError("inconsistent embedding dimensions in cohort");
            }
            dim = p.embedding->size();
        } else {
            any_without = true;
        }
    }
    if (any_with && any_without) {
        throw SchemaError("either all instances carry embeddings or none do");
    }
    if (cohort.embedding_dim && dim && *dim != *cohort.embedding_dim) {
        throw SchemaError("embedding_dim does not match instance embeddings");
    }
    if (cohort.embedding_dim && !any_with) {
        throw SchemaError("embedding_dim declared but instances carry no embeddings");
    }
    for (const auto& p : cohort.instances) {
        if (p.embedding && !p.embedding->allFinite()) {
            throw SchemaError("non-finite embedding on instance " + p.id);
        }
    }
}

FeatureVector build_feature_vector(const QueryResponsePair& pair, const SideInfoSchema& schema) {
    FeatureVector fv;
    fv.numeric = pair.embedding.value_or(Eigen::VectorXd());
    for (const auto& f : schema.query_side) {
        auto it = pair.side_info.query_side.find(f);
        if (it == pair.side_info.query_side.end()) {
            throw SchemaError("field missing from pair: " + f);
        }
        fv.categorical.emplace_back(f, it->second);
    }
    for (const auto& f : schema.response_side) {
        auto it = pair.side_info.response_side.find(f);
        if (it == pair.side_info.response_side.end()) {
            throw SchemaError("field missing from pair: " + f);
        }
        fv.categorical.emplace_back(f, it->second);
    }
    return fv;
}

namespace {

std::string apply_rule(const QueryResponsePair& pair, const ExtractionRule& rule) {
    switch (rule.kind) {
        case ExtractionRule::Kind::CopyMetadata: {
            auto it = pair.metadata.find(rule.arg);
            return it != pair.metadata.end() ? it->second : kUnknownValue;
        }
        case ExtractionRule::Kind::RegexCapture: {
            std::regex re(rule.arg);
            std::smatch m;
            if (std::regex_search(pair.response_text, m, re) && m.size() > 1) {
                return m[1].str();
            }
            return kUnknownValue;
        }
        case ExtractionRule::Kind::Constant:
            return rule.arg;
    }
    return kUnknownValue;
}

}  // namespace

SideInfo extract_side_info(const QueryResponsePair& pair, const Extractor& extractor) {
    SideInfo si;
    for (const auto& [field, rule] : extractor.query_side) {
        si.query_side[field] = apply_rule(pair, rule);
    }
    for (const auto& [field, rule] : extractor.response_side) {
        si.response_side[field] = apply_rule(pair, rule);
    }
    return si;
}

const std::string& side_value(const QueryResponsePair& pair, const std::string& field) {
    auto it = pair.side_info.query_side.find(field);
    if (it != pair.side_info.query_side.end()) return it->second;
    it = pair.side_info.response_side.find(field);
    if (it != pair.side_info.response_side.end()) return it->second;
    throw UnknownField("field not present on instance " + pair.id + ": " + field);
}

std::vector<std::string> split_value_set(const std::string& value) {
    std::vector<std::string> out;
    if (value.empty() || value == kUnknownValue) return out;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        // trim spaces
        std::size_t a = tok.find_first_not_of(' ');
        std::size_t b = tok.find_last_not_of(' ');
        if (a == std::string::npos) continue;
        out.push_back(tok.substr(a, b - a + 1));
    }
    return out;
}

namespace {

ExtractionRule rule_from_json(const nlohmann::ordered_json& j) {
    ExtractionRule r;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "copy-metadata") {
        r.kind = ExtractionRule::Kind::CopyMetadata;
    } else if (kind == "regex") {
        r.kind = ExtractionRule::Kind::RegexCapture;
    } else if (kind == "constant") {
        r.kind = ExtractionRule::Kind::Constant;
    } else {
        throw ConfigError("unknown extraction rule kind: " + kind);
    }
    r.arg = j.at("arg").get<std::string>();
    return r;
}

nlohmann::ordered_json rule_to_json(const ExtractionRule& r) {
    const char* kind = r.kind == ExtractionRule::Kind::CopyMetadata ? "copy-metadata"
                       : r.kind == ExtractionRule::Kind::RegexCapture ? "regex"
                                                                      : "constant";
    return {{"kind", kind}, {"arg", r.arg}};
}

}  // namespace

Extractor extractor_from_json(const nlohmann::ordered_json& j) {
    Extractor e;
    if (j.contains("query_side")) {
        for (auto it = j.at("query_side").begin(); it != j.at("query_side").end(); ++it) {
            e.query_side[it.key()] = rule_from_json(it.value());
        }
    }
    if (j.contains("response_side")) {
        for (auto it = j.at("response_side").begin(); it != j.at("response_side").end(); ++it) {
            e.response_side[it.key()] = rule_from_json(it.value());
        }
    }
    return e;
}

nlohmann::ordered_json extractor_to_json(const Extractor& extractor) {
    nlohmann::ordered_json q = nlohmann::ordered_json::object();
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (const auto& [f, rule] : extractor.query_side) q[f] = rule_to_json(rule);
    for (const auto& [f, rule] : extractor.response_side) r[f] = rule_to_json(rule);
    return {{"query_side", q}, {"response_side", r}};
}

}  // namespace jaf
