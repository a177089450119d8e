#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jaf/errors.hpp"

namespace jaf {

// Categorical side information, one value per schema field.
// The sentinel "unknown" is an ordinary value; downstream entropy code
// never branches on missingness.
struct SideInfo {
    std::map<std::string, std::string> query_side;
    std::map<std::string, std::string> response_side;

    bool operator==(const SideInfo&) const = default;
};

struct SideInfoSchema {
    std::vector<std::string> query_side;
    std::vector<std::string> response_side;

    bool operator==(const SideInfoSchema&) const = default;
};

// One instance (Q_i, R_i) plus side info, features, metadata.
struct QueryResponsePair {
    std::string id;
    std::string query_text;
    std::string response_text;
    SideInfo side_info;
    std::optional<Eigen::VectorXd> embedding;
    std::map<std::string, std::string> metadata;
};

bool operator==(const QueryResponsePair& a, const QueryResponsePair& b);

// Numeric part plus schema-ordered categorical values; layout fixed per cohort.
struct FeatureVector {
    Eigen::VectorXd numeric;
    std::vector<std::pair<std::string, std::string>> categorical;
};

bool operator==(const FeatureVector& a, const FeatureVector& b);

struct Cohort {
    std::string cohort_id;
    std::vector<QueryResponsePair> instances;
    SideInfoSchema schema;
    std::optional<int> embedding_dim;

    std::size_t size() const { return instances.size(); }
    // Index of the instance with the given id, or -1.
    int index_of(const std::string& id) const;
};

bool operator==(const Cohort& a, const Cohort& b);

// Field-extraction rules realizing the deterministic featurization map:
// copy a metadata key, regex-capture from the response text, or a constant.
struct ExtractionRule {
    enum class Kind { CopyMetadata, RegexCapture, Constant };
    Kind kind = Kind::Constant;
    std::string arg;  // metadata key / regex pattern (first capture group) / constant value
};

struct Extractor {
    std::map<std::string, ExtractionRule> query_side;
    std::map<std::string, ExtractionRule> response_side;
};

inline constexpr const char* kUnknownValue = "unknown";

Cohort load_cohort(const std::filesystem::path& path);
void save_cohort(const Cohort& cohort, const std::filesystem::path& path);

Cohort cohort_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json cohort_to_json(const Cohort& cohort);

// Validates all cohort invariants (unique ids, schema coverage,
// consistent embedding dimensions); throws SchemaError on violation.
void validate_cohort(const Cohort& cohort);

FeatureVector build_feature_vector(const QueryResponsePair& pair, const SideInfoSchema& schema);

SideInfo extract_side_info(const QueryResponsePair& pair, const Extractor& extractor);

// Looks a field up on either side (query side first); throws UnknownField.
const std::string& side_value(const QueryResponsePair& pair, const std::string& field);

// Splits a comma-separated side-info value into a value set.
// "unknown" and empty strings yield an empty set.
std::vector<std::string> split_value_set(const std::string& value);

Extractor extractor_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json extractor_to_json(const Extractor& extractor);

}  // namespace jaf
