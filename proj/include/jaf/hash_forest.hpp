#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jaf/cohort.hpp"
#include "jaf/dual_divergence.hpp"

namespace jaf {

// One binary hash predicate. active_region lists (predicate index, required
// bit) constraints on earlier predicates; empty means global. A predicate is
// inert (masked) on instances outside its region.
struct HashPredicate {
    enum class Kind { DivergenceSplit, Ood, Categorical };
    enum class ThresholdKind { Smooth, Max };

    Kind kind = Kind::Categorical;
    std::optional<DualScorer> scorer;  // divergence-split / ood
    double cut = 0.0;                  // divergence-split
    double threshold = 0.0;            // ood
    ThresholdKind threshold_kind = ThresholdKind::Max;
    std::string field;  // categorical
    std::string value;  // categorical
    std::vector<std::pair<int, int>> active_region;

    // Raw 0/1 evaluation, ignoring the active region.
    int evaluate(const FeatureVector& x) const;
};

struct OodThresholds {
    double tau_smooth = 0.0;
    double tau_max = 0.0;
};

struct HashCode {
    std::vector<std::uint8_t> bits;
    std::vector<std::uint8_t> active_mask;

    // Masked bit string: '0'/'1' where active, with inactive bits forced to
    // '0' so instances sharing a realized path share a key.
    std::string bucket_key() const;
};

struct HashForest {
    std::vector<HashPredicate> predicates;

    std::size_t size() const { return predicates.size(); }
    nlohmann::ordered_json to_json() const;
    static HashForest from_json(const nlohmann::ordered_json& j);
};

// Column-major view of a cohort for forest training.
struct CohortFeatures {
    Eigen::MatrixXd numeric;                       // n x d, d may be 0
    std::vector<std::string> fields;               // categorical field names
    std::vector<std::vector<std::string>> values;  // one column per field, n rows each

    std::size_t rows() const;
    FeatureVector row(int i) const;
};

CohortFeatures features_of(const Cohort& cohort);

struct CodeMetrics {
    std::vector<double> bit_entropies;  // nats
    double joint_entropy = 0.0;
    double total_correlation = 0.0;
    double cond_entropy_given_labels = 0.0;
    double mutual_info = 0.0;
};

struct GrowthConfig {
    int max_bits = 8;
    int min_bucket_size = 8;
    double min_info_gain = 0.02;          // nats of I(Y:C) per accepted bit
    double redundancy_factor = 0.9;       // new-bit MI with existing code must stay below this * H(bit)
    bool use_categorical = true;
    bool use_divergence = true;
    bool use_ood = false;
    std::vector<int> ood_reference_rows;  // required when use_ood
    HashPredicate::ThresholdKind ood_threshold_kind = HashPredicate::ThresholdKind::Max;
    ScorerConfig scorer;
    int split_alternations = 3;
    int split_restarts = 4;
};

// Alternating optimization: median-of-random-projection init, symmetric
// scorer training, re-cut via best_contiguous_cut; several restarts keeping
// the best cut objective.
HashPredicate learn_split_predicate(const Eigen::MatrixXd& region_features,
                                    const ScorerConfig& cfg, Rng& rng, int alternations = 3,
                                    int restarts = 4);

// Trains a scorer for D(candidates || reference) over the region and derives
// both thresholds from the reference scores alone.
std::pair<HashPredicate, OodThresholds> learn_ood_predicate(
    const Eigen::MatrixXd& region_features, const std::vector<int>& reference_rows,
    const ScorerConfig& cfg, HashPredicate::ThresholdKind threshold_kind, Rng& rng);

// One-hot predicates for a categorical field. Arity 2 keeps a single bit;
// arity above 8 keeps only values covering at least 5% of instances.
std::vector<HashPredicate> categorical_bits(const CohortFeatures& features,
                                            const std::string& field);

// Greedy growth: repeatedly split the largest splittable leaf, preferring a
// globally placed predicate when it keeps all buckets viable, otherwise
// placing it locally. Bits are accepted only when they raise plug-in I(Y:C)
// by min_info_gain and are not redundant within their active region.
HashForest grow_forest(const CohortFeatures& features, const std::vector<std::string>& labels,
                       const GrowthConfig& growth, Rng& rng);

HashCode assign_code(const HashForest& forest, const FeatureVector& x);

std::vector<HashCode> assign_codes(const HashForest& forest, const CohortFeatures& features);

// Plug-in entropies (nats) of the masked code table against a label column.
CodeMetrics code_information_metrics(const std::vector<HashCode>& codes,
                                     const std::vector<std::string>& labels);

}  // namespace jaf
