#pragma once

#include <Eigen/Core>
#include <vector>

#include <json.hpp>

#include "jaf/errors.hpp"
#include "jaf/rng.hpp"

namespace jaf {

// Training configuration for a dual scoring function.
struct ScorerConfig {
    enum class Arch { Affine, Feedforward };
    Arch architecture = Arch::Affine;
    int hidden_width = 16;       // feedforward only
    double learning_rate = 0.05;
    int epochs = 120;
    int batch_size = 256;
    double weight_penalty = 1e-4;
    double init_scale = 0.1;
};

// Scalar scoring function f: R^d -> R realizing the Donsker-Varadhan dual.
// Either affine (w.x + b) or a one-hidden-layer tanh network.
class DualScorer {
public:
    static DualScorer affine(int input_dim);
    static DualScorer feedforward(int input_dim, int hidden_width);
    static DualScorer constant(double value);  // zero-dim-agnostic constant scorer

    double score(const Eigen::VectorXd& x) const;
    Eigen::VectorXd scores(const Eigen::MatrixXd& rows) const;

    int input_dim() const { return input_dim_; }
    bool is_affine() const { return arch_ == ScorerConfig::Arch::Affine; }

    nlohmann::ordered_json to_json() const;
    static DualScorer from_json(const nlohmann::ordered_json& j);

    // Parameters are public so the trainer can update them in place.
    Eigen::VectorXd w;   // affine weights
    double b = 0.0;      // affine bias
    Eigen::MatrixXd W;   // hidden weights (h x d)
    Eigen::VectorXd b1;  // hidden bias
    Eigen::VectorXd v;   // output weights
    double b2 = 0.0;     // output bias

private:
    DualScorer() = default;
    ScorerConfig::Arch arch_ = ScorerConfig::Arch::Affine;
    int input_dim_ = 0;
    bool accepts_any_dim_ = false;  // constant scorer
};

// log((1/n) sum exp(v_i)), computed with max shifting.
double log_mean_exp(const Eigen::VectorXd& v);

// Empirical DV estimate: mean_a(f) - log(mean_b(exp f)), in nats.
double estimate_divergence(const DualScorer& scorer, const Eigen::MatrixXd& samples_a,
                           const Eigen::MatrixXd& samples_b);

// Symmetric variant used by split learning: D(a||b) + D(b||a) under the
// bound pair (f, -f).
double estimate_symmetric_divergence(const DualScorer& scorer, const Eigen::MatrixXd& samples_a,
                                     const Eigen::MatrixXd& samples_b);

// Mini-batch gradient ascent on the DV objective; returns the parameters
// with the best full-data objective seen. Deterministic given the rng state.
DualScorer train_dual_scorer(const Eigen::MatrixXd& samples_a, const Eigen::MatrixXd& samples_b,
                             const ScorerConfig& cfg, Rng& rng);

// Same training loop but maximizing the symmetric objective.
DualScorer train_symmetric_scorer(const Eigen::MatrixXd& samples_a, const Eigen::MatrixXd& samples_b,
                                  const ScorerConfig& cfg, Rng& rng);

struct CutResult {
    double cut_value = 0.0;  // threshold c on scores
    double objective = 0.0;  // symmetric empirical objective at the cut, nats
    int left_count = 0;
    int right_count = 0;
};

// Searches the n-1 contiguous cuts of the sorted scores for the one
// maximizing D(left||right) + D(right||left) with the scores themselves as
// f-values. Ties go to the most balanced split, then the lower cut value.
// Throws NoInformativeSplit when all scores are equal beyond min_gain.
CutResult best_contiguous_cut(const std::vector<double>& scores, double min_gain = 0.01);

}  // namespace jaf
