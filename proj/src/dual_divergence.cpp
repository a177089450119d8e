#include "jaf/dual_divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jaf {

DualScorer DualScorer::affine(int input_dim) {
    DualScorer s;
    s.arch_ = ScorerConfig::Arch::Affine;
    s.input_dim_ = input_dim;
    s.w = Eigen::VectorXd::Zero(input_dim);
    return s;
}

DualScorer DualScorer::feedforward(int input_dim, int hidden_width) {
    DualScorer s;
    s.arch_ = ScorerConfig::Arch::Feedforward;
    s.input_dim_ = input_dim;
    s.W = Eigen::MatrixXd::Zero(hidden_width, input_dim);
    s.b1 = Eigen::VectorXd::Zero(hidden_width);
    s.v = Eigen::VectorXd::Zero(hidden_width);
    return s;
}

DualScorer DualScorer::constant(double value) {
    DualScorer s;
    s.arch_ = ScorerConfig::Arch::Affine;
    s.input_dim_ = 0;
    s.w = Eigen::VectorXd::Zero(0);
    s.b = value;
    s.accepts_any_dim_ = true;
    return s;
}

double DualScorer::score(const Eigen::VectorXd& x) const {
    if (!accepts_any_dim_ && x.size() != input_dim_) {
        throw DimensionError("scorer expects dimension " + std::to_string(input_dim_) +
                             ", got " + std::to_string(x.size()));
    }
    if (arch_ == ScorerConfig::Arch::Affine) {
        return accepts_any_dim_ ? b : w.dot(x) + b;
    }
    Eigen::VectorXd t = (W * x + b1).array().tanh();
    return v.dot(t) + b2;
}

Eigen::VectorXd DualScorer::scores(const Eigen::MatrixXd& rows) const {
    if (!accepts_any_dim_ && rows.cols() != input_dim_) {
        throw DimensionError("scorer expects dimension " + std::to_string(input_dim_) +
                             ", got " + std::to_string(rows.cols()));
    }
    if (arch_ == ScorerConfig::Arch::Affine) {
        if (accepts_any_dim_) return Eigen::VectorXd::Constant(rows.rows(), b);
        return (rows * w).array() + b;
    }
    Eigen::MatrixXd t = ((rows * W.transpose()).rowwise() + b1.transpose()).array().tanh();
    return (t * v).array() + b2;
}

nlohmann::ordered_json DualScorer::to_json() const {
    nlohmann::ordered_json j;
    j["architecture"] = arch_ == ScorerConfig::Arch::Affine ? "affine" : "feedforward";
    j["input_dim"] = input_dim_;
    auto vec = [](const Eigen::VectorXd& x) {
        return std::vector<double>(x.data(), x.data() + x.size());
    };
    if (arch_ == ScorerConfig::Arch::Affine) {
        j["w"] = vec(w);
        j["b"] = b;
    } else {
        std::vector<std::vector<double>> rows;
        for (long r = 0; r < W.rows(); ++r) {
            rows.emplace_back(W.row(r).data(), W.row(r).data() + W.cols());
        }
        j["W"] = rows;
        j["b1"] = vec(b1);
        j["v"] = vec(v);
        j["b2"] = b2;
    }
    return j;
}

DualScorer DualScorer::from_json(const nlohmann::ordered_json& j) {
    int dim = j.at("input_dim").get<int>();
    if (j.at("architecture") == "affine") {
        DualScorer s = affine(dim);
        auto wv = j.at("w").get<std::vector<double>>();
        s.w = Eigen::Map<Eigen::VectorXd>(wv.data(), static_cast<long>(wv.size()));
        s.b = j.at("b").get<double>();
        return s;
    }
    auto rows = j.at("W").get<std::vector<std::vector<double>>>();
    DualScorer s = feedforward(dim, static_cast<int>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        s.W.row(static_cast<long>(r)) =
            Eigen::Map<Eigen::VectorXd>(rows[r].data(), static_cast<long>(rows[r].size()));
    }
    auto b1v = j.at("b1").get<std::vector<double>>();
    auto vv = j.at("v").get<std::vector<double>>();
    s.b1 = Eigen::Map<Eigen::VectorXd>(b1v.data(), static_cast<long>(b1v.size()));
    s.v = Eigen::Map<Eigen::VectorXd>(vv.data(), static_cast<long>(vv.size()));
    s.b2 = j.at("b2").get<double>();
    return s;
}

double log_mean_exp(const Eigen::VectorXd& v) {
    double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().mean());
}

double estimate_divergence(const DualScorer& scorer, const Eigen::MatrixXd& samples_a,
                           const Eigen::MatrixXd& samples_b) {
    if (samples_a.rows() == 0 || samples_b.rows() == 0) {
        throw DimensionError("estimate_divergence requires non-empty sample sets");
    }
    return scorer.scores(samples_a).mean() - log_mean_exp(scorer.scores(samples_b));
}

double estimate_symmetric_divergence(const DualScorer& scorer, const Eigen::MatrixXd& samples_a,
                                     const Eigen::MatrixXd& samples_b) {
    if (samples_a.rows() == 0 || samples_b.rows() == 0) {
        throw DimensionError("estimate_symmetric_divergence requires non-empty sample sets");
    }
    Eigen::VectorXd sa = scorer.scores(samples_a);
    Eigen::VectorXd sb = scorer.scores(samples_b);
    return (sa.mean() - log_mean_exp(sb)) + ((-sb).mean() - log_mean_exp(-sa));
}

namespace {

struct Params {
    Eigen::VectorXd w;
    double b = 0.0;
    Eigen::MatrixXd W;
    Eigen::VectorXd b1, v;
    double b2 = 0.0;
};

Params snapshot(const DualScorer& s) { return {s.w, s.b, s.W, s.b1, s.v, s.b2}; }

void restore(DualScorer& s, const Params& p) {
    s.w = p.w;
    s.b = p.b;
    s.W = p.W;
    s.b1 = p.b1;
    s.v = p.v;
    s.b2 = p.b2;
}

// Accumulates sum_i alpha_i * grad_theta f(x_i) into a Params-shaped gradient.
Params weighted_grad(const DualScorer& s, const Eigen::MatrixXd& X, const Eigen::VectorXd& alpha) {
    Params g;
    if (s.is_affine()) {
        g.w = X.transpose() * alpha;
        g.b = alpha.sum();
    } else {
        Eigen::MatrixXd pre = (X * s.W.transpose()).rowwise() + s.b1.transpose();
        Eigen::MatrixXd t = pre.array().tanh();
        Eigen::MatrixXd dt = 1.0 - t.array().square();  // n x h
        // grad v = sum alpha_i t_i ; grad b2 = sum alpha ; grad W = sum alpha (v .* dt) x^T
        g.v = t.transpose() * alpha;
        g.b2 = alpha.sum();
        Eigen::MatrixXd back = dt.array().rowwise() * s.v.transpose().array();  // n x h
        Eigen::MatrixXd back_w = back.array().colwise() * alpha.array();
        g.W = back_w.transpose() * X;
        g.b1 = back_w.colwise().sum().transpose();
    }
    return g;
}

void apply_update(DualScorer& s, const Params& g1, const Params& g2, bool has_g2, double lr,
                  double penalty) {
    auto step_vec = [&](Eigen::VectorXd& p, const Eigen::VectorXd& a, const Eigen::VectorXd* b2v) {
        Eigen::VectorXd g = a;
        if (b2v) g += *b2v;
        p += lr * (g - 2.0 * penalty * p);
    };
    if (s.is_affine()) {
        step_vec(s.w, g1.w, has_g2 ? &g2.w : nullptr);
        s.b += lr * (g1.b + (has_g2 ? g2.b : 0.0));
    } else {
        Eigen::MatrixXd gW = g1.W;
        if (has_g2) gW += g2.W;
        s.W += lr * (gW - 2.0 * penalty * s.W);
        step_vec(s.b1, g1.b1, has_g2 ? &g2.b1 : nullptr);
        step_vec(s.v, g1.v, has_g2 ? &g2.v : nullptr);
        s.b2 += lr * (g1.b2 + (has_g2 ? g2.b2 : 0.0));
    }
}

void random_init(DualScorer& s, const ScorerConfig& cfg, Rng& rng) {
    auto fill = [&](Eigen::VectorXd& v) {
        for (long i = 0; i < v.size(); ++i) v[i] = cfg.init_scale * rng.next_gaussian();
    };
    if (s.is_affine()) {
        fill(s.w);
        s.b = 0.0;
    } else {
        for (long r = 0; r < s.W.rows(); ++r) {
            for (long c = 0; c < s.W.cols(); ++c) s.W(r, c) = cfg.init_scale * rng.next_gaussian();
        }
        fill(s.b1);
        fill(s.v);
        s.b2 = 0.0;
    }
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& perm,
                          std::size_t start, std::size_t count) {
    Eigen::MatrixXd out(static_cast<long>(count), X.cols());
    for (std::size_t i = 0; i < count; ++i) {
        out.row(static_cast<long>(i)) = X.row(static_cast<long>(perm[(start + i) % perm.size()]));
    }
    return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& s) {
    Eigen::ArrayXd e = (s.array() - s.maxCoeff()).exp();
    return (e / e.sum()).matrix();
}

DualScorer train_impl(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const ScorerConfig& cfg,
                      Rng& rng, bool symmetric) {
    if (A.cols() != B.cols()) throw DimensionError("sample sets have mismatched dimensions");
    if (A.rows() < 2 || B.rows() < 2) throw TooFewPoints("training requires >= 2 points per set");
    bool degenerate = true;
    for (long i = 0; degenerate && i < A.rows(); ++i) {
        if (A.row(i) != A.row(0)) degenerate = false;
    }
    for (long i = 0; degenerate && i < B.rows(); ++i) {
        if (B.row(i) != A.row(0)) degenerate = false;
    }
    if (degenerate) throw DegenerateInput("all points identical across both sample sets");

    int dim = static_cast<int>(A.cols());
    DualScorer scorer = cfg.architecture == ScorerConfig::Arch::Affine
                            ? DualScorer::affine(dim)
                            : DualScorer::feedforward(dim, cfg.hidden_width);
    random_init(scorer, cfg, rng);

    auto full_objective = [&](const DualScorer& s) {
        return symmetric ? estimate_symmetric_divergence(s, A, B) : estimate_divergence(s, A, B);
    };

    Params best = snapshot(scorer);
    double best_obj = full_objective(scorer);

    std::vector<std::size_t> perm_a(A.rows()), perm_b(B.rows());
    for (std::size_t i = 0; i < perm_a.size(); ++i) perm_a[i] = i;
    for (std::size_t i = 0; i < perm_b.size(); ++i) perm_b[i] = i;

    std::size_t bs = static_cast<std::size_t>(std::max(1, cfg.batch_size));
    std::size_t steps = (std::max(perm_a.size(), perm_b.size()) + bs - 1) / bs;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(perm_a);
        rng.shuffle(perm_b);
        for (std::size_t step = 0; step < steps; ++step) {
            std::size_t na = std::min(bs, perm_a.size());
            std::size_t nb = std::min(bs, perm_b.size());
            Eigen::MatrixXd Xa = take_rows(A, perm_a, step * bs, na);
            Eigen::MatrixXd Xb = take_rows(B, perm_b, step * bs, nb);
            Eigen::VectorXd sa = scorer.scores(Xa);
            Eigen::VectorXd sb = scorer.scores(Xb);

            // alpha_a = 1/na (+ softmax(-sa) for the reverse direction),
            // alpha_b = -softmax(sb) (- 1/nb for the reverse direction).
            Eigen::VectorXd alpha_a =
                Eigen::VectorXd::Constant(static_cast<long>(na), 1.0 / static_cast<double>(na));
            Eigen::VectorXd alpha_b = -softmax(sb);
            if (symmetric) {
                alpha_a += softmax(-sa);
                alpha_b.array() -= 1.0 / static_cast<double>(nb);
            }
            Params ga = weighted_grad(scorer, Xa, alpha_a);
            Params gb = weighted_grad(scorer, Xb, alpha_b);
            apply_update(scorer, ga, gb, true, cfg.learning_rate, cfg.weight_penalty);
        }
        double obj = full_objective(scorer);
        if (std::isfinite(obj) && obj > best_obj) {
            best_obj = obj;
            best = snapshot(scorer);
        }
    }
    restore(scorer, best);
    return scorer;
}

}  // namespace

DualScorer train_dual_scorer(const Eigen::MatrixXd& samples_a, const Eigen::MatrixXd& samples_b,
                             const ScorerConfig& cfg, Rng& rng) {
    return train_impl(samples_a, samples_b, cfg, rng, /*symmetric=*/false);
}

DualScorer train_symmetric_scorer(const Eigen::MatrixXd& samples_a, const Eigen::MatrixXd& samples_b,
                                  const ScorerConfig& cfg, Rng& rng) {
    return train_impl(samples_a, samples_b, cfg, rng, /*symmetric=*/true);
}

CutResult best_contiguous_cut(const std::vector<double>& scores, double min_gain) {
    const std::size_t n = scores.size();
    if (n < 2) throw TooFewPoints("cut search requires at least 2 points");
    std::vector<double> s = scores;
    std::sort(s.begin(), s.end());
    if (s.back() - s.front() < min_gain) {
        throw NoInformativeSplit("all scores equal beyond min_gain");
    }

    // D(L||R) + D(R||L) with the scores as f-values reduces to
    // (mean_L - lme_L) + (mean_R - lme_R); the cross terms cancel.
    auto side_term = [](const double* begin, std::size_t count) {
        Eigen::Map<const Eigen::VectorXd> v(begin, static_cast<long>(count));
        return v.mean() - log_mean_exp(v);
    };

    bool have = false;
    CutResult best;
    int best_imbalance = 0;
    for (std::size_t m = 1; m < n; ++m) {
        double obj = side_term(s.data(), m) + side_term(s.data() + m, n - m);
        int imbalance = std::abs(static_cast<int>(2 * m) - static_cast<int>(n));
        double cut = 0.5 * (s[m - 1] + s[m]);
        bool better = !have || obj > best.objective ||
                      (obj == best.objective &&
                       (imbalance < best_imbalance ||
                        (imbalance == best_imbalance && cut < best.cut_value)));
        if (better) {
            have = true;
            best.objective = obj;
            best.cut_value = cut;
            best.left_count = static_cast<int>(m);
            best.right_count = static_cast<int>(n - m);
            best_imbalance = imbalance;
        }
    }
    return best;
}

}  // namespace jaf
