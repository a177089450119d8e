#include "jaf/hash_forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace jaf {

int HashPredicate::evaluate(const FeatureVector& x) const {
    switch (kind) {
        case Kind::DivergenceSplit:
            return scorer->score(x.numeric) >= cut ? 1 : 0;
        case Kind::Ood:
            return scorer->score(x.numeric) > threshold ? 1 : 0;
        case Kind::Categorical:
            for (const auto& [f, v] : x.categorical) {
                if (f == field) return v == value ? 1 : 0;
            }
            throw UnknownField("categorical predicate field not in feature vector: " + field);
    }
    return 0;
}

std::string HashCode::bucket_key() const {
    std::string key(bits.size(), '0');
    for (std::size_t j = 0; j < bits.size(); ++j) {
        if (active_mask[j] && bits[j]) key[j] = '1';
    }
    return key;
}

std::size_t CohortFeatures::rows() const {
    if (!values.empty()) return values.front().size();
    return static_cast<std::size_t>(numeric.rows());
}

FeatureVector CohortFeatures::row(int i) const {
    FeatureVector fv;
    if (numeric.cols() > 0) fv.numeric = numeric.row(i);
    for (std::size_t f = 0; f < fields.size(); ++f) {
        fv.categorical.emplace_back(fields[f], values[f][static_cast<std::size_t>(i)]);
    }
    return fv;
}

CohortFeatures features_of(const Cohort& cohort) {
    CohortFeatures out;
    const long n = static_cast<long>(cohort.size());
    if (cohort.instances.front().embedding) {
        out.numeric.resize(n, cohort.instances.front().embedding->size());
        for (long i = 0; i < n; ++i) {
            out.numeric.row(i) = *cohort.instances[i].embedding;
        }
    } else {
        out.numeric.resize(n, 0);
    }
    for (const auto& f : cohort.schema.query_side) out.fields.push_back(f);
    for (const auto& f : cohort.schema.response_side) out.fields.push_back(f);
    out.values.assign(out.fields.size(), std::vector<std::string>(cohort.size()));
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        FeatureVector fv = build_feature_vector(cohort.instances[i], cohort.schema);
        for (std::size_t f = 0; f < out.fields.size(); ++f) {
            out.values[f][i] = fv.categorical[f].second;
        }
    }
    return out;
}

namespace {

const char* kind_name(HashPredicate::Kind k) {
    switch (k) {
        case HashPredicate::Kind::DivergenceSplit: return "divergence-split";
        case HashPredicate::Kind::Ood: return "ood";
        case HashPredicate::Kind::Categorical: return "categorical";
    }
    return "";
}

double entropy_from_counts(const std::map<std::string, int>& counts, int total) {
    double h = 0.0;
    for (const auto& [value, c] : counts) {
        if (c == 0) continue;
        double p = static_cast<double>(c) / total;
        h -= p * std::log(p);
    }
    return h;
}

// Plug-in mutual information between two aligned discrete columns.
double mutual_information(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const int n = static_cast<int>(a.size());
    std::map<std::string, int> ca, cb, cj;
    for (int i = 0; i < n; ++i) {
        ++ca[a[i]];
        ++cb[b[i]];
        ++cj[a[i] + "\x1f" + b[i]];
    }
    return entropy_from_counts(ca, n) + entropy_from_counts(cb, n) - entropy_from_counts(cj, n);
}

double column_entropy(const std::vector<std::string>& a) {
    std::map<std::string, int> c;
    for (const auto& v : a) ++c[v];
    return entropy_from_counts(c, static_cast<int>(a.size()));
}

}  // namespace

nlohmann::ordered_json HashForest::to_json() const {
    auto preds = nlohmann::ordered_json::array();
    for (const auto& p : predicates) {
        nlohmann::ordered_json jp;
        jp["kind"] = kind_name(p.kind);
        switch (p.kind) {
            case HashPredicate::Kind::DivergenceSplit:
                jp["scorer"] = p.scorer->to_json();
                jp["cut"] = p.cut;
                break;
            case HashPredicate::Kind::Ood:
                jp["scorer"] = p.scorer->to_json();
                jp["threshold"] = p.threshold;
                jp["threshold_kind"] =
                    p.threshold_kind == HashPredicate::ThresholdKind::Smooth ? "smooth" : "max";
                break;
            case HashPredicate::Kind::Categorical:
                jp["field"] = p.field;
                jp["value"] = p.value;
                break;
        }
        auto region = nlohmann::ordered_json::array();
        for (const auto& [idx, bit] : p.active_region) region.push_back({idx, bit});
        jp["active_region"] = region;
        preds.push_back(std::move(jp));
    }
    return {{"predicates", preds}};
}

HashForest HashForest::from_json(const nlohmann::ordered_json& j) {
    HashForest f;
    for (const auto& jp : j.at("predicates")) {
        HashPredicate p;
        std::string kind = jp.at("kind").get<std::string>();
        if (kind == "divergence-split") {
            p.kind = HashPredicate::Kind::DivergenceSplit;
            p.scorer = DualScorer::from_json(jp.at("scorer"));
            p.cut = jp.at("cut").get<double>();
        } else if (kind == "ood") {
            p.kind = HashPredicate::Kind::Ood;
            p.scorer = DualScorer::from_json(jp.at("scorer"));
            p.threshold = jp.at("threshold").get<double>();
            p.threshold_kind = jp.at("threshold_kind") == "smooth"
                                   ? HashPredicate::ThresholdKind::Smooth
                                   : HashPredicate::ThresholdKind::Max;
        } else if (kind == "categorical") {
            p.kind = HashPredicate::Kind::Categorical;
            p.field = jp.at("field").get<std::string>();
            p.value = jp.at("value").get<std::string>();
        } else {
            throw ParseError("unknown predicate kind: " + kind);
        }
        for (const auto& c : jp.at("active_region")) {
            p.active_region.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
        }
        f.predicates.push_back(std::move(p));
    }
    return f;
}

HashPredicate learn_split_predicate(const Eigen::MatrixXd& region_features,
                                    const ScorerConfig& cfg, Rng& rng, int alternations,
                                    int restarts) {
    const long n = region_features.rows();
    if (n < 4) throw TooFewPoints("split learning requires >= 4 points");
    if (region_features.cols() == 0) {
        throw NoInformativeSplit("region has no numeric features to split on");
    }

    bool any_cut = false;
    double best_obj = -std::numeric_limits<double>::infinity();
    HashPredicate best;

    for (int restart = 0; restart < restarts; ++restart) {
        Eigen::VectorXd proj_w(region_features.cols());
        for (long d = 0; d < proj_w.size(); ++d) proj_w[d] = rng.next_gaussian();
        Eigen::VectorXd proj = region_features * proj_w;
        std::vector<double> sorted(proj.data(), proj.data() + proj.size());
        std::sort(sorted.begin(), sorted.end());
        double cut = sorted[static_cast<std::size_t>(n / 2)];
        std::vector<std::uint8_t> side(static_cast<std::size_t>(n));
        for (long i = 0; i < n; ++i) side[static_cast<std::size_t>(i)] = proj[i] >= cut ? 1 : 0;

        DualScorer scorer = DualScorer::constant(0.0);
        double obj = 0.0;
        double final_cut = 0.0;
        bool ok = false;
        try {
            for (int alt = 0; alt < alternations; ++alt) {
                long n1 = std::count(side.begin(), side.end(), std::uint8_t{1});
                long n0 = n - n1;
                if (n0 < 2 || n1 < 2) break;
                Eigen::MatrixXd A(n1, region_features.cols());
                Eigen::MatrixXd B(n0, region_features.cols());
                long a = 0, b = 0;
                for (long i = 0; i < n; ++i) {
                    if (side[static_cast<std::size_t>(i)]) {
                        A.row(a++) = region_features.row(i);
                    } else {
                        B.row(b++) = region_features.row(i);
                    }
                }
                scorer = train_symmetric_scorer(A, B, cfg, rng);
                Eigen::VectorXd scores = scorer.scores(region_features);
                CutResult cr =
                    best_contiguous_cut(std::vector<double>(scores.data(), scores.data() + n));
                for (long i = 0; i < n; ++i) {
                    side[static_cast<std::size_t>(i)] = scores[i] >= cr.cut_value ? 1 : 0;
                }
                obj = cr.objective;
                final_cut = cr.cut_value;
                ok = true;
            }
        } catch (const NoInformativeSplit&) {
            ok = false;
        } catch (const DegenerateInput&) {
            ok = false;
        }
        if (!ok) continue;
        any_cut = true;
        if (obj > best_obj) {
            best_obj = obj;
            best.kind = HashPredicate::Kind::DivergenceSplit;
            best.scorer = scorer;
            best.cut = final_cut;
        }
    }
    if (!any_cut) throw NoInformativeSplit("no restart produced an informative cut");
    return best;
}

std::pair<HashPredicate, OodThresholds> learn_ood_predicate(
    const Eigen::MatrixXd& region_features, const std::vector<int>& reference_rows,
    const ScorerConfig& cfg, HashPredicate::ThresholdKind threshold_kind, Rng& rng) {
    const long n = region_features.rows();
    if (reference_rows.empty()) throw EmptyReference("reference row set is empty");
    std::set<int> ref(reference_rows.begin(), reference_rows.end());
    if (static_cast<long>(ref.size()) >= n) {
        throw ReferenceIsWholeRegion("reference set covers the whole region");
    }
    for (int r : ref) {
        if (r < 0 || r >= n) throw Error("reference row index out of range");
    }

    Eigen::MatrixXd R(static_cast<long>(ref.size()), region_features.cols());
    Eigen::MatrixXd C(n - static_cast<long>(ref.size()), region_features.cols());
    long a = 0, b = 0;
    for (long i = 0; i < n; ++i) {
        if (ref.count(static_cast<int>(i))) {
            R.row(a++) = region_features.row(i);
        } else {
            C.row(b++) = region_features.row(i);
        }
    }
    DualScorer scorer = train_dual_scorer(C, R, cfg, rng);
    // score row by row: the batched product can differ from evaluate() in the
    // last ulp, which would let a reference row sneak past tau_max
    Eigen::VectorXd ref_scores(R.rows());
    for (long i = 0; i < R.rows(); ++i) ref_scores(i) = scorer.score(R.row(i).transpose());
    OodThresholds taus{log_mean_exp(ref_scores), ref_scores.maxCoeff()};

    HashPredicate p;
    p.kind = HashPredicate::Kind::Ood;
    p.scorer = scorer;
    p.threshold_kind = threshold_kind;
    p.threshold =
        threshold_kind == HashPredicate::ThresholdKind::Smooth ? taus.tau_smooth : taus.tau_max;
    return {p, taus};
}

namespace {

// Candidate one-hot bits for one value column. Arity 2 keeps only the second
// sorted value (the complement bit is redundant); arity above 8 keeps only
// values covering at least 5% of rows.
std::vector<HashPredicate> column_categorical_bits(const std::string& field,
                                                   const std::vector<std::string>& column) {
    std::map<std::string, int> counts;
    for (const auto& v : column) ++counts[v];
    std::vector<HashPredicate> out;
    auto make = [&](const std::string& v) {
        HashPredicate p;
        p.kind = HashPredicate::Kind::Categorical;
        p.field = field;
        p.value = v;
        out.push_back(std::move(p));
    };
    if (counts.size() < 2) return out;
    if (counts.size() == 2) {
        make(std::next(counts.begin())->first);
    } else if (counts.size() <= 8) {
        for (const auto& [v, c] : counts) make(v);
    } else {
        const double n = static_cast<double>(column.size());
        for (const auto& [v, c] : counts) {
            if (c >= 0.05 * n) make(v);
        }
    }
    return out;
}

}  // namespace

std::vector<HashPredicate> categorical_bits(const CohortFeatures& features,
                                            const std::string& field) {
    for (std::size_t f = 0; f < features.fields.size(); ++f) {
        if (features.fields[f] == field) return column_categorical_bits(field, features.values[f]);
    }
    throw UnknownField("field not in schema: " + field);
}

HashCode assign_code(const HashForest& forest, const FeatureVector& x) {
    HashCode code;
    code.bits.assign(forest.size(), 0);
    code.active_mask.assign(forest.size(), 0);
    for (std::size_t j = 0; j < forest.size(); ++j) {
        const HashPredicate& p = forest.predicates[j];
        bool active = true;
        for (const auto& [idx, bit] : p.active_region) {
            if (!code.active_mask[static_cast<std::size_t>(idx)] ||
                code.bits[static_cast<std::size_t>(idx)] != bit) {
                active = false;
                break;
            }
        }
        if (active) {
            code.active_mask[j] = 1;
            code.bits[j] = static_cast<std::uint8_t>(p.evaluate(x));
        }
    }
    return code;
}

std::vector<HashCode> assign_codes(const HashForest& forest, const CohortFeatures& features) {
    std::vector<HashCode> codes;
    codes.reserve(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        codes.push_back(assign_code(forest, features.row(static_cast<int>(i))));
    }
    return codes;
}

CodeMetrics code_information_metrics(const std::vector<HashCode>& codes,
                                     const std::vector<std::string>& labels) {
    if (codes.empty()) throw LengthMismatch("code table is empty");
    if (codes.size() != labels.size()) {
        throw LengthMismatch("codes and labels have different lengths");
    }
    const std::size_t B = codes.front().bits.size();
    for (const auto& c : codes) {
        if (c.bits.size() != B || c.active_mask.size() != B) {
            throw LengthMismatch("codes have unequal bit counts");
        }
    }
    const int n = static_cast<int>(codes.size());

    CodeMetrics m;
    std::vector<std::string> keys(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) keys[i] = codes[i].bucket_key();

    for (std::size_t j = 0; j < B; ++j) {
        std::map<std::string, int> counts;
        for (const auto& k : keys) ++counts[std::string(1, k[j])];
        m.bit_entropies.push_back(entropy_from_counts(counts, n));
    }
    m.joint_entropy = column_entropy(keys);
    double sum_bits = 0.0;
    for (double h : m.bit_entropies) sum_bits += h;
    m.total_correlation = sum_bits - m.joint_entropy;

    std::map<std::string, std::map<std::string, int>> by_label;
    std::map<std::string, int> label_counts;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        ++by_label[labels[i]][keys[i]];
        ++label_counts[labels[i]];
    }
    double cond = 0.0;
    for (const auto& [y, table] : by_label) {
        int ny = label_counts[y];
        cond += (static_cast<double>(ny) / n) * entropy_from_counts(table, ny);
    }
    m.cond_entropy_given_labels = cond;
    m.mutual_info = m.joint_entropy - cond;
    return m;
}

namespace {

struct Leaf {
    std::vector<std::pair<int, int>> constraints;
    std::vector<int> rows;
    bool splittable = true;
};

// True when the predicate region covers the entire leaf, i.e. every region
// constraint is implied by the leaf's own constraints.
bool region_covers_leaf(const std::vector<std::pair<int, int>>& region, const Leaf& leaf) {
    for (const auto& c : region) {
        if (std::find(leaf.constraints.begin(), leaf.constraints.end(), c) ==
            leaf.constraints.end()) {
            return false;
        }
    }
    return true;
}

}  // namespace

HashForest grow_forest(const CohortFeatures& features, const std::vector<std::string>& labels,
                       const GrowthConfig& growth, Rng& rng) {
    const int n = static_cast<int>(features.rows());
    if (static_cast<std::size_t>(n) != labels.size()) {
        throw LengthMismatch("labels length does not match feature rows");
    }

    HashForest forest;
    std::vector<Leaf> leaves(1);
    for (int i = 0; i < n; ++i) leaves[0].rows.push_back(i);

    std::vector<FeatureVector> row_cache;
    row_cache.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) row_cache.push_back(features.row(i));

    auto current_mi = [&]() {
        if (forest.predicates.empty()) return 0.0;
        return code_information_metrics(assign_codes(forest, features), labels).mutual_info;
    };
    double mi = 0.0;

    while (static_cast<int>(forest.size()) < growth.max_bits) {
        Leaf* target = nullptr;
        for (auto& leaf : leaves) {
            if (!leaf.splittable) continue;
            if (static_cast<int>(leaf.rows.size()) < 2 * growth.min_bucket_size) continue;
            if (!target || leaf.rows.size() > target->rows.size()) target = &leaf;
        }
        if (!target) break;

        std::vector<HashPredicate> proposals;
        if (growth.use_categorical) {
            for (std::size_t f = 0; f < features.fields.size(); ++f) {
                std::vector<std::string> column;
                column.reserve(target->rows.size());
                for (int r : target->rows) {
                    column.push_back(features.values[f][static_cast<std::size_t>(r)]);
                }
                for (auto& p : column_categorical_bits(features.fields[f], column)) {
                    proposals.push_back(std::move(p));
                }
            }
        }
        if (growth.use_divergence && features.numeric.cols() > 0) {
            Eigen::MatrixXd region(static_cast<long>(target->rows.size()), features.numeric.cols());
            for (std::size_t r = 0; r < target->rows.size(); ++r) {
                region.row(static_cast<long>(r)) = features.numeric.row(target->rows[r]);
            }
            try {
                proposals.push_back(learn_split_predicate(region, growth.scorer, rng,
                                                          growth.split_alternations,
                                                          growth.split_restarts));
            } catch (const Error&) {
                // leaf not numerically splittable; other proposals may still work
            }
        }
        if (growth.use_ood && !growth.ood_reference_rows.empty()) {
            std::set<int> ref(growth.ood_reference_rows.begin(), growth.ood_reference_rows.end());
            Eigen::MatrixXd region(static_cast<long>(target->rows.size()), features.numeric.cols());
            std::vector<int> local_ref;
            for (std::size_t r = 0; r < target->rows.size(); ++r) {
                region.row(static_cast<long>(r)) = features.numeric.row(target->rows[r]);
                if (ref.count(target->rows[r])) local_ref.push_back(static_cast<int>(r));
            }
            try {
                proposals.push_back(learn_ood_predicate(region, local_ref, growth.scorer,
                                                        growth.ood_threshold_kind, rng)
                                        .first);
            } catch (const Error&) {
            }
        }

        bool accepted = false;
        for (auto& proposal : proposals) {
            std::vector<int> raw(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                raw[static_cast<std::size_t>(i)] = proposal.evaluate(row_cache[static_cast<std::size_t>(i)]);
            }
            // Global placement first: one predicate can refine several leaves
            // at once when it stays viable everywhere it applies.
            std::vector<std::vector<std::pair<int, int>>> placements = {{}, target->constraints};
            for (const auto& placement : placements) {
                proposal.active_region = placement;

                bool viable = true;
                for (const auto& leaf : leaves) {
                    if (!region_covers_leaf(placement, leaf)) continue;
                    int ones = 0;
                    for (int r : leaf.rows) ones += raw[static_cast<std::size_t>(r)];
                    int zeros = static_cast<int>(leaf.rows.size()) - ones;
                    if ((ones != 0 && ones < growth.min_bucket_size) ||
                        (zeros != 0 && zeros < growth.min_bucket_size)) {
                        viable = false;
                        break;
                    }
                }
                if (!viable) continue;

                // Redundancy within the active region: the new bit against the
                // existing masked code.
                std::vector<std::string> bit_col, key_col;
                for (const auto& leaf : leaves) {
                    if (!region_covers_leaf(placement, leaf)) continue;
                    for (int r : leaf.rows) {
                        bit_col.push_back(raw[static_cast<std::size_t>(r)] ? "1" : "0");
                    }
                }
                if (bit_col.empty() || column_entropy(bit_col) <= 0.0) continue;
                if (!forest.predicates.empty()) {
                    auto old_codes = assign_codes(forest, features);
                    for (const auto& leaf : leaves) {
                        if (!region_covers_leaf(placement, leaf)) continue;
                        for (int r : leaf.rows) {
                            key_col.push_back(old_codes[static_cast<std::size_t>(r)].bucket_key());
                        }
                    }
                    double h_bit = column_entropy(bit_col);
                    if (mutual_information(bit_col, key_col) >=
                        growth.redundancy_factor * h_bit) {
                        continue;
                    }
                }

                forest.predicates.push_back(proposal);
                double mi_after = current_mi();
                if (mi_after - mi < growth.min_info_gain) {
                    forest.predicates.pop_back();
                    continue;
                }
                mi = mi_after;

                int new_idx = static_cast<int>(forest.size()) - 1;
                std::vector<Leaf> next;
                for (auto& leaf : leaves) {
                    if (!region_covers_leaf(placement, leaf)) {
                        next.push_back(std::move(leaf));
                        continue;
                    }
                    Leaf zero, one;
                    zero.constraints = leaf.constraints;
                    zero.constraints.emplace_back(new_idx, 0);
                    one.constraints = leaf.constraints;
                    one.constraints.emplace_back(new_idx, 1);
                    for (int r : leaf.rows) {
                        (raw[static_cast<std::size_t>(r)] ? one : zero).rows.push_back(r);
                    }
                    if (!zero.rows.empty()) next.push_back(std::move(zero));
                    if (!one.rows.empty()) next.push_back(std::move(one));
                }
                leaves = std::move(next);
                accepted = true;
                break;
            }
            if (accepted) break;
        }
        if (!accepted) target->splittable = false;
    }
    return forest;
}

}  // namespace jaf
