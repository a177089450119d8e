#include "jaf/neighborhood.hpp"

#include <algorithm>

namespace jaf {

BucketIndex bucket_index(const std::vector<HashCode>& codes) {
    BucketIndex idx;
    idx.codes = codes;
    idx.keys.reserve(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        idx.keys.push_back(codes[i].bucket_key());
        idx.buckets[idx.keys.back()].push_back(static_cast<int>(i));
    }
    return idx;
}

int masked_hamming(const HashCode& a, const HashCode& b) {
    int d = 0;
    for (std::size_t j = 0; j < a.bits.size(); ++j) {
        if (a.active_mask[j] && b.active_mask[j] && a.bits[j] != b.bits[j]) ++d;
    }
    return d;
}

std::vector<int> sample_lsh_neighborhood(const BucketIndex& index, int focal,
                                         const SamplerConfig& cfg, Rng& rng) {
    const std::string& focal_key = index.key_of(focal);
    const HashCode& focal_code = index.codes[static_cast<std::size_t>(focal)];

    std::vector<int> pool;
    for (int i : index.buckets.at(focal_key)) {
        if (i != focal) pool.push_back(i);
    }

    if (static_cast<int>(pool.size()) < cfg.k && cfg.max_hamming_radius > 0) {
        // Distance to a bucket is measured against its lowest-index member,
        // over bits active on both sides. Buckets at equal distance join the
        // pool in key order.
        std::vector<std::pair<int, const std::vector<int>*>> others;
        for (const auto& [key, members] : index.buckets) {
            if (key == focal_key) continue;
            int d = masked_hamming(focal_code, index.codes[static_cast<std::size_t>(members.front())]);
            others.emplace_back(d, &members);
        }
        for (int radius = 1;
             radius <= cfg.max_hamming_radius && static_cast<int>(pool.size()) < cfg.k; ++radius) {
            for (const auto& [d, members] : others) {
                if (d != radius) continue;
                for (int i : *members) {
                    if (i != focal) pool.push_back(i);
                }
            }
        }
    }
    return rng.sample_without_replacement(pool, static_cast<std::size_t>(std::max(0, cfg.k)));
}

std::vector<int> sample_label_neighborhood(const Cohort& cohort, int focal,
                                           const SamplerConfig& cfg, Rng& rng) {
    const int n = static_cast<int>(cohort.size());
    std::vector<std::string> focal_set =
        split_value_set(side_value(cohort.instances[static_cast<std::size_t>(focal)], cfg.overlap_field));

    std::vector<int> positives, negatives;
    for (int j = 0; j < n; ++j) {
        if (j == focal) continue;
        std::vector<std::string> other =
            split_value_set(side_value(cohort.instances[static_cast<std::size_t>(j)], cfg.overlap_field));
        bool overlap = false;
        for (const auto& v : other) {
            if (std::find(focal_set.begin(), focal_set.end(), v) != focal_set.end()) {
                overlap = true;
                break;
            }
        }
        (overlap ? positives : negatives).push_back(j);
    }

    std::vector<int> out =
        rng.sample_without_replacement(positives, static_cast<std::size_t>(std::max(0, cfg.k_pos)));
    int shortfall = cfg.k_pos - static_cast<int>(out.size());
    std::vector<int> neg = rng.sample_without_replacement(
        negatives, static_cast<std::size_t>(std::max(0, cfg.k_neg + shortfall)));
    out.insert(out.end(), neg.begin(), neg.end());
    return out;
}

}  // namespace jaf
