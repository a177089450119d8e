#pragma once

#include <map>
#include <string>
#include <vector>

#include "jaf/cohort.hpp"
#include "jaf/hash_forest.hpp"
#include "jaf/rng.hpp"

namespace jaf {

// Bucket lookup over a code table. Every cohort index lands in exactly one
// bucket (its masked code key).
struct BucketIndex {
    std::map<std::string, std::vector<int>> buckets;
    std::vector<HashCode> codes;
    std::vector<std::string> keys;  // per-instance bucket key

    const std::string& key_of(int i) const { return keys[static_cast<std::size_t>(i)]; }
};

struct SamplerConfig {
    enum class Scheme { Lsh, LabelOverlap, Graph };
    Scheme scheme = Scheme::Lsh;
    int k = 8;
    int max_hamming_radius = 0;
    // label-overlap scheme
    int k_pos = 4;
    int k_neg = 4;
    std::string overlap_field;
};

BucketIndex bucket_index(const std::vector<HashCode>& codes);

// Hamming distance over jointly active bits.
int masked_hamming(const HashCode& a, const HashCode& b);

// Candidate pool starts at the focal bucket and expands one Hamming radius
// at a time only while short of k; min(k, |pool|) sampled uniformly.
std::vector<int> sample_lsh_neighborhood(const BucketIndex& index, int focal,
                                         const SamplerConfig& cfg, Rng& rng);

// Paper-style positive/negative sampling: positives share a value of the
// multi-valued overlap field with the focal, negatives are uniform from the
// rest; positive shortfall is filled from negatives.
std::vector<int> sample_label_neighborhood(const Cohort& cohort, int focal,
                                           const SamplerConfig& cfg, Rng& rng);

}  // namespace jaf
