#pragma once

#include <string>
#include <vector>

#include "jaf/engine.hpp"

namespace jaf {

struct HistogramReport {
    std::vector<double> bin_edges;  // bins + 1 edges over [0, 1]
    std::vector<int> counts;
    double mean = 0.0;
    double std_dev = 0.0;  // population
    int n = 0;
};

// Bins are half-open [lo, hi) except the last, which is closed at 1.0.
HistogramReport make_histogram(const AcceptanceProfile& profile, int bins);

// CSV with bin_lo,bin_hi,count rows followed by a summary row.
std::string histogram_to_csv(const HistogramReport& report);

struct ProfileDelta {
    double mean_a = 0.0;
    double mean_b = 0.0;
    double mean_difference = 0.0;  // a - b
    double std_a = 0.0;
    double std_b = 0.0;
};

ProfileDelta compare_profiles(const AcceptanceProfile& a, const AcceptanceProfile& b);

}  // namespace jaf
