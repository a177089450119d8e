#include "jaf/reporting.hpp"

#include <cmath>
#include <cstdio>

namespace jaf {

namespace {

double population_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size()));
}

// Shortest round-trippable decimal form, stable across runs.
std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    double parsed = std::strtod(buf, nullptr);
    if (parsed == x) {
        for (int prec = 1; prec < 17; ++prec) {
            char shorter[32];
            std::snprintf(shorter, sizeof(shorter), "%.*g", prec, x);
            if (std::strtod(shorter, nullptr) == x) return shorter;
        }
    }
    return buf;
}

}  // namespace

HistogramReport make_histogram(const AcceptanceProfile& profile, int bins) {
    if (profile.p_hat.empty()) throw EmptyProfile("acceptance profile has no instances");
    if (bins < 1) throw ConfigError("histogram requires bins >= 1");

    HistogramReport r;
    r.n = static_cast<int>(profile.p_hat.size());
    for (int b = 0; b <= bins; ++b) {
        r.bin_edges.push_back(static_cast<double>(b) / bins);
    }
    r.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double p : profile.p_hat) {
        // Compare against stored edges rather than multiplying, so boundary
        // values land in the bin their edge starts.
        int bin = bins - 1;
        for (int b = 0; b < bins - 1; ++b) {
            if (p >= r.bin_edges[static_cast<std::size_t>(b)] &&
                p < r.bin_edges[static_cast<std::size_t>(b) + 1]) {
                bin = b;
                break;
            }
        }
        ++r.counts[static_cast<std::size_t>(bin)];
    }
    r.mean = population_mean(profile.p_hat);
    r.std_dev = population_std(profile.p_hat, r.mean);
    return r;
}

std::string histogram_to_csv(const HistogramReport& report) {
    std::string out = "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b + 1 < report.bin_edges.size(); ++b) {
        out += format_double(report.bin_edges[b]) + "," + format_double(report.bin_edges[b + 1]) +
               "," + std::to_string(report.counts[b]) + "\n";
    }
    out += "summary,mean," + format_double(report.mean) + "\n";
    out += "summary,std," + format_double(report.std_dev) + "\n";
    out += "summary,n," + std::to_string(report.n) + "\n";
    return out;
}

ProfileDelta compare_profiles(const AcceptanceProfile& a, const AcceptanceProfile& b) {
    if (a.p_hat.empty() || b.p_hat.empty()) throw EmptyProfile("cannot compare empty profiles");
    ProfileDelta d;
    d.mean_a = population_mean(a.p_hat);
    d.mean_b = population_mean(b.p_hat);
    d.mean_difference = d.mean_a - d.mean_b;
    d.std_a = population_std(a.p_hat, d.mean_a);
    d.std_b = population_std(b.p_hat, d.mean_b);
    return d;
}

}  // namespace jaf
