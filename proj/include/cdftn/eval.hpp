#pragma once

#include <array>
#include <string>
#include <vector>

#include "cdftn/tensor.hpp"

namespace cdftn::eval {

// Scores follow the live-positive convention: higher = more live, label 1 = live.
struct ScoreSet {
    std::vector<double> scores;
    std::vector<int> labels;

    void validate() const;
    int64_t live_count() const;
    int64_t spoof_count() const;
};

struct EvalReport {
    double threshold = 0.0;  // EER threshold used for the headline numbers
    double frr = 0.0, far = 0.0, hter = 0.0;
    double frr05 = 0.0, far05 = 0.0, hter05 = 0.0;  // fixed-0.5 operating point
    double auc = 0.0;
    int64_t n_live = 0, n_spoof = 0;
};

// Predict live iff score >= threshold. Returns {frr, far}.
std::pair<double, double> frr_far(const ScoreSet& s, double threshold);

double hter(double frr, double far);

// Mann-Whitney AUC via rank sums; ties count one half.
double auc(const ScoreSet& s);

// Scans midpoints of adjacent sorted unique scores plus below-min/above-max
// sentinels; minimizes |frr-far|, breaking ties toward lower HTER and then
// lower threshold.
double eer_threshold(const ScoreSet& s);

EvalReport evaluate_scores(const ScoreSet& s);

// Centers the rows and projects onto the top-2 principal directions; each
// direction's largest-magnitude coordinate is made positive.
std::vector<std::array<double, 2>> project_2d(const Tensor& rows);  // [n, d_flat]

std::string report_csv_header();
std::string report_csv_row(const std::string& topology, const std::string& source,
                           const std::string& target, const std::string& model,
                           const EvalReport& r);

}  // namespace cdftn::eval
