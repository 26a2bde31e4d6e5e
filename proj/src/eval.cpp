#include "cdftn/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cdftn::eval {

void ScoreSet::validate() const {
    if (scores.empty() || scores.size() != labels.size())
        throw std::invalid_argument("ScoreSet: need n >= 1 scores with matching labels");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("ScoreSet: scores must be finite");
    for (int l : labels)
        if (l != 0 && l != 1) throw std::invalid_argument("ScoreSet: labels must be 0 or 1");
}

int64_t ScoreSet::live_count() const {
    int64_t n = 0;
    for (int l : labels) n += (l == 1);
    return n;
}

int64_t ScoreSet::spoof_count() const { return static_cast<int64_t>(labels.size()) - live_count(); }

namespace {

void check_two_classes(const ScoreSet& s, const char* who) {
    s.validate();
    if (s.live_count() == 0 || s.spoof_count() == 0)
        throw std::invalid_argument(std::string(who) + ": both classes must be present");
}

}  // namespace

std::pair<double, double> frr_far(const ScoreSet& s, double threshold) {
    check_two_classes(s, "frr_far");
    int64_t rejected_live = 0, accepted_spoof = 0;
    for (size_t i = 0; i < s.scores.size(); ++i) {
        const bool live_pred = s.scores[i] >= threshold;
        if (s.labels[i] == 1 && !live_pred) ++rejected_live;
        if (s.labels[i] == 0 && live_pred) ++accepted_spoof;
    }
    return {static_cast<double>(rejected_live) / static_cast<double>(s.live_count()),
            static_cast<double>(accepted_spoof) / static_cast<double>(s.spoof_count())};
}

double hter(double frr, double far) {
    if (!(frr >= 0.0 && frr <= 1.0 && far >= 0.0 && far <= 1.0))
        throw std::invalid_argument("hter: rates must lie in [0,1]");
    return (frr + far) / 2.0;
}

double auc(const ScoreSet& s) {
    check_two_classes(s, "auc");
    const size_t n = s.scores.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return s.scores[a] < s.scores[b]; });
    // average ranks over tie groups (1-based)
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && s.scores[order[j + 1]] == s.scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double rank_sum_live = 0.0;
    for (size_t k = 0; k < n; ++k)
        if (s.labels[k] == 1) rank_sum_live += rank[k];
    const double nl = static_cast<double>(s.live_count());
    const double ns = static_cast<double>(s.spoof_count());
    const double u = rank_sum_live - nl * (nl + 1.0) / 2.0;
    return u / (nl * ns);
}

double eer_threshold(const ScoreSet& s) {
    check_two_classes(s, "eer_threshold");
    std::vector<double> uniq = s.scores;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<double> candidates;
    candidates.push_back(uniq.front() - 1.0);  // accept everything
    for (size_t i = 0; i + 1 < uniq.size(); ++i)
        candidates.push_back((uniq[i] + uniq[i + 1]) / 2.0);
    candidates.push_back(uniq.back() + 1.0);  // reject everything
    double best_thr = candidates.front();
    double best_gap = 2.0, best_hter = 2.0;
    for (double thr : candidates) {
        const auto [fr, fa] = frr_far(s, thr);
        const double gap = std::fabs(fr - fa);
        const double ht = (fr + fa) / 2.0;
        if (gap < best_gap || (gap == best_gap && ht < best_hter)) {
            best_gap = gap;
            best_hter = ht;
            best_thr = thr;
        }
    }
    return best_thr;
}

EvalReport evaluate_scores(const ScoreSet& s) {
    EvalReport r;
    r.n_live = s.live_count();
    r.n_spoof = s.spoof_count();
    r.threshold = eer_threshold(s);
    std::tie(r.frr, r.far) = frr_far(s, r.threshold);
    r.hter = hter(r.frr, r.far);
    std::tie(r.frr05, r.far05) = frr_far(s, 0.5);
    r.hter05 = hter(r.frr05, r.far05);
    r.auc = auc(s);
    return r;
}

std::vector<std::array<double, 2>> project_2d(const Tensor& rows) {
    if (rows.rank() != 2) throw std::invalid_argument("project_2d: expected [n, d] input");
    const int64_t n = rows.dim(0), d = rows.dim(1);
    if (n < 3) throw std::invalid_argument("project_2d: need n >= 3 points");
    if (d < 2) throw std::invalid_argument("project_2d: need d >= 2 features");

    Eigen::MatrixXd x(n, d);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) x(i, j) = rows.data()[i * d + j];
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;

    // Gram-matrix route: eigenvectors of X Xt give the projections without a
    // d-by-d decomposition.
    const Eigen::MatrixXd gram = x * x.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    std::vector<std::array<double, 2>> out(static_cast<size_t>(n), {0.0, 0.0});
    for (int axis = 0; axis < 2; ++axis) {
        const int64_t col = n - 1 - axis;  // eigenvalues ascend
        const double ev = es.eigenvalues()(col);
        if (ev <= 1e-12) continue;  // degenerate spectrum: coordinate stays 0
        Eigen::VectorXd dir = x.transpose() * es.eigenvectors().col(col);
        dir /= dir.norm();
        // deterministic sign: largest-magnitude coordinate positive
        int64_t arg = 0;
        for (int64_t j = 1; j < d; ++j)
            if (std::fabs(dir(j)) > std::fabs(dir(arg))) arg = j;
        if (dir(arg) < 0.0) dir = -dir;
        const Eigen::VectorXd coord = x * dir;
        for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)][static_cast<size_t>(axis)] = coord(i);
    }
    return out;
}

std::string report_csv_header() {
    return "topology,source,target,model,n_live,n_spoof,threshold,frr,far,hter,auc,"
           "frr_at_0.5,far_at_0.5,hter_at_0.5";
}

std::string report_csv_row(const std::string& topology, const std::string& source,
                           const std::string& target, const std::string& model,
                           const EvalReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << topology << "," << source << "," << target << "," << model << "," << r.n_live << ","
       << r.n_spoof << "," << r.threshold << "," << r.frr << "," << r.far << "," << r.hter << ","
       << r.auc << "," << r.frr05 << "," << r.far05 << "," << r.hter05;
    return os.str();
}

}  // namespace cdftn::eval
