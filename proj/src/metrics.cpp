#include "ivrlens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ivrlens/error.hpp"

namespace ivrlens::metrics {

namespace {

void check_inputs(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) throw DataError("labels/scores size mismatch");
    if (labels.empty()) throw DataError("empty metric input");
}

std::pair<long long, long long> class_counts(std::span<const int> labels) {
    long long pos = 0;
    for (int y : labels) pos += (y != 0);
    return {pos, (long long)labels.size() - pos};
}

}  // namespace

double balanced_accuracy(std::span<const int> labels, std::span<const double> scores,
                         double threshold) {
    check_inputs(labels, scores);
    long long tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        const bool actual = labels[i] != 0;
        if (actual) {
            predicted ? ++tp : ++fn;
        } else {
            predicted ? ++fp : ++tn;
        }
    }
    if (tp + fn == 0 || tn + fp == 0) {
        throw DataError("balanced_accuracy undefined for single-class labels");
    }
    const double tpr = double(tp) / double(tp + fn);
    const double tnr = double(tn) / double(tn + fp);
    return 0.5 * (tpr + tnr);
}

double precision_at_k(std::span<const int> labels, std::span<const double> scores,
                      double k_percent) {
    check_inputs(labels, scores);
    if (!(k_percent > 0.0 && k_percent <= 100.0)) {
        throw DataError("k_percent must lie in (0,100]");
    }
    const auto n = labels.size();
    const auto top = std::size_t(std::ceil(double(n) * k_percent / 100.0));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // stable: equal scores keep input order
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    long long hits = 0;
    for (std::size_t i = 0; i < top; ++i) hits += (labels[order[i]] != 0);
    return double(hits) / double(top);
}

double auc(std::span<const int> labels, std::span<const double> scores) {
    check_inputs(labels, scores);
    const auto [pos, neg] = class_counts(labels);
    if (pos == 0 || neg == 0) throw DataError("auc undefined for single-class labels");

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of average ranks (1-based) over positives; ties share their rank.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (double(i + 1) + double(j));
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double u = rank_sum_pos - double(pos) * (double(pos) + 1.0) / 2.0;
    return u / (double(pos) * double(neg));
}

std::vector<std::pair<double, double>> roc_points(std::span<const int> labels,
                                                  std::span<const double> scores) {
    check_inputs(labels, scores);
    const auto [pos, neg] = class_counts(labels);
    if (pos == 0 || neg == 0) throw DataError("roc undefined for single-class labels");

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<std::pair<double, double>> points{{0.0, 0.0}};
    long long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            labels[order[j]] != 0 ? ++tp : ++fp;
            ++j;
        }
        points.push_back({double(fp) / double(neg), double(tp) / double(pos)});
        i = j;
    }
    return points;
}

}  // namespace ivrlens::metrics
