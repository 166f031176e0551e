#include "fairtree/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace fairtree {

double auc_midrank(std::span<const double> scores, std::span<const std::uint8_t> outcome) {
    if (scores.size() != outcome.size()) throw std::invalid_argument("auc: scores and outcomes differ in length");
    const auto n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (outcome[order[k]]) {
                positive_rank_sum += midrank;
                ++positives;
            }
        }
        i = j;
    }
    const auto negatives = n - positives;
    if (positives == 0 || negatives == 0) throw std::invalid_argument("auc: needs both outcome classes");
    const double p = static_cast<double>(positives);
    return (positive_rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(negatives));
}

namespace {

ModelMetrics model_metrics(const ModelColumn& model, std::span<const std::uint8_t> calls,
                           std::span<const std::uint8_t> outcome) {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < calls.size(); ++i) {
        if (calls[i]) (outcome[i] ? tp : fp)++;
        else (outcome[i] ? fn : tn)++;
    }
    const auto ratio = [](std::size_t a, std::size_t b) {
        return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
    };
    ModelMetrics m;
    m.name = model.column;
    m.accuracy = ratio(tp + tn, calls.size());
    m.ppv = ratio(tp, tp + fp);
    m.tnr = ratio(tn, tn + fp);
    m.tpr = ratio(tp, tp + fn);
    m.positive_rate = ratio(tp + fp, calls.size());
    if (!model.scores.empty()) m.auc = auc_midrank(model.scores, outcome);
    return m;
}

}  // namespace

BaselineMetrics baseline_metrics(const ObservationTable& table) {
    if (!table.has_outcome()) throw std::invalid_argument("baseline metrics need an outcome column");
    if (table.size() == 0) throw std::invalid_argument("baseline metrics need at least one row");
    BaselineMetrics b;
    b.n = table.size();
    b.model_a = model_metrics(table.model1, table.yhat1, table.outcome);
    b.model_b = model_metrics(table.model2, table.yhat2, table.outcome);
    std::size_t disagree = 0;
    for (std::size_t i = 0; i < table.size(); ++i) disagree += table.yhat1[i] != table.yhat2[i];
    b.disagreement = static_cast<double>(disagree) / static_cast<double>(table.size());
    return b;
}

}  // namespace fairtree
