#pragma once
// Overall comparison of the two models: accuracy-type metrics and how often
// they disagree.

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "fairtree/table.hpp"

namespace fairtree {

struct ModelMetrics {
    std::string name;
    double accuracy = 0.0;
    std::optional<double> auc;  // needs raw scores
    double ppv = 0.0;
    double tnr = 0.0;
    double tpr = 0.0;
    double positive_rate = 0.0;  // share classified high-risk / accepted
};

struct BaselineMetrics {
    std::size_t n = 0;
    ModelMetrics model_a;
    ModelMetrics model_b;
    double disagreement = 0.0;
};

/// Area under the ROC curve as the Mann-Whitney statistic with midranks for ties.
double auc_midrank(std::span<const double> scores, std::span<const std::uint8_t> outcome);

/// Requires an outcome column. AUC is left empty when a model has no raw scores.
BaselineMetrics baseline_metrics(const ObservationTable& table);

}  // namespace fairtree
