#pragma once
// Columnar observation table: outcome, two binarized model calls, a
// sensitive-group label and the splitting covariates.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairtree/core_model.hpp"
#include "fairtree/instability_test.hpp"

namespace fairtree {

struct CovariateColumn {
    std::string name;
    CovariateKind kind = CovariateKind::Categorical;
    /// Categorical and ordinal: code per row, -1 for missing. Ordinal codes
    /// follow the declared level order.
    std::vector<int> codes;
    std::vector<std::string> levels;
    /// Numeric: value per row, NaN for missing.
    std::vector<double> values;

    bool is_missing(std::size_t row) const;
    /// Position on the covariate's order: the value for numeric, the code for ordinal.
    double ordered_value(std::size_t row) const;
    std::string display(std::size_t row) const;
};

/// Score > cutoff or score >= cutoff.
enum class CutoffRule : std::uint8_t { Greater, GreaterEqual };

/// How a model's calls were obtained; raw scores are kept for AUC.
struct ModelColumn {
    std::string column;
    std::optional<double> cutoff;
    CutoffRule rule = CutoffRule::Greater;
    std::vector<double> scores;  // empty when the column was already binary
};

struct ObservationTable {
    std::vector<std::uint8_t> outcome;  // empty when no outcome column was read
    std::vector<std::uint8_t> yhat1;
    std::vector<std::uint8_t> yhat2;
    std::vector<int> group;
    std::vector<std::string> group_levels;
    std::vector<CovariateColumn> covariates;

    ModelColumn model1;
    ModelColumn model2;

    std::string source;
    std::vector<std::size_t> source_row;  // 1-based data line in the source file

    std::size_t size() const { return yhat1.size(); }
    bool has_outcome() const { return !outcome.empty(); }
    std::optional<std::size_t> covariate_index(const std::string& name) const;
};

/// Keeps rows whose group is a1 or a2 and recodes the group as 0 (a1) / 1 (a2).
/// Throws std::invalid_argument when a label is unknown or a1 == a2.
ObservationTable restrict_to_pair(const ObservationTable& table, const std::string& a1, const std::string& a2);

/// Rows of a two-level table as model records. Requires an outcome column
/// unless `metric` is Accept.
std::vector<LabeledRecord> labeled_records(const ObservationTable& table, Metric metric);

/// Swaps which label is a1 and which is a2.
ObservationTable swap_groups(const ObservationTable& table);
/// Exchanges the roles of the two models.
ObservationTable swap_models(const ObservationTable& table);
/// Flips the outcome and both calls.
ObservationTable flip_labels(const ObservationTable& table);

}  // namespace fairtree
