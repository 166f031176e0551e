#include "fairtree/table.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

namespace fairtree {

bool CovariateColumn::is_missing(std::size_t row) const {
    if (kind == CovariateKind::Numeric) return std::isnan(values[row]);
    return codes[row] < 0;
}

double CovariateColumn::ordered_value(std::size_t row) const {
    if (kind == CovariateKind::Numeric) return values[row];
    return codes[row] < 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(codes[row]);
}

std::string CovariateColumn::display(std::size_t row) const {
    if (is_missing(row)) return "NA";
    if (kind == CovariateKind::Numeric) return fmt::format("{}", values[row]);
    return levels.at(static_cast<std::size_t>(codes[row]));
}

std::optional<std::size_t> ObservationTable::covariate_index(const std::string& name) const {
    for (std::size_t i = 0; i < covariates.size(); ++i)
        if (covariates[i].name == name) return i;
    return std::nullopt;
}

namespace {

ObservationTable select_rows(const ObservationTable& t, const std::vector<std::size_t>& rows) {
    ObservationTable out;
    out.group_levels = t.group_levels;
    out.model1 = t.model1;
    out.model2 = t.model2;
    out.model1.scores.clear();
    out.model2.scores.clear();
    out.source = t.source;
    for (const auto& c : t.covariates) {
        CovariateColumn nc;
        nc.name = c.name;
        nc.kind = c.kind;
        nc.levels = c.levels;
        out.covariates.push_back(std::move(nc));
    }
    for (std::size_t r : rows) {
        if (t.has_outcome()) out.outcome.push_back(t.outcome[r]);
        out.yhat1.push_back(t.yhat1[r]);
        out.yhat2.push_back(t.yhat2[r]);
        out.group.push_back(t.group[r]);
        if (!t.source_row.empty()) out.source_row.push_back(t.source_row[r]);
        if (!t.model1.scores.empty()) out.model1.scores.push_back(t.model1.scores[r]);
        if (!t.model2.scores.empty()) out.model2.scores.push_back(t.model2.scores[r]);
        for (std::size_t j = 0; j < t.covariates.size(); ++j) {
            const auto& c = t.covariates[j];
            if (c.kind == CovariateKind::Numeric) {
                out.covariates[j].values.push_back(c.values[r]);
            } else {
                out.covariates[j].codes.push_back(c.codes[r]);
            }
        }
    }
    return out;
}

}  // namespace

ObservationTable restrict_to_pair(const ObservationTable& table, const std::string& a1, const std::string& a2) {
    if (a1 == a2) throw std::invalid_argument("sensitive levels must differ (got '" + a1 + "' twice)");
    int code1 = -1;
    int code2 = -1;
    for (std::size_t i = 0; i < table.group_levels.size(); ++i) {
        if (table.group_levels[i] == a1) code1 = static_cast<int>(i);
        if (table.group_levels[i] == a2) code2 = static_cast<int>(i);
    }
    if (code1 < 0) throw std::invalid_argument("sensitive level '" + a1 + "' does not occur in the data");
    if (code2 < 0) throw std::invalid_argument("sensitive level '" + a2 + "' does not occur in the data");

    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < table.size(); ++r)
        if (table.group[r] == code1 || table.group[r] == code2) rows.push_back(r);
    auto out = select_rows(table, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) out.group[i] = table.group[rows[i]] == code1 ? 0 : 1;
    out.group_levels = {a1, a2};
    return out;
}

std::vector<LabeledRecord> labeled_records(const ObservationTable& table, Metric metric) {
    if (table.group_levels.size() != 2) {
        throw std::invalid_argument("table must be restricted to a sensitive level pair first");
    }
    if (metric != Metric::Accept && !table.has_outcome()) {
        throw std::invalid_argument(fmt::format("metric {} needs an outcome column", to_string(metric)));
    }
    std::vector<LabeledRecord> out(table.size());
    for (std::size_t r = 0; r < table.size(); ++r) {
        out[r].outcome = table.has_outcome() ? table.outcome[r] : 0;
        out[r].yhat1 = table.yhat1[r];
        out[r].yhat2 = table.yhat2[r];
        out[r].group = table.group[r] == 0 ? Group::A1 : Group::A2;
    }
    return out;
}

ObservationTable swap_groups(const ObservationTable& table) {
    auto out = table;
    if (out.group_levels.size() != 2) throw std::invalid_argument("swap_groups needs a two-level table");
    std::swap(out.group_levels[0], out.group_levels[1]);
    for (auto& g : out.group) g = 1 - g;
    return out;
}

ObservationTable swap_models(const ObservationTable& table) {
    auto out = table;
    std::swap(out.yhat1, out.yhat2);
    std::swap(out.model1, out.model2);
    return out;
}

ObservationTable flip_labels(const ObservationTable& table) {
    auto out = table;
    for (auto& y : out.outcome) y = static_cast<std::uint8_t>(1 - y);
    for (auto& y : out.yhat1) y = static_cast<std::uint8_t>(1 - y);
    for (auto& y : out.yhat2) y = static_cast<std::uint8_t>(1 - y);
    return out;
}

}  // namespace fairtree
