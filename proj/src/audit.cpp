#include "fairtree/audit.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace fairtree {

DisparityReport make_report(const InstabilityTree& tree, const std::string& model1, const std::string& model2) {
    DisparityReport r;
    r.metric = tree.metric;
    if (tree.group_levels.size() == 2) {
        r.a1 = tree.group_levels[0];
        r.a2 = tree.group_levels[1];
    }
    r.model1 = model1;
    r.model2 = model2;
    for (auto i : tree.visible_nodes()) {
        const auto& node = tree.nodes[i];
        DisparityRow row;
        row.node_id = node.id;
        row.predicate = node.predicate.to_string();
        row.n = node.n;
        row.n_cond_a1 = node.n_cond_a1();
        row.n_cond_a2 = node.n_cond_a2();
        row.rate_m1_a1 = node.rates.m1_a1;
        row.rate_m1_a2 = node.rates.m1_a2;
        row.rate_m2_a1 = node.rates.m2_a1;
        row.rate_m2_a2 = node.rates.m2_a2;
        row.disparity_m1 = node.rates.disparity_m1();
        row.disparity_m2 = node.rates.disparity_m2();
        row.delta = row.disparity_m2 - row.disparity_m1;
        row.leaf = tree.is_leaf(i);
        if (!row.leaf && node.split) {
            row.split_variable = node.split->name;
            row.statistic = node.split->statistic;
            row.df = node.split->df;
            row.p_raw = node.split->p_raw;
            row.p_bonferroni = node.split->p_bonferroni;
        }
        r.rows.push_back(std::move(row));
    }
    return r;
}

const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols{
        "node_id",      "predicate",    "n",          "n_cond_a1",  "n_cond_a2",      "rate_m1_a1",
        "rate_m1_a2",   "rate_m2_a1",   "rate_m2_a2", "disparity_m1", "disparity_m2", "delta",
        "split_variable", "statistic",  "df",         "p_raw",      "p_bonferroni",   "leaf"};
    return cols;
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "NA";
    return fmt::format("{}", v);
}

std::string sanitize(std::string s) {
    for (auto& c : s)
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace

std::string report_tsv(const DisparityReport& report, const std::string& resolved_config_json) {
    std::string out;
    out += fmt::format("# metric: {}\n", to_string(report.metric));
    out += fmt::format("# groups: a1={} a2={}\n", sanitize(report.a1), sanitize(report.a2));
    out += fmt::format("# models: m1={} m2={}\n", sanitize(report.model1), sanitize(report.model2));
    if (!resolved_config_json.empty()) out += fmt::format("# config: {}\n", sanitize(resolved_config_json));
    const auto& cols = report_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "\t" : "") + cols[i];
    out += '\n';
    for (const auto& r : report.rows) {
        const bool split = !r.split_variable.empty();
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.node_id,
                           sanitize(r.predicate), r.n, r.n_cond_a1, r.n_cond_a2, num(r.rate_m1_a1),
                           num(r.rate_m1_a2), num(r.rate_m2_a1), num(r.rate_m2_a2), num(r.disparity_m1),
                           num(r.disparity_m2), num(r.delta), split ? sanitize(r.split_variable) : "NA",
                           num(r.statistic), split ? std::to_string(r.df) : "NA", num(r.p_raw),
                           num(r.p_bonferroni), r.leaf ? 1 : 0);
    }
    return out;
}

AuditResult run_audit(const ObservationTable& table, const AuditConfig& config,
                      const std::pair<std::string, std::string>& pair) {
    auto pair_table = restrict_to_pair(table, pair.first, pair.second);
    auto tree_cfg = config.tree_config();
    for (const auto& v : config.split_vars) {
        const auto idx = pair_table.covariate_index(v.name);
        if (!idx) throw ValidationError("split variable '" + v.name + "' is not in the table");
        tree_cfg.split_covariates.push_back(*idx);
    }
    if (config.split_vars.empty()) {
        for (std::size_t i = 0; i < pair_table.covariates.size(); ++i) tree_cfg.split_covariates.push_back(i);
    }

    AuditResult result;
    result.a1 = pair.first;
    result.a2 = pair.second;
    result.grown = grow(pair_table, tree_cfg);
    result.tree = prune(result.grown, config.tau);
    result.report = make_report(result.tree, table.model1.column, table.model2.column);
    return result;
}

AuditResult run_audit(const ObservationTable& table, const AuditConfig& config) {
    if (config.sensitive.levels.size() != 2) {
        throw ValidationError("run_audit needs exactly two sensitive levels");
    }
    return run_audit(table, config, {config.sensitive.levels[0], config.sensitive.levels[1]});
}

std::vector<AuditResult> run_all_pairs(const ObservationTable& table, const AuditConfig& config) {
    const auto levels = config.sensitive.levels.empty() ? table.group_levels : config.sensitive.levels;
    if (levels.size() < 2) throw ValidationError("all-pairs mode needs at least two sensitive levels");
    std::vector<AuditResult> out;
    for (std::size_t i = 0; i < levels.size(); ++i)
        for (std::size_t j = i + 1; j < levels.size(); ++j) out.push_back(run_audit(table, config, {levels[i], levels[j]}));
    return out;
}

}  // namespace fairtree
