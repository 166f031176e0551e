#pragma once
// End-to-end audit: grow and prune a tree for one sensitive pair and
// tabulate per-node disparities.

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fairtree/config.hpp"
#include "fairtree/table.hpp"
#include "fairtree/tree.hpp"

namespace fairtree {

struct DisparityRow {
    int node_id = 0;
    std::string predicate;
    std::int64_t n = 0;
    std::int64_t n_cond_a1 = 0;
    std::int64_t n_cond_a2 = 0;
    double rate_m1_a1 = 0.0;
    double rate_m1_a2 = 0.0;
    double rate_m2_a1 = 0.0;
    double rate_m2_a2 = 0.0;
    double disparity_m1 = 0.0;
    double disparity_m2 = 0.0;
    double delta = 0.0;
    // Internal nodes only.
    std::string split_variable;
    double statistic = std::numeric_limits<double>::quiet_NaN();
    int df = 0;
    double p_raw = std::numeric_limits<double>::quiet_NaN();
    double p_bonferroni = std::numeric_limits<double>::quiet_NaN();
    bool leaf = false;
};

/// Root ("Overall") row first, then the remaining visible nodes in preorder.
struct DisparityReport {
    Metric metric = Metric::FPR;
    std::string a1;
    std::string a2;
    std::string model1;
    std::string model2;
    std::vector<DisparityRow> rows;
};

DisparityReport make_report(const InstabilityTree& tree, const std::string& model1, const std::string& model2);

/// Column order of the TSV body.
const std::vector<std::string>& report_columns();

/// Header comment lines (the resolved config as compact JSON, when given)
/// followed by the tab-separated table. Numbers use the shortest round-trip form.
std::string report_tsv(const DisparityReport& report, const std::string& resolved_config_json = {});

struct AuditResult {
    std::string a1;
    std::string a2;
    InstabilityTree grown;
    InstabilityTree tree;  // pruned, with collapsed subtrees kept
    DisparityReport report;
};

/// `table` must contain the sensitive pair named in the config (or any two
/// levels when `pair` is given explicitly). Split variables are looked up by name.
AuditResult run_audit(const ObservationTable& table, const AuditConfig& config);
AuditResult run_audit(const ObservationTable& table, const AuditConfig& config,
                      const std::pair<std::string, std::string>& pair);

/// One audit per unordered pair of levels. Levels come from the config, or
/// from the table when the config lists none; pairs keep that level order.
std::vector<AuditResult> run_all_pairs(const ObservationTable& table, const AuditConfig& config);

}  // namespace fairtree
