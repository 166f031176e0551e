#pragma once
// Parameter instability tree: recursive binary partitioning of the
// covariate space into regions of homogeneous delta.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairtree/core_model.hpp"
#include "fairtree/instability_test.hpp"
#include "fairtree/table.hpp"

namespace fairtree {

/// One atomic condition on a covariate.
struct Condition {
    enum class Op : std::uint8_t { In, NotIn, LessEq, Greater };

    std::size_t covariate = 0;
    std::string name;
    Op op = Op::In;
    /// In / NotIn: the split's left level set (NotIn is the right child).
    std::vector<std::string> levels;
    /// Levels of the parent actually routed to this side, for display.
    std::vector<std::string> display_levels;
    /// LessEq / Greater: threshold on the covariate's ordered value.
    double threshold = 0.0;
    std::string threshold_label;
    /// Whether rows with a missing value satisfy the condition.
    bool includes_missing = false;

    bool matches(const CovariateColumn& column, std::size_t row) const;
    std::string to_string() const;
};

struct NodePredicate {
    std::vector<Condition> conditions;

    bool matches(const ObservationTable& table, std::size_t row) const;
    /// Conjunction text; "all" for the root.
    std::string to_string() const;
};

struct SplitRecord {
    std::size_t covariate = 0;
    std::string name;
    CovariateKind kind = CovariateKind::Categorical;
    double statistic = 0.0;
    int df = 0;
    double p_raw = 1.0;
    double p_bonferroni = 1.0;
    double deviance = 0.0;  // children's total deviance
    double parent_deviance = 0.0;
    bool greedy = false;    // categorical grouping found by the ordered fallback
    bool missing_left = false;
};

struct TreeNode {
    int id = 0;  // 1-based, depth-first preorder
    int depth = 0;
    int parent = -1;  // index into InstabilityTree::nodes
    NodePredicate predicate;
    std::int64_t n = 0;  // rows in the node before conditioning
    CellCounts counts;   // conditioned cell counts
    std::optional<ThetaHat> theta;
    double delta = std::numeric_limits<double>::quiet_NaN();
    GroupRates rates;
    std::vector<std::size_t> children;  // indices; empty or two
    std::vector<SplitTest> tests;  // every candidate tested at the node
    std::optional<SplitRecord> split;
    std::string terminal_reason;
    bool collapsed = false;  // internal node turned into a leaf by pruning
    bool pruned = false;     // lies strictly below a collapsed node

    std::int64_t n_cond_a1() const { return counts.a1.total(); }
    std::int64_t n_cond_a2() const { return counts.a2.total(); }
    std::int64_t n_cond() const { return counts.total(); }
    bool has_children() const { return !children.empty(); }
};

struct InstabilityTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root; stored in preorder
    Metric metric = Metric::FPR;
    std::vector<std::string> group_levels;

    const TreeNode& root() const { return nodes.front(); }
    /// Acts as a leaf after pruning.
    bool is_leaf(std::size_t i) const { return nodes[i].children.empty() || nodes[i].collapsed; }
    /// Effective leaves in preorder, ignoring nodes below collapsed ones.
    std::vector<std::size_t> leaves() const;
    /// Effective nodes (not pruned away) in preorder.
    std::vector<std::size_t> visible_nodes() const;
    /// Leaf index that a row of `table` falls into.
    std::size_t leaf_of(const ObservationTable& table, std::size_t row) const;
};

struct TreeConfig {
    Metric metric = Metric::FPR;
    double alpha = 0.05;
    std::int64_t min_node_per_group = 25;  // on the conditioned sample
    int max_depth = 5;
    int max_bins = kDefaultMaxBins;
    std::int64_t disagreement_floor = 5;
    int exhaustive_limit = 12;
    /// Covariate indices to split on; empty means all table covariates.
    std::vector<std::size_t> split_covariates;
    /// Defaults to score_test when empty.
    InstabilityTest test;
};

/// Left/right grouping of a candidate's levels.
struct BinaryPartition {
    std::vector<bool> left;  // per candidate level
    double deviance = 0.0;
    CellCounts left_counts;
    CellCounts right_counts;
    bool greedy = false;
};

/// Deviance-minimizing two-group split of the candidate's levels. Categorical
/// levels are searched exhaustively up to `exhaustive_limit` levels, beyond
/// that by a cut along the level-wise delta order; ordered covariates only
/// use cuts along their order, with a missing level joining the larger side.
/// Both children must keep at least `min_per_group` records in each group.
std::optional<BinaryPartition> best_binary_partition(std::span<const PairedCall> records,
                                                     const SplitCandidate& candidate,
                                                     std::int64_t min_per_group,
                                                     int exhaustive_limit = 12);

/// Candidate for one covariate over the records at `rows` of the table.
SplitCandidate make_candidate(const ObservationTable& table, std::size_t covariate,
                              std::span<const std::size_t> rows, int max_bins);

/// `table` must be restricted to a sensitive pair.
InstabilityTree grow(const ObservationTable& table, const TreeConfig& config);

inline constexpr double kDefaultTau = 0.02;

/// Collapses internal nodes whose effective leaves' deltas all lie within
/// `tau` of each other (max pairwise |difference| < tau), to a fixpoint.
InstabilityTree prune(InstabilityTree tree, double tau = kDefaultTau);

}  // namespace fairtree
