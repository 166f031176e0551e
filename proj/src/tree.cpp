#include "fairtree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace fairtree {

bool Condition::matches(const CovariateColumn& column, std::size_t row) const {
    if (column.is_missing(row)) return includes_missing;
    switch (op) {
        case Op::In:
        case Op::NotIn: {
            const auto& label = column.levels[static_cast<std::size_t>(column.codes[row])];
            const bool in = std::find(levels.begin(), levels.end(), label) != levels.end();
            return op == Op::In ? in : !in;
        }
        case Op::LessEq: return column.ordered_value(row) <= threshold;
        case Op::Greater: return column.ordered_value(row) > threshold;
    }
    return false;
}

std::string Condition::to_string() const {
    std::string s;
    switch (op) {
        case Op::In:
        case Op::NotIn: {
            const auto& shown = display_levels.empty() ? levels : display_levels;
            s = fmt::format("{} {} {{{}}}", name, op == Op::NotIn && display_levels.empty() ? "not in" : "in",
                            fmt::join(shown, ", "));
            break;
        }
        case Op::LessEq: s = fmt::format("{} <= {}", name, threshold_label); break;
        case Op::Greater: s = fmt::format("{} > {}", name, threshold_label); break;
    }
    if (includes_missing) s += " or missing";
    return s;
}

bool NodePredicate::matches(const ObservationTable& table, std::size_t row) const {
    return std::all_of(conditions.begin(), conditions.end(), [&](const Condition& c) {
        return c.matches(table.covariates.at(c.covariate), row);
    });
}

std::string NodePredicate::to_string() const {
    if (conditions.empty()) return "all";
    std::vector<std::string> parts;
    for (const auto& c : conditions) parts.push_back(c.to_string());
    return fmt::format("{}", fmt::join(parts, " & "));
}

std::vector<std::size_t> InstabilityTree::leaves() const {
    std::vector<std::size_t> out;
    for (auto i : visible_nodes())
        if (is_leaf(i)) out.push_back(i);
    return out;
}

std::vector<std::size_t> InstabilityTree::visible_nodes() const {
    std::vector<std::size_t> out;
    if (nodes.empty()) return out;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const auto i = stack.back();
        stack.pop_back();
        out.push_back(i);
        if (!is_leaf(i)) {
            stack.push_back(nodes[i].children[1]);
            stack.push_back(nodes[i].children[0]);
        }
    }
    return out;
}

std::size_t InstabilityTree::leaf_of(const ObservationTable& table, std::size_t row) const {
    std::size_t i = 0;
    while (!is_leaf(i)) {
        const auto left = nodes[i].children[0];
        const auto& cond = nodes[left].predicate.conditions.back();
        i = cond.matches(table.covariates.at(cond.covariate), row) ? left : nodes[i].children[1];
    }
    return i;
}

namespace {

bool admissible(const CellCounts& c, std::int64_t min_per_group) {
    return c.a1.total() >= min_per_group && c.a2.total() >= min_per_group;
}

struct Evaluated {
    double deviance = 0.0;
    CellCounts left;
    CellCounts right;
};

Evaluated evaluate(const std::vector<CellCounts>& per_level, const std::vector<bool>& left) {
    Evaluated e;
    for (std::size_t k = 0; k < per_level.size(); ++k) (left[k] ? e.left : e.right) += per_level[k];
    e.deviance = deviance(e.left) + deviance(e.right);
    return e;
}

void consider(std::optional<BinaryPartition>& best, const std::vector<CellCounts>& per_level,
              std::vector<bool> left, std::int64_t min_per_group) {
    auto e = evaluate(per_level, left);
    if (!admissible(e.left, min_per_group) || !admissible(e.right, min_per_group)) return;
    if (best && !(e.deviance < best->deviance)) return;
    best = BinaryPartition{std::move(left), e.deviance, e.left, e.right, false};
}

}  // namespace

std::optional<BinaryPartition> best_binary_partition(std::span<const PairedCall> records,
                                                     const SplitCandidate& candidate,
                                                     std::int64_t min_per_group, int exhaustive_limit) {
    const auto per_level = level_counts(records, candidate);
    const auto K = per_level.size();
    std::optional<BinaryPartition> best;
    if (K < 2) return best;

    if (candidate.ordered()) {
        const std::size_t ordered_levels = candidate.missing_level ? K - 1 : K;
        const auto missing_n = candidate.missing_level ? per_level[*candidate.missing_level].total() : 0;
        const auto place_missing = [&](std::vector<bool>& left) {
            if (!candidate.missing_level) return;
            std::int64_t n_left = 0, n_right = 0;
            for (std::size_t k = 0; k < ordered_levels; ++k) (left[k] ? n_left : n_right) += per_level[k].total();
            left[*candidate.missing_level] = n_left >= n_right;
        };
        for (std::size_t cut = 0; cut + 1 < ordered_levels; ++cut) {
            std::vector<bool> left(K, false);
            for (std::size_t k = 0; k <= cut; ++k) left[k] = true;
            place_missing(left);
            consider(best, per_level, std::move(left), min_per_group);
        }
        if (candidate.missing_level && missing_n > 0) {
            // Observed values versus missing.
            std::vector<bool> left(K, true);
            left[*candidate.missing_level] = false;
            consider(best, per_level, std::move(left), min_per_group);
        }
        return best;
    }

    if (K <= static_cast<std::size_t>(exhaustive_limit)) {
        // The last level stays on the right, so each bipartition is seen once.
        const std::uint64_t masks = std::uint64_t{1} << (K - 1);
        for (std::uint64_t mask = 1; mask < masks; ++mask) {
            std::vector<bool> left(K, false);
            for (std::size_t k = 0; k + 1 < K; ++k) left[k] = ((mask >> k) & 1U) != 0;
            consider(best, per_level, std::move(left), min_per_group);
        }
        return best;
    }

    // Many levels: order by level-wise delta and cut contiguously.
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> key(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = per_level[k];
        key[k] = (c.a1.total() > 0 && c.a2.total() > 0) ? delta_hat(mle(c)) : std::numeric_limits<double>::infinity();
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    for (std::size_t cut = 0; cut + 1 < K; ++cut) {
        std::vector<bool> left(K, false);
        for (std::size_t j = 0; j <= cut; ++j) left[order[j]] = true;
        consider(best, per_level, std::move(left), min_per_group);
    }
    if (best) best->greedy = true;
    return best;
}

SplitCandidate make_candidate(const ObservationTable& table, std::size_t covariate,
                              std::span<const std::size_t> rows, int max_bins) {
    const auto& col = table.covariates.at(covariate);
    SplitCandidate c;
    if (col.kind == CovariateKind::Numeric) {
        std::vector<double> values;
        values.reserve(rows.size());
        for (auto r : rows) values.push_back(col.values[r]);
        c = bin_numeric(values, max_bins);
    } else {
        std::vector<int> codes;
        codes.reserve(rows.size());
        for (auto r : rows) codes.push_back(col.codes[r]);
        c = levels_from_codes(codes, col.kind, col.levels);
    }
    c.covariate = covariate;
    c.name = col.name;
    return c;
}

namespace {

struct SplitConditions {
    Condition left;
    Condition right;
};

SplitConditions conditions_for(const CovariateColumn& column, std::size_t covariate, const SplitCandidate& cand,
                               const BinaryPartition& part) {
    SplitConditions sc;
    for (auto* c : {&sc.left, &sc.right}) {
        c->covariate = covariate;
        c->name = column.name;
    }
    const bool missing_left = cand.missing_level && part.left[static_cast<std::size_t>(*cand.missing_level)];
    sc.left.includes_missing = missing_left;
    sc.right.includes_missing = cand.missing_level.has_value() && !missing_left;

    if (!cand.ordered()) {
        sc.left.op = Condition::Op::In;
        sc.right.op = Condition::Op::NotIn;
        for (std::size_t k = 0; k < part.left.size(); ++k) {
            if (cand.missing_level && static_cast<int>(k) == *cand.missing_level) continue;
            (part.left[k] ? sc.left.levels : sc.right.display_levels).push_back(cand.level_labels[k]);
        }
        sc.right.levels = sc.left.levels;
        return sc;
    }

    // Highest ordered level on the left.
    const std::size_t ordered_levels = cand.upper_bound.size();
    std::size_t last_left = 0;
    for (std::size_t k = 0; k < ordered_levels; ++k)
        if (part.left[k]) last_left = k;
    sc.left.op = Condition::Op::LessEq;
    sc.right.op = Condition::Op::Greater;
    sc.left.threshold = sc.right.threshold = cand.upper_bound[last_left];
    if (column.kind == CovariateKind::Numeric) {
        sc.left.threshold_label = sc.right.threshold_label = fmt::format("{}", cand.upper_bound[last_left]);
    } else {
        sc.left.threshold_label = sc.right.threshold_label = cand.level_labels[last_left];
    }
    return sc;
}

class Builder {
public:
    Builder(const ObservationTable& table, const TreeConfig& cfg)
        : table_(table), cfg_(cfg), records_(labeled_records(table, cfg.metric)) {
        test_ = cfg.test ? cfg.test : InstabilityTest(score_test);
        covariates_ = cfg.split_covariates;
        if (covariates_.empty()) {
            covariates_.resize(table.covariates.size());
            std::iota(covariates_.begin(), covariates_.end(), 0);
        }
        for (auto c : covariates_)
            if (c >= table.covariates.size()) throw std::invalid_argument("split covariate index out of range");
        tree_.metric = cfg.metric;
        tree_.group_levels = table.group_levels;
    }

    InstabilityTree run() {
        std::vector<std::size_t> rows(table_.size());
        std::iota(rows.begin(), rows.end(), 0);
        build(std::move(rows), NodePredicate{}, 0, -1);
        return std::move(tree_);
    }

private:
    std::size_t build(std::vector<std::size_t> rows, NodePredicate predicate, int depth, int parent) {
        const auto index = tree_.nodes.size();
        {
            TreeNode node;
            node.id = static_cast<int>(index) + 1;
            node.depth = depth;
            node.parent = parent;
            node.predicate = std::move(predicate);
            node.n = static_cast<std::int64_t>(rows.size());
            tree_.nodes.push_back(std::move(node));
        }

        const auto sample = condition_sample(records_, rows, cfg_.metric);
        {
            auto& node = tree_.nodes[index];
            node.counts = count_cells(sample);
            node.rates = group_rates(sample.records);
            if (node.counts.a1.total() > 0 && node.counts.a2.total() > 0) {
                node.theta = mle(node.counts);
                node.delta = delta_hat(*node.theta);
            }
            if (auto reason = degenerate_reason(node.counts, cfg_.disagreement_floor)) {
                node.terminal_reason = "degenerate: " + *reason;
                return index;
            }
            if (depth >= cfg_.max_depth) {
                node.terminal_reason = "maximum depth reached";
                return index;
            }
            if (node.counts.a1.total() < 2 * cfg_.min_node_per_group ||
                node.counts.a2.total() < 2 * cfg_.min_node_per_group) {
                node.terminal_reason = "too small to split";
                return index;
            }
        }

        std::vector<SplitCandidate> candidates;
        std::vector<SplitTest> tests;
        for (auto cov : covariates_) {
            candidates.push_back(make_candidate(table_, cov, sample.source_index, cfg_.max_bins));
            tests.push_back(test_(sample.records, candidates.back()));
        }
        bonferroni_adjust(tests);
        const auto selected = select_split_variable(tests, cfg_.alpha);
        tree_.nodes[index].tests = tests;
        if (!selected) {
            tree_.nodes[index].terminal_reason = "no significant instability";
            return index;
        }

        const auto& cand = candidates[*selected];
        const auto part = best_binary_partition(sample.records, cand, cfg_.min_node_per_group, cfg_.exhaustive_limit);
        if (!part) {
            tree_.nodes[index].terminal_reason = "no admissible binary partition";
            return index;
        }

        const auto& column = table_.covariates[cand.covariate];
        auto sc = conditions_for(column, cand.covariate, cand, *part);
        std::vector<std::size_t> left_rows, right_rows;
        for (auto r : rows) (sc.left.matches(column, r) ? left_rows : right_rows).push_back(r);

        SplitRecord split;
        split.covariate = cand.covariate;
        split.name = cand.name;
        split.kind = column.kind;
        split.statistic = tests[*selected].statistic;
        split.df = tests[*selected].df;
        split.p_raw = tests[*selected].p_raw;
        split.p_bonferroni = tests[*selected].p_bonferroni;
        split.deviance = part->deviance;
        split.parent_deviance = deviance(tree_.nodes[index].counts);
        split.greedy = part->greedy;
        split.missing_left = sc.left.includes_missing;
        tree_.nodes[index].split = split;

        auto left_pred = tree_.nodes[index].predicate;
        auto right_pred = left_pred;
        left_pred.conditions.push_back(std::move(sc.left));
        right_pred.conditions.push_back(std::move(sc.right));

        const auto l = build(std::move(left_rows), std::move(left_pred), depth + 1, static_cast<int>(index));
        const auto r = build(std::move(right_rows), std::move(right_pred), depth + 1, static_cast<int>(index));
        tree_.nodes[index].children = {l, r};
        return index;
    }

    const ObservationTable& table_;
    const TreeConfig& cfg_;
    std::vector<LabeledRecord> records_;
    InstabilityTest test_;
    std::vector<std::size_t> covariates_;
    InstabilityTree tree_;
};

void subtree_leaf_deltas(const InstabilityTree& tree, std::size_t i, std::vector<double>& out) {
    if (tree.is_leaf(i)) {
        if (!std::isnan(tree.nodes[i].delta)) out.push_back(tree.nodes[i].delta);
        return;
    }
    for (auto c : tree.nodes[i].children) subtree_leaf_deltas(tree, c, out);
}

void mark_pruned(InstabilityTree& tree, std::size_t i) {
    for (auto c : tree.nodes[i].children) {
        tree.nodes[c].pruned = true;
        mark_pruned(tree, c);
    }
}

}  // namespace

InstabilityTree grow(const ObservationTable& table, const TreeConfig& config) {
    if (table.group_levels.size() != 2) {
        throw std::invalid_argument("grow: table must be restricted to a sensitive level pair");
    }
    if (!(config.alpha > 0.0 && config.alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
    if (config.min_node_per_group < 1) throw std::invalid_argument("minimum node size must be >= 1");
    if (config.max_bins < 2) throw std::invalid_argument("max_bins must be >= 2");
    if (config.max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
    return Builder(table, config).run();
}

InstabilityTree prune(InstabilityTree tree, double tau) {
    if (tau < 0) throw std::invalid_argument("prune: tau must be nonnegative");
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = tree.nodes.size(); i-- > 0;) {
            auto& node = tree.nodes[i];
            if (node.children.empty() || node.collapsed || node.pruned) continue;
            std::vector<double> deltas;
            subtree_leaf_deltas(tree, i, deltas);
            if (deltas.empty()) continue;
            const auto [lo, hi] = std::minmax_element(deltas.begin(), deltas.end());
            if (*hi - *lo < tau) {
                node.collapsed = true;
                node.terminal_reason = fmt::format("collapsed: leaf deltas span {:.4g} < tau {}", *hi - *lo, tau);
                mark_pruned(tree, i);
                changed = true;
            }
        }
    }
    return tree;
}

}  // namespace fairtree
