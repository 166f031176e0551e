#include "fairtree/export.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace fairtree {

using ojson = nlohmann::ordered_json;

ExportFormat parse_export_format(std::string_view s) {
    if (s == "json") return ExportFormat::Json;
    if (s == "dot") return ExportFormat::Dot;
    if (s == "text" || s == "txt") return ExportFormat::Text;
    throw std::invalid_argument("unknown tree format '" + std::string(s) + "' (expected json, dot or text)");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// nlohmann writes NaN as null; read it back the same way.
double read_double(const nlohmann::json& v) { return v.is_null() ? kNaN : v.get<double>(); }

std::string_view op_name(Condition::Op op) {
    switch (op) {
        case Condition::Op::In: return "in";
        case Condition::Op::NotIn: return "not_in";
        case Condition::Op::LessEq: return "le";
        case Condition::Op::Greater: return "gt";
    }
    return "?";
}

Condition::Op parse_op(const std::string& s) {
    if (s == "in") return Condition::Op::In;
    if (s == "not_in") return Condition::Op::NotIn;
    if (s == "le") return Condition::Op::LessEq;
    if (s == "gt") return Condition::Op::Greater;
    throw std::invalid_argument("unknown condition op '" + s + "'");
}

ojson condition_json(const Condition& c) {
    ojson j;
    j["covariate"] = c.covariate;
    j["name"] = c.name;
    j["op"] = std::string(op_name(c.op));
    if (c.op == Condition::Op::In || c.op == Condition::Op::NotIn) {
        j["levels"] = c.levels;
        if (!c.display_levels.empty()) j["display_levels"] = c.display_levels;
    } else {
        j["threshold"] = c.threshold;
        j["threshold_label"] = c.threshold_label;
    }
    j["includes_missing"] = c.includes_missing;
    return j;
}

Condition condition_from(const nlohmann::json& j) {
    Condition c;
    c.covariate = j.at("covariate").get<std::size_t>();
    c.name = j.at("name").get<std::string>();
    c.op = parse_op(j.at("op").get<std::string>());
    if (j.contains("levels")) c.levels = j.at("levels").get<std::vector<std::string>>();
    if (j.contains("display_levels")) c.display_levels = j.at("display_levels").get<std::vector<std::string>>();
    if (j.contains("threshold")) c.threshold = read_double(j.at("threshold"));
    if (j.contains("threshold_label")) c.threshold_label = j.at("threshold_label").get<std::string>();
    c.includes_missing = j.at("includes_missing").get<bool>();
    return c;
}

ojson counts_json(const GroupCounts& g) {
    ojson j;
    j["n01"] = g.n01;
    j["n10"] = g.n10;
    j["ndot"] = g.ndot;
    return j;
}

GroupCounts counts_from(const nlohmann::json& j) {
    return {j.at("n01").get<std::int64_t>(), j.at("n10").get<std::int64_t>(), j.at("ndot").get<std::int64_t>()};
}

ojson test_json(const SplitTest& t) {
    ojson j;
    j["covariate"] = t.covariate;
    j["name"] = t.name;
    j["testable"] = t.testable;
    j["statistic"] = t.statistic;
    j["df"] = t.df;
    j["p_raw"] = t.p_raw;
    j["p_bonferroni"] = t.p_bonferroni;
    j["floored_eigenvalues"] = t.floored_eigenvalues;
    if (!t.note.empty()) j["note"] = t.note;
    auto levels = ojson::array();
    for (const auto& l : t.levels) {
        ojson lj;
        lj["label"] = l.label;
        lj["n"] = l.n;
        lj["delta_hat"] = l.delta_hat;
        levels.push_back(std::move(lj));
    }
    j["levels"] = std::move(levels);
    return j;
}

SplitTest test_from(const nlohmann::json& j) {
    SplitTest t;
    t.covariate = j.at("covariate").get<std::size_t>();
    t.name = j.at("name").get<std::string>();
    t.testable = j.at("testable").get<bool>();
    t.statistic = read_double(j.at("statistic"));
    t.df = j.at("df").get<int>();
    t.p_raw = read_double(j.at("p_raw"));
    t.p_bonferroni = read_double(j.at("p_bonferroni"));
    t.floored_eigenvalues = j.at("floored_eigenvalues").get<std::size_t>();
    if (j.contains("note")) t.note = j.at("note").get<std::string>();
    for (const auto& lj : j.at("levels")) {
        t.levels.push_back({lj.at("label").get<std::string>(), lj.at("n").get<std::int64_t>(),
                            read_double(lj.at("delta_hat"))});
    }
    return t;
}

ojson node_json(const InstabilityTree& tree, std::size_t i) {
    const auto& n = tree.nodes[i];
    ojson j;
    j["id"] = n.id;
    j["depth"] = n.depth;
    j["predicate"] = n.predicate.to_string();
    auto conds = ojson::array();
    for (const auto& c : n.predicate.conditions) conds.push_back(condition_json(c));
    j["conditions"] = std::move(conds);
    j["n"] = n.n;
    j["n_cond"] = {{"a1", n.n_cond_a1()}, {"a2", n.n_cond_a2()}};
    j["counts"] = {{"a1", counts_json(n.counts.a1)}, {"a2", counts_json(n.counts.a2)}};
    if (n.theta) {
        j["theta"] = {{"p01_a1", n.theta->a1.p01},
                      {"p10_a1", n.theta->a1.p10},
                      {"p01_a2", n.theta->a2.p01},
                      {"p10_a2", n.theta->a2.p10}};
    } else {
        j["theta"] = nullptr;
    }
    j["delta"] = n.delta;
    j["rates"] = {{"m1_a1", n.rates.m1_a1}, {"m1_a2", n.rates.m1_a2}, {"m2_a1", n.rates.m2_a1}, {"m2_a2", n.rates.m2_a2}};
    auto tests = ojson::array();
    for (const auto& t : n.tests) tests.push_back(test_json(t));
    j["tests"] = std::move(tests);
    if (n.split) {
        const auto& s = *n.split;
        j["split"] = {{"covariate", s.covariate},
                      {"name", s.name},
                      {"kind", std::string(to_string(s.kind))},
                      {"statistic", s.statistic},
                      {"df", s.df},
                      {"p_raw", s.p_raw},
                      {"p_bonferroni", s.p_bonferroni},
                      {"deviance", s.deviance},
                      {"parent_deviance", s.parent_deviance},
                      {"greedy", s.greedy},
                      {"missing_left", s.missing_left}};
    }
    if (!n.terminal_reason.empty()) j["terminal_reason"] = n.terminal_reason;
    j["collapsed"] = n.collapsed;
    j["pruned"] = n.pruned;
    if (!n.children.empty()) {
        auto kids = ojson::array();
        for (auto c : n.children) kids.push_back(node_json(tree, c));
        j[n.collapsed ? "pruned_children" : "children"] = std::move(kids);
    }
    return j;
}

std::size_t node_from(const nlohmann::json& j, InstabilityTree& tree, int parent) {
    const auto index = tree.nodes.size();
    tree.nodes.emplace_back();
    {
        auto& n = tree.nodes.back();
        n.id = j.at("id").get<int>();
        n.depth = j.at("depth").get<int>();
        n.parent = parent;
        for (const auto& c : j.at("conditions")) n.predicate.conditions.push_back(condition_from(c));
        n.n = j.at("n").get<std::int64_t>();
        n.counts.a1 = counts_from(j.at("counts").at("a1"));
        n.counts.a2 = counts_from(j.at("counts").at("a2"));
        if (!j.at("theta").is_null()) {
            const auto& t = j.at("theta");
            ThetaHat th;
            th.a1.p01 = read_double(t.at("p01_a1"));
            th.a1.p10 = read_double(t.at("p10_a1"));
            th.a2.p01 = read_double(t.at("p01_a2"));
            th.a2.p10 = read_double(t.at("p10_a2"));
            n.theta = th;
        }
        n.delta = read_double(j.at("delta"));
        const auto& r = j.at("rates");
        n.rates = {read_double(r.at("m1_a1")), read_double(r.at("m1_a2")), read_double(r.at("m2_a1")),
                   read_double(r.at("m2_a2"))};
        for (const auto& t : j.at("tests")) n.tests.push_back(test_from(t));
        if (j.contains("split")) {
            const auto& s = j.at("split");
            SplitRecord sr;
            sr.covariate = s.at("covariate").get<std::size_t>();
            sr.name = s.at("name").get<std::string>();
            sr.kind = parse_covariate_kind(s.at("kind").get<std::string>());
            sr.statistic = read_double(s.at("statistic"));
            sr.df = s.at("df").get<int>();
            sr.p_raw = read_double(s.at("p_raw"));
            sr.p_bonferroni = read_double(s.at("p_bonferroni"));
            sr.deviance = read_double(s.at("deviance"));
            sr.parent_deviance = read_double(s.at("parent_deviance"));
            sr.greedy = s.at("greedy").get<bool>();
            sr.missing_left = s.at("missing_left").get<bool>();
            n.split = sr;
        }
        if (j.contains("terminal_reason")) n.terminal_reason = j.at("terminal_reason").get<std::string>();
        n.collapsed = j.at("collapsed").get<bool>();
        n.pruned = j.at("pruned").get<bool>();
    }
    const char* key = j.contains("children") ? "children" : (j.contains("pruned_children") ? "pruned_children" : nullptr);
    if (key) {
        const auto& kids = j.at(key);
        if (kids.size() != 2) throw std::invalid_argument("tree node must have zero or two children");
        std::vector<std::size_t> children;
        for (const auto& k : kids) children.push_back(node_from(k, tree, static_cast<int>(index)));
        tree.nodes[index].children = std::move(children);
    }
    return index;
}

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string fixed(double v, int digits = 4) {
    if (std::isnan(v)) return "NA";
    return fmt::format("{:.{}f}", v, digits);
}

std::string pvalue(double p) {
    if (std::isnan(p)) return "NA";
    return fmt::format("{:.3g}", p);
}

std::string dot(const InstabilityTree& tree) {
    std::string out = "digraph instability_tree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
    const auto visible = tree.visible_nodes();
    for (auto i : visible) {
        const auto& n = tree.nodes[i];
        const auto label = fmt::format("Node {}\\n{}\\nn0 = {} ({}: {}, {}: {})\\ndelta = {}", n.id,
                                       dot_escape(n.predicate.conditions.empty() ? "all"
                                                                                 : n.predicate.conditions.back().to_string()),
                                       n.n_cond(), dot_escape(tree.group_levels.at(0)), n.n_cond_a1(),
                                       dot_escape(tree.group_levels.at(1)), n.n_cond_a2(), fixed(n.delta));
        out += fmt::format("  n{} [label=\"{}\"{}];\n", n.id, label,
                           n.collapsed ? ", style=dashed" : (tree.is_leaf(i) ? ", style=rounded" : ""));
    }
    for (auto i : visible) {
        if (tree.is_leaf(i)) continue;
        const auto& n = tree.nodes[i];
        for (auto c : n.children) {
            out += fmt::format("  n{} -> n{} [label=\"{}\\np = {}\"];\n", n.id, tree.nodes[c].id,
                               dot_escape(n.split ? n.split->name : std::string()),
                               pvalue(n.split ? n.split->p_bonferroni : kNaN));
        }
    }
    out += "}\n";
    return out;
}

void text_node(const InstabilityTree& tree, std::size_t i, std::string& out) {
    const auto& n = tree.nodes[i];
    const std::string indent(static_cast<std::size_t>(n.depth) * 2, ' ');
    out += fmt::format("{}[{}] {}: n={} n_cond={} ({}={}, {}={}) delta={}", indent, n.id,
                       n.predicate.conditions.empty() ? "all" : n.predicate.conditions.back().to_string(), n.n,
                       n.n_cond(), tree.group_levels.at(0), n.n_cond_a1(), tree.group_levels.at(1), n.n_cond_a2(),
                       fixed(n.delta));
    if (n.collapsed) out += " (collapsed)";
    out += '\n';
    if (!tree.is_leaf(i) && n.split) {
        out += fmt::format("{}  split on {}: T={} df={} p={} p_adj={}\n", indent, n.split->name,
                           fixed(n.split->statistic, 3), n.split->df, pvalue(n.split->p_raw),
                           pvalue(n.split->p_bonferroni));
        for (auto c : n.children) text_node(tree, c, out);
    }
}

}  // namespace

ojson tree_to_json(const InstabilityTree& tree) {
    if (tree.nodes.empty()) throw std::invalid_argument("cannot export an empty tree");
    ojson j;
    j["schema_version"] = kTreeSchemaVersion;
    j["metric"] = std::string(to_string(tree.metric));
    j["groups"] = tree.group_levels;
    j["root"] = node_json(tree, 0);
    return j;
}

InstabilityTree tree_from_json(const nlohmann::json& j) {
    if (j.at("schema_version").get<int>() != kTreeSchemaVersion) {
        throw std::invalid_argument("unsupported tree schema version");
    }
    InstabilityTree tree;
    tree.metric = parse_metric(j.at("metric").get<std::string>());
    tree.group_levels = j.at("groups").get<std::vector<std::string>>();
    node_from(j.at("root"), tree, -1);
    return tree;
}

std::string export_tree(const InstabilityTree& tree, ExportFormat format) {
    switch (format) {
        case ExportFormat::Json: return tree_to_json(tree).dump(2) + "\n";
        case ExportFormat::Dot: return dot(tree);
        case ExportFormat::Text: {
            std::string out;
            text_node(tree, 0, out);
            return out;
        }
    }
    return {};
}

}  // namespace fairtree
