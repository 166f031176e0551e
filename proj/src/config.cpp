#include "fairtree/config.hpp"

#include <charconv>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace fairtree {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

double parse_number(std::string_view text, std::string_view what) {
    const auto t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw ValidationError(fmt::format("{}: '{}' is not a number", what, text));
    }
    return v;
}

std::vector<std::string> split_list(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

ModelSpec ModelSpec::parse(std::string_view text) {
    ModelSpec m;
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) {
        m.column = trim(text);
    } else {
        m.column = trim(text.substr(0, colon));
        auto rest = std::string_view(text).substr(colon + 1);
        if (rest.starts_with(">=")) {
            m.rule = CutoffRule::GreaterEqual;
            rest.remove_prefix(2);
        } else if (rest.starts_with(">")) {
            rest.remove_prefix(1);
        }
        m.cutoff = parse_number(rest, "model cutoff");
    }
    if (m.column.empty()) throw ValidationError(fmt::format("model spec '{}' has no column", text));
    return m;
}

std::string ModelSpec::to_string() const {
    if (!cutoff) return column;
    return fmt::format("{}:{}{}", column, rule == CutoffRule::Greater ? ">" : ">=", *cutoff);
}

OutcomeSpec OutcomeSpec::parse(std::string_view text) {
    OutcomeSpec o;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
        o.column = trim(text);
    } else {
        o.column = trim(text.substr(0, eq));
        o.positive = trim(text.substr(eq + 1));
    }
    if (o.column.empty()) throw ValidationError(fmt::format("outcome spec '{}' has no column", text));
    return o;
}

std::string OutcomeSpec::to_string() const { return column + "=" + positive; }

SensitiveSpec SensitiveSpec::parse(std::string_view text) {
    SensitiveSpec s;
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        s.column = trim(text);
    } else {
        s.column = trim(text.substr(0, colon));
        s.levels = split_list(text.substr(colon + 1), ',');
    }
    if (s.column.empty()) throw ValidationError(fmt::format("sensitive spec '{}' has no column", text));
    return s;
}

std::string SensitiveSpec::to_string() const { return fmt::format("{}:{}", column, fmt::join(levels, ",")); }

SplitVarSpec SplitVarSpec::parse(std::string_view text) {
    SplitVarSpec v;
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) {
        v.name = trim(text);
    } else {
        v.name = trim(text.substr(0, colon));
        try {
            v.kind = parse_covariate_kind(trim(text.substr(colon + 1)));
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
    }
    if (v.name.empty()) throw ValidationError(fmt::format("split variable '{}' has no name", text));
    return v;
}

void AuditConfig::validate() const {
    if (model_a.column.empty() || model_b.column.empty()) throw ValidationError("both model columns are required");
    if (sensitive.column.empty()) throw ValidationError("a sensitive column is required");
    if (!all_pairs) {
        if (sensitive.levels.size() != 2) {
            throw ValidationError(fmt::format("sensitive attribute needs exactly two levels a1,a2 (got {})",
                                              sensitive.levels.size()));
        }
        if (sensitive.levels[0] == sensitive.levels[1]) throw ValidationError("sensitive levels a1 and a2 must differ");
    }
    if (metric != Metric::Accept && !outcome) {
        throw ValidationError(fmt::format("metric {} needs an outcome column", to_string(metric)));
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in (0, 1]");
    if (min_node < 1) throw ValidationError("min_node must be >= 1");
    if (tau < 0) throw ValidationError("tau must be nonnegative");
    if (max_bins < 2) throw ValidationError("max_bins must be >= 2");
    if (max_depth < 0) throw ValidationError("max_depth must be nonnegative");
    if (disagreement_floor < 0) throw ValidationError("disagreement_floor must be nonnegative");
    if (exhaustive_limit < 2 || exhaustive_limit > 20) throw ValidationError("exhaustive_limit must be in [2, 20]");
    std::set<std::string> seen;
    for (const auto& v : split_vars) {
        if (!seen.insert(v.name).second) throw ValidationError("split variable '" + v.name + "' listed twice");
        if (v.name == sensitive.column) {
            throw ValidationError("split variable '" + v.name + "' is the sensitive column");
        }
    }
}

TreeConfig AuditConfig::tree_config() const {
    TreeConfig t;
    t.metric = metric;
    t.alpha = alpha;
    t.min_node_per_group = min_node;
    t.max_depth = max_depth;
    t.max_bins = max_bins;
    t.disagreement_floor = disagreement_floor;
    t.exhaustive_limit = exhaustive_limit;
    return t;
}

namespace {

template <typename T>
T get_as(const nlohmann::json& v, std::string_view key) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(fmt::format("config key '{}' has the wrong type", key));
    }
}

}  // namespace

AuditConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    AuditConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key == "metric") {
            try {
                c.metric = parse_metric(get_as<std::string>(v, key));
            } catch (const std::invalid_argument& e) {
                throw ValidationError(e.what());
            }
        } else if (key == "outcome") {
            if (v.is_null()) {
                c.outcome.reset();
            } else if (v.is_object()) {
                OutcomeSpec o;
                o.column = get_as<std::string>(v.at("column"), "outcome.column");
                if (v.contains("positive")) {
                    const auto& p = v.at("positive");
                    o.positive = p.is_string() ? p.get<std::string>() : p.dump();
                }
                c.outcome = o;
            } else {
                c.outcome = OutcomeSpec::parse(get_as<std::string>(v, key));
            }
        } else if (key == "model_a" || key == "model_b") {
            auto& m = key == "model_a" ? c.model_a : c.model_b;
            if (v.is_object()) {
                m.column = get_as<std::string>(v.at("column"), key + ".column");
                if (v.contains("cutoff")) m.cutoff = get_as<double>(v.at("cutoff"), key + ".cutoff");
                if (v.contains("rule")) {
                    const auto rule = get_as<std::string>(v.at("rule"), key + ".rule");
                    if (rule == ">") m.rule = CutoffRule::Greater;
                    else if (rule == ">=") m.rule = CutoffRule::GreaterEqual;
                    else throw ValidationError("cutoff rule must be \">\" or \">=\"");
                }
            } else {
                m = ModelSpec::parse(get_as<std::string>(v, key));
            }
        } else if (key == "sensitive") {
            if (v.is_object()) {
                c.sensitive.column = get_as<std::string>(v.at("column"), "sensitive.column");
                if (v.contains("levels")) c.sensitive.levels = get_as<std::vector<std::string>>(v.at("levels"), key);
            } else {
                c.sensitive = SensitiveSpec::parse(get_as<std::string>(v, key));
            }
        } else if (key == "split_vars") {
            if (!v.is_array()) throw ValidationError("split_vars must be an array");
            for (const auto& item : v) {
                if (item.is_string()) {
                    c.split_vars.push_back(SplitVarSpec::parse(item.get<std::string>()));
                } else if (item.is_object()) {
                    SplitVarSpec s;
                    s.name = get_as<std::string>(item.at("name"), "split_vars.name");
                    if (item.contains("kind")) {
                        try {
                            s.kind = parse_covariate_kind(get_as<std::string>(item.at("kind"), "split_vars.kind"));
                        } catch (const std::invalid_argument& e) {
                            throw ValidationError(e.what());
                        }
                    }
                    if (item.contains("levels")) {
                        s.levels = get_as<std::vector<std::string>>(item.at("levels"), "split_vars.levels");
                    }
                    c.split_vars.push_back(std::move(s));
                } else {
                    throw ValidationError("split_vars entries must be strings or objects");
                }
            }
        } else if (key == "all_pairs") {
            c.all_pairs = get_as<bool>(v, key);
        } else if (key == "alpha") {
            c.alpha = get_as<double>(v, key);
        } else if (key == "min_node") {
            c.min_node = get_as<std::int64_t>(v, key);
        } else if (key == "tau") {
            c.tau = get_as<double>(v, key);
        } else if (key == "max_bins") {
            c.max_bins = get_as<int>(v, key);
        } else if (key == "max_depth") {
            c.max_depth = get_as<int>(v, key);
        } else if (key == "disagreement_floor") {
            c.disagreement_floor = get_as<std::int64_t>(v, key);
        } else if (key == "exhaustive_limit") {
            c.exhaustive_limit = get_as<int>(v, key);
        } else if (key == "delimiter") {
            const auto d = get_as<std::string>(v, key);
            if (d == "\\t" || d == "tab") c.delimiter = '\t';
            else if (d.size() == 1) c.delimiter = d[0];
            else throw ValidationError("delimiter must be a single character");
        } else if (key == "missing_tokens") {
            c.missing_tokens = get_as<std::vector<std::string>>(v, key);
        } else {
            throw ValidationError("unknown config key '" + key + "'");
        }
    }
    return c;
}

AuditConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(fmt::format("config file '{}': {}", path, e.what()));
    }
    return config_from_json(j);
}

nlohmann::ordered_json config_to_json(const AuditConfig& c) {
    nlohmann::ordered_json j;
    j["metric"] = std::string(to_string(c.metric));
    j["outcome"] = c.outcome ? nlohmann::ordered_json(c.outcome->to_string()) : nlohmann::ordered_json(nullptr);
    j["model_a"] = c.model_a.to_string();
    j["model_b"] = c.model_b.to_string();
    j["sensitive"] = c.sensitive.to_string();
    auto vars = nlohmann::ordered_json::array();
    for (const auto& v : c.split_vars) {
        nlohmann::ordered_json item;
        item["name"] = v.name;
        item["kind"] = std::string(to_string(v.kind));
        if (!v.levels.empty()) item["levels"] = v.levels;
        vars.push_back(std::move(item));
    }
    j["split_vars"] = std::move(vars);
    j["all_pairs"] = c.all_pairs;
    j["alpha"] = c.alpha;
    j["min_node"] = c.min_node;
    j["tau"] = c.tau;
    j["max_bins"] = c.max_bins;
    j["max_depth"] = c.max_depth;
    j["disagreement_floor"] = c.disagreement_floor;
    j["exhaustive_limit"] = c.exhaustive_limit;
    j["delimiter"] = c.delimiter == '\t' ? std::string("\\t") : std::string(1, c.delimiter);
    j["missing_tokens"] = c.missing_tokens;
    return j;
}

}  // namespace fairtree
