// fairtree: compare two classifiers' fairness disparities across subgroups.
//
//   fairtree metrics  --data compas.csv --model-a priors_count:2 --model-b decile_score:5 ...
//   fairtree audit    --data compas.csv --config audit.json --format tsv
//   fairtree simulate --config scenario.json [--replications 2000]
//
// Exit codes: 0 success, 2 validation error, 3 degenerate root node.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fairtree/audit.hpp"
#include "fairtree/config.hpp"
#include "fairtree/export.hpp"
#include "fairtree/ingest.hpp"
#include "fairtree/metrics.hpp"
#include "fairtree/synth.hpp"

namespace {

using namespace fairtree;

constexpr int kExitValidation = 2;
constexpr int kExitDegenerate = 3;

struct Flags {
    std::string data;
    std::string config;
    std::optional<std::string> metric;
    std::optional<std::string> model_a;
    std::optional<std::string> model_b;
    std::optional<std::string> outcome;
    std::optional<std::string> sensitive;
    std::vector<std::string> split_vars;
    std::optional<double> alpha;
    std::optional<std::int64_t> min_node;
    std::optional<double> tau;
    std::optional<int> max_bins;
    std::optional<int> max_depth;
    bool all_pairs = false;
    std::string out;
    std::string format;
    // simulate
    int replications = 0;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> n;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--data", f.data, "Delimited data file with a header row");
    sub->add_option("--config", f.config, "JSON config; flags override its values");
    sub->add_option("--metric", f.metric, "fpr, fnr or accept");
    sub->add_option("--model-a", f.model_a, "First model: column[:cutoff], cutoff as N, >N or >=N");
    sub->add_option("--model-b", f.model_b, "Second model: column[:cutoff]");
    sub->add_option("--outcome", f.outcome, "column=positive-label");
    sub->add_option("--sensitive", f.sensitive, "column:a1,a2");
    sub->add_option("--out", f.out, "Output file (default stdout)");
}

void add_tree_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--split-vars", f.split_vars, "name[:categorical|ordinal|numeric], comma separated")
        ->delimiter(',');
    sub->add_option("--alpha", f.alpha, "Significance level after Bonferroni adjustment");
    sub->add_option("--min-node", f.min_node, "Minimum conditioned records per group in a node");
    sub->add_option("--tau", f.tau, "Pruning threshold on leaf delta spread");
    sub->add_option("--max-bins", f.max_bins, "Quantile bins for numeric covariates");
    sub->add_option("--max-depth", f.max_depth, "Maximum tree depth");
    sub->add_flag("--all-pairs", f.all_pairs, "One audit per pair of sensitive levels");
}

AuditConfig resolve_config(const Flags& f) {
    AuditConfig c = f.config.empty() ? AuditConfig{} : load_config(f.config);
    try {
        if (f.metric) c.metric = parse_metric(*f.metric);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    if (f.model_a) c.model_a = ModelSpec::parse(*f.model_a);
    if (f.model_b) c.model_b = ModelSpec::parse(*f.model_b);
    if (f.outcome) c.outcome = OutcomeSpec::parse(*f.outcome);
    if (f.sensitive) c.sensitive = SensitiveSpec::parse(*f.sensitive);
    if (!f.split_vars.empty()) {
        // Flags replace the list but keep level orders declared in the config.
        std::vector<SplitVarSpec> vars;
        for (const auto& s : f.split_vars) {
            auto v = SplitVarSpec::parse(s);
            for (const auto& old : c.split_vars)
                if (old.name == v.name && old.kind == v.kind) v.levels = old.levels;
            vars.push_back(std::move(v));
        }
        c.split_vars = std::move(vars);
    }
    if (f.alpha) c.alpha = *f.alpha;
    if (f.min_node) c.min_node = *f.min_node;
    if (f.tau) c.tau = *f.tau;
    if (f.max_bins) c.max_bins = *f.max_bins;
    if (f.max_depth) c.max_depth = *f.max_depth;
    if (f.all_pairs) c.all_pairs = true;
    return c;
}

void emit(const Flags& f, const std::string& text) {
    if (f.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream o(f.out, std::ios::binary);
    if (!o) throw ValidationError("cannot write '" + f.out + "'");
    o << text;
}

IngestResult read_data(const Flags& f, const AuditConfig& c) {
    if (f.data.empty()) throw ValidationError("--data is required");
    auto r = ingest(f.data, c);
    std::cerr << fmt::format("read {} rows from {}, rejected {}\n", r.input_rows, f.data, r.rejected.size());
    for (std::size_t i = 0; i < r.rejected.size() && i < 10; ++i)
        std::cerr << fmt::format("  line {}: {}\n", r.rejected[i].line, r.rejected[i].reason);
    if (r.rejected.size() > 10) std::cerr << fmt::format("  ... {} more\n", r.rejected.size() - 10);
    return r;
}

std::string opt_num(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "NA"; }

int run_metrics(const Flags& f) {
    auto c = resolve_config(f);
    if (!c.outcome) throw ValidationError("metrics needs --outcome");
    if (c.model_a.column.empty() || c.model_b.column.empty()) throw ValidationError("metrics needs both models");
    if (c.sensitive.column.empty()) throw ValidationError("metrics needs --sensitive");
    auto table = read_data(f, c).table;
    if (c.sensitive.levels.size() == 2) table = restrict_to_pair(table, c.sensitive.levels[0], c.sensitive.levels[1]);
    const auto m = baseline_metrics(table);

    const auto format = f.format.empty() ? std::string("text") : f.format;
    std::string out;
    if (format == "json") {
        nlohmann::ordered_json j;
        j["n"] = m.n;
        j["disagreement"] = m.disagreement;
        for (const auto* mm : {&m.model_a, &m.model_b}) {
            nlohmann::ordered_json e;
            e["name"] = mm->name;
            e["accuracy"] = mm->accuracy;
            e["auc"] = mm->auc ? nlohmann::ordered_json(*mm->auc) : nlohmann::ordered_json(nullptr);
            e["ppv"] = mm->ppv;
            e["tnr"] = mm->tnr;
            e["tpr"] = mm->tpr;
            e["positive_rate"] = mm->positive_rate;
            j["models"].push_back(std::move(e));
        }
        out = j.dump(2) + "\n";
    } else if (format == "tsv") {
        out = "model\taccuracy\tauc\tppv\ttnr\ttpr\tpositive_rate\n";
        for (const auto* mm : {&m.model_a, &m.model_b})
            out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", mm->name, mm->accuracy,
                               mm->auc ? fmt::format("{}", *mm->auc) : "NA", mm->ppv, mm->tnr, mm->tpr,
                               mm->positive_rate);
        out += fmt::format("# n={} disagreement={}\n", m.n, m.disagreement);
    } else if (format == "text") {
        out += fmt::format("{:<24} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}\n", "model", "accuracy", "auc", "ppv", "tnr",
                           "tpr", "positive");
        for (const auto* mm : {&m.model_a, &m.model_b})
            out += fmt::format("{:<24} {:>8.4f} {:>8} {:>8.4f} {:>8.4f} {:>8.4f} {:>10.4f}\n", mm->name, mm->accuracy,
                               opt_num(mm->auc), mm->ppv, mm->tnr, mm->tpr, mm->positive_rate);
        out += fmt::format("n = {}, disagreement = {:.4f}\n", m.n, m.disagreement);
    } else {
        throw ValidationError("metrics --format must be text, tsv or json");
    }
    emit(f, out);
    return 0;
}

bool degenerate_root(const AuditResult& r) { return r.grown.root().terminal_reason.starts_with("degenerate"); }

int run_audit_cmd(const Flags& f) {
    auto c = resolve_config(f);
    c.validate();
    const auto format = f.format.empty() ? std::string("tsv") : f.format;
    std::optional<ExportFormat> tree_format;
    if (format != "tsv") {
        try {
            tree_format = parse_export_format(format);
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
    }
    const auto ingested = read_data(f, c);
    std::vector<AuditResult> results;
    try {
        if (c.all_pairs) results = run_all_pairs(ingested.table, c);
        else results.push_back(run_audit(ingested.table, c));
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }

    const auto resolved = config_to_json(c).dump();
    std::string out;
    bool degenerate = false;
    for (const auto& r : results) {
        if (degenerate_root(r)) {
            degenerate = true;
            std::cerr << fmt::format("root node for {} vs {} is degenerate: {}\n", r.a1, r.a2,
                                     r.grown.root().terminal_reason);
        }
        if (results.size() > 1 && format != "json") out += fmt::format("# pair: a1={} a2={}\n", r.a1, r.a2);
        if (tree_format) {
            out += export_tree(r.tree, *tree_format);
        } else {
            out += report_tsv(r.report, resolved);
        }
    }
    emit(f, out);
    return degenerate ? kExitDegenerate : 0;
}

int run_simulate(const Flags& f, const std::string& scenario_path) {
    const auto path = scenario_path.empty() ? f.config : scenario_path;
    if (path.empty()) throw ValidationError("simulate needs --scenario (or --config) with a scenario file");
    synth::Scenario s;
    try {
        s = synth::load_scenario(path);
        if (f.seed) s.seed = *f.seed;
        if (f.n) s.n = *f.n;
        s.validate();
    } catch (const std::exception& e) {
        throw ValidationError(fmt::format("scenario '{}': {}", path, e.what()));
    }
    Metric metric = Metric::FPR;
    try {
        if (f.metric) metric = parse_metric(*f.metric);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    const double alpha = f.alpha.value_or(0.05);
    const int max_bins = f.max_bins.value_or(kDefaultMaxBins);

    std::string out;
    if (f.replications > 0) {
        out += fmt::format("# generator: mt19937_64, replication seeds split_seed({}, r)\n", s.seed);
        out += fmt::format("# metric: {} alpha: {} n: {}\n", to_string(metric), alpha, s.n);
        out += "covariate\treplications\ttested\trejection_rate\tks_distance\n";
        for (const auto& row : synth::calibrate(s, metric, f.replications, alpha, max_bins))
            out += fmt::format("{}\t{}\t{}\t{}\t{}\n", row.covariate, row.replications, row.tested,
                               row.rejection_rate, row.ks_distance);
    } else {
        const auto table = synth::generate(s);
        const char delim = f.format == "csv" ? ',' : '\t';
        out += fmt::format("# {}\n", table.source);
        out += synth::table_delimited(table, delim);
    }
    emit(f, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subgroup search for differences in fairness disparities between two classifiers"};
    app.require_subcommand(1);
    Flags flags;
    std::string scenario;

    auto* metrics = app.add_subcommand("metrics", "Accuracy, AUC, PPV, TNR, TPR and disagreement of both models");
    add_common(metrics, flags);
    metrics->add_option("--format", flags.format, "text, tsv or json");

    auto* audit = app.add_subcommand("audit", "Grow and prune the disparity instability tree");
    add_common(audit, flags);
    add_tree_flags(audit, flags);
    audit->add_option("--format", flags.format, "json, dot, text or tsv (default tsv report)")
        ->check(CLI::IsMember({"json", "dot", "text", "tsv"}));

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic table or a null calibration summary");
    simulate->add_option("--scenario", scenario, "Scenario JSON file");
    simulate->add_option("--config", flags.config, "Alias of --scenario");
    simulate->add_option("--metric", flags.metric, "fpr, fnr or accept");
    simulate->add_option("--replications", flags.replications, "Calibration replications (0 writes one table)");
    simulate->add_option("--seed", flags.seed, "Override the scenario seed");
    simulate->add_option("--n", flags.n, "Override the scenario size");
    simulate->add_option("--alpha", flags.alpha, "Level for rejection rates");
    simulate->add_option("--max-bins", flags.max_bins, "Quantile bins for numeric covariates");
    simulate->add_option("--format", flags.format, "tsv or csv for tables")->check(CLI::IsMember({"tsv", "csv"}));
    simulate->add_option("--out", flags.out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (metrics->parsed()) return run_metrics(flags);
        if (audit->parsed()) return run_audit_cmd(flags);
        return run_simulate(flags, scenario);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const IngestError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
