#pragma once
// Audit configuration: a declarative JSON file, optionally overridden by
// command-line flags, validated before any data is read.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairtree/core_model.hpp"
#include "fairtree/instability_test.hpp"
#include "fairtree/table.hpp"
#include "fairtree/tree.hpp"

namespace fairtree {

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A prediction column, either already binary or a score with a cutoff.
/// Text form: "col", "col:2" (score > 2), "col:>2", "col:>=3".
struct ModelSpec {
    std::string column;
    std::optional<double> cutoff;
    CutoffRule rule = CutoffRule::Greater;

    static ModelSpec parse(std::string_view text);
    std::string to_string() const;
};

/// Text form: "col=label"; "col" alone means positive label "1".
struct OutcomeSpec {
    std::string column;
    std::string positive = "1";

    static OutcomeSpec parse(std::string_view text);
    std::string to_string() const;
};

/// Text form: "col:a1,a2". With all_pairs, `levels` may list any number of
/// levels (or be empty, meaning every level in the data).
struct SensitiveSpec {
    std::string column;
    std::vector<std::string> levels;

    static SensitiveSpec parse(std::string_view text);
    std::string to_string() const;
};

/// Text form: "name", "name:kind". Ordinal level order may be given in JSON.
struct SplitVarSpec {
    std::string name;
    CovariateKind kind = CovariateKind::Categorical;
    std::vector<std::string> levels;

    static SplitVarSpec parse(std::string_view text);
};

struct AuditConfig {
    Metric metric = Metric::FPR;
    std::optional<OutcomeSpec> outcome;
    ModelSpec model_a;
    ModelSpec model_b;
    SensitiveSpec sensitive;
    std::vector<SplitVarSpec> split_vars;
    bool all_pairs = false;

    double alpha = 0.05;
    std::int64_t min_node = 25;
    double tau = kDefaultTau;
    int max_bins = kDefaultMaxBins;
    int max_depth = 5;
    std::int64_t disagreement_floor = 5;
    int exhaustive_limit = 12;

    char delimiter = ',';
    std::vector<std::string> missing_tokens{"", "NA"};

    /// Throws ValidationError.
    void validate() const;
    TreeConfig tree_config() const;
};

/// Throws ValidationError on unknown keys or malformed values.
AuditConfig config_from_json(const nlohmann::json& j);
AuditConfig load_config(const std::string& path);
nlohmann::ordered_json config_to_json(const AuditConfig& c);

}  // namespace fairtree
