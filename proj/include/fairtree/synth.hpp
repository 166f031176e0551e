#pragma once
// Synthetic populations with planted, cell-wise constant delta, and the
// brute-force delta oracle used to check the model pipeline.
//
// Random stream: std::mt19937_64 seeded with the scenario seed. Uniforms take
// the top 53 bits of one draw; replication r of a study uses the seed
// split_seed(seed, r) (SplitMix64 of seed + (r + 1) * 0x9E3779B97F4A7C15).

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairtree/core_model.hpp"
#include "fairtree/instability_test.hpp"
#include "fairtree/table.hpp"

namespace fairtree::synth {

struct CovariateSpec {
    std::string name;
    CovariateKind kind = CovariateKind::Categorical;
    std::vector<std::string> levels;  // categorical / ordinal
    std::vector<double> probs;        // defaults to uniform
    double low = 0.0;                 // numeric: uniform on [low, high)
    double high = 1.0;
};

/// Cell of the covariate space: for each listed covariate the admitted
/// levels; covariates not listed are unrestricted.
struct CellSpec {
    std::map<std::string, std::vector<std::string>> where;
    GroupProbs a1;
    GroupProbs a2;

    /// Delta of this cell for FPR and acceptance rate; FNR is the negation.
    double delta() const;
};

struct Scenario {
    std::int64_t n = 1000;
    double p_a2 = 0.5;
    double prevalence_a1 = 0.5;  // P(Y = 1 | a1)
    double prevalence_a2 = 0.5;
    double agree_positive = 0.5;  // P(both call 1 | the models agree)
    std::string a1 = "a1";
    std::string a2 = "a2";
    std::vector<CovariateSpec> covariates;
    std::vector<CellSpec> cells;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument: bad probabilities, unknown covariates or
    /// levels, or cells that do not tile the categorical covariate space.
    void validate() const;
    /// Index of the cell containing a covariate assignment (level index per covariate).
    std::size_t cell_of(const std::vector<int>& levels) const;
};

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

/// Uniform in [0, 1) from the top 53 bits of one 64-bit draw.
double uniform01(std::mt19937_64& rng);

/// Table restricted to the pair (a1, a2) with covariates as declared, an
/// outcome column and model columns "m1" / "m2".
ObservationTable generate(const Scenario& scenario);

/// Cell index of every generated row, drawn with the same stream as generate().
std::vector<std::size_t> generated_cells(const Scenario& scenario, const ObservationTable& table);

/// Ground-truth delta of a cell under `metric`.
double cell_delta(const CellSpec& cell, Metric metric);

/// Difference in differences by direct row counting over rows with
/// `in_subset(row)` true; a1/a2 are group codes of the table. Throws
/// std::domain_error when a group has no conditioned rows.
double oracle_delta(const ObservationTable& table, Metric metric, int a1, int a2,
                    const std::function<bool(std::size_t)>& in_subset);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::ordered_json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::string& path);

/// Delimited dump of a generated table: y, m1, m2, group, then the covariates.
std::string table_delimited(const ObservationTable& table, char delimiter = ',');

struct CalibrationRow {
    std::string covariate;
    int replications = 0;
    int tested = 0;
    double rejection_rate = 0.0;
    double ks_distance = 0.0;
};

/// Kolmogorov-Smirnov distance between the sample and Uniform(0, 1).
double ks_uniform(std::vector<double> p);

/// Root-node score tests over `replications` datasets drawn with split seeds.
std::vector<CalibrationRow> calibrate(const Scenario& scenario, Metric metric, int replications, double alpha,
                                      int max_bins = kDefaultMaxBins);

}  // namespace fairtree::synth
