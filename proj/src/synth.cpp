#include "fairtree/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace fairtree::synth {

double CellSpec::delta() const { return (a2.p01 - a2.p10) - (a1.p01 - a1.p10); }

double cell_delta(const CellSpec& cell, Metric metric) {
    return metric == Metric::FNR ? -cell.delta() : cell.delta();
}

namespace {

void check_prob(double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(fmt::format("{} = {} is not a probability", what, p));
}

std::vector<double> level_probs(const CovariateSpec& c) {
    if (!c.probs.empty()) return c.probs;
    return std::vector<double>(c.levels.size(), 1.0 / static_cast<double>(c.levels.size()));
}

bool cell_matches(const Scenario& s, const CellSpec& cell, const std::vector<int>& levels) {
    for (const auto& [name, admitted] : cell.where) {
        const auto it = std::find_if(s.covariates.begin(), s.covariates.end(),
                                     [&](const CovariateSpec& c) { return c.name == name; });
        const auto j = static_cast<std::size_t>(it - s.covariates.begin());
        const auto& label = it->levels[static_cast<std::size_t>(levels[j])];
        if (std::find(admitted.begin(), admitted.end(), label) == admitted.end()) return false;
    }
    return true;
}

}  // namespace

void Scenario::validate() const {
    if (n < 1) throw std::invalid_argument("scenario n must be >= 1");
    check_prob(p_a2, "p_a2");
    check_prob(prevalence_a1, "prevalence_a1");
    check_prob(prevalence_a2, "prevalence_a2");
    check_prob(agree_positive, "agree_positive");
    if (a1 == a2) throw std::invalid_argument("scenario group labels must differ");
    std::set<std::string> names;
    for (const auto& c : covariates) {
        if (!names.insert(c.name).second) throw std::invalid_argument("duplicate covariate '" + c.name + "'");
        if (c.kind == CovariateKind::Numeric) {
            if (!(c.high > c.low)) throw std::invalid_argument("numeric covariate '" + c.name + "' needs high > low");
            continue;
        }
        if (c.levels.empty()) throw std::invalid_argument("covariate '" + c.name + "' has no levels");
        const auto probs = level_probs(c);
        if (probs.size() != c.levels.size()) {
            throw std::invalid_argument("covariate '" + c.name + "' has mismatched level probabilities");
        }
        double total = 0.0;
        for (double p : probs) {
            check_prob(p, c.name + " level probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("level probabilities of '" + c.name + "' do not sum to 1");
    }
    if (cells.empty()) throw std::invalid_argument("scenario needs at least one cell");
    for (const auto& cell : cells) {
        for (const auto* g : {&cell.a1, &cell.a2}) {
            check_prob(g->p01, "cell p01");
            check_prob(g->p10, "cell p10");
            if (g->p01 + g->p10 > 1.0 + 1e-12) throw std::invalid_argument("cell p01 + p10 exceeds 1");
        }
        for (const auto& [name, admitted] : cell.where) {
            const auto it = std::find_if(covariates.begin(), covariates.end(),
                                         [&](const CovariateSpec& c) { return c.name == name; });
            if (it == covariates.end()) throw std::invalid_argument("cell refers to unknown covariate '" + name + "'");
            if (it->kind == CovariateKind::Numeric) {
                throw std::invalid_argument("cells may only restrict categorical or ordinal covariates");
            }
            for (const auto& l : admitted) {
                if (std::find(it->levels.begin(), it->levels.end(), l) == it->levels.end()) {
                    throw std::invalid_argument("cell refers to unknown level '" + l + "' of '" + name + "'");
                }
            }
        }
    }

    // Tiling: every combination of levels is claimed by exactly one cell.
    std::vector<std::size_t> dims;
    for (const auto& c : covariates) dims.push_back(c.kind == CovariateKind::Numeric ? 1 : c.levels.size());
    std::size_t combos = 1;
    for (auto d : dims) {
        combos *= d;
        if (combos > 1'000'000) throw std::invalid_argument("covariate space too large to check the cell tiling");
    }
    std::vector<int> levels(covariates.size(), 0);
    for (std::size_t k = 0; k < combos; ++k) {
        std::size_t rest = k;
        for (std::size_t j = 0; j < dims.size(); ++j) {
            levels[j] = static_cast<int>(rest % dims[j]);
            rest /= dims[j];
        }
        const auto hits = std::count_if(cells.begin(), cells.end(),
                                        [&](const CellSpec& cell) { return cell_matches(*this, cell, levels); });
        if (hits != 1) {
            throw std::invalid_argument(fmt::format("cells do not tile the covariate space ({} cells claim combination {})",
                                                    hits, k));
        }
    }
}

std::size_t Scenario::cell_of(const std::vector<int>& levels) const {
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (cell_matches(*this, cells[i], levels)) return i;
    throw std::invalid_argument("no cell contains the covariate assignment");
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

ObservationTable generate(const Scenario& s) {
    s.validate();
    std::mt19937_64 rng(s.seed);
    const auto n = static_cast<std::size_t>(s.n);

    ObservationTable t;
    t.group_levels = {s.a1, s.a2};
    t.model1.column = "m1";
    t.model2.column = "m2";
    t.source = fmt::format("synthetic(seed={}, generator=mt19937_64)", s.seed);
    std::vector<std::vector<double>> cdf;
    for (const auto& c : s.covariates) {
        CovariateColumn col;
        col.name = c.name;
        col.kind = c.kind;
        col.levels = c.kind == CovariateKind::Numeric ? std::vector<std::string>{} : c.levels;
        t.covariates.push_back(std::move(col));
        std::vector<double> acc;
        if (c.kind != CovariateKind::Numeric) {
            const auto probs = level_probs(c);
            acc.resize(probs.size());
            std::partial_sum(probs.begin(), probs.end(), acc.begin());
        }
        cdf.push_back(std::move(acc));
    }
    t.outcome.reserve(n);
    t.yhat1.reserve(n);
    t.yhat2.reserve(n);
    t.group.reserve(n);

    std::vector<int> levels(s.covariates.size(), 0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < s.covariates.size(); ++j) {
            const auto& c = s.covariates[j];
            const double u = uniform01(rng);
            if (c.kind == CovariateKind::Numeric) {
                t.covariates[j].values.push_back(c.low + u * (c.high - c.low));
                levels[j] = 0;
            } else {
                const auto& acc = cdf[j];
                auto k = static_cast<int>(std::upper_bound(acc.begin(), acc.end(), u) - acc.begin());
                k = std::min(k, static_cast<int>(acc.size()) - 1);
                t.covariates[j].codes.push_back(k);
                levels[j] = k;
            }
        }
        const bool in_a2 = uniform01(rng) < s.p_a2;
        const double prevalence = in_a2 ? s.prevalence_a2 : s.prevalence_a1;
        const std::uint8_t y = uniform01(rng) < prevalence ? 1 : 0;
        const auto& cell = s.cells[s.cell_of(levels)];
        const auto& p = in_a2 ? cell.a2 : cell.a1;
        const double u = uniform01(rng);
        std::uint8_t m1 = 0, m2 = 0;
        if (u < p.p01) {
            m2 = 1;
        } else if (u < p.p01 + p.p10) {
            m1 = 1;
        } else {
            const bool both = uniform01(rng) < s.agree_positive;
            m1 = m2 = both ? 1 : 0;
        }
        t.outcome.push_back(y);
        t.yhat1.push_back(m1);
        t.yhat2.push_back(m2);
        t.group.push_back(in_a2 ? 1 : 0);
        t.source_row.push_back(r + 1);
    }
    return t;
}

std::vector<std::size_t> generated_cells(const Scenario& s, const ObservationTable& table) {
    std::vector<std::size_t> out(table.size());
    std::vector<int> levels(s.covariates.size(), 0);
    for (std::size_t r = 0; r < table.size(); ++r) {
        for (std::size_t j = 0; j < s.covariates.size(); ++j)
            levels[j] = s.covariates[j].kind == CovariateKind::Numeric ? 0 : table.covariates[j].codes[r];
        out[r] = s.cell_of(levels);
    }
    return out;
}

double oracle_delta(const ObservationTable& table, Metric metric, int a1, int a2,
                    const std::function<bool(std::size_t)>& in_subset) {
    // rate[model][group] = share of conditioned rows whose call counts as the
    // metric's event: a positive call (FPR, acceptance) or a negative call (FNR).
    double hits[2][2] = {{0, 0}, {0, 0}};
    double total[2] = {0, 0};
    for (std::size_t r = 0; r < table.size(); ++r) {
        if (!in_subset(r)) continue;
        int g = -1;
        if (table.group[r] == a1) g = 0;
        else if (table.group[r] == a2) g = 1;
        if (g < 0) continue;
        if (metric == Metric::FPR && table.outcome[r] != 0) continue;
        if (metric == Metric::FNR && table.outcome[r] != 1) continue;
        total[g] += 1;
        const int event = metric == Metric::FNR ? 0 : 1;
        hits[0][g] += table.yhat1[r] == event ? 1 : 0;
        hits[1][g] += table.yhat2[r] == event ? 1 : 0;
    }
    if (total[0] == 0 || total[1] == 0) throw std::domain_error("oracle_delta: a group has no conditioned rows");
    const double m1_a1 = hits[0][0] / total[0], m1_a2 = hits[0][1] / total[1];
    const double m2_a1 = hits[1][0] / total[0], m2_a2 = hits[1][1] / total[1];
    return (m2_a2 - m2_a1) - (m1_a2 - m1_a1);
}

namespace {

GroupProbs probs_from(const nlohmann::json& j) {
    return {j.at("p01").get<double>(), j.at("p10").get<double>()};
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    static const std::set<std::string> known{"n", "p_a2", "prevalence_a1", "prevalence_a2", "agree_positive",
                                             "a1", "a2", "covariates", "cells", "seed"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw std::invalid_argument("unknown scenario key '" + key + "'");
    s.n = j.value("n", s.n);
    s.p_a2 = j.value("p_a2", s.p_a2);
    s.prevalence_a1 = j.value("prevalence_a1", s.prevalence_a1);
    s.prevalence_a2 = j.value("prevalence_a2", s.prevalence_a2);
    s.agree_positive = j.value("agree_positive", s.agree_positive);
    s.a1 = j.value("a1", s.a1);
    s.a2 = j.value("a2", s.a2);
    s.seed = j.value("seed", s.seed);
    for (const auto& cj : j.value("covariates", nlohmann::json::array())) {
        CovariateSpec c;
        c.name = cj.at("name").get<std::string>();
        c.kind = parse_covariate_kind(cj.value("kind", std::string("categorical")));
        c.levels = cj.value("levels", std::vector<std::string>{});
        c.probs = cj.value("probs", std::vector<double>{});
        c.low = cj.value("low", 0.0);
        c.high = cj.value("high", 1.0);
        s.covariates.push_back(std::move(c));
    }
    for (const auto& cj : j.value("cells", nlohmann::json::array())) {
        CellSpec cell;
        if (cj.contains("where")) {
            cell.where = cj.at("where").get<std::map<std::string, std::vector<std::string>>>();
        }
        cell.a1 = probs_from(cj.at("a1"));
        cell.a2 = probs_from(cj.at("a2"));
        s.cells.push_back(std::move(cell));
    }
    return s;
}

nlohmann::ordered_json scenario_to_json(const Scenario& s) {
    nlohmann::ordered_json j;
    j["n"] = s.n;
    j["p_a2"] = s.p_a2;
    j["prevalence_a1"] = s.prevalence_a1;
    j["prevalence_a2"] = s.prevalence_a2;
    j["agree_positive"] = s.agree_positive;
    j["a1"] = s.a1;
    j["a2"] = s.a2;
    j["seed"] = s.seed;
    auto covs = nlohmann::ordered_json::array();
    for (const auto& c : s.covariates) {
        nlohmann::ordered_json cj;
        cj["name"] = c.name;
        cj["kind"] = std::string(to_string(c.kind));
        if (c.kind == CovariateKind::Numeric) {
            cj["low"] = c.low;
            cj["high"] = c.high;
        } else {
            cj["levels"] = c.levels;
            if (!c.probs.empty()) cj["probs"] = c.probs;
        }
        covs.push_back(std::move(cj));
    }
    j["covariates"] = std::move(covs);
    auto cells = nlohmann::ordered_json::array();
    for (const auto& c : s.cells) {
        nlohmann::ordered_json cj;
        cj["where"] = c.where;
        cj["a1"] = {{"p01", c.a1.p01}, {"p10", c.a1.p10}};
        cj["a2"] = {{"p01", c.a2.p01}, {"p10", c.a2.p10}};
        cells.push_back(std::move(cj));
    }
    j["cells"] = std::move(cells);
    return j;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open scenario file '" + path + "'");
    nlohmann::json j;
    in >> j;
    return scenario_from_json(j);
}

std::string table_delimited(const ObservationTable& t, char delimiter) {
    const char d = delimiter;
    std::string out = fmt::format("y{0}m1{0}m2{0}group", d);
    for (const auto& c : t.covariates) out += d + c.name;
    out += '\n';
    for (std::size_t r = 0; r < t.size(); ++r) {
        out += fmt::format("{1}{0}{2}{0}{3}{0}{4}", d, t.has_outcome() ? t.outcome[r] : 0, t.yhat1[r], t.yhat2[r],
                           t.group_levels.at(static_cast<std::size_t>(t.group[r])));
        for (const auto& c : t.covariates) out += d + c.display(r);
        out += '\n';
    }
    return out;
}

double ks_uniform(std::vector<double> p) {
    if (p.empty()) return 0.0;
    std::sort(p.begin(), p.end());
    const auto n = static_cast<double>(p.size());
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double x = std::clamp(p[i], 0.0, 1.0);
        d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
    }
    return d;
}

std::vector<CalibrationRow> calibrate(const Scenario& scenario, Metric metric, int replications, double alpha,
                                      int max_bins) {
    if (replications < 1) throw std::invalid_argument("calibrate: replications must be >= 1");
    std::vector<CalibrationRow> rows(scenario.covariates.size());
    std::vector<std::vector<double>> pvalues(rows.size());
    std::vector<int> rejections(rows.size(), 0);
    for (int r = 0; r < replications; ++r) {
        auto s = scenario;
        s.seed = split_seed(scenario.seed, static_cast<std::uint64_t>(r));
        const auto table = generate(s);
        const auto records = labeled_records(table, metric);
        const auto sample = condition_sample(records, metric);
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const auto& col = table.covariates[j];
            SplitCandidate cand;
            if (col.kind == CovariateKind::Numeric) {
                std::vector<double> v;
                for (auto i : sample.source_index) v.push_back(col.values[i]);
                cand = bin_numeric(v, max_bins);
            } else {
                std::vector<int> codes;
                for (auto i : sample.source_index) codes.push_back(col.codes[i]);
                cand = levels_from_codes(codes, col.kind, col.levels);
            }
            const auto test = score_test(sample.records, cand);
            if (!test.testable) continue;
            pvalues[j].push_back(test.p_raw);
            if (test.p_raw < alpha) ++rejections[j];
        }
    }
    for (std::size_t j = 0; j < rows.size(); ++j) {
        rows[j].covariate = scenario.covariates[j].name;
        rows[j].replications = replications;
        rows[j].tested = static_cast<int>(pvalues[j].size());
        rows[j].rejection_rate = rows[j].tested ? static_cast<double>(rejections[j]) / rows[j].tested : 0.0;
        rows[j].ks_distance = ks_uniform(pvalues[j]);
    }
    return rows;
}

}  // namespace fairtree::synth
