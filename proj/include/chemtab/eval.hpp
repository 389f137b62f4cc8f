#pragma once

// Metrics, the seeded ablation harness (variants x progress-variable counts
// x split strategies), and plot-data exports.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "chemtab/baselines.hpp"
#include "chemtab/chemtab_model.hpp"
#include "chemtab/dataset.hpp"
#include "chemtab/errors.hpp"
#include "chemtab/text_io.hpp"

namespace chemtab::eval {

using data::Dataset;

inline constexpr Index kDefaultRepeats = 10; // full protocol
inline constexpr Index kCiRepeats = 3;       // budget-friendly mode

struct ConformitySummary {
    bool available = false; // only linear encoders have a W to report on
    double max_gram_offdiag = 0.0;
    double col_norm_min = 0.0, col_norm_max = 0.0;
    double max_pv_cov_offdiag = 0.0;
};

struct EvalReport {
    std::string method;
    std::string split_mode; // "point" | "flamelet" | ""
    Index p = 0;
    std::uint64_t seed = 0;
    double mae_souener = 0.0; // raw units
    std::vector<std::string> key_species;
    Vector mae_src; // raw units, one per key species
    ConformitySummary conformity;
    double wall_seconds = 0.0;
};

namespace detail {

inline std::vector<Index> key_indices(const Dataset& ds,
                                      const std::vector<std::string>& keys) {
    std::vector<Index> idx;
    for (const auto& name : keys) {
        int at = ds.species_index(name);
        if (at < 0)
            throw ConfigError("evaluate: dataset lacks key species " + name);
        idx.push_back(at);
    }
    return idx;
}

} // namespace detail

// Scores any predictor taking (Y, zmix) and returning raw-unit source
// energy and key source terms (the model and the lookup baseline share the
// shape; tests plug in oracles).
template <typename Predictor>
EvalReport evaluate_with(const std::string& method, Predictor&& predict, const Dataset& test,
                         const std::vector<std::string>& key_species) {
    const auto t0 = std::chrono::steady_clock::now();
    if (test.n_rows() == 0)
        throw DomainError("evaluate: empty test set");
    std::vector<Index> key_idx = detail::key_indices(test, key_species);

    model::Prediction pred = predict(test.Y, test.zmix);
    if (pred.souener.size() != test.n_rows() ||
        pred.src_key.rows() != test.n_rows() ||
        pred.src_key.cols() != static_cast<Index>(key_idx.size()))
        throw DimensionError("evaluate: predictor output shape mismatch");

    EvalReport report;
    report.method = method;
    report.key_species = key_species;
    report.mae_souener = nn::mae(pred.souener, test.souener);
    report.mae_src.resize(static_cast<Index>(key_idx.size()));
    for (std::size_t j = 0; j < key_idx.size(); ++j)
        report.mae_src[static_cast<Index>(j)] =
            nn::mae(pred.src_key.col(static_cast<Index>(j)), test.src.col(key_idx[j]));
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

inline EvalReport evaluate(const model::ChemTabModel& m, const Dataset& test) {
    m.check();
    if (test.species_names != m.species_names)
        throw ConfigError("evaluate: dataset species do not match the model");
    EvalReport report = evaluate_with(
        "model", [&](const Matrix& Y, const Vector& z) { return model::predict(m, Y, z); },
        test, m.key_species);
    report.p = m.n_pv();
    report.seed = m.seed;
    if (m.encoder == model::EncoderKind::Linear) {
        model::ConstraintReport cr = model::constraint_report(m, test);
        report.conformity.available = true;
        report.conformity.max_gram_offdiag = cr.max_gram_offdiag;
        report.conformity.col_norm_min = cr.col_norms.minCoeff();
        report.conformity.col_norm_max = cr.col_norms.maxCoeff();
        report.conformity.max_pv_cov_offdiag = cr.max_cov_offdiag;
    }
    return report;
}

// ---- lookup-table baseline ---------------------------------------------

// Tabulates source energy and key source terms over (Z_mix, Y·cpv_W).
struct TableBaseline {
    std::vector<std::string> key_species;
    Matrix cpv_W; // s x (d-1) progress-variable weights
    baselines::LookupTable table;

    Matrix queries(const Matrix& Y, const Vector& zmix) const {
        Matrix pv(Y.rows(), 1 + cpv_W.cols());
        pv.col(0) = zmix;
        pv.rightCols(cpv_W.cols()) = Y * cpv_W;
        return pv;
    }
};

inline TableBaseline fit_table_baseline(const Dataset& train,
                                        const std::vector<std::string>& key_species,
                                        const Matrix& cpv_W,
                                        std::vector<Index> grid_sizes = {}) {
    if (cpv_W.rows() != train.n_species())
        throw DimensionError("fit_table_baseline: weight rows must match the species count");
    TableBaseline tb;
    tb.key_species = key_species;
    tb.cpv_W = cpv_W;
    std::vector<Index> key_idx = detail::key_indices(train, key_species);

    Matrix pv = tb.queries(train.Y, train.zmix);
    Matrix vals(train.n_rows(), 1 + static_cast<Index>(key_idx.size()));
    vals.col(0) = train.souener;
    for (std::size_t j = 0; j < key_idx.size(); ++j)
        vals.col(1 + static_cast<Index>(j)) = train.src.col(key_idx[j]);
    if (grid_sizes.empty())
        grid_sizes = baselines::default_grid_sizes(pv.cols());
    tb.table = baselines::table_build(pv, vals, grid_sizes);
    return tb;
}

inline model::Prediction table_predict(const TableBaseline& tb, const Matrix& Y,
                                       const Vector& zmix) {
    Matrix pv = tb.queries(Y, zmix);
    model::Prediction pred;
    pred.souener.resize(Y.rows());
    pred.src_key.resize(Y.rows(), static_cast<Index>(tb.key_species.size()));
    for (Index r = 0; r < pv.rows(); ++r) {
        Vector out = baselines::table_lookup(tb.table, pv.row(r).transpose());
        pred.souener[r] = out[0];
        pred.src_key.row(r) = out.tail(out.size() - 1).transpose();
    }
    return pred;
}

inline EvalReport evaluate(const TableBaseline& tb, const Dataset& test) {
    EvalReport report = evaluate_with(
        "TABLE",
        [&](const Matrix& Y, const Vector& z) { return table_predict(tb, Y, z); }, test,
        tb.key_species);
    report.p = tb.cpv_W.cols();
    return report;
}

// ---- ablation harness ----------------------------------------------------

struct AblationCell {
    std::string variant = "CT(ALL)"; // parse_variant syntax
    Index p = 4;
    data::SplitSpec split;
    Index repeats = kCiRepeats;
};

struct AblationPlan {
    std::vector<AblationCell> cells;
    model::ModelSpec base;   // shared trunk/keys; p comes from the cell
    nn::TrainControl control;

    void check() const {
        if (cells.empty())
            throw DomainError("ablation: empty plan");
        for (const auto& c : cells)
            if (c.repeats < 1)
                throw DomainError("ablation: repeats must be >= 1");
    }
};

struct AblationRow {
    std::string method;
    std::string split_mode;
    Index p = 0;
    Index repeats = 0;
    bool failed = false;
    std::string error;
    std::vector<double> per_seed; // souener MAE per repeat, raw units
    double mae_mean = 0.0, mae_std = 0.0, mae_min = 0.0, mae_max = 0.0;
    std::vector<std::string> key_species;
    Vector src_mae_mean;
    bool conformity = false;
    double max_gram_offdiag = 0.0;
    double col_norm_min = 0.0, col_norm_max = 0.0;
    double max_pv_cov_offdiag = 0.0;
    double wall_seconds = 0.0;
};

inline std::string split_mode_name(data::SplitMode mode) {
    return mode == data::SplitMode::ByPoint ? "point" : "flamelet";
}

namespace detail {

inline std::uint64_t cell_seed(std::uint64_t base_seed, const AblationCell& cell,
                               Index repeat) {
    std::string label = "ablation." + cell.variant + "|" + split_mode_name(cell.split.mode) +
                        "|p" + std::to_string(cell.p);
    return rng::derive_seed(base_seed, label, static_cast<std::uint64_t>(repeat));
}

// mean and sample standard deviation, two-pass
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs)
        mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2)
        return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs)
        ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

inline AblationRow run_cell(const AblationPlan& plan, const AblationCell& cell,
                            const Dataset& ds, std::uint64_t base_seed) {
    const auto t0 = std::chrono::steady_clock::now();
    AblationRow row;
    row.method = cell.variant;
    row.split_mode = split_mode_name(cell.split.mode);
    row.p = cell.p;
    row.repeats = cell.repeats;

    double norm_min = std::numeric_limits<double>::infinity();
    double norm_max = -std::numeric_limits<double>::infinity();
    double gram_sum = 0.0, cov_sum = 0.0;
    Index conf_runs = 0;

    for (Index r = 0; r < cell.repeats; ++r) {
        try {
            std::uint64_t seed = cell_seed(base_seed, cell, r);
            data::SplitSpec outer = cell.split;
            outer.seed = rng::derive_seed(seed, "ablation.split");
            data::SplitResult sr = data::split(ds, outer);

            data::SplitSpec inner{data::SplitMode::ByPoint,
                                  1.0 - plan.control.val_fraction,
                                  rng::derive_seed(seed, "ablation.val")};
            data::SplitResult tv = data::split(sr.train, inner);

            baselines::VariantPlan vp =
                baselines::parse_variant(cell.variant, cell.p, tv.train, plan.base);
            row.method = vp.name;

            nn::TrainControl ctl = plan.control;
            ctl.seed = rng::derive_seed(seed, "ablation.train");
            auto [m, rep] = model::train(tv.train, tv.test, vp.spec, ctl, vp.constraints,
                                         ctl.seed);
            EvalReport er = evaluate(m, sr.test);
            row.p = er.p; // FGM forces p=1 regardless of the requested count

            row.per_seed.push_back(er.mae_souener);
            if (row.src_mae_mean.size() == 0) {
                row.key_species = er.key_species;
                row.src_mae_mean = Vector::Zero(er.mae_src.size());
            }
            row.src_mae_mean += er.mae_src;
            if (er.conformity.available) {
                ++conf_runs;
                norm_min = std::min(norm_min, er.conformity.col_norm_min);
                norm_max = std::max(norm_max, er.conformity.col_norm_max);
                gram_sum += er.conformity.max_gram_offdiag;
                cov_sum += er.conformity.max_pv_cov_offdiag;
            }
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
            break;
        }
    }

    if (!row.per_seed.empty()) {
        auto [mean, sd] = mean_std(row.per_seed);
        row.mae_mean = mean;
        row.mae_std = sd;
        row.mae_min = *std::min_element(row.per_seed.begin(), row.per_seed.end());
        row.mae_max = *std::max_element(row.per_seed.begin(), row.per_seed.end());
        row.src_mae_mean /= static_cast<double>(row.per_seed.size());
    }
    if (conf_runs > 0) {
        row.conformity = true;
        row.col_norm_min = norm_min;
        row.col_norm_max = norm_max;
        row.max_gram_offdiag = gram_sum / static_cast<double>(conf_runs);
        row.max_pv_cov_offdiag = cov_sum / static_cast<double>(conf_runs);
    }
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

} // namespace detail

inline Index worker_count() {
    const char* env = std::getenv("CHEMTAB_THREADS");
    if (env == nullptr || *env == '\0')
        return 1;
    long v = io::parse_long(env, "CHEMTAB_THREADS");
    if (v < 1)
        throw ConfigError("CHEMTAB_THREADS must be >= 1");
    return static_cast<Index>(v);
}

// Each cell derives every seed it needs from (base seed, cell label, repeat),
// so the result table is identical no matter how cells are scheduled.
inline std::vector<AblationRow> run_ablation(const AblationPlan& plan, const Dataset& ds,
                                             std::uint64_t base_seed) {
    plan.check();
    std::vector<AblationRow> rows(plan.cells.size());
    const Index workers =
        std::min<Index>(worker_count(), static_cast<Index>(plan.cells.size()));
    std::atomic<std::size_t> cursor{0};
    auto drain = [&] {
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= plan.cells.size())
                return;
            rows[i] = detail::run_cell(plan, plan.cells[i], ds, base_seed);
        }
    };
    if (workers <= 1) {
        drain();
    } else {
        std::vector<std::thread> pool;
        for (Index w = 0; w < workers; ++w)
            pool.emplace_back(drain);
        for (auto& t : pool)
            t.join();
    }
    std::sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
        return std::tie(a.method, a.split_mode, a.p) < std::tie(b.method, b.split_mode, b.p);
    });
    return rows;
}

// Seven constraint-flag combinations crossed with both split strategies.
inline AblationPlan default_ct_plan(Index p = 4, double fraction = 0.5,
                                    Index repeats = kDefaultRepeats) {
    AblationPlan plan;
    const std::vector<std::string> variants = {"CT(UN)",    "CT(WO)",    "CT(AR)",
                                               "CT(UN+WO)", "CT(UN+AR)", "CT(WO+AR)",
                                               "CT(UN+WO+AR)"};
    for (auto mode : {data::SplitMode::ByPoint, data::SplitMode::ByFlamelet})
        for (const auto& v : variants) {
            AblationCell cell;
            cell.variant = v;
            cell.p = p;
            cell.split.mode = mode;
            cell.split.fraction = fraction;
            cell.repeats = repeats;
            plan.cells.push_back(cell);
        }
    return plan;
}

// One method swept over progress-variable counts 1..5.
inline AblationPlan cpv_sweep_plan(const std::string& variant = "CT(ALL)",
                                   data::SplitMode mode = data::SplitMode::ByPoint,
                                   double fraction = 0.5, Index repeats = kDefaultRepeats) {
    AblationPlan plan;
    for (Index p = 1; p <= 5; ++p) {
        AblationCell cell;
        cell.variant = variant;
        cell.p = p;
        cell.split.mode = mode;
        cell.split.fraction = fraction;
        cell.repeats = repeats;
        plan.cells.push_back(cell);
    }
    return plan;
}

// ---- exports ------------------------------------------------------------

namespace detail {

inline std::string csv_safe(std::string text) {
    for (char& c : text)
        if (c == ',' || c == '\n' || c == '\r')
            c = ';';
    return text;
}

} // namespace detail

inline const char* kResultsHeader =
    "method,split,p,repeats,failed,mae_souener_mean,mae_souener_std,mae_souener_min,"
    "mae_souener_max,conformity,max_gram_offdiag,col_norm_min,col_norm_max,"
    "max_pv_cov_offdiag,error";

// results.csv plus three plot-data files; everything is assembled in memory
// first so an empty table never leaves partial output behind.
inline void export_results(const std::vector<AblationRow>& rows, const std::string& dir) {
    if (rows.empty())
        throw DomainError("export_results: empty result table");

    std::ostringstream results;
    results << kResultsHeader << "\n";
    for (const auto& r : rows) {
        results << detail::csv_safe(r.method) << ',' << r.split_mode << ',' << r.p << ','
                << r.repeats << ',' << (r.failed ? 1 : 0) << ','
                << io::format_g17(r.mae_mean) << ',' << io::format_g17(r.mae_std) << ','
                << io::format_g17(r.mae_min) << ',' << io::format_g17(r.mae_max) << ','
                << (r.conformity ? 1 : 0) << ',' << io::format_g17(r.max_gram_offdiag) << ','
                << io::format_g17(r.col_norm_min) << ',' << io::format_g17(r.col_norm_max)
                << ',' << io::format_g17(r.max_pv_cov_offdiag) << ','
                << detail::csv_safe(r.error) << "\n";
    }

    // bar data: split-strategy comparison, averaged over p
    std::map<std::pair<std::string, std::string>, std::pair<double, Index>> by_split;
    for (const auto& r : rows)
        if (!r.failed) {
            auto& acc = by_split[{r.method, r.split_mode}];
            acc.first += r.mae_mean;
            acc.second += 1;
        }
    std::ostringstream fig3;
    fig3 << "method,split,mae_souener_mean\n";
    for (const auto& [key, acc] : by_split)
        fig3 << detail::csv_safe(key.first) << ',' << key.second << ','
             << io::format_g17(acc.first / static_cast<double>(acc.second)) << "\n";

    // line data: MAE vs number of progress variables, averaged over splits
    std::map<std::pair<std::string, Index>, std::pair<double, Index>> by_p;
    for (const auto& r : rows)
        if (!r.failed) {
            auto& acc = by_p[{r.method, r.p}];
            acc.first += r.mae_mean;
            acc.second += 1;
        }
    std::ostringstream fig4;
    fig4 << "method,p,mae_souener_mean\n";
    for (const auto& [key, acc] : by_p)
        fig4 << detail::csv_safe(key.first) << ',' << key.second << ','
             << io::format_g17(acc.first / static_cast<double>(acc.second)) << "\n";

    // per-key-species bars
    std::ostringstream fig5;
    fig5 << "method,split,p,species,mae_mean\n";
    for (const auto& r : rows) {
        if (r.failed)
            continue;
        for (Index j = 0; j < r.src_mae_mean.size(); ++j)
            fig5 << detail::csv_safe(r.method) << ',' << r.split_mode << ',' << r.p << ','
                 << r.key_species[static_cast<std::size_t>(j)] << ','
                 << io::format_g17(r.src_mae_mean[j]) << "\n";
    }

    std::filesystem::create_directories(dir);
    io::write_file(dir + "/results.csv", results.str());
    io::write_file(dir + "/fig3_split_mae.csv", fig3.str());
    io::write_file(dir + "/fig4_cpv_mae.csv", fig4.str());
    io::write_file(dir + "/fig5_species_mae.csv", fig5.str());
}

} // namespace chemtab::eval
