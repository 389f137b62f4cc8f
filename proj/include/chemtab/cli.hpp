#pragma once

// Command implementations behind the chemtab binary: dataset generation,
// training, evaluation, the ablation harness, baselines and report rebuilds.
// Every command resolves one RunConfig (flags > config file > defaults),
// echoes it to a manifest, and derives all randomness from the master seed.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "chemtab/baselines.hpp"
#include "chemtab/chemtab_model.hpp"
#include "chemtab/dataset.hpp"
#include "chemtab/errors.hpp"
#include "chemtab/eval.hpp"
#include "chemtab/flamelet.hpp"
#include "chemtab/mechanism.hpp"
#include "chemtab/text_io.hpp"

namespace chemtab::cli {

using data::Dataset;

inline constexpr Index kLongRunEpochs = 20000;

struct RunConfig {
    // generation
    std::string mechanism; // empty = shipped built-in
    Index flames = flame::kDefaultFlames;
    Index grid = flame::kDefaultGridPoints;
    double length = flame::kDefaultDomainLength;
    double shrink = flame::kDefaultShrink;
    double extinction_threshold = 150.0;
    // split
    std::string split = "point"; // point | flamelet
    double fraction = 0.5;
    // model / training
    std::string variant = "CT(ALL)";
    Index cpv = 4;
    std::vector<Index> trunk = {32, 64, 128, 256, 512, 256, 128, 64, 32};
    double dropout = 0.05;
    std::vector<std::string> keys = {"O2", "CO", "CO2", "H2O", "OH", "H2", "CH4"};
    Index epochs = 500;
    bool long_run = false;
    Index batch = 32;
    double lr = 0.001;
    Index patience = 50;
    double lambda_un = 1.0, lambda_wo = 1.0, lambda_ar = 1.0;
    Index repeats = eval::kDefaultRepeats;
    // plumbing
    std::uint64_t seed = 0;
    std::string out = "out";
    std::string data;       // dataset csv; defaults to <out>/dataset.csv
    std::string checkpoint; // model checkpoint; defaults to <out>/model.ckpt

    std::string dataset_path() const { return data.empty() ? out + "/dataset.csv" : data; }
    std::string checkpoint_path() const {
        return checkpoint.empty() ? out + "/model.ckpt" : checkpoint;
    }

    data::SplitMode split_mode() const {
        if (split == "point")
            return data::SplitMode::ByPoint;
        if (split == "flamelet")
            return data::SplitMode::ByFlamelet;
        throw ConfigError("config: split must be 'point' or 'flamelet'");
    }

    void check() const {
        split_mode();
        if (flames < 1 || grid < 3)
            throw ConfigError("config: flames must be >= 1 and grid >= 3");
        if (!(fraction > 0.0 && fraction < 1.0))
            throw ConfigError("config: fraction must lie in (0,1)");
        if (epochs < 0 || batch < 1 || repeats < 1)
            throw ConfigError("config: epochs >= 0, batch >= 1, repeats >= 1");
    }
};

namespace detail {

inline std::vector<Index> parse_index_list(const std::string& text, const std::string& key) {
    std::vector<Index> out;
    for (const auto& tok : io::split(text, ','))
        out.push_back(io::parse_long(io::trim(tok), key));
    return out;
}

inline std::vector<std::string> parse_name_list(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& tok : io::split(text, ','))
        out.push_back(io::trim(tok));
    return out;
}

inline std::string join_indices(const std::vector<Index>& xs) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < xs.size(); ++i)
        ss << (i ? "," : "") << xs[i];
    return ss.str();
}

inline std::string join_names(const std::vector<std::string>& xs) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < xs.size(); ++i)
        ss << (i ? "," : "") << xs[i];
    return ss.str();
}

} // namespace detail

// Overlays the keys present in a config file (or manifest; `run.` keys are
// informational echoes and skipped). Unknown keys are typos, not silence.
inline void apply_config(RunConfig& cfg, const io::KeyValueFile& kv) {
    for (const auto& [key, value] : kv.entries()) {
        if (key.rfind("run.", 0) == 0)
            continue;
        if (key == "mechanism")
            cfg.mechanism = value;
        else if (key == "flames")
            cfg.flames = io::parse_long(value, key);
        else if (key == "grid")
            cfg.grid = io::parse_long(value, key);
        else if (key == "length")
            cfg.length = io::parse_double(value, key);
        else if (key == "shrink")
            cfg.shrink = io::parse_double(value, key);
        else if (key == "extinction_threshold")
            cfg.extinction_threshold = io::parse_double(value, key);
        else if (key == "split")
            cfg.split = value;
        else if (key == "fraction")
            cfg.fraction = io::parse_double(value, key);
        else if (key == "variant")
            cfg.variant = value;
        else if (key == "cpv")
            cfg.cpv = io::parse_long(value, key);
        else if (key == "trunk")
            cfg.trunk = detail::parse_index_list(value, key);
        else if (key == "dropout")
            cfg.dropout = io::parse_double(value, key);
        else if (key == "keys")
            cfg.keys = detail::parse_name_list(value);
        else if (key == "epochs")
            cfg.epochs = io::parse_long(value, key);
        else if (key == "long_run")
            cfg.long_run = io::parse_long(value, key) != 0;
        else if (key == "batch")
            cfg.batch = io::parse_long(value, key);
        else if (key == "lr")
            cfg.lr = io::parse_double(value, key);
        else if (key == "patience")
            cfg.patience = io::parse_long(value, key);
        else if (key == "lambda_un")
            cfg.lambda_un = io::parse_double(value, key);
        else if (key == "lambda_wo")
            cfg.lambda_wo = io::parse_double(value, key);
        else if (key == "lambda_ar")
            cfg.lambda_ar = io::parse_double(value, key);
        else if (key == "repeats")
            cfg.repeats = io::parse_long(value, key);
        else if (key == "seed")
            cfg.seed = static_cast<std::uint64_t>(io::parse_long(value, key));
        else if (key == "out")
            cfg.out = value;
        else if (key == "data")
            cfg.data = value;
        else if (key == "checkpoint")
            cfg.checkpoint = value;
        else
            throw ConfigError("config: unknown key '" + key + "'");
    }
}

inline io::KeyValueFile config_to_kv(const RunConfig& cfg) {
    io::KeyValueFile kv;
    kv.set("mechanism", cfg.mechanism);
    kv.set("flames", static_cast<long>(cfg.flames));
    kv.set("grid", static_cast<long>(cfg.grid));
    kv.set("length", cfg.length);
    kv.set("shrink", cfg.shrink);
    kv.set("extinction_threshold", cfg.extinction_threshold);
    kv.set("split", cfg.split);
    kv.set("fraction", cfg.fraction);
    kv.set("variant", cfg.variant);
    kv.set("cpv", static_cast<long>(cfg.cpv));
    kv.set("trunk", detail::join_indices(cfg.trunk));
    kv.set("dropout", cfg.dropout);
    kv.set("keys", detail::join_names(cfg.keys));
    kv.set("epochs", static_cast<long>(cfg.epochs));
    kv.set("long_run", cfg.long_run ? 1 : 0);
    kv.set("batch", static_cast<long>(cfg.batch));
    kv.set("lr", cfg.lr);
    kv.set("patience", static_cast<long>(cfg.patience));
    kv.set("lambda_un", cfg.lambda_un);
    kv.set("lambda_wo", cfg.lambda_wo);
    kv.set("lambda_ar", cfg.lambda_ar);
    kv.set("repeats", static_cast<long>(cfg.repeats));
    kv.set("seed", cfg.seed);
    kv.set("out", cfg.out);
    kv.set("data", cfg.data);
    kv.set("checkpoint", cfg.checkpoint);
    return kv;
}

namespace detail {

inline void write_manifest(const RunConfig& cfg, const std::string& command,
                           const std::vector<std::pair<std::string, std::uint64_t>>& seeds) {
    io::KeyValueFile kv = config_to_kv(cfg);
    kv.set("run.command", command);
    for (const auto& [name, value] : seeds)
        kv.set("run." + name, value);
    std::filesystem::create_directories(cfg.out);
    kv.save(cfg.out + "/" + command + "_manifest.txt");
}

inline mech::Mechanism load_mech(const RunConfig& cfg, std::uint64_t* hash = nullptr) {
    std::string text =
        cfg.mechanism.empty() ? mech::builtin_mechanism_text() : io::read_file(cfg.mechanism);
    if (hash != nullptr)
        *hash = io::fnv1a(text);
    return mech::parse_mechanism(text, cfg.mechanism.empty() ? "<builtin>" : cfg.mechanism);
}

inline model::ModelSpec base_spec(const RunConfig& cfg) {
    model::ModelSpec spec;
    spec.p = cfg.cpv;
    spec.trunk_widths = cfg.trunk;
    spec.dropout = cfg.dropout;
    spec.key_species = cfg.keys;
    return spec;
}

inline nn::TrainControl train_control(const RunConfig& cfg) {
    nn::TrainControl ctl;
    ctl.max_epochs = cfg.long_run ? kLongRunEpochs : cfg.epochs;
    ctl.batch_size = cfg.batch;
    ctl.lr = cfg.lr;
    ctl.patience = cfg.patience;
    return ctl;
}

inline Dataset load_dataset(const RunConfig& cfg) {
    const std::string path = cfg.dataset_path();
    if (!std::filesystem::exists(path))
        throw IoError("missing artifact: " + path);
    return data::read_csv(path);
}

// the split every training/eval command shares, derived from the master seed
inline data::SplitResult shared_split(const RunConfig& cfg, const Dataset& ds) {
    data::SplitSpec spec{cfg.split_mode(), cfg.fraction,
                         rng::derive_seed(cfg.seed, "cli.split")};
    return data::split(ds, spec);
}

} // namespace detail

inline int cmd_generate(const RunConfig& cfg) {
    cfg.check();
    std::uint64_t mech_hash = 0;
    mech::Mechanism m = detail::load_mech(cfg, &mech_hash);
    flame::Grid grid0 = flame::Grid::uniform(cfg.grid, cfg.length);
    flame::BoundaryConditions bc = flame::BoundaryConditions::from_mechanism(m);
    flame::SweepOptions opts;
    opts.extinction_threshold = cfg.extinction_threshold;

    std::vector<flame::FlameletSolution> sols =
        flame::strain_sweep(m, bc, cfg.flames, cfg.shrink, grid0, opts);
    Dataset ds = flame::assemble_dataset(sols, m.species_names());

    Index total_rows = 0;
    Index extinguished = 0;
    for (const auto& sol : sols) {
        total_rows += sol.state.T.size();
        extinguished += sol.extinguished ? 1 : 0;
    }

    std::filesystem::create_directories(cfg.out);
    data::write_csv(ds, cfg.out + "/dataset.csv");

    io::KeyValueFile meta;
    meta.set("mechanism_hash", mech_hash);
    meta.set("species", static_cast<long>(m.species.size()));
    meta.set("grid", static_cast<long>(cfg.grid));
    meta.set("length", cfg.length);
    meta.set("shrink", cfg.shrink);
    meta.set("pressure", m.pressure);
    meta.set("solver_tol", opts.control.tol);
    meta.set("solver_newton_tol", opts.control.newton_tol);
    meta.set("solver_max_steps", static_cast<long>(opts.control.max_steps));
    meta.set("flames_requested", static_cast<long>(cfg.flames));
    meta.set("flames_converged", static_cast<long>(sols.size()));
    meta.set("flames_extinguished", static_cast<long>(extinguished));
    meta.set("rows_kept", static_cast<long>(ds.n_rows()));
    meta.set("rows_dropped", static_cast<long>(total_rows - ds.n_rows()));
    meta.save(cfg.out + "/dataset.meta");

    detail::write_manifest(cfg, "generate", {});
    std::cout << "generate: " << sols.size() << " flames converged (" << extinguished
              << " extinguished), " << ds.n_rows() << " rows kept, "
              << (total_rows - ds.n_rows()) << " rows dropped\n";
    return 0;
}

inline int cmd_train(const RunConfig& cfg) {
    cfg.check();
    Dataset ds = detail::load_dataset(cfg);
    data::SplitResult outer = detail::shared_split(cfg, ds);

    nn::TrainControl ctl = detail::train_control(cfg);
    ctl.seed = rng::derive_seed(cfg.seed, "cli.train");
    data::SplitSpec inner{data::SplitMode::ByPoint, 1.0 - ctl.val_fraction,
                          rng::derive_seed(cfg.seed, "cli.val")};
    data::SplitResult tv = data::split(outer.train, inner);

    baselines::VariantPlan plan =
        baselines::parse_variant(cfg.variant, cfg.cpv, tv.train, detail::base_spec(cfg));
    plan.constraints.lambda_un = cfg.lambda_un;
    plan.constraints.lambda_wo = cfg.lambda_wo;
    plan.constraints.lambda_ar = cfg.lambda_ar;

    detail::write_manifest(cfg, "train",
                           {{"seed_split", rng::derive_seed(cfg.seed, "cli.split")},
                            {"seed_val", inner.seed},
                            {"seed_train", ctl.seed}});
    io::write_file(cfg.out + "/split.txt",
                   data::split_manifest(outer, cfg.split_mode()));

    auto [m, report] = model::train(tv.train, tv.test, plan.spec, ctl, plan.constraints,
                                    ctl.seed);
    model::save_model(cfg.out + "/model.ckpt", m);
    if (m.encoder == model::EncoderKind::Linear)
        model::export_encoder_csv(m, cfg.out + "/encoder.csv");

    std::ostringstream tr;
    tr << "epoch,loss_total,loss_souener,loss_src,penalty_un,penalty_wo,penalty_ar,"
          "val_souener_mae\n";
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
        const auto& st = report.epochs[e];
        tr << (e + 1) << ',' << io::format_g17(st.total) << ','
           << io::format_g17(st.pred_souener) << ',' << io::format_g17(st.pred_src) << ','
           << io::format_g17(st.un) << ',' << io::format_g17(st.wo) << ','
           << io::format_g17(st.ar) << ',' << io::format_g17(st.val_souener_mae) << "\n";
    }
    io::write_file(cfg.out + "/train_report.csv", tr.str());

    std::cout << "train: " << plan.name << ", " << report.epochs.size() << " epochs, best "
              << io::format_g17(report.best_val) << " at epoch " << report.best_epoch
              << ", " << io::format_g17(report.wall_seconds) << " s\n";
    return 0;
}

inline int cmd_evaluate(const RunConfig& cfg) {
    cfg.check();
    const std::string ckpt = cfg.checkpoint_path();
    if (!std::filesystem::exists(ckpt))
        throw IoError("missing artifact: " + ckpt);
    model::ChemTabModel m = model::load_model(ckpt);
    Dataset ds = detail::load_dataset(cfg);
    data::SplitResult outer = detail::shared_split(cfg, ds);

    eval::EvalReport r = eval::evaluate(m, outer.test);
    r.method = m.encoder == model::EncoderKind::Nonlinear
                   ? "NL_ENC"
                   : "CT(" + m.constraints.flags_string() + ")";
    r.split_mode = cfg.split;

    io::KeyValueFile kv;
    kv.set("method", r.method);
    kv.set("split", r.split_mode);
    kv.set("p", static_cast<long>(r.p));
    kv.set("seed", r.seed);
    kv.set("mae_souener", r.mae_souener);
    for (std::size_t j = 0; j < r.key_species.size(); ++j)
        kv.set("mae_src." + r.key_species[j], r.mae_src[static_cast<Index>(j)]);
    kv.set("conformity", r.conformity.available ? 1 : 0);
    if (r.conformity.available) {
        kv.set("max_gram_offdiag", r.conformity.max_gram_offdiag);
        kv.set("col_norm_min", r.conformity.col_norm_min);
        kv.set("col_norm_max", r.conformity.col_norm_max);
        kv.set("max_pv_cov_offdiag", r.conformity.max_pv_cov_offdiag);
    }
    kv.set("wall_seconds", r.wall_seconds);
    std::filesystem::create_directories(cfg.out);
    kv.save(cfg.out + "/eval_report.txt");
    detail::write_manifest(cfg, "evaluate",
                           {{"seed_split", rng::derive_seed(cfg.seed, "cli.split")}});

    std::cout << "evaluate: " << r.method << " mae_souener "
              << io::format_g17(r.mae_souener) << "\n";
    return 0;
}

inline int cmd_ablate(const RunConfig& cfg) {
    cfg.check();
    Dataset ds = detail::load_dataset(cfg);
    eval::AblationPlan plan = eval::default_ct_plan(cfg.cpv, cfg.fraction, cfg.repeats);
    plan.base = detail::base_spec(cfg);
    plan.control = detail::train_control(cfg);

    detail::write_manifest(cfg, "ablate", {});
    auto rows = eval::run_ablation(plan, ds, cfg.seed);
    eval::export_results(rows, cfg.out);

    Index failed = 0;
    for (const auto& r : rows)
        failed += r.failed ? 1 : 0;
    std::cout << "ablate: " << rows.size() << " cells, " << failed << " failed\n";
    return 0;
}

inline int cmd_baseline(const RunConfig& cfg) {
    cfg.check();
    Dataset ds = detail::load_dataset(cfg);

    eval::AblationPlan plan;
    plan.base = detail::base_spec(cfg);
    plan.control = detail::train_control(cfg);
    for (const char* variant : {"PCA_PVG", "UL_ENC", "NL_ENC", "FGM_CPVG"}) {
        eval::AblationCell cell;
        cell.variant = variant;
        cell.p = cfg.cpv;
        cell.split.mode = cfg.split_mode();
        cell.split.fraction = cfg.fraction;
        cell.repeats = cfg.repeats;
        plan.cells.push_back(cell);
    }
    detail::write_manifest(cfg, "baseline", {});
    auto rows = eval::run_ablation(plan, ds, cfg.seed);

    // the tabulation benchmark: Z_mix x classical progress variable
    eval::AblationRow table_row;
    table_row.method = "TABLE_2PV";
    table_row.split_mode = cfg.split;
    table_row.p = 1;
    table_row.repeats = cfg.repeats;
    std::filesystem::create_directories(cfg.out);
    try {
        Matrix cpv_W = baselines::fgm_weight_column(ds.species_names);
        for (Index r = 0; r < cfg.repeats; ++r) {
            std::uint64_t seed = rng::derive_seed(cfg.seed, "baseline.table", r);
            data::SplitSpec outer{cfg.split_mode(), cfg.fraction,
                                  rng::derive_seed(seed, "ablation.split")};
            data::SplitResult sr = data::split(ds, outer);
            eval::TableBaseline tb = eval::fit_table_baseline(sr.train, cfg.keys, cpv_W);
            eval::EvalReport er = eval::evaluate(tb, sr.test);
            table_row.per_seed.push_back(er.mae_souener);
            if (table_row.src_mae_mean.size() == 0) {
                table_row.key_species = er.key_species;
                table_row.src_mae_mean = Vector::Zero(er.mae_src.size());
            }
            table_row.src_mae_mean += er.mae_src;
            if (r == 0) {
                baselines::save_table(cfg.out + "/table.ctlt", tb.table);
                baselines::PcaBasis basis = baselines::pca_fit(sr.train.Y, cfg.cpv);
                baselines::pca_export_csv(basis, ds.species_names,
                                          cfg.out + "/pca_basis.csv");
            }
        }
        auto [mean, sd] = eval::detail::mean_std(table_row.per_seed);
        table_row.mae_mean = mean;
        table_row.mae_std = sd;
        table_row.mae_min =
            *std::min_element(table_row.per_seed.begin(), table_row.per_seed.end());
        table_row.mae_max =
            *std::max_element(table_row.per_seed.begin(), table_row.per_seed.end());
        table_row.src_mae_mean /= static_cast<double>(cfg.repeats);
    } catch (const std::exception& e) {
        table_row.failed = true;
        table_row.error = e.what();
    }
    rows.push_back(table_row);
    std::sort(rows.begin(), rows.end(),
              [](const eval::AblationRow& a, const eval::AblationRow& b) {
                  return std::tie(a.method, a.split_mode, a.p) <
                         std::tie(b.method, b.split_mode, b.p);
              });
    eval::export_results(rows, cfg.out);

    Index failed = 0;
    for (const auto& r : rows)
        failed += r.failed ? 1 : 0;
    std::cout << "baseline: " << rows.size() << " methods, " << failed << " failed\n";
    return 0;
}

// Rebuilds the plot-data CSVs from an existing results.csv.
inline int cmd_report(const RunConfig& cfg) {
    const std::string path = cfg.data.empty() ? cfg.out + "/results.csv" : cfg.data;
    if (!std::filesystem::exists(path))
        throw IoError("missing artifact: " + path);
    auto lines = io::split(io::read_file(path), '\n');
    if (lines.empty() || lines[0] != eval::kResultsHeader)
        throw ParseError(path + ": unexpected results header");

    std::vector<eval::AblationRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty())
            continue;
        auto cells = io::split(lines[i], ',');
        if (cells.size() != 15)
            throw ParseError(path + ": row " + std::to_string(i) + " has " +
                             std::to_string(cells.size()) + " cells");
        eval::AblationRow r;
        const std::string where = path + ":" + std::to_string(i + 1);
        r.method = cells[0];
        r.split_mode = cells[1];
        r.p = io::parse_long(cells[2], where);
        r.repeats = io::parse_long(cells[3], where);
        r.failed = io::parse_long(cells[4], where) != 0;
        r.mae_mean = io::parse_double(cells[5], where);
        r.mae_std = io::parse_double(cells[6], where);
        r.mae_min = io::parse_double(cells[7], where);
        r.mae_max = io::parse_double(cells[8], where);
        r.conformity = io::parse_long(cells[9], where) != 0;
        r.max_gram_offdiag = io::parse_double(cells[10], where);
        r.col_norm_min = io::parse_double(cells[11], where);
        r.col_norm_max = io::parse_double(cells[12], where);
        r.max_pv_cov_offdiag = io::parse_double(cells[13], where);
        r.error = cells[14];
        rows.push_back(r);
    }
    detail::write_manifest(cfg, "report", {});
    eval::export_results(rows, cfg.out);
    std::cout << "report: " << rows.size() << " rows re-exported\n";
    return 0;
}

} // namespace chemtab::cli
