#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>

#include "chemtab/eval.hpp"

using namespace chemtab;
using data::Dataset;
using data::SplitMode;
using eval::AblationCell;
using eval::AblationPlan;
using eval::AblationRow;
using eval::EvalReport;

namespace {

std::filesystem::path temp_dir() {
    static std::filesystem::path dir = [] {
        std::string tmpl = (std::filesystem::temp_directory_path() / "chemtab-ev-XXXXXX").string();
        char* made = mkdtemp(tmpl.data());
        REQUIRE(made != nullptr);
        return std::filesystem::path(made);
    }();
    return dir;
}

Dataset synth_ds(Index n, std::vector<std::string> names, std::uint64_t seed,
                 Index n_keys = 6) {
    rng::Stream rs(seed);
    Dataset ds;
    ds.species_names = std::move(names);
    const Index s = ds.n_species();
    ds.flame_key.resize(n);
    ds.x = Vector::Zero(n);
    ds.zmix.resize(n);
    ds.temperature = Vector::Constant(n, 1000.0);
    ds.souener.resize(n);
    ds.Y.resize(n, s);
    ds.src.resize(n, s);
    for (Index r = 0; r < n; ++r) {
        ds.flame_key[r] = 0.01 * (1 + r % n_keys);
        ds.zmix[r] = rs.next_double();
        ds.souener[r] = 1e9 * (rs.next_double() - 0.4);
        for (Index c = 0; c < s; ++c) {
            ds.Y(r, c) = rs.next_double();
            ds.src(r, c) = 1e3 * (rs.next_double() - 0.5);
        }
    }
    return ds;
}

model::ModelSpec tiny_spec(Index p, std::vector<std::string> keys) {
    model::ModelSpec spec;
    spec.p = p;
    spec.trunk_widths = {8, 8};
    spec.dropout = 0.0;
    spec.key_species = std::move(keys);
    return spec;
}

bool rows_equal(const AblationRow& a, const AblationRow& b) {
    return a.method == b.method && a.split_mode == b.split_mode && a.p == b.p &&
           a.repeats == b.repeats && a.failed == b.failed && a.error == b.error &&
           a.per_seed == b.per_seed && a.mae_mean == b.mae_mean && a.mae_std == b.mae_std &&
           a.mae_min == b.mae_min && a.mae_max == b.mae_max &&
           a.key_species == b.key_species &&
           a.src_mae_mean.size() == b.src_mae_mean.size() &&
           (a.src_mae_mean.size() == 0 || a.src_mae_mean == b.src_mae_mean) &&
           a.conformity == b.conformity && a.max_gram_offdiag == b.max_gram_offdiag &&
           a.col_norm_min == b.col_norm_min && a.col_norm_max == b.col_norm_max &&
           a.max_pv_cov_offdiag == b.max_pv_cov_offdiag;
}

} // namespace

TEST_CASE("oracle predictor scores zero error", "[eval]") {
    Dataset ds = synth_ds(50, {"A", "B", "C"}, 60);
    auto oracle = [&](const Matrix&, const Vector&) {
        model::Prediction p;
        p.souener = ds.souener;
        p.src_key.resize(ds.n_rows(), 2);
        p.src_key.col(0) = ds.src.col(0);
        p.src_key.col(1) = ds.src.col(2);
        return p;
    };
    EvalReport r = eval::evaluate_with("oracle", oracle, ds, {"A", "C"});
    REQUIRE(r.mae_souener == 0.0);
    REQUIRE(r.mae_src[0] == 0.0);
    REQUIRE(r.mae_src[1] == 0.0);
    REQUIRE(r.method == "oracle");
}

TEST_CASE("constant-zero predictor scores mean absolute target", "[eval][oracle]") {
    Dataset ds = synth_ds(70, {"A", "B"}, 61);
    auto zero = [&](const Matrix& Y, const Vector&) {
        model::Prediction p;
        p.souener = Vector::Zero(Y.rows());
        p.src_key = Matrix::Zero(Y.rows(), 1);
        return p;
    };
    EvalReport r = eval::evaluate_with("zero", zero, ds, {"B"});

    double want_sou = 0.0, want_src = 0.0;
    for (Index i = 0; i < ds.n_rows(); ++i) {
        want_sou += std::abs(ds.souener[i]);
        want_src += std::abs(ds.src(i, 1));
    }
    want_sou /= static_cast<double>(ds.n_rows());
    want_src /= static_cast<double>(ds.n_rows());
    REQUIRE(r.mae_souener == want_sou);
    REQUIRE(r.mae_src[0] == want_src);
}

TEST_CASE("evaluate attaches conformity for linear encoders", "[eval]") {
    Dataset ds = synth_ds(90, {"A", "B", "C", "D"}, 62);
    auto sr = data::split(ds, {SplitMode::ByPoint, 0.7, 1});
    nn::TrainControl ctl;
    ctl.max_epochs = 2;
    ctl.batch_size = 16;
    auto spec = tiny_spec(2, {"A", "B"});
    auto [m, rep] =
        model::train(sr.train, sr.test, spec, ctl, model::ConstraintConfig::all(), 5);

    EvalReport r = eval::evaluate(m, sr.test);
    REQUIRE(r.conformity.available);
    REQUIRE(r.p == 2);
    REQUIRE(r.key_species == std::vector<std::string>{"A", "B"});
    REQUIRE(r.mae_souener >= 0.0);

    model::ConstraintReport cr = model::constraint_report(m, sr.test);
    REQUIRE(r.conformity.max_gram_offdiag == cr.max_gram_offdiag);
    REQUIRE(r.conformity.col_norm_min == cr.col_norms.minCoeff());
    REQUIRE(r.conformity.col_norm_max == cr.col_norms.maxCoeff());
    REQUIRE(r.conformity.max_pv_cov_offdiag == cr.max_cov_offdiag);

    SECTION("two calls are bit-identical") {
        EvalReport r2 = eval::evaluate(m, sr.test);
        REQUIRE(r.mae_souener == r2.mae_souener);
        REQUIRE(r.mae_src == r2.mae_src);
        REQUIRE(r.conformity.max_gram_offdiag == r2.conformity.max_gram_offdiag);
        REQUIRE(r.conformity.max_pv_cov_offdiag == r2.conformity.max_pv_cov_offdiag);
    }
    SECTION("nonlinear encoder reports no conformity") {
        auto nl = tiny_spec(2, {"A", "B"});
        nl.encoder = model::EncoderKind::Nonlinear;
        auto [mn, repn] =
            model::train(sr.train, sr.test, nl, ctl, model::ConstraintConfig::none(), 5);
        EvalReport rn = eval::evaluate(mn, sr.test);
        REQUIRE_FALSE(rn.conformity.available);
    }
}

TEST_CASE("evaluate validates its inputs", "[eval][errors]") {
    Dataset ds = synth_ds(40, {"A", "B", "C"}, 63);
    auto sr = data::split(ds, {SplitMode::ByPoint, 0.7, 1});
    nn::TrainControl ctl;
    ctl.max_epochs = 1;
    auto [m, rep] = model::train(sr.train, sr.test, tiny_spec(1, {"A"}), ctl,
                                 model::ConstraintConfig::none(), 6);

    Dataset renamed = sr.test;
    renamed.species_names = {"A", "B", "Q"};
    REQUIRE_THROWS_AS(eval::evaluate(m, renamed), ConfigError);

    Dataset empty = sr.test.take_rows({});
    REQUIRE_THROWS_AS(eval::evaluate(m, empty), DomainError);

    auto zero = [&](const Matrix& Y, const Vector&) {
        model::Prediction p;
        p.souener = Vector::Zero(Y.rows());
        p.src_key = Matrix::Zero(Y.rows(), 1);
        return p;
    };
    REQUIRE_THROWS_AS(eval::evaluate_with("zero", zero, ds, {"NOPE"}), ConfigError);
}

TEST_CASE("table baseline fits and scores", "[eval][table]") {
    // souener affine in (zmix, cpv): tabulation error is snap + fill noise only
    Dataset ds = synth_ds(4000, {"CO2", "H2O", "CO", "H2", "N2"}, 65);
    Matrix cpv_W = baselines::fgm_weight_column(ds.species_names);
    Vector cpv = ds.Y * cpv_W;
    for (Index i = 0; i < ds.n_rows(); ++i)
        ds.souener[i] = 1e8 * (1.0 + 2.0 * ds.zmix[i] - 0.5 * cpv[i]);

    eval::TableBaseline tb =
        eval::fit_table_baseline(ds, {"CO2", "CO"}, cpv_W, {20, 15});
    REQUIRE(tb.table.dims() == 2);

    EvalReport r = eval::evaluate(tb, ds);
    REQUIRE(r.method == "TABLE");
    REQUIRE(r.p == 1);
    REQUIRE(r.mae_src.size() == 2);
    // well below the scale of the field itself (mean |souener| ~ 1e8)
    double scale = 0.0;
    for (Index i = 0; i < ds.n_rows(); ++i)
        scale += std::abs(ds.souener[i]);
    scale /= static_cast<double>(ds.n_rows());
    REQUIRE(r.mae_souener < 0.2 * scale);
    REQUIRE_FALSE(r.conformity.available);

    REQUIRE_THROWS_AS(eval::fit_table_baseline(ds, {"CO2"}, Matrix::Zero(3, 1), {10, 10}),
                      DimensionError);
}

TEST_CASE("trivial ablation cell reports the initialized model", "[eval][ablation]") {
    Dataset ds = synth_ds(80, {"A", "B", "C"}, 66);
    AblationPlan plan;
    plan.base = tiny_spec(1, {"A"});
    plan.control.max_epochs = 0; // initialized model only
    plan.control.batch_size = 16;
    AblationCell cell;
    cell.variant = "CT(NONE)";
    cell.p = 1;
    cell.split = {SplitMode::ByPoint, 0.5, 0};
    cell.repeats = 1;
    plan.cells = {cell};

    auto rows = eval::run_ablation(plan, ds, 77);
    REQUIRE(rows.size() == 1);
    const AblationRow& row = rows[0];
    REQUIRE_FALSE(row.failed);
    REQUIRE(row.method == "CT(NONE)");
    REQUIRE(row.split_mode == "point");
    REQUIRE(row.repeats == 1);
    REQUIRE(row.per_seed.size() == 1);
    REQUIRE(row.mae_std == 0.0);
    REQUIRE(row.mae_mean == row.per_seed[0]);
    REQUIRE(row.mae_mean > 0.0);

    // reproduce the cell by hand from the same derived seeds
    std::uint64_t seed = eval::detail::cell_seed(77, cell, 0);
    data::SplitSpec outer = cell.split;
    outer.seed = rng::derive_seed(seed, "ablation.split");
    auto sr = data::split(ds, outer);
    data::SplitSpec inner{SplitMode::ByPoint, 1.0 - plan.control.val_fraction,
                          rng::derive_seed(seed, "ablation.val")};
    auto tv = data::split(sr.train, inner);
    auto vp = baselines::parse_variant(cell.variant, cell.p, tv.train, plan.base);
    nn::TrainControl ctl = plan.control;
    ctl.seed = rng::derive_seed(seed, "ablation.train");
    auto [m, rep] = model::train(tv.train, tv.test, vp.spec, ctl, vp.constraints, ctl.seed);
    EvalReport er = eval::evaluate(m, sr.test);
    REQUIRE(row.mae_mean == er.mae_souener);
    REQUIRE(row.src_mae_mean == er.mae_src);
}

TEST_CASE("ablation statistics match a two-pass oracle", "[eval][ablation][oracle]") {
    Dataset ds = synth_ds(90, {"A", "B", "C"}, 67);
    AblationPlan plan;
    plan.base = tiny_spec(1, {"A"});
    plan.control.max_epochs = 2;
    plan.control.batch_size = 16;
    AblationCell cell;
    cell.variant = "CT(ALL)";
    cell.p = 1;
    cell.split = {SplitMode::ByPoint, 0.6, 0};
    cell.repeats = 3;
    plan.cells = {cell};

    auto rows = eval::run_ablation(plan, ds, 78);
    REQUIRE(rows.size() == 1);
    const AblationRow& row = rows[0];
    REQUIRE_FALSE(row.failed);
    REQUIRE(row.method == "CT(UN+WO+AR)");
    REQUIRE(row.per_seed.size() == 3);

    // distinct seeds on a stochastic method spread the MAEs
    REQUIRE(row.mae_std > 0.0);
    REQUIRE(row.mae_mean >= row.mae_min);
    REQUIRE(row.mae_mean <= row.mae_max);

    double mean = 0.0;
    for (double x : row.per_seed)
        mean += x;
    mean /= 3.0;
    double ss = 0.0;
    for (double x : row.per_seed)
        ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / 2.0);
    REQUIRE_THAT(row.mae_mean, Catch::Matchers::WithinRel(mean, 1e-12));
    REQUIRE_THAT(row.mae_std, Catch::Matchers::WithinRel(sd, 1e-12));
    REQUIRE(row.conformity);
    REQUIRE(row.col_norm_min <= row.col_norm_max);
}

TEST_CASE("ablation is deterministic and survives failing cells", "[eval][ablation]") {
    Dataset ds = synth_ds(70, {"A", "B", "C"}, 68);
    AblationPlan plan;
    plan.base = tiny_spec(1, {"A"});
    plan.control.max_epochs = 1;
    plan.control.batch_size = 16;

    AblationCell good;
    good.variant = "UL_ENC";
    good.p = 1;
    good.split = {SplitMode::ByPoint, 0.6, 0};
    good.repeats = 2;
    AblationCell bad = good;
    bad.variant = "PCA_PVG";
    bad.p = 2;
    AblationCell diverge = good;
    diverge.variant = "CT(ALL)";
    plan.cells = {good, bad, diverge};
    plan.control.lr = 0.001;

    auto rows1 = eval::run_ablation(plan, ds, 79);
    auto rows2 = eval::run_ablation(plan, ds, 79);
    REQUIRE(rows1.size() == 3);
    for (std::size_t i = 0; i < rows1.size(); ++i)
        REQUIRE(rows_equal(rows1[i], rows2[i]));
    // sorted by method name
    REQUIRE(rows1[0].method <= rows1[1].method);
    REQUIRE(rows1[1].method <= rows1[2].method);

    SECTION("diverging cell is marked failed, run continues") {
        AblationPlan hot = plan;
        hot.cells = {good, diverge};
        hot.control.lr = 1e200;
        auto rows = eval::run_ablation(hot, ds, 80);
        REQUIRE(rows.size() == 2);
        Index failed = 0;
        for (const auto& r : rows)
            if (r.failed) {
                ++failed;
                REQUIRE_FALSE(r.error.empty());
            }
        REQUIRE(failed == 2); // both cells diverge at this rate, both stay listed
    }
    SECTION("empty plan rejected") {
        AblationPlan none;
        REQUIRE_THROWS_AS(eval::run_ablation(none, ds, 1), DomainError);
        AblationPlan zero = plan;
        zero.cells[0].repeats = 0;
        REQUIRE_THROWS_AS(eval::run_ablation(zero, ds, 1), DomainError);
    }
}

TEST_CASE("worker count honors the environment", "[eval][ablation]") {
    Dataset ds = synth_ds(60, {"A", "B", "C"}, 69);
    AblationPlan plan;
    plan.base = tiny_spec(1, {"A"});
    plan.control.max_epochs = 1;
    plan.control.batch_size = 16;
    for (const char* v : {"UL_ENC", "CT(NONE)", "CT(UN)"}) {
        AblationCell cell;
        cell.variant = v;
        cell.p = 1;
        cell.split = {SplitMode::ByPoint, 0.6, 0};
        cell.repeats = 1;
        plan.cells.push_back(cell);
    }

    REQUIRE(setenv("CHEMTAB_THREADS", "", 1) == 0);
    REQUIRE(eval::worker_count() == 1);
    auto serial = eval::run_ablation(plan, ds, 81);
    REQUIRE(setenv("CHEMTAB_THREADS", "2", 1) == 0);
    REQUIRE(eval::worker_count() == 2);
    auto threaded = eval::run_ablation(plan, ds, 81);
    REQUIRE(setenv("CHEMTAB_THREADS", "0", 1) == 0);
    REQUIRE_THROWS_AS(eval::worker_count(), ConfigError);
    REQUIRE(unsetenv("CHEMTAB_THREADS") == 0);

    REQUIRE(serial.size() == threaded.size());
    for (std::size_t i = 0; i < serial.size(); ++i)
        REQUIRE(rows_equal(serial[i], threaded[i]));
}

TEST_CASE("export writes results and plot data", "[eval][export]") {
    Dataset ds = synth_ds(120, {"A", "B", "C", "D", "E", "F", "G"}, 70);
    AblationPlan plan;
    plan.base = tiny_spec(1, {"A", "B"});
    plan.control.max_epochs = 0;
    plan.control.batch_size = 16;
    for (Index p = 1; p <= 5; ++p) {
        AblationCell cell;
        cell.variant = "CT(NONE)";
        cell.p = p;
        cell.split = {SplitMode::ByPoint, 0.6, 0};
        cell.repeats = 1;
        plan.cells.push_back(cell);
    }
    auto rows = eval::run_ablation(plan, ds, 82);
    auto dir = (temp_dir() / "report").string();
    eval::export_results(rows, dir);

    SECTION("results csv round-trips numerics at 17 digits") {
        auto lines = io::split(io::read_file(dir + "/results.csv"), '\n');
        REQUIRE(lines[0] == eval::kResultsHeader);
        REQUIRE(lines.size() >= 6);
        auto cells = io::split(lines[1], ',');
        REQUIRE(cells.size() == 15);
        REQUIRE(cells[0] == rows[0].method);
        REQUIRE(io::parse_double(cells[5], "mae mean") == rows[0].mae_mean);
        REQUIRE(io::parse_double(cells[6], "mae std") == rows[0].mae_std);
        REQUIRE(io::parse_double(cells[10], "gram") == rows[0].max_gram_offdiag);
    }
    SECTION("cpv sweep export has one row per (method, p)") {
        auto lines = io::split(io::read_file(dir + "/fig4_cpv_mae.csv"), '\n');
        REQUIRE(lines[0] == "method,p,mae_souener_mean");
        std::vector<std::string> body(lines.begin() + 1, lines.end());
        while (!body.empty() && body.back().empty())
            body.pop_back();
        REQUIRE(body.size() == 5);
        for (Index p = 1; p <= 5; ++p) {
            auto cells = io::split(body[static_cast<std::size_t>(p - 1)], ',');
            REQUIRE(cells[0] == "CT(NONE)");
            REQUIRE(io::parse_long(cells[1], "p") == p);
        }
    }
    SECTION("species export carries every key species") {
        auto lines = io::split(io::read_file(dir + "/fig5_species_mae.csv"), '\n');
        REQUIRE(lines[0] == "method,split,p,species,mae_mean");
        std::vector<std::string> body(lines.begin() + 1, lines.end());
        while (!body.empty() && body.back().empty())
            body.pop_back();
        REQUIRE(body.size() == 10); // 5 rows x 2 key species
    }
    SECTION("split comparison file exists with header") {
        auto lines = io::split(io::read_file(dir + "/fig3_split_mae.csv"), '\n');
        REQUIRE(lines[0] == "method,split,mae_souener_mean");
    }
    SECTION("empty table writes nothing") {
        auto nowhere = (temp_dir() / "empty_report").string();
        REQUIRE_THROWS_AS(eval::export_results({}, nowhere), DomainError);
        REQUIRE_FALSE(std::filesystem::exists(nowhere));
    }
}
