#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "chemtab/cli.hpp"

using namespace chemtab;

int main(int argc, char** argv) {
    CLI::App app{"chemtab: flamelet data generation, constrained progress-variable "
                 "learning, baselines and reports"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_path, mechanism, split = "point", variant = "CT(ALL)", out = "out";
    std::string dataset, checkpoint;
    std::int64_t flames = 0, grid = 0, cpv = 0, epochs = 0, batch = 0, patience = 0,
                 repeats = 0;
    double shrink = 0.0, fraction = 0.0, length = 0.0, lr = 0.0, dropout = 0.0;
    std::uint64_t seed = 0;
    bool long_run = false;

    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--mechanism", mechanism, "mechanism file (default: built-in)");
    app.add_option("--flames", flames, "strain-sweep length");
    app.add_option("--grid", grid, "grid points per flamelet");
    app.add_option("--shrink", shrink, "domain shrink factor per flame");
    app.add_option("--length", length, "initial domain length (m)");
    app.add_option("--split", split, "train/test split strategy")
        ->check(CLI::IsMember({"point", "flamelet"}));
    app.add_option("--fraction", fraction, "train fraction");
    app.add_option("--variant", variant,
                   "FGM_CPVG | PCA_PVG | UL_ENC | NL_ENC | CT(FLAGS)");
    app.add_option("--cpv", cpv, "number of learned progress variables");
    app.add_option("--epochs", epochs, "training epochs");
    app.add_flag("--long-run", long_run, "train for the long-run epoch budget");
    app.add_option("--batch", batch, "minibatch size");
    app.add_option("--lr", lr, "learning rate");
    app.add_option("--patience", patience, "early-stopping patience");
    app.add_option("--dropout", dropout, "trunk dropout rate");
    app.add_option("--repeats", repeats, "seeds per ablation cell");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out, "output directory");
    app.add_option("--data", dataset, "dataset csv (default: <out>/dataset.csv)");
    app.add_option("--checkpoint", checkpoint, "model checkpoint (default: <out>/model.ckpt)");

    auto* gen = app.add_subcommand("generate", "solve the strain sweep, write the dataset");
    auto* train = app.add_subcommand("train", "train one variant on a dataset");
    auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    auto* ablate = app.add_subcommand("ablate", "constraint-variant x split ablation table");
    auto* baseline = app.add_subcommand("baseline", "comparison methods incl. table lookup");
    auto* report = app.add_subcommand("report", "rebuild plot data from results.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        cli::RunConfig cfg;
        if (!config_path.empty())
            cli::apply_config(cfg, io::KeyValueFile::load(config_path));

        io::KeyValueFile flags;
        if (app.count("--mechanism"))
            flags.set("mechanism", mechanism);
        if (app.count("--flames"))
            flags.set("flames", static_cast<long>(flames));
        if (app.count("--grid"))
            flags.set("grid", static_cast<long>(grid));
        if (app.count("--shrink"))
            flags.set("shrink", shrink);
        if (app.count("--length"))
            flags.set("length", length);
        if (app.count("--split"))
            flags.set("split", split);
        if (app.count("--fraction"))
            flags.set("fraction", fraction);
        if (app.count("--variant"))
            flags.set("variant", variant);
        if (app.count("--cpv"))
            flags.set("cpv", static_cast<long>(cpv));
        if (app.count("--epochs"))
            flags.set("epochs", static_cast<long>(epochs));
        if (app.count("--long-run"))
            flags.set("long_run", 1);
        if (app.count("--batch"))
            flags.set("batch", static_cast<long>(batch));
        if (app.count("--lr"))
            flags.set("lr", lr);
        if (app.count("--patience"))
            flags.set("patience", static_cast<long>(patience));
        if (app.count("--dropout"))
            flags.set("dropout", dropout);
        if (app.count("--repeats"))
            flags.set("repeats", static_cast<long>(repeats));
        if (app.count("--seed"))
            flags.set("seed", seed);
        if (app.count("--out"))
            flags.set("out", out);
        if (app.count("--data"))
            flags.set("data", dataset);
        if (app.count("--checkpoint"))
            flags.set("checkpoint", checkpoint);
        cli::apply_config(cfg, flags);

        if (gen->parsed())
            return cli::cmd_generate(cfg);
        if (train->parsed())
            return cli::cmd_train(cfg);
        if (evaluate->parsed())
            return cli::cmd_evaluate(cfg);
        if (ablate->parsed())
            return cli::cmd_ablate(cfg);
        if (baseline->parsed())
            return cli::cmd_baseline(cfg);
        if (report->parsed())
            return cli::cmd_report(cfg);
        std::cerr << "chemtab: no subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "chemtab: " << e.what() << "\n";
        return 1;
    }
}
