#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fuseshot/config.hpp"
#include "fuseshot/gradcheck.hpp"
#include "fuseshot/hsic.hpp"
#include "fuseshot/tree.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fuseshot;

std::string labeled_csv(const Matrix& m, const std::vector<std::string>& names) {
    std::string text = "class";
    for (const auto& n : names) text += "," + n;
    text += '\n';
    for (int i = 0; i < m.rows(); ++i) {
        text += names[static_cast<std::size_t>(i)];
        for (int j = 0; j < m.cols(); ++j) {
            text += ',';
            text += format_double(m(i, j));
        }
        text += '\n';
    }
    return text;
}

// The synth spec file is either a full experiment config or a bare spec
// object ({"feature_dim": ..., ...}).
SynthSpec read_synth_spec(const std::string& path) {
    const std::string text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (j.contains("dataset")) {
        const ExperimentConfig cfg = config_from_json(text);
        if (cfg.dataset.type != "synthetic") {
            throw ConfigError(path + ": dataset.type must be 'synthetic' for the synth command");
        }
        return cfg.dataset.synthetic;
    }
    const ExperimentConfig cfg = config_from_json("{\"dataset\":{\"synthetic\":" + text + "}}");
    return cfg.dataset.synthetic;
}

void write_report(const EvalReport& report, const TrainConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    json j;
    j["accuracy_mean"] = report.accuracy_mean;
    j["accuracy_std"] = report.accuracy_std;
    j["trials"] = report.trials;
    j["generalized"] = report.generalized;
    j["head"] = head_name(cfg.head);
    j["alpha"] = cfg.alpha;
    j["shots"] = cfg.shots;
    j["seed"] = cfg.seed;
    j["sources"] = cfg.sources;
    j["trial_seeds"] = report.trial_seeds;
    j["per_trial_accuracy"] = report.per_trial_accuracy;
    j["one_example_classes"] = report.one_class_names;
    write_text_file((fs::path(out_dir) / "report.json").string(), j.dump(2) + "\n");
    write_text_file((fs::path(out_dir) / "confusion.csv").string(),
                    labeled_csv(report.confusion, report.one_class_names));
    if (!report.kernel.empty()) {
        write_text_file((fs::path(out_dir) / "kernel.csv").string(),
                        labeled_csv(report.kernel, report.one_class_names));
    }
    std::cout << "accuracy " << format_double(report.accuracy_mean) << " +/- " << format_double(report.accuracy_std)
              << " over " << report.trials << " trials\n";
}

int run(int argc, char** argv) {
    CLI::App app{"side-information-fused one-shot learning"};
    app.require_subcommand(1);

    std::string spec_path, config_path, out_dir, tree_path, kg_path, kr_path;
    bool normalized = false;
    std::vector<double> alpha_grid;
    std::vector<int> shot_grid{1, 3, 5, 10};
    int points = 25;
    std::uint64_t seed = 1;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset with side information");
    synth->add_option("--spec", spec_path, "synth spec JSON (bare spec or full config)")->required();
    synth->add_option("--out", out_dir, "output directory")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "single training run (trial 0 of the eval protocol)");
    train_cmd->add_option("--config", config_path, "experiment config JSON")->required();
    train_cmd->add_option("--out", out_dir, "output directory")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "one-shot evaluation over independent trials");
    eval_cmd->add_option("--config", config_path, "experiment config JSON")->required();
    eval_cmd->add_option("--out", out_dir, "output directory")->required();

    CLI::App* eval_gen = app.add_subcommand("eval-generalized", "evaluation over the union label space");
    eval_gen->add_option("--config", config_path, "experiment config JSON")->required();
    eval_gen->add_option("--out", out_dir, "output directory")->required();

    CLI::App* sweep_a = app.add_subcommand("sweep-alpha", "paired evaluation across an alpha grid");
    sweep_a->add_option("--config", config_path, "experiment config JSON")->required();
    sweep_a->add_option("--out", out_dir, "output directory")->required();
    sweep_a->add_option("--grid", alpha_grid, "alpha values (default 0,0.05,...,1.0)")->delimiter(',');

    CLI::App* sweep_s = app.add_subcommand("sweep-shots", "paired fused-vs-baseline evaluation per shot count");
    sweep_s->add_option("--config", config_path, "experiment config JSON")->required();
    sweep_s->add_option("--out", out_dir, "output directory")->required();
    sweep_s->add_option("--grid", shot_grid, "shot counts (default 1,3,5,10)")->delimiter(',');

    CLI::App* treecov = app.add_subcommand("treecov", "tree-structured covariance of a hierarchy file");
    treecov->add_option("--tree", tree_path, "hierarchy file")->required();
    treecov->add_option("--out", out_dir, "output CSV (stdout when omitted)");
    treecov->add_flag("--normalized", normalized, "correlation-normalize the covariance");

    CLI::App* hsic_cmd = app.add_subcommand("hsic", "dependence score between two kernel CSVs");
    hsic_cmd->add_option("--kg", kg_path, "first kernel CSV")->required();
    hsic_cmd->add_option("--kr", kr_path, "second kernel CSV")->required();

    CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of all objectives");
    gradcheck_cmd->add_option("--points", points, "random parameter points");
    gradcheck_cmd->add_option("--seed", seed, "rng seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors share the configuration exit code
    }

    if (synth->parsed()) {
        const SynthData data = generate_synthetic(read_synth_spec(spec_path));
        save_dataset(data.bundle, out_dir);
        save_sources(data.sources, out_dir);
        std::cout << "wrote " << data.bundle.features.rows() << " samples, "
                  << data.bundle.class_names.size() << " classes to " << out_dir << "\n";
        return 0;
    }

    if (train_cmd->parsed()) {
        const ExperimentConfig cfg = load_config(config_path);
        const LoadedData data = load_data(cfg.dataset);
        const TrainConfig& tc = cfg.train;
        tc.validate();
        data.bundle.validate();
        const auto prepared = prepare_sources(data.sources, data.bundle.class_names, tc.sources);
        const ClassPool lots_pool = make_pool(data.bundle.labels, data.bundle.lots_classes);
        const ClassPool one_pool = make_pool(data.bundle.labels, data.bundle.one_classes);

        const std::uint64_t tseed = mix_seed(tc.seed, hash_name("trial"));
        Rng rng(tseed);
        const TrialSplit split = draw_trial_split(one_pool, tc.shots, rng);
        ClassPool support_pool;
        support_pool.classes = one_pool.classes;
        support_pool.rows.resize(static_cast<std::size_t>(one_pool.class_count()));
        for (std::size_t i = 0; i < split.support_rows.size(); ++i) {
            support_pool.rows[static_cast<std::size_t>(split.support_pos[i])].push_back(split.support_rows[i]);
        }

        TrainResult trained = train(data.bundle.features, lots_pool, support_pool, prepared, tc, tseed, true);
        const std::vector<double> trace =
            finetune(trained.params, gather_rows(data.bundle.features, split.support_rows), split.support_pos,
                     one_pool.class_count(), tc.head, tc.adam(), tc.finetune_iterations);

        fs::create_directories(out_dir);
        std::string log;
        for (const IterRecord& rec : trained.log) {
            json line;
            line["iter"] = rec.iter;
            line["o1"] = rec.o1;
            line["o2"] = rec.o2;
            line["o3"] = rec.o3;
            line["total"] = rec.total;
            log += line.dump() + "\n";
        }
        write_text_file((fs::path(out_dir) / "log.jsonl").string(), log);
        write_text_file((fs::path(out_dir) / "model.json").string(), params_to_json(trained.params));
        std::cout << "trained " << trained.log.size() << " iterations";
        if (!trained.log.empty()) {
            std::cout << ", final objective " << format_double(trained.log.back().total);
        }
        if (!trace.empty()) std::cout << "; fine-tune objective " << format_double(trace.back());
        std::cout << "\n";
        return 0;
    }

    if (eval_cmd->parsed() || eval_gen->parsed()) {
        const ExperimentConfig cfg = load_config(config_path);
        const LoadedData data = load_data(cfg.dataset);
        const EvalReport report = evaluate(data.bundle, data.sources, cfg.train, eval_gen->parsed());
        write_report(report, cfg.train, out_dir);
        return 0;
    }

    if (sweep_a->parsed()) {
        const ExperimentConfig cfg = load_config(config_path);
        const LoadedData data = load_data(cfg.dataset);
        if (alpha_grid.empty()) {
            for (int i = 0; i <= 20; ++i) alpha_grid.push_back(0.05 * i);
        }
        const auto table = sweep_alpha(data.bundle, data.sources, cfg.train, alpha_grid);
        std::string csv = "alpha,accuracy_mean,accuracy_std\n";
        for (const auto& [alpha, report] : table) {
            csv += format_double(alpha) + "," + format_double(report.accuracy_mean) + "," +
                   format_double(report.accuracy_std) + "\n";
            std::cout << "alpha " << format_double(alpha) << ": " << format_double(report.accuracy_mean) << "\n";
        }
        fs::create_directories(out_dir);
        write_text_file((fs::path(out_dir) / "sweep_alpha.csv").string(), csv);
        return 0;
    }

    if (sweep_s->parsed()) {
        const ExperimentConfig cfg = load_config(config_path);
        const LoadedData data = load_data(cfg.dataset);
        const auto table = sweep_shots(data.bundle, data.sources, cfg.train, shot_grid);
        std::string csv = "shots,fused_mean,fused_std,baseline_mean,baseline_std,gap\n";
        for (const ShotPoint& point : table) {
            const double gap = point.fused.accuracy_mean - point.baseline.accuracy_mean;
            csv += std::to_string(point.shots) + "," + format_double(point.fused.accuracy_mean) + "," +
                   format_double(point.fused.accuracy_std) + "," + format_double(point.baseline.accuracy_mean) +
                   "," + format_double(point.baseline.accuracy_std) + "," + format_double(gap) + "\n";
            std::cout << point.shots << "-shot: fused " << format_double(point.fused.accuracy_mean) << ", baseline "
                      << format_double(point.baseline.accuracy_mean) << "\n";
        }
        fs::create_directories(out_dir);
        write_text_file((fs::path(out_dir) / "sweep_shots.csv").string(), csv);
        return 0;
    }

    if (treecov->parsed()) {
        const TreeHierarchy tree = TreeHierarchy::parse(read_text_file(tree_path));
        Matrix cov = tree_covariance(tree);
        if (normalized) cov = normalize_covariance(cov);
        const std::string csv = labeled_csv(cov, tree.class_names());
        if (out_dir.empty()) {
            std::cout << csv;
        } else {
            write_text_file(out_dir, csv);
        }
        return 0;
    }

    if (hsic_cmd->parsed()) {
        const Matrix kg = read_matrix_csv(kg_path);
        const Matrix kr = read_matrix_csv(kr_path);
        std::cout << format_double(hsic(kg, kr)) << "\n";
        return 0;
    }

    const GradCheckReport report = run_gradient_suite(points, seed, std::cout);
    return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
}
