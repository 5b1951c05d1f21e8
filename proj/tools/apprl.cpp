// Experiment harness: train agents, evaluate checkpoints into behavior
// reports, compare configurations and replay recorded traces.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "apprl/config.hpp"
#include "apprl/eval.hpp"
#include "apprl/metrics.hpp"
#include "apprl/trace.hpp"
#include "apprl/trainer.hpp"

namespace fs = std::filesystem;
using namespace apprl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCheckpoint = 3;
constexpr int kExitSchema = 4;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string env_preset;
    std::string shaping;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int episodes = 0;
    bool paper_literal = false;
    bool stochastic_eval = false;
};

ExperimentConfig load_config(const CommonFlags& flags) {
    ExperimentConfig cfg =
        flags.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(flags.config_path);
    if (!flags.env_preset.empty()) {
        cfg.env_preset = flags.env_preset;
        if (flags.env_preset != "custom") cfg.grid = grid_preset(flags.env_preset);
    }
    if (!flags.shaping.empty()) cfg.shaping_name = flags.shaping;
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.episodes > 0) cfg.eval_episodes = flags.episodes;
    if (flags.paper_literal) cfg.train.paper_literal = true;
    if (flags.stochastic_eval) cfg.stochastic_eval = true;
    cfg.validate();
    return cfg;
}

// Outputs are write-once: a fresh directory per run, timestamped unless
// --out names one explicitly.
fs::path make_run_dir(const std::string& out_flag, const std::string& verb) {
    fs::path dir;
    if (!out_flag.empty()) {
        dir = out_flag;
        if (fs::exists(dir) && !fs::is_empty(dir))
            throw ConfigError("output directory already exists and is not empty: " + dir.string());
    } else {
        const char* root_env = std::getenv("APPRL_OUT_DIR");
        const fs::path root = root_env ? fs::path(root_env) : fs::path("runs");
        std::time_t now = std::time(nullptr);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::localtime(&now));
        dir = root / (verb + "-" + stamp);
        for (int i = 1; fs::exists(dir); ++i)
            dir = root / (verb + "-" + std::string(stamp) + "-" + std::to_string(i));
    }
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

int cmd_train(const CommonFlags& flags) {
    const ExperimentConfig cfg = load_config(flags);
    const TrainConfig tc = cfg.resolved_train();
    tc.validate();
    const fs::path run_dir = make_run_dir(flags.out_dir, "train");
    write_text(run_dir / "resolved_config.toml", cfg.to_ini());

    Trainer trainer(tc);
    std::ofstream log(run_dir / "training_log.csv");
    log << kTrainingLogHeader << '\n';
    const int total_iters = tc.iterations();
    trainer.train([&](const IterationLog& row) {
        log << format_log_row(row) << '\n';
        if (cfg.checkpoint_every > 0 && (row.iteration + 1) % cfg.checkpoint_every == 0 &&
            row.iteration + 1 < total_iters) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_iter_%06d.bin", row.iteration + 1);
            save_checkpoint((run_dir / name).string(), trainer.nets());
        }
        std::fprintf(stderr, "iter %d/%d return %.3f win %.2f\n", row.iteration + 1, total_iters,
                     row.mean_return, row.win_rate);
    });
    log.close();
    save_checkpoint((run_dir / "checkpoint.bin").string(), trainer.nets());
    std::printf("%s\n", run_dir.string().c_str());
    return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path) {
    const ExperimentConfig cfg = load_config(flags);
    TrainConfig tc = cfg.resolved_train();  // supplies the net architecture
    PolicyNets<float> nets(tc.net);
    load_checkpoint(checkpoint_path, nets);

    const fs::path run_dir = make_run_dir(flags.out_dir, "eval");
    write_text(run_dir / "resolved_config.toml", cfg.to_ini());

    EvalConfig ecfg = cfg.resolved_eval();
    const EvalResult result = evaluate(nets, ecfg);

    const fs::path traces_dir = run_dir / "traces";
    fs::create_directories(traces_dir);
    for (std::size_t i = 0; i < result.traces.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "ep_%04zu.csv", i);
        write_trace_csv((traces_dir / name).string(), result.traces[i]);
    }
    write_text(traces_dir / "manifest.json",
               eval_manifest(cfg, nets.config().fingerprint(), result.seeds).dump(2) + "\n");

    const BehaviorReport report =
        aggregate_report(result.traces, cfg.grid.width, tc.appraisal, cfg.shaping_name);
    write_report_json((run_dir / "report.json").string(), report);
    write_report_csv((run_dir / "report.csv").string(), report);
    write_roi_csv((run_dir / "roi.csv").string(), report.roi, report.grid_width);
    write_roi_pgm((run_dir / "roi.pgm").string(), report.roi, report.grid_width);

    std::printf("%s\n", run_dir.string().c_str());
    std::fprintf(stderr, "wins/plays %.4f  avg return %.4f  avg stress %.4f  score %.4f\n",
                 report.wins_over_plays, report.average_return, report.average_stress, report.score);
    return kExitOk;
}

std::string aligned_table(const std::vector<BehaviorReport>& reports) {
    const char* cols[] = {"configuration", "wins/plays", "avg_return", "avg_stress", "aversions",
                          "forward",       "left",       "right",      "distract",   "score"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : reports) {
        char buf[64];
        std::vector<std::string> row{r.name};
        auto add = [&](const char* fmt, auto v) {
            std::snprintf(buf, sizeof(buf), fmt, v);
            row.push_back(buf);
        };
        add("%.4f", r.wins_over_plays);
        add("%.4f", r.average_return);
        add("%.4f", r.average_stress);
        add("%ld", r.aversions);
        add("%.4f", r.forward_fraction);
        add("%.4f", r.left_fraction);
        add("%.4f", r.right_fraction);
        add("%ld", r.distractions);
        add("%.4f", r.score);
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(10);
    for (int c = 0; c < 10; ++c) width[c] = std::string(cols[c]).size();
    for (const auto& row : rows)
        for (int c = 0; c < 10; ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream os;
    auto emit = [&](const std::vector<std::string>& row) {
        for (int c = 0; c < 10; ++c) {
            os << row[c] << std::string(width[c] - row[c].size() + 2, ' ');
        }
        os << '\n';
    };
    emit(std::vector<std::string>(cols, cols + 10));
    for (const auto& row : rows) emit(row);
    return os.str();
}

int cmd_compare(const std::vector<std::string>& report_paths, const std::string& out_flag) {
    if (report_paths.size() < 2) throw ConfigError("compare needs at least two report files");
    std::vector<BehaviorReport> reports;
    for (const auto& path : report_paths) reports.push_back(read_report_json(path));
    std::sort(reports.begin(), reports.end(),
              [](const BehaviorReport& a, const BehaviorReport& b) { return a.score > b.score; });

    const fs::path run_dir = make_run_dir(out_flag, "compare");
    std::ofstream csv(run_dir / "comparison.csv");
    csv << kReportCsvHeader << '\n';
    for (const auto& r : reports) csv << report_csv_row(r) << '\n';
    const std::string table = aligned_table(reports);
    write_text(run_dir / "comparison.txt", table);
    std::fputs(table.c_str(), stdout);
    std::printf("%s\n", run_dir.string().c_str());
    return kExitOk;
}

int cmd_replay(std::vector<std::string> trace_paths, const std::string& traces_dir,
               const std::string& out_flag, bool verify) {
    nlohmann::json manifest;
    bool have_manifest = false;
    if (!traces_dir.empty()) {
        for (const auto& entry : fs::directory_iterator(traces_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.starts_with("ep_") && name.ends_with(".csv"))
                trace_paths.push_back(entry.path().string());
        }
        std::sort(trace_paths.begin(), trace_paths.end());
        const fs::path manifest_path = fs::path(traces_dir) / "manifest.json";
        if (fs::exists(manifest_path)) {
            std::ifstream in(manifest_path);
            in >> manifest;
            have_manifest = true;
        }
    }
    if (trace_paths.empty()) throw ConfigError("replay: no trace files given");

    std::vector<EpisodeTrace> traces;
    for (const auto& path : trace_paths) traces.push_back(read_trace_csv(path));

    int grid_width = 10;
    if (have_manifest) grid_width = grid_from_manifest(manifest).width;

    if (verify) {
        if (!have_manifest)
            throw ConfigError("replay --verify needs a traces directory with manifest.json");
        const GridConfig grid = grid_from_manifest(manifest);
        const auto& seeds = manifest.at("seeds");
        if (seeds.size() != traces.size())
            throw SchemaError("replay: manifest seed count does not match trace count");
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const std::uint64_t seed = std::stoull(seeds[i].get<std::string>());
            verify_replay(grid, seed, traces[i]);
        }
        std::fprintf(stderr, "replay verified: %zu traces reproduce exactly\n", traces.size());
    }

    AppraisalConfig appraisal;
    appraisal.grid_width = grid_width;
    const std::string name = have_manifest ? manifest.at("shaping").get<std::string>() : "replay";
    const BehaviorReport report = aggregate_report(traces, grid_width, appraisal, name);

    const fs::path run_dir = make_run_dir(out_flag, "replay");
    write_report_json((run_dir / "report.json").string(), report);
    write_report_csv((run_dir / "report.csv").string(), report);
    std::printf("%s\n", run_dir.string().c_str());
    std::fprintf(stderr, "wins/plays %.4f  score %.4f  aversions %ld  distractions %ld\n",
                 report.wins_over_plays, report.score, report.aversions, report.distractions);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"appraisal-guided grid-world reinforcement learning lab"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string checkpoint_path;
    std::vector<std::string> report_paths;
    std::vector<std::string> trace_paths;
    std::string traces_dir;
    bool verify = false;

    auto add_common = [&](CLI::App* cmd, bool with_eval_flags) {
        cmd->add_option("--config", flags.config_path, "experiment config file");
        cmd->add_option("--out", flags.out_dir, "output run directory");
        cmd->add_option("--env", flags.env_preset,
                        "environment preset: gw-a-train, gw-a-test, gw-b, custom");
        cmd->add_option("--shaping", flags.shaping, "shaping configuration name");
        cmd->add_option("--seed", flags.seed, "experiment seed")->each([&flags](const std::string&) {
            flags.seed_set = true;
        });
        if (with_eval_flags) {
            cmd->add_option("--episodes", flags.episodes, "evaluation episode count");
            cmd->add_flag("--stochastic-eval", flags.stochastic_eval,
                          "sample actions instead of argmax");
        }
    };

    CLI::App* train = app.add_subcommand("train", "train a policy and write a checkpoint");
    add_common(train, false);
    train->add_flag("--paper-literal", flags.paper_literal, "unit weights on all loss terms");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint into a behavior report");
    add_common(eval, true);
    eval->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();

    CLI::App* compare = app.add_subcommand("compare", "tabulate reports sorted by score");
    compare->add_option("reports", report_paths, "report.json files")->expected(-2);
    compare->add_option("--out", flags.out_dir, "output run directory");

    CLI::App* dump = app.add_subcommand("dump-defaults", "print the default config file");

    CLI::App* replay = app.add_subcommand("replay", "recompute metrics from recorded traces");
    replay->add_option("traces", trace_paths, "trace csv files");
    replay->add_option("--traces-dir", traces_dir, "directory of ep_*.csv traces (with manifest.json)");
    replay->add_option("--out", flags.out_dir, "output run directory");
    replay->add_flag("--verify", verify, "re-simulate and check every trace");

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(flags);
        if (eval->parsed()) return cmd_eval(flags, checkpoint_path);
        if (compare->parsed()) return cmd_compare(report_paths, flags.out_dir);
        if (dump->parsed()) {
            std::fputs(ExperimentConfig{}.to_ini().c_str(), stdout);
            return kExitOk;
        }
        if (replay->parsed()) return cmd_replay(trace_paths, traces_dir, flags.out_dir, verify);
        return kExitConfig;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const CheckpointError& e) {
        std::fprintf(stderr, "checkpoint error: %s\n", e.what());
        return kExitCheckpoint;
    } catch (const SchemaError& e) {
        std::fprintf(stderr, "schema error: %s\n", e.what());
        return kExitSchema;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
