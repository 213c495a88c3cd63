// Command-line front end for the continual-learning benchmark harness:
// single runs, reference runs, ordering and imbalance studies, and offline
// recomputation of metrics and plot data from stored results.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "clseq/clbench/harness.hpp"
#include "clseq/error.hpp"

using namespace clseq;
using namespace clseq::clbench;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string strategy;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config file")->required();
    cmd->add_option("--out", args.out_dir, "output directory for artifacts");
    cmd->add_option("--seed", args.seed, "override the config seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--strategy", args.strategy,
                    "override the strategy kind (ft|er|agem|der|pnn|pb|l2p|ewc|lwf|mas)");
}

ExperimentConfig resolve(const CommonArgs& args) {
    auto cfg = ExperimentConfig::from_file(args.config_path);
    if (args.seed_set) {
        cfg.seed = args.seed;
        cfg.gen.pool_seed = numkit::mix_seed(cfg.seed, "pool");
    }
    if (!args.strategy.empty()) cfg.strategy.kind = strategies::strategy_from(args.strategy);
    return cfg;
}

void print_series(const char* name, const std::vector<double>& series, int first_stage) {
    std::printf("%-5s", name);
    for (double v : series) std::printf(" %8.2f", v);
    std::printf("   (stages %d..%d)\n", first_stage,
                first_stage + static_cast<int>(series.size()) - 1);
}

int cmd_run(const CommonArgs& args) {
    const auto cfg = resolve(args);
    auto result = run_sequence(cfg, args.out_dir);
    const auto& r = result.record;
    std::printf("strategy %s  seed %llu  config %s\n", r.strategy.c_str(),
                static_cast<unsigned long long>(r.seed), r.config_hash.c_str());
    print_series("awer", r.metrics.awer, 1);
    print_series("bwt", r.metrics.bwt, 2);
    if (r.metrics.im) print_series("im", *r.metrics.im, 2);
    if (r.metrics.fwt) print_series("fwt", *r.metrics.fwt, 2);
    if (!r.budget_warning.empty()) std::printf("warning: %s\n", r.budget_warning.c_str());
    if (!args.out_dir.empty())
        std::printf("artifacts written to %s\n", args.out_dir.c_str());
    return 0;
}

int cmd_refs(const CommonArgs& args) {
    const auto cfg = resolve(args);
    check(!args.out_dir.empty(), "refs: --out is required to store the reference file");
    const auto pool = run_references(cfg, args.out_dir);
    std::printf("references for %s (%zu languages)\n", cfg.refs_hash().c_str(),
                pool.joint.size());
    for (const auto& [lang, wer] : pool.joint)
        std::printf("  lang %2d  joint %8.2f  solo %8.2f\n", lang, wer, pool.solo.at(lang));
    return 0;
}

int cmd_ordering(const CommonArgs& args, int orders, std::uint64_t order_seed) {
    const auto cfg = resolve(args);
    const auto summary = ordering_study(cfg, orders, order_seed, args.out_dir);
    std::printf("%d orderings, final-stage AWER mean %.2f +/- %.2f\n", summary.n_orders,
                summary.awer.mean.back(), summary.awer.stddev.back());
    if (args.out_dir.empty()) std::fputs(render_ordering_csv(summary).c_str(), stdout);
    return 0;
}

int cmd_imbalance(const CommonArgs& args) {
    const auto cfg = resolve(args);
    const auto summary = imbalance_study(cfg, args.out_dir);
    std::fputs(render_imbalance_csv(summary).c_str(), stdout);
    return 0;
}

int cmd_metrics(const std::string& matrix_path, const std::string& record_path,
                const std::string& out_path) {
    std::ifstream is(matrix_path, std::ios::binary);
    check(is.good(), "metrics: cannot open " + matrix_path);
    std::stringstream ss;
    ss << is.rdbuf();
    const auto matrix = parse_wer_matrix_csv(ss.str());

    std::optional<ReferenceWers> refs;
    if (!record_path.empty()) refs = load_record(record_path).refs;
    const auto series = compute_series(matrix, refs ? &*refs : nullptr);
    const auto csv = render_metrics_csv(series);
    if (out_path.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        write_text_atomic(out_path, csv);
        std::printf("metrics written to %s\n", out_path.c_str());
    }
    return 0;
}

int cmd_plot_data(const std::string& record_path, const std::string& out_dir) {
    const auto record = load_record(record_path);
    emit_plot_data(record, out_dir);
    std::printf("plot data written to %s\n", out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continual-learning benchmark for sequence transcription"};
    app.require_subcommand(1);

    CommonArgs run_args, refs_args, ordering_args, imbalance_args;
    int orders = 10;
    std::uint64_t order_seed = 1;
    std::string matrix_path, record_path, out_path;

    auto* run_cmd = app.add_subcommand("run", "run one experiment");
    add_common(run_cmd, run_args);

    auto* refs_cmd =
        app.add_subcommand("refs", "train the joint and solo reference models");
    add_common(refs_cmd, refs_args);

    auto* ordering_cmd =
        app.add_subcommand("ordering", "repeat a run over shuffled language orders");
    add_common(ordering_cmd, ordering_args);
    ordering_cmd->add_option("--orders", orders, "number of random orders (default 10)");
    ordering_cmd->add_option("--order-seed", order_seed, "seed for the order shuffles");

    auto* imbalance_cmd = app.add_subcommand(
        "imbalance", "compare balanced and imbalanced pretraining budgets");
    add_common(imbalance_cmd, imbalance_args);

    auto* metrics_cmd =
        app.add_subcommand("metrics", "recompute metrics from a stored error matrix");
    metrics_cmd->add_option("--matrix", matrix_path, "wer_matrix.csv path")->required();
    metrics_cmd->add_option("--record", record_path,
                            "record.json supplying reference error rates");
    metrics_cmd->add_option("--out", out_path, "write metrics.csv here instead of stdout");

    auto* plot_cmd = app.add_subcommand("plot-data", "emit per-metric CSV series");
    plot_cmd->add_option("--record", record_path, "record.json path")->required();
    plot_cmd->add_option("--out", out_path, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(run_args);
        if (refs_cmd->parsed()) return cmd_refs(refs_args);
        if (ordering_cmd->parsed()) return cmd_ordering(ordering_args, orders, order_seed);
        if (imbalance_cmd->parsed()) return cmd_imbalance(imbalance_args);
        if (metrics_cmd->parsed()) return cmd_metrics(matrix_path, record_path, out_path);
        if (plot_cmd->parsed()) return cmd_plot_data(record_path, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
