// Command-line front end: train and evaluate stacked pseudoinverse
// autoencoders, benchmark them against an Adam-trained MLP, sweep width
// parameters and fit the last-width regression.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pilae/pilae.hpp"

namespace fs = std::filesystem;
using namespace pilae;

namespace {

struct DataArgs {
    std::string format = "idx";
    std::string path;
    std::string images, labels;
    std::string test_images, test_labels;
    std::string test_csv;
    long label_col = -1;
    bool csv_no_header = false;
    std::string data_root;  // from --data-root or PILAE_DATA_ROOT
};

void add_data_options(CLI::App* cmd, DataArgs& args, bool with_test = true) {
    cmd->add_option("data", args.path,
                    "Dataset location: an IDX directory or a CSV file")
        ->required();
    cmd->add_option("--data-format", args.format, "Input format")
        ->check(CLI::IsMember({"idx", "csv"}))
        ->capture_default_str();
    cmd->add_option("--images", args.images, "IDX image file (overrides the directory)");
    cmd->add_option("--labels", args.labels, "IDX label file (overrides the directory)");
    cmd->add_option("--label-col", args.label_col,
                    "CSV label column; negative counts from the end")
        ->capture_default_str();
    cmd->add_flag("--csv-no-header", args.csv_no_header, "CSV has no header row");
    cmd->add_option("--data-root", args.data_root,
                    "Directory that dataset paths are resolved against")
        ->envname("PILAE_DATA_ROOT");
    if (with_test) {
        cmd->add_option("--test-images", args.test_images, "IDX test image file");
        cmd->add_option("--test-labels", args.test_labels, "IDX test label file");
        cmd->add_option("--test-csv", args.test_csv, "CSV test file");
    }
}

std::string resolve(const DataArgs& args, const std::string& p) {
    if (p.empty() || args.data_root.empty() || fs::path(p).is_absolute()) return p;
    if (fs::exists(p)) return p;
    return (fs::path(args.data_root) / p).string();
}

Dataset load_train(const DataArgs& args) {
    if (args.format == "csv") {
        Dataset ds = load_csv(resolve(args, args.path), args.label_col, !args.csv_no_header);
        ds.name = fs::path(args.path).stem().string();
        return ds;
    }
    const fs::path dir = resolve(args, args.path);
    const std::string images =
        !args.images.empty() ? resolve(args, args.images)
                             : (dir / "train-images-idx3-ubyte").string();
    const std::string labels =
        !args.labels.empty() ? resolve(args, args.labels)
                             : (dir / "train-labels-idx1-ubyte").string();
    Dataset ds = load_idx(images, labels);
    ds.name = dir.filename().string();
    return ds;
}

std::optional<Dataset> load_test(const DataArgs& args) {
    if (args.format == "csv") {
        if (args.test_csv.empty()) return std::nullopt;
        Dataset ds = load_csv(resolve(args, args.test_csv), args.label_col,
                              !args.csv_no_header);
        ds.name = fs::path(args.test_csv).stem().string();
        return ds;
    }
    const fs::path dir = resolve(args, args.path);
    std::string images = args.test_images.empty()
                             ? (dir / "t10k-images-idx3-ubyte").string()
                             : resolve(args, args.test_images);
    std::string labels = args.test_labels.empty()
                             ? (dir / "t10k-labels-idx1-ubyte").string()
                             : resolve(args, args.test_labels);
    if (args.test_images.empty() && !fs::exists(images)) return std::nullopt;
    Dataset ds = load_idx(images, labels);
    ds.name = fs::path(images).filename().string();
    return ds;
}

WidthRule parse_width_rule(const std::string& s) {
    const auto colon = s.find(':');
    const std::string kind = s.substr(0, colon);
    double value = 0.0;
    if (colon == std::string::npos)
        throw ArgumentError("--width-rule expects blend:<alpha> or decay:<beta>");
    try {
        value = std::stod(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw ArgumentError("cannot parse the width-rule value in '" + s + "'");
    }
    if (kind == "blend") return WidthRule::rank_blend(value);
    if (kind == "decay") return WidthRule::decay(value);
    throw ArgumentError("unknown width rule '" + kind + "'");
}

struct TrainArgs {
    DataArgs data;
    std::string width_rule = "blend:0.5";
    std::string activation = "sigmoid";
    std::string head = "shln";
    std::string lambda = "auto";
    double epsilon = 1e-3;
    std::size_t max_depth = 8;
    std::size_t min_width = 8;
    double lambda1 = 1e-6;
    double val_fraction = 0.2;
    bool no_tie = false;
    std::uint64_t seed = 0;
    std::string out;
    std::string report_path;
};

void add_train_options(CLI::App* cmd, TrainArgs& args) {
    add_data_options(cmd, args.data);
    cmd->add_option("--width-rule", args.width_rule, "blend:<alpha> or decay:<beta>")
        ->capture_default_str();
    cmd->add_option("--activation", args.activation, "sigmoid, tanh or step")
        ->check(CLI::IsMember({"sigmoid", "tanh", "step"}))
        ->capture_default_str();
    cmd->add_option("--epsilon", args.epsilon, "Early-stop threshold on the identity distance")
        ->capture_default_str();
    cmd->add_option("--max-depth", args.max_depth, "Maximum number of stacked layers")
        ->capture_default_str();
    cmd->add_option("--min-width", args.min_width, "Narrowest layer worth training")
        ->capture_default_str();
    cmd->add_option("--lambda1", args.lambda1, "Decoder ridge parameter")
        ->capture_default_str();
    cmd->add_flag("--no-tie", args.no_tie, "Keep the truncated-pseudoinverse encoder untied");
    cmd->add_option("--head", args.head, "Readout head")
        ->check(CLI::IsMember({"shln", "softmax", "cascade"}))
        ->capture_default_str();
    cmd->add_option("--lambda", args.lambda,
                    "Output ridge parameter: 'auto' or a positive number")
        ->capture_default_str();
    cmd->add_option("--val-fraction", args.val_fraction,
                    "Holdout fraction for the lambda search")
        ->capture_default_str();
    cmd->add_option("--seed", args.seed, "Seed echoed into reports and used by benchmarks")
        ->capture_default_str();
}

TrainOptions to_train_options(const TrainArgs& args) {
    TrainOptions opt;
    opt.stack.layer_cfg.width_rule = parse_width_rule(args.width_rule);
    opt.stack.layer_cfg.activation = activation_from_string(args.activation);
    opt.stack.layer_cfg.lambda1 = args.lambda1;
    opt.stack.layer_cfg.tie_weights = !args.no_tie;
    opt.stack.epsilon = args.epsilon;
    opt.stack.max_depth = args.max_depth;
    opt.stack.min_width = args.min_width;
    opt.head = head_kind_from_string(args.head);
    opt.val_fraction = args.val_fraction;
    opt.seed = args.seed;
    if (args.lambda != "auto") {
        opt.lambda_auto = false;
        try {
            opt.lambda_fixed = std::stod(args.lambda);
        } catch (const std::exception&) {
            throw ArgumentError("--lambda expects 'auto' or a number, got '" +
                                args.lambda + "'");
        }
        if (!(opt.lambda_fixed > 0.0))
            throw ArgumentError("--lambda must be positive");
    }
    return opt;
}

std::map<std::string, std::string> echo_config(const TrainArgs& args) {
    return {{"width_rule", args.width_rule},
            {"activation", args.activation},
            {"epsilon", std::to_string(args.epsilon)},
            {"max_depth", std::to_string(args.max_depth)},
            {"min_width", std::to_string(args.min_width)},
            {"lambda1", std::to_string(args.lambda1)},
            {"tie_weights", args.no_tie ? "off" : "on"},
            {"head", args.head},
            {"lambda", args.lambda},
            {"val_fraction", std::to_string(args.val_fraction)},
            {"seed", std::to_string(args.seed)}};
}

void emit_report(const RunReport& report, const std::string& report_path) {
    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::app);
        if (!out) throw IoError("cannot open report file '" + report_path + "'");
        out << report.to_json_line() << "\n";
    } else {
        std::cout << report.to_json_line() << "\n";
    }
}

std::string join_widths(const std::vector<std::size_t>& widths, std::size_t input,
                        std::size_t classes) {
    std::ostringstream ss;
    ss << input;
    for (auto w : widths) ss << "-" << w;
    ss << "-" << classes;
    return ss.str();
}

void print_table(const RunReport& r, std::size_t classes) {
    std::printf("dataset          %s\n", r.dataset.c_str());
    std::printf("architecture     %s\n",
                join_widths(r.architecture, r.input_dim, classes).c_str());
    std::printf("input rank       %zu of %zu\n", r.input_rank, r.input_dim);
    std::printf("stopping reason  %s\n", r.stopping_reason.c_str());
    std::printf("head             %s  (lambda %.6g, estimate %.6g)\n", r.head.c_str(),
                r.lambda, r.lambda_hat);
    for (std::size_t i = 0; i < r.layer_seconds.size(); ++i)
        std::printf("layer %zu          width %zu  rank ratio %.4f  %.2fs\n", i + 1,
                    r.architecture[i], r.rank_ratios[i], r.layer_seconds[i]);
    std::printf("train accuracy   %.4f\n", r.train_accuracy);
    if (r.test_accuracy >= 0.0) std::printf("test accuracy    %.4f\n", r.test_accuracy);
    std::printf("total time       %.2fs\n", r.total_seconds);
}

int cmd_train(TrainArgs& args) {
    const Dataset train = load_train(args.data);
    const auto test = load_test(args.data);
    TrainOptions opt = to_train_options(args);

    TrainedModel model = train_pipeline(train, test ? &*test : nullptr, opt);
    model.report.config = echo_config(args);

    if (!args.out.empty()) save_model(model.net, args.out);
    print_table(model.report, train.classes);
    emit_report(model.report, args.report_path);
    return 0;
}

int cmd_eval(const std::string& model_path, DataArgs& data, const std::string& report_path) {
    const StackedNetwork net = load_model(model_path);
    const Dataset ds = load_train(data);
    const EvalResult ev = evaluate(net, ds);

    std::printf("dataset   %s\n", ds.name.c_str());
    std::printf("accuracy  %.4f\n", ev.accuracy);
    std::printf("confusion matrix (rows truth, columns prediction)\n");
    for (std::size_t i = 0; i < ev.confusion.rows(); ++i) {
        for (std::size_t j = 0; j < ev.confusion.cols(); ++j)
            std::printf("%7.0f", ev.confusion(i, j));
        std::printf("\n");
    }

    RunReport report;
    report.dataset = ds.name;
    report.head = net.readout ? to_string(net.readout->kind) : "none";
    report.test_accuracy = ev.accuracy;
    report.input_dim = net.input_dim;
    for (const auto& l : net.layers) report.architecture.push_back(l.width);
    report.split_hash = content_hash(ds);
    report.stopping_reason = "loaded";
    emit_report(report, report_path);
    return 0;
}

struct BenchArgs {
    TrainArgs train;
    std::size_t limit = 0;
    std::size_t epochs = 20;
    std::string scaling;  // comma-separated subset sizes
};

int cmd_bench(BenchArgs& args) {
    const Dataset train = load_train(args.train.data);
    const auto test = load_test(args.train.data);

    BenchOptions opt;
    opt.train = to_train_options(args.train);
    opt.baseline.epochs = args.epochs;
    opt.baseline.seed = args.train.seed;
    opt.limit = args.limit;

    const BenchReport rep = bench_run(train, test ? &*test : nullptr, opt);
    std::printf("%-22s %12s %12s %12s\n", "", "seconds", "train acc", "test acc");
    std::printf("%-22s %12.2f %12.4f %12.4f\n", "pilae", rep.pilae.total_seconds,
                rep.pilae.train_accuracy, rep.pilae.test_accuracy);
    if (rep.baseline_diverged) {
        std::printf("%-22s %12s   diverged: %s\n", "backprop-adam", "-",
                    rep.baseline_error.c_str());
    } else {
        std::printf("%-22s %12.2f %12.4f %12.4f\n", "backprop-adam",
                    rep.baseline_seconds, rep.baseline_train_accuracy,
                    rep.baseline_test_accuracy);
    }
    std::printf("split hash %016llx\n",
                static_cast<unsigned long long>(rep.split_hash));

    nlohmann::json j;
    j["pilae"] = nlohmann::json::parse(rep.pilae.to_json_line());
    j["baseline_seconds"] = rep.baseline_seconds;
    j["baseline_train_accuracy"] = rep.baseline_train_accuracy;
    j["baseline_test_accuracy"] = rep.baseline_test_accuracy;
    j["baseline_diverged"] = rep.baseline_diverged;
    j["split_hash"] = rep.split_hash;

    if (!args.scaling.empty()) {
        std::vector<std::size_t> ns;
        std::stringstream ss(args.scaling);
        std::string tok;
        while (std::getline(ss, tok, ','))
            ns.push_back(static_cast<std::size_t>(std::stoul(tok)));
        const ScalingProbe probe = probe_scaling(train, ns, opt.train);
        std::printf("\nscaling probe (full pipeline, wall clock)\n");
        for (const auto& pt : probe.points)
            std::printf("  N=%-8zu %.2fs\n", pt.n, pt.seconds);
        for (std::size_t i = 0; i < probe.ratios.size(); ++i)
            std::printf("  ratio %zu->%zu: %.2f\n", probe.points[i].n,
                        probe.points[i + 1].n, probe.ratios[i]);
        std::printf("  empirical exponent %.2f\n", probe.empirical_exponent);
        nlohmann::json sj;
        for (const auto& pt : probe.points)
            sj["points"].push_back({{"n", pt.n}, {"seconds", pt.seconds}});
        sj["ratios"] = probe.ratios;
        sj["exponent"] = probe.empirical_exponent;
        j["scaling"] = sj;
    }
    if (!args.train.report_path.empty()) {
        std::ofstream out(args.train.report_path, std::ios::app);
        out << j.dump() << "\n";
    } else {
        std::cout << j.dump() << "\n";
    }
    return 0;
}

int cmd_fit_width(const std::string& records_path) {
    const auto records = load_width_records(records_path);
    if (records.size() < 5)
        throw ArgumentError("fit-width needs at least 5 records, got " +
                            std::to_string(records.size()));
    const WidthRegressionFit fit = fit_width_regression(records);
    std::printf("theta  [%g, %g, %g, %g, %g]\n", fit.reg.theta[0], fit.reg.theta[1],
                fit.reg.theta[2], fit.reg.theta[3], fit.reg.theta[4]);
    std::printf("residual sum of squares  %g\n", fit.residual_sq);

    if (records.size() >= 6) {
        std::printf("\nleave-one-out predictions\n");
        std::printf("%8s %8s %8s %12s %s\n", "r", "n", "p*", "predicted", "branch");
        for (const auto& e : leave_one_out_width(records))
            std::printf("%8zu %8zu %8zu %12ld %s\n", e.record.r, e.record.n,
                        e.record.p_star, e.predicted,
                        e.fallback ? "fallback" : "polynomial");
    } else {
        std::printf("leave-one-out skipped: needs at least 6 records\n");
    }
    return 0;
}

struct SweepArgs {
    DataArgs data;
    std::string param = "alpha";
    std::string values = "0,0.25,0.5,0.75,1";
    double lambda1 = 1e-6;
    bool no_tie = false;
};

int cmd_sweep(SweepArgs& args) {
    const Dataset train = load_train(args.data);
    std::vector<double> values;
    std::stringstream ss(args.values);
    std::string tok;
    while (std::getline(ss, tok, ',')) values.push_back(std::stod(tok));
    if (values.empty()) throw ArgumentError("sweep needs at least one value");

    LayerConfig base;
    base.lambda1 = args.lambda1;
    base.tie_weights = !args.no_tie;
    const auto kind = args.param == "alpha" ? WidthRule::Kind::rank_blend
                                            : WidthRule::Kind::decay;
    const auto rows = sweep_width_parameter(train, kind, values, base);
    std::printf("%10s %8s %16s %16s %s\n", args.param.c_str(), "width", "recon error",
                "pre-tie error", "rule");
    for (const auto& r : rows)
        std::printf("%10.3f %8zu %16.6g %16.6g %s\n", r.value, r.width, r.recon_error,
                    r.recon_error_pre_tie, r.used_decay_fallback ? "decay-fallback" : "as-given");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-form training for deep feedforward networks via "
                 "truncated-SVD pseudoinverse autoencoders"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key=value configuration file merged under the flags");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train a stacked network and a readout");
    add_train_options(train_cmd, train_args);
    train_cmd->add_option("--out", train_args.out, "Write the trained model here");
    train_cmd->add_option("--report", train_args.report_path,
                          "Append the JSON-lines report here instead of stdout");

    std::string eval_model;
    DataArgs eval_data;
    std::string eval_report;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model");
    eval_cmd->add_option("model", eval_model, "Model file")->required();
    add_data_options(eval_cmd, eval_data, false);
    eval_cmd->add_option("--report", eval_report, "Append the JSON-lines report here");

    BenchArgs bench_args;
    auto* bench_cmd =
        app.add_subcommand("bench", "Compare against the Adam-trained MLP baseline");
    add_train_options(bench_cmd, bench_args.train);
    bench_cmd->add_option("--limit", bench_args.limit,
                          "Train on only the first N samples");
    bench_cmd->add_option("--epochs", bench_args.epochs, "Baseline epoch budget")
        ->capture_default_str();
    bench_cmd->add_option("--scaling", bench_args.scaling,
                          "Comma-separated subset sizes for the timing probe");
    bench_cmd->add_option("--report", bench_args.train.report_path,
                          "Append the JSON report here instead of stdout");

    std::string records_path;
    auto* fit_cmd = app.add_subcommand("fit-width", "Fit the last-width regression");
    fit_cmd->add_option("records", records_path, "CSV with header r,n,p_star")->required();

    SweepArgs sweep_args;
    auto* sweep_cmd =
        app.add_subcommand("sweep", "Reconstruction error across width parameters");
    add_data_options(sweep_cmd, sweep_args.data, false);
    sweep_cmd->add_option("--param", sweep_args.param, "alpha (blend) or beta (decay)")
        ->check(CLI::IsMember({"alpha", "beta"}))
        ->capture_default_str();
    sweep_cmd->add_option("--values", sweep_args.values, "Comma-separated grid")
        ->capture_default_str();
    sweep_cmd->add_option("--lambda1", sweep_args.lambda1, "Decoder ridge parameter")
        ->capture_default_str();
    sweep_cmd->add_flag("--no-tie", sweep_args.no_tie, "Skip weight tying");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (eval_cmd->parsed()) return cmd_eval(eval_model, eval_data, eval_report);
        if (bench_cmd->parsed()) return cmd_bench(bench_args);
        if (fit_cmd->parsed()) return cmd_fit_width(records_path);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
    } catch (const ArgumentError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
