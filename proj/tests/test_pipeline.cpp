#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "pilae/model_io.hpp"
#include "pilae/pipeline.hpp"
#include "support/test_oracles.hpp"

using namespace pilae;
using Catch::Approx;

namespace {

// Three well-separated Gaussian blobs in 8 dimensions.
Dataset blobs(std::size_t n, std::uint64_t seed, const char* name = "blobs") {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.35);
    Dataset ds;
    ds.x = Matrix(8, n);
    ds.labels.resize(n);
    ds.classes = 3;
    ds.name = name;
    for (std::size_t j = 0; j < n; ++j) {
        const int c = static_cast<int>(j % 3);
        ds.labels[j] = c;
        for (std::size_t i = 0; i < 8; ++i)
            ds.x(i, j) = (static_cast<std::size_t>(c) * 2 == i || i == 7 - static_cast<std::size_t>(c)
                              ? 2.0
                              : 0.0) +
                         noise(rng);
    }
    return ds;
}

TrainOptions toy_options(HeadKind head = HeadKind::shln) {
    TrainOptions opt;
    opt.stack.layer_cfg.width_rule = WidthRule::decay(0.9);
    opt.stack.max_depth = 2;
    opt.stack.min_width = 2;
    opt.stack.epsilon = 1e-12;
    opt.head = head;
    opt.softmax.epochs = 120;
    return opt;
}

}  // namespace

TEST_CASE("pipeline trains, evaluates and reports on a toy problem", "[pipeline]") {
    const Dataset train = blobs(120, 7);
    const Dataset test = blobs(60, 8);
    const TrainedModel model = train_pipeline(train, &test, toy_options());

    REQUIRE(model.report.train_accuracy > 0.9);
    REQUIRE(model.report.test_accuracy > 0.9);
    REQUIRE(model.report.architecture.size() == model.net.depth());
    REQUIRE(model.report.layer_seconds.size() == model.net.depth());
    REQUIRE(model.report.stopping_reason == "max_depth");
    REQUIRE(model.report.lambda > 0.0);
    REQUIRE(model.report.lambda_hat > 0.0);
    REQUIRE(model.net.readout.has_value());

    const EvalResult ev = evaluate(model.net, test);
    REQUIRE(ev.accuracy == Approx(model.report.test_accuracy));
    // confusion matrix row sums count the class occurrences
    for (std::size_t c = 0; c < 3; ++c) {
        double row = 0.0;
        for (std::size_t k = 0; k < ev.confusion.cols(); ++k) row += ev.confusion(c, k);
        REQUIRE(row == 20.0);
    }
    // re-evaluation is idempotent
    const EvalResult ev2 = evaluate(model.net, test);
    REQUIRE(ev2.accuracy == ev.accuracy);
    REQUIRE(ev2.confusion.bit_equal(ev.confusion));
}

TEST_CASE("evaluate memorizes a separable training set", "[pipeline]") {
    const Dataset train = blobs(90, 9);
    const TrainedModel model = train_pipeline(train, nullptr, toy_options());
    REQUIRE(evaluate(model.net, train).accuracy == 1.0);
    REQUIRE(model.report.test_accuracy == -1.0);
}

TEST_CASE("evaluate rejects dimension mismatches and missing heads", "[pipeline]") {
    const Dataset train = blobs(90, 10);
    TrainedModel model = train_pipeline(train, nullptr, toy_options());
    Dataset wrong = blobs(30, 11);
    wrong.x = Matrix(9, 30, 0.5);
    REQUIRE_THROWS_AS(evaluate(model.net, wrong), ArgumentError);
    model.net.readout.reset();
    REQUIRE_THROWS_AS(evaluate(model.net, train), ArgumentError);
}

TEST_CASE("all three heads train and classify the toy problem", "[pipeline]") {
    const Dataset train = blobs(120, 12);
    const Dataset test = blobs(60, 13);
    for (HeadKind kind : {HeadKind::shln, HeadKind::softmax, HeadKind::cascade}) {
        const TrainedModel model = train_pipeline(train, &test, toy_options(kind));
        INFO("head " << to_string(kind));
        REQUIRE(model.report.test_accuracy > 0.85);
        REQUIRE(model.net.readout->kind == kind);
    }
}

TEST_CASE("fixed-lambda mode skips the search", "[pipeline]") {
    const Dataset train = blobs(90, 14);
    TrainOptions opt = toy_options();
    opt.lambda_auto = false;
    opt.lambda_fixed = 0.125;
    const TrainedModel model = train_pipeline(train, nullptr, opt);
    REQUIRE(model.report.lambda == 0.125);
    REQUIRE(model.report.lambda_hat == 0.0);
}

TEST_CASE("run reports round-trip through JSON lines", "[pipeline]") {
    const Dataset train = blobs(100, 15);
    const Dataset test = blobs(40, 16);
    const TrainedModel model = train_pipeline(train, &test, toy_options());
    const std::string line = model.report.to_json_line();
    REQUIRE(line.find('\n') == std::string::npos);
    const RunReport back = parse_run_report(line);
    REQUIRE(back.to_json() == model.report.to_json());
    REQUIRE_THROWS_AS(parse_run_report("not json"), ParseError);
    REQUIRE_THROWS_AS(parse_run_report("{\"dataset\":\"x\"}"), ParseError);
}

TEST_CASE("end-to-end determinism: identical models and reports", "[pipeline]") {
    const Dataset train = blobs(100, 17);
    const TrainedModel a = train_pipeline(train, nullptr, toy_options());
    const TrainedModel b = train_pipeline(train, nullptr, toy_options());
    REQUIRE(reports_equal_ignoring_timing(a.report, b.report));

    namespace fs = std::filesystem;
    const fs::path pa = fs::temp_directory_path() / "pilae_det_a.bin";
    const fs::path pb = fs::temp_directory_path() / "pilae_det_b.bin";
    save_model(a.net, pa.string());
    save_model(b.net, pb.string());
    std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(fa)),
                              std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(fb)),
                              std::istreambuf_iterator<char>());
    REQUIRE(bytes_a == bytes_b);
    fs::remove(pa);
    fs::remove(pb);
}

TEST_CASE("bench compares both trainers on the same split", "[pipeline]") {
    const Dataset train = blobs(150, 18);
    const Dataset test = blobs(60, 19);
    BenchOptions opt;
    opt.train = toy_options();
    opt.baseline.epochs = 8;
    opt.baseline.batch_size = 32;
    opt.baseline.seed = 1;
    opt.limit = 120;
    const BenchReport rep = bench_run(train, &test, opt);
    REQUIRE_FALSE(rep.baseline_diverged);
    REQUIRE(rep.baseline_seconds > 0.0);
    REQUIRE(rep.pilae.total_seconds > 0.0);
    REQUIRE(rep.baseline_epoch_losses.size() == 8);
    REQUIRE(rep.split_hash == rep.pilae.split_hash);
    REQUIRE(rep.baseline_test_accuracy >= 0.0);
}

TEST_CASE("scaling probe reports points and ratios", "[pipeline]") {
    const Dataset train = blobs(320, 20);
    TrainOptions opt = toy_options();
    opt.lambda_auto = false;
    const ScalingProbe probe = probe_scaling(train, {80, 160, 320}, opt);
    REQUIRE(probe.points.size() == 3);
    REQUIRE(probe.ratios.size() == 2);
    for (const auto& pt : probe.points) REQUIRE(pt.seconds >= 0.0);
    REQUIRE_THROWS_AS(probe_scaling(train, {400}, opt), ArgumentError);
}

TEST_CASE("width parameter sweep reports error against the grid", "[pipeline]") {
    std::mt19937_64 rng(210);
    Dataset train;
    train.x = oracle::planted_rank_matrix(8, 90, 3, rng);
    train.labels.assign(90, 0);
    train.classes = 1;
    LayerConfig base;
    base.tie_weights = true;
    const auto rows = sweep_width_parameter(train, WidthRule::Kind::rank_blend,
                                            {0.0, 0.25, 0.5, 0.75, 1.0}, base);
    REQUIRE(rows.size() == 5);
    REQUIRE(rows.front().width == 3);  // blend(0) keeps the rank
    REQUIRE(rows.back().width == 8);   // blend(1) keeps the dimension
    for (std::size_t i = 0; i < rows.size(); ++i) {
        REQUIRE_FALSE(rows[i].used_decay_fallback);
        REQUIRE(rows[i].recon_error >= 0.0);
        if (i > 0) REQUIRE(rows[i].width >= rows[i - 1].width);
    }
}

TEST_CASE("content hash tracks the data", "[pipeline]") {
    Dataset a = blobs(50, 22);
    const std::uint64_t h = content_hash(a);
    REQUIRE(content_hash(a) == h);
    a.x(0, 0) += 1.0;
    REQUIRE(content_hash(a) != h);
}
