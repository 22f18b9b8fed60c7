// Acceptance suite: one pass/fail line per criterion, exit 1 on any failure.
// Data-dependent criteria look for IDX files under $PILAE_DATA_ROOT
// (<root>/mnist and <root>/fashion-mnist) and report SKIP when absent.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pilae/pilae.hpp"
#include "support/test_oracles.hpp"

using namespace pilae;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status;
    std::string detail;
};

Outcome pass(const std::string& d) { return {Status::pass, d}; }
Outcome fail(const std::string& d) { return {Status::fail, d}; }
Outcome skip(const std::string& d) { return {Status::skip, d}; }

struct DataContext {
    std::optional<Dataset> mnist_train, mnist_test;
    std::optional<Dataset> fashion_train, fashion_test;
    std::string mnist_reason = "dataset not found";
    std::string fashion_reason = "dataset not found";

    std::optional<TrainedModel> mnist_shln;      // criterion 4, reused by 6
    std::optional<double> mnist_softmax_acc;

    void load() {
        const char* env = std::getenv("PILAE_DATA_ROOT");
        const fs::path root = env ? fs::path(env) : fs::path("data");
        load_pair(root / "mnist", mnist_train, mnist_test, mnist_reason);
        load_pair(root / "fashion-mnist", fashion_train, fashion_test, fashion_reason);
    }

  private:
    static void load_pair(const fs::path& dir, std::optional<Dataset>& train,
                          std::optional<Dataset>& test, std::string& reason) {
        const fs::path ti = dir / "train-images-idx3-ubyte";
        const fs::path tl = dir / "train-labels-idx1-ubyte";
        const fs::path ei = dir / "t10k-images-idx3-ubyte";
        const fs::path el = dir / "t10k-labels-idx1-ubyte";
        if (!fs::exists(ti) || !fs::exists(tl) || !fs::exists(ei) || !fs::exists(el)) {
            reason = "IDX files not found under " + dir.string() +
                     " (set PILAE_DATA_ROOT)";
            return;
        }
        try {
            train = load_idx(ti.string(), tl.string());
            train->name = dir.filename().string();
            test = load_idx(ei.string(), el.string());
            test->name = dir.filename().string() + "-test";
        } catch (const Error& e) {
            train.reset();
            test.reset();
            reason = std::string("failed to load: ") + e.what();
        }
    }
};

TrainOptions mnist_protocol(HeadKind head) {
    TrainOptions opt;
    opt.stack.layer_cfg.width_rule = WidthRule::decay(0.9);
    opt.stack.layer_cfg.activation = Activation::sigmoid;
    opt.stack.layer_cfg.lambda1 = 1e-6;
    opt.stack.layer_cfg.tie_weights = true;
    // With the N^2-normalized identity distance the first 705-wide layer on
    // 60k samples already measures ~1.6e-5, so the default 1e-3 threshold
    // would stop growth at depth one; the two-layer protocol pins epsilon
    // well below that.
    opt.stack.epsilon = 1e-9;
    opt.stack.max_depth = 2;
    opt.stack.min_width = 8;
    opt.head = head;
    opt.val_fraction = 0.2;
    return opt;
}

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1

Outcome criterion_pseudoinverse_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240901);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<std::size_t> md(2, 50), nd(2, 80);
        const std::size_t m = md(rng), n = nd(rng);
        std::uniform_int_distribution<std::size_t> rd(1, std::min(m, n));
        const std::size_t r = rd(rng);
        const Matrix a = oracle::planted_rank_matrix(m, n, r, rng);
        const Matrix ap = pinv(a);

        const Matrix aap = oracle::naive_matmul(a, ap);
        const Matrix apa = oracle::naive_matmul(ap, a);
        const double e1 = oracle::rel_fro_error(oracle::naive_matmul(aap, a), a);
        const double e2 = oracle::rel_fro_error(oracle::naive_matmul(apa, ap), ap);
        const double e3 = oracle::max_abs_diff(aap, oracle::naive_transpose(aap));
        const double e4 = oracle::max_abs_diff(apa, oracle::naive_transpose(apa));
        worst = std::max({worst, e1, e2, e3, e4});
        if (worst > 1e-8)
            return fail("identities violated at trial " + std::to_string(trial) +
                        ": error " + fmt(worst, 12));

        std::uniform_int_distribution<std::size_t> pd(1, n);
        for (int s = 0; s < 2; ++s) {
            const std::size_t p = pd(rng);
            const Matrix t = truncated_pinv(a, p);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    if (t(i, j) != ap(i, j))
                        return fail("truncated_pinv row slice differs at trial " +
                                    std::to_string(trial));
        }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= 10.0) return fail("suite took " + fmt(secs, 1) + "s, budget is 10s");
    return pass("200 matrices, worst identity error " + fmt(worst, 12) + ", " +
                fmt(secs, 1) + "s");
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion_ridge_oracle() {
    std::mt19937_64 rng(20240902);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<std::size_t> pd(2, 40), nd(2, 40), kd(2, 6);
        std::uniform_real_distribution<double> ld(-6.0, 0.0);
        const std::size_t p = pd(rng), n = nd(rng);
        const double lambda = std::pow(10.0, ld(rng));
        const Matrix h = oracle::random_matrix(p, n, rng);
        const Matrix z = oracle::random_matrix(kd(rng), n, rng);

        const double e1 =
            oracle::rel_fro_error(ridge_pinv(h, lambda),
                                  oracle::ridge_pinv_reference(h, lambda));
        const double e2 =
            oracle::rel_fro_error(fit_output_weights(h, z, lambda),
                                  oracle::ridge_weights_reference(h, z, lambda));
        worst = std::max({worst, e1, e2});
        if (worst > 1e-8)
            return fail("oracle mismatch " + fmt(worst, 12) + " at trial " +
                        std::to_string(trial) + " (lambda " + fmt(lambda, 8) + ")");
    }
    return pass("50 instances, worst relative error " + fmt(worst, 12));
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion_width_chain() {
    const WidthRule rule = WidthRule::decay(0.9);
    const std::size_t w1 = select_width(rule, 1, 784);
    const std::size_t w2 = select_width(rule, 1, w1);
    if (w1 != 705 || w2 != 634)
        return fail("decay(0.9) chain gave " + std::to_string(w1) + ", " +
                    std::to_string(w2) + " instead of 705, 634");
    return pass("784 -> 705 -> 634");
}

// ------------------------------------------------------------- criteria 4 & 5

Outcome accuracy_criterion(DataContext& ctx, bool fashion) {
    auto& train = fashion ? ctx.fashion_train : ctx.mnist_train;
    auto& test = fashion ? ctx.fashion_test : ctx.mnist_test;
    if (!train) return skip(fashion ? ctx.fashion_reason : ctx.mnist_reason);

    const double shln_target = fashion ? 0.8819 : 0.9751;
    const double shln_tol = 0.02;
    const double softmax_target = fashion ? 0.8621 : 0.9611;
    const double softmax_tol = fashion ? 0.03 : 0.02;

    // one stack, two heads on its features
    TrainOptions opt = mnist_protocol(HeadKind::shln);
    detail::GrownStack grown = detail::grow_stack_impl(train->x, opt.stack);

    detail::HeadFitResult shln = detail::fit_head(
        HeadKind::shln, grown.last_hidden, train->labels, train->classes, opt);
    StackedNetwork net_shln = grown.net;  // copy of the diagnostics, layers shared
    net_shln.readout = shln.head;
    const double shln_acc = evaluate(net_shln, *test).accuracy;

    TrainOptions sopt = mnist_protocol(HeadKind::softmax);
    detail::HeadFitResult soft = detail::fit_head(
        HeadKind::softmax, grown.last_hidden, train->labels, train->classes, sopt);
    StackedNetwork net_soft = std::move(grown.net);
    net_soft.readout = soft.head;
    const double softmax_acc = evaluate(net_soft, *test).accuracy;

    if (!fashion) {
        TrainedModel cached;
        cached.net = std::move(net_shln);
        ctx.mnist_shln = std::move(cached);
        ctx.mnist_softmax_acc = softmax_acc;
    }

    std::ostringstream detail_line;
    detail_line << "shln " << fmt(shln_acc) << " (target " << fmt(shln_target) << " +- "
                << fmt(shln_tol, 2) << ", lambda " << shln.head.lambda << "), softmax "
                << fmt(softmax_acc) << " (target " << fmt(softmax_target) << " +- "
                << fmt(softmax_tol, 2) << ")";

    const bool shln_ok = std::fabs(shln_acc - shln_target) <= shln_tol;
    if (!shln_ok) return fail(detail_line.str());
    const bool softmax_primary = std::fabs(softmax_acc - softmax_target) <= softmax_tol;
    if (softmax_primary) return pass(detail_line.str());
    // optimizer-sensitive fallback for the gradient-trained head
    if (!fashion && softmax_acc >= 0.92)
        return pass(detail_line.str() + " [softmax via >=0.92 fallback]");
    return fail(detail_line.str());
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion_rank_ratios(DataContext& ctx) {
    std::string note;
    if (ctx.mnist_shln) {
        const StackedNetwork& net = ctx.mnist_shln->net;
        if (net.input_rank >= net.input_dim)
            return fail("mnist input measured full rank " +
                        std::to_string(net.input_rank) + " of " +
                        std::to_string(net.input_dim));
        if (net.rank_ratios.size() < 2 || net.rank_ratios[1] < 1.0)
            return fail("mnist rank ratio at layer 2 is " +
                        fmt(net.rank_ratios.size() > 1 ? net.rank_ratios[1] : -1.0));
        note += "mnist input rank " + std::to_string(net.input_rank) + "/" +
                std::to_string(net.input_dim) + ", ratios";
        for (double r : net.rank_ratios) note += " " + fmt(r, 3);
    } else {
        return skip("mnist: " + ctx.mnist_reason);
    }

    if (ctx.fashion_train) {
        // blend rule on full-row-rank input must route to the decay fallback
        LayerConfig cfg;
        cfg.width_rule = WidthRule::rank_blend(0.5);
        cfg.tie_weights = true;
        const auto [layer, hidden] = train_layer(ctx.fashion_train->x, cfg);
        (void)hidden;
        if (layer.input_rank != ctx.fashion_train->dim())
            return fail("fashion input rank " + std::to_string(layer.input_rank) +
                        " is not full");
        if (!layer.used_decay_fallback)
            return fail("fashion full-rank input did not trigger the decay fallback");
        note += "; fashion full rank, decay fallback fired";
    } else {
        note += "; fashion part skipped (" + ctx.fashion_reason + ")";
    }
    return pass(note);
}

// ---------------------------------------------------------------- criterion 7

Outcome criterion_speed_direction(DataContext& ctx) {
    if (!ctx.mnist_train) return skip(ctx.mnist_reason);
    BenchOptions opt;
    opt.train = mnist_protocol(HeadKind::shln);
    opt.baseline.epochs = 20;
    opt.baseline.seed = 7;
    opt.limit = 10000;
    const BenchReport rep = bench_run(*ctx.mnist_train, &*ctx.mnist_test, opt);
    if (rep.baseline_diverged)
        return fail("baseline diverged: " + rep.baseline_error);
    std::ostringstream ss;
    ss << "pilae " << fmt(rep.pilae.total_seconds, 1) << "s (test acc "
       << fmt(rep.pilae.test_accuracy) << "), adam-20-epochs "
       << fmt(rep.baseline_seconds, 1) << "s (test acc "
       << fmt(rep.baseline_test_accuracy) << "), single-threaded";
    if (!(rep.pilae.total_seconds < rep.baseline_seconds)) return fail(ss.str());
    return pass(ss.str());
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion_scaling(DataContext& ctx) {
    TrainOptions opt = mnist_protocol(HeadKind::shln);
    opt.lambda_auto = false;  // keep the probe about the training path

    Dataset synthetic;
    const Dataset* source = nullptr;
    std::string label;
    if (ctx.mnist_train) {
        source = &*ctx.mnist_train;
        label = "mnist";
    } else {
        std::mt19937_64 rng(20240908);
        synthetic.x = oracle::random_matrix(784, 32000, rng, 0.5);
        synthetic.labels.resize(32000);
        for (std::size_t i = 0; i < 32000; ++i) synthetic.labels[i] = i % 10;
        synthetic.classes = 10;
        synthetic.name = "synthetic-784";
        source = &synthetic;
        label = "synthetic d=784 (mnist unavailable)";
    }
    const ScalingProbe probe = probe_scaling(*source, {8000, 16000, 32000}, opt);
    std::ostringstream ss;
    ss << label << ":";
    for (const auto& pt : probe.points) ss << " t(" << pt.n << ")=" << fmt(pt.seconds, 1) << "s";
    ss << ", ratios";
    bool ok = true;
    for (double r : probe.ratios) {
        ss << " " << fmt(r, 2);
        ok = ok && r <= 4.5;
    }
    ss << " (bound 4.5, exponent " << fmt(probe.empirical_exponent, 2) << ")";
    return ok ? pass(ss.str()) : fail(ss.str());
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion_gradient_checks() {
    std::mt19937_64 rng(20240909);
    double worst = 0.0;

    for (int trial = 0; trial < 4; ++trial) {
        const std::size_t k = 3, d = 4, n = 10;
        const Matrix x = oracle::random_matrix(d, n, rng);
        std::vector<int> labels(n);
        std::uniform_int_distribution<int> ld(0, 2);
        for (auto& l : labels) l = ld(rng);
        const Matrix theta = oracle::random_matrix(k, d, rng, 0.5);

        const Matrix proba = softmax_predict(theta, x);
        Matrix analytic(k, d);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < k; ++i) {
                const double resid =
                    proba(i, j) - (static_cast<int>(i) == labels[j] ? 1.0 : 0.0);
                for (std::size_t f = 0; f < d; ++f)
                    analytic(i, f) += resid * x(f, j) / static_cast<double>(n);
            }
        auto loss_at = [&](const std::vector<double>& flat) {
            Matrix th(k, d);
            std::copy(flat.begin(), flat.end(), th.data());
            const Matrix p = softmax_predict(th, x);
            double loss = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                loss -= std::log(p(static_cast<std::size_t>(labels[j]), j));
            return loss / static_cast<double>(n);
        };
        std::vector<double> flat(theta.data(), theta.data() + theta.size());
        const auto numeric = oracle::numeric_gradient(loss_at, flat);
        for (std::size_t i = 0; i < flat.size(); ++i) {
            const double a = analytic.data()[i];
            const double rel = std::fabs(a - numeric[i]) /
                               std::max({1.0, std::fabs(a), std::fabs(numeric[i])});
            worst = std::max(worst, rel);
        }
    }

    for (int trial = 0; trial < 2; ++trial) {
        const Matrix x = oracle::random_matrix(5, 8, rng);
        std::vector<int> labels(8);
        std::uniform_int_distribution<int> ld(0, 2);
        for (auto& l : labels) l = ld(rng);
        MlpNetwork net = make_mlp(5, {4}, 3, 31 + trial);
        const MlpGradients g = mlp_loss_and_gradients(net, x, labels);
        for (std::size_t layer = 0; layer < net.layers.size(); ++layer) {
            auto loss_w = [&](const std::vector<double>& w) {
                MlpNetwork probe = net;
                std::copy(w.begin(), w.end(), probe.layers[layer].w.data());
                return mlp_loss_and_gradients(probe, x, labels).loss;
            };
            std::vector<double> w0(net.layers[layer].w.data(),
                                   net.layers[layer].w.data() +
                                       net.layers[layer].w.size());
            const auto numeric = oracle::numeric_gradient(loss_w, w0);
            for (std::size_t i = 0; i < numeric.size(); ++i) {
                const double a = g.dw[layer].data()[i];
                const double rel = std::fabs(a - numeric[i]) /
                                   std::max({1.0, std::fabs(a), std::fabs(numeric[i])});
                worst = std::max(worst, rel);
            }
        }
    }
    if (worst > 1e-5) return fail("worst relative gradient error " + fmt(worst, 9));
    return pass("softmax and backprop gradients, worst relative error " + fmt(worst, 9));
}

// --------------------------------------------------------------- criterion 10

Outcome criterion_width_regression() {
    const std::array<double, 5> theta{3.0, 2.0, 1.0, 0.5, 0.25};
    std::vector<WidthRecord> recs;
    const std::size_t rs[] = {2, 4, 6, 8, 10, 12, 14, 16};
    const std::size_t ns[] = {30, 10, 50, 20, 44, 14, 38, 26};
    for (std::size_t i = 0; i < 8; ++i) {
        const double r = rs[i], n = ns[i];
        recs.push_back({rs[i], ns[i],
                        static_cast<std::size_t>(theta[0] + theta[1] * r + theta[2] * n +
                                                 theta[3] * r * r + theta[4] * n * n)});
    }
    const WidthRegressionFit fit = fit_width_regression(recs);
    double worst = 0.0;
    for (std::size_t i = 0; i < 5; ++i)
        worst = std::max(worst, std::fabs(fit.reg.theta[i] - theta[i]));
    if (worst > 1e-6) return fail("planted theta recovery error " + fmt(worst, 10));

    WidthRegression bupa;
    bupa.theta = {-1.2982e3, 5.0603, 1.0390, -0.0036, -9.0308e-5};
    bupa.alpha_fallback = 0.5;
    const long raw = predict_width_raw(bupa, 6, 200);
    if (raw >= 0) return fail("Bupa-style prediction came out non-negative");
    if (estimate_last_width(6, 200, bupa, 6) != 6)
        return fail("fallback branch returned the wrong width");

    const auto loo = leave_one_out_width(recs);
    if (loo.size() != recs.size()) return fail("leave-one-out count mismatch");
    for (const auto& e : loo)
        if (e.fallback) return fail("planted records should not route to the fallback");
    return pass("theta recovered to " + fmt(worst, 10) + ", negative prediction (" +
                std::to_string(raw) + ") routed to the fallback, LOO over " +
                std::to_string(loo.size()) + " records");
}

// --------------------------------------------------------------- criterion 11

Outcome criterion_determinism(DataContext& ctx) {
    Dataset train;
    std::string label;
    if (ctx.mnist_train) {
        train = head_subset(*ctx.mnist_train, 10000);
        label = "mnist-10k";
    } else {
        std::mt19937_64 rng(20240911);
        train.x = oracle::random_matrix(32, 600, rng);
        train.labels.resize(600);
        for (std::size_t i = 0; i < 600; ++i) train.labels[i] = i % 5;
        train.classes = 5;
        train.name = "synthetic";
        label = "synthetic (mnist unavailable)";
    }
    TrainOptions opt = mnist_protocol(HeadKind::shln);
    if (!ctx.mnist_train) {
        opt.stack.layer_cfg.width_rule = WidthRule::decay(0.8);
        opt.stack.min_width = 2;
    }
    opt.seed = 7;

    const TrainedModel a = train_pipeline(train, nullptr, opt);
    const TrainedModel b = train_pipeline(train, nullptr, opt);
    if (!reports_equal_ignoring_timing(a.report, b.report))
        return fail("reports differ outside the timing fields");

    const fs::path dir = fs::temp_directory_path();
    const fs::path pa = dir / "pilae_acc_det_a.bin";
    const fs::path pb = dir / "pilae_acc_det_b.bin";
    save_model(a.net, pa.string());
    save_model(b.net, pb.string());
    std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(fa)),
                              std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(fb)),
                              std::istreambuf_iterator<char>());
    if (bytes_a != bytes_b || bytes_a.empty()) {
        fs::remove(pa);
        fs::remove(pb);
        return fail("model files differ between identical runs");
    }

    const StackedNetwork loaded = load_model(pa.string());
    const Matrix probe = slice_cols(train.x, 0, std::min<std::size_t>(64, train.count()));
    const bool features_identical =
        transform(loaded, probe).bit_equal(transform(a.net, probe));
    fs::remove(pa);
    fs::remove(pb);
    if (!features_identical)
        return fail("save/load round trip changed the transform output");
    return pass(label + ": model bytes identical (" + std::to_string(bytes_a.size()) +
                " bytes), features bit-identical after reload");
}

}  // namespace

int main() {
    DataContext ctx;
    ctx.load();

    struct Entry {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Entry> entries = {
        {1, "pseudoinverse suite", [] { return criterion_pseudoinverse_suite(); }},
        {2, "ridge oracle", [] { return criterion_ridge_oracle(); }},
        {3, "architecture reproduction", [] { return criterion_width_chain(); }},
        {4, "mnist accuracy", [&] { return accuracy_criterion(ctx, false); }},
        {5, "fashion-mnist accuracy", [&] { return accuracy_criterion(ctx, true); }},
        {6, "rank-ratio diagnostic", [&] { return criterion_rank_ratios(ctx); }},
        {7, "speed direction", [&] { return criterion_speed_direction(ctx); }},
        {8, "scaling law", [&] { return criterion_scaling(ctx); }},
        {9, "gradient checks", [] { return criterion_gradient_checks(); }},
        {10, "width-regression pipeline", [] { return criterion_width_regression(); }},
        {11, "determinism & serialization", [&] { return criterion_determinism(ctx); }},
    };

    int failures = 0;
    for (const auto& e : entries) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out{Status::fail, "unhandled"};
        try {
            out = e.run();
        } catch (const std::exception& ex) {
            out = fail(std::string("exception: ") + ex.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char* tag = out.status == Status::pass ? "PASS"
                          : out.status == Status::fail ? "FAIL"
                                                       : "SKIP";
        std::printf("[%s] criterion %2d: %s: %s (%.1fs)\n", tag, e.id, e.name,
                    out.detail.c_str(), secs);
        std::fflush(stdout);
        if (out.status == Status::fail) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures ? 1 : 0;
}
