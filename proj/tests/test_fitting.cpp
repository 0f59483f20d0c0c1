#include <qtokens/error.hpp>
#include <qtokens/fitting.hpp>
#include <qtokens/fixtures.hpp>
#include <qtokens/hash.hpp>
#include <qtokens/stats.hpp>

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace qtokens;

namespace {

ScalingConstants generator() {
    ScalingConstants k;
    k.e = 0.8;
    k.a = -0.9;
    k.alpha = 0.3;
    k.b = -20.0;
    k.beta = 0.35;
    k.c1 = -5.0;
    k.c2 = 3.0;
    return k;
}

// Points spread over sizes, token counts and quality values; accuracy is the
// exact model output plus optional Gaussian noise.
std::vector<ExperimentPoint> synthetic(const ScalingConstants& k, std::size_t n, double sigma, std::uint64_t seed) {
    SplitMix rng(seed);
    const double sizes[] = {25, 50, 75, 125, 350, 500, 1500};
    std::vector<ExperimentPoint> pts;
    for (std::size_t i = 0; i < n; ++i) {
        ExperimentPoint p;
        p.n_millions = sizes[i % 7];
        p.d_tokens = 1e9 * (0.5 + 10.0 * rng.uniform());
        p.dr = 0.25 + 0.15 * rng.uniform();
        p.s = 0.02 + 0.12 * rng.uniform();
        double noise = 0.0;
        if (sigma > 0.0) {
            const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
            noise = sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        }
        p.accuracy = predict_unclamped(p.inputs(), k) + noise;
        p.label = "synthetic";
        pts.push_back(p);
    }
    return pts;
}

ScalingConstants perturbed(const ScalingConstants& k, double amount, std::uint64_t seed) {
    SplitMix rng(seed);
    auto v = k.to_vector();
    for (auto& x : v) x *= 1.0 + amount * (2.0 * rng.uniform() - 1.0);
    return ScalingConstants::from_vector(v, k.form);
}

double sse_at(const std::vector<ExperimentPoint>& pts, const ScalingConstants& k, bool clamp = false) {
    double s = 0.0;
    for (const auto& p : pts) {
        const double r = fit_prediction(p, k, clamp) - p.accuracy;
        s += r * r;
    }
    return s;
}

}  // namespace

TEST_CASE("pearson") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    CHECK(pearson(x, x) == doctest::Approx(1.0));
    std::vector<double> neg;
    for (double v : x) neg.push_back(-2 * v + 3);
    CHECK(pearson(x, neg) == doctest::Approx(-1.0));
    // sxy = 6, sxx = 10, syy = 6.
    CHECK(pearson(x, std::vector<double>{2, 4, 5, 4, 5}) == doctest::Approx(6.0 / std::sqrt(60.0)).epsilon(1e-14));
    CHECK_THROWS_WITH_AS(pearson(x, std::vector<double>(5, 1.0)), "undefined correlation: zero variance", Error);
    CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), Error);
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), Error);
}

TEST_CASE("r_squared") {
    const std::vector<double> obs{2, 4, 5, 4, 5};
    CHECK(r_squared(obs, obs) == 1.0);
    CHECK(r_squared(std::vector<double>(5, 4.0), obs) == doctest::Approx(0.0));
    // SSE = 4, SStot = 6.
    CHECK(r_squared(std::vector<double>{2, 3, 4, 5, 6}, obs) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK_THROWS_AS(r_squared(obs, std::vector<double>(5, 2.0)), Error);
}

TEST_CASE("r_squared equals pearson squared for the least-squares line") {
    SplitMix rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + rng.below(50);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform();
            y[i] = 2.0 * x[i] + rng.uniform();
        }
        // Predictions as the regression of y on x: an affine function of x.
        const double mx = mean(x), my = mean(y);
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
        }
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = my + sxy / sxx * (x[i] - mx);
        CHECK(r_squared(p, y) == doctest::Approx(std::pow(pearson(x, y), 2)).epsilon(1e-10));
        CHECK(r_squared(y, y) == 1.0);
    }
}

TEST_CASE("mean and stddev") {
    CHECK(mean(std::vector<double>{1, 2, 3, 6}) == 3.0);
    CHECK(sample_stddev(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(sample_stddev(std::vector<double>{5}) == 0.0);
}

TEST_CASE("fixture join") {
    const auto pts = fixtures().points();
    REQUIRE(pts.size() == 207);
    const auto& p63 = pts[62];
    CHECK(p63.n_millions == 25);
    CHECK(p63.d_tokens == 10993147242.0);
    CHECK(p63.dr == 0.36370);
    CHECK(p63.s == 0.02635);
    CHECK(p63.accuracy == doctest::Approx(0.3827).epsilon(1e-15));
    CHECK(p63.label == "Random");
    CHECK(p63.fraction_pct == 100);
    const auto& p207 = pts[206];
    CHECK(p207.n_millions == 1500);
    CHECK(p207.d_tokens == 2507011688.0);
    CHECK(p207.dr == 0.28578);
    CHECK(p207.s == 0.11902);
    CHECK(p207.accuracy == doctest::Approx(0.4527).epsilon(1e-15));

    auto results = fixtures().results_table;
    results[3].label = "Mystery";
    try {
        join_fixture_tables(results, fixtures().quality_table);
        FAIL("expected a join error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("(Mystery, ") != std::string::npos);
    }
    auto quality = fixtures().quality_table;
    quality.push_back(quality.front());
    CHECK_THROWS_AS(join_fixture_tables(fixtures().results_table, quality), Error);
}

TEST_CASE("experiments CSV") {
    std::ostringstream out;
    const auto pts = fixtures().points();
    write_experiments_csv(pts, out);
    std::istringstream in(out.str());
    const auto back = read_experiments_csv(in);
    REQUIRE(back.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(back[i].n_millions == pts[i].n_millions);
        CHECK(back[i].d_tokens == pts[i].d_tokens);
        CHECK(back[i].dr == pts[i].dr);
        CHECK(back[i].s == pts[i].s);
        CHECK(back[i].accuracy == doctest::Approx(pts[i].accuracy).epsilon(1e-15));
        CHECK(back[i].label == pts[i].label);
        CHECK(back[i].train_loss == pts[i].train_loss);
    }

    std::istringstream quality_only(
        "model_size_m,data_label,fraction_pct,n_tokens,train_loss,eval_loss,accuracy_pct\n"
        "25,Random,100,10993147242,,,38.27\n");
    const auto joined = read_experiments_csv(quality_only, &fixtures().quality_table);
    REQUIRE(joined.size() == 1);
    CHECK(joined[0].dr == 0.36370);
    CHECK_FALSE(joined[0].train_loss.has_value());

    std::istringstream missing(
        "model_size_m,data_label,fraction_pct,n_tokens,train_loss,eval_loss,accuracy_pct\n"
        "25,Random,100,10993147242,,,38.27\n");
    CHECK_THROWS_AS(read_experiments_csv(missing), Error);

    std::istringstream bad(
        "model_size_m,data_label,fraction_pct,n_tokens,train_loss,eval_loss,accuracy_pct,diversity,syntheticity\n"
        "25,Random,100,10993147242,,,38.27,0.3,0.02\n"
        "25,Random,100,ten,,,38.27,0.3,0.02\n");
    try {
        read_experiments_csv(bad);
        FAIL("expected a row error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    std::istringstream out_of_range(
        "model_size_m,data_label,fraction_pct,n_tokens,train_loss,eval_loss,accuracy_pct,diversity,syntheticity\n"
        "25,Random,100,10993147242,,,138.27,0.3,0.02\n");
    CHECK_THROWS_AS(read_experiments_csv(out_of_range), Error);
}

TEST_CASE("exact recovery from noiseless synthetic data") {
    const auto truth = generator();
    const auto pts = synthetic(truth, 60, 0.0, 1);
    for (const auto& p : pts) {
        CHECK(p.accuracy > 0.05);
        CHECK(p.accuracy < 0.95);
    }
    const auto rep = fit_constants(pts, perturbed(truth, 0.1, 2));
    CHECK(rep.sse < 1e-12);
    const auto got = rep.constants.to_vector(), want = truth.to_vector();
    for (std::size_t j = 0; j < want.size(); ++j) {
        INFO(ScalingConstants::kNames[j]);
        CHECK(std::abs(got[j] - want[j]) <= 1e-4 * std::abs(want[j]));
    }
    CHECK(rep.converged);
    CHECK(rep.r2 == doctest::Approx(1.0));
}

TEST_CASE("fit contract") {
    const auto pts = synthetic(generator(), 7, 0.0, 3);
    CHECK_THROWS_AS(fit_constants(pts, generator()), Error);
    auto bad = synthetic(generator(), 10, 0.0, 3);
    bad[2].dr = 0.0;
    CHECK_THROWS_AS(fit_constants(bad, generator()), Error);
    auto nan_init = generator();
    nan_init.b = NAN;
    CHECK_THROWS_AS(fit_constants(synthetic(generator(), 10, 0.0, 3), nan_init), Error);
}

TEST_CASE("fit never returns a worse point than its start") {
    const auto all = fixtures().points();
    SplitMix rng(55);
    for (int trial = 0; trial < 12; ++trial) {
        std::vector<ExperimentPoint> pts;
        for (const auto& p : all)
            if (rng.below(3) == 0) pts.push_back(p);
        FitOptions opts;
        opts.form = static_cast<DqForm>(trial % 4);
        opts.max_evals = 50 + static_cast<int>(rng.below(400));
        opts.damping = trial % 2 ? Damping::multiplicative : Damping::trust_region;
        opts.clamp_during_fit = trial % 3 == 0;
        auto init = perturbed(ScalingConstants::published(), 0.2, trial);
        init.form = opts.form;
        const double start = sse_at(pts, init, opts.clamp_during_fit);
        const auto rep = fit_constants(pts, init, opts);
        CHECK(rep.sse <= start);
        CHECK(rep.initial_sse == doctest::Approx(start));
        CHECK(rep.n_evals <= opts.max_evals);
        CHECK(rep.n_points == pts.size());
        double s = 0.0;
        for (double r : rep.residuals) s += r * r;
        CHECK(rep.sse == doctest::Approx(s));
    }
}

TEST_CASE("fit is deterministic and serializes") {
    FitOptions opts;
    opts.max_evals = 400;
    const auto a = fit_constants(fixtures().points(), ScalingConstants::fit_initial_guess(), opts);
    const auto b = fit_constants(fixtures().points(), ScalingConstants::fit_initial_guess(), opts);
    CHECK(a.to_json() == b.to_json());

    const auto back = FitReport::from_json(a.to_json());
    CHECK(back.constants.to_vector() == a.constants.to_vector());
    CHECK(back.points.size() == a.points.size());
    CHECK(back.r2 == a.r2);
    CHECK(back.to_json() == a.to_json());
    CHECK(ScalingConstants::from_json(a.to_json()).to_vector() == a.constants.to_vector());
    CHECK_THROWS_AS(FitReport::from_json("{}"), Error);
}

TEST_CASE("fixture fit reaches the reported correlation") {
    const auto rep = fit_constants(fixtures().points(), ScalingConstants::fit_initial_guess());
    REQUIRE(rep.pearson.has_value());
    CHECK(*rep.pearson >= 0.80);
    CHECK(rep.r2 > 0.70);
    CHECK(rep.n_evals <= 2000);
}

TEST_CASE("restarts only ever improve the fit") {
    const auto pts = synthetic(generator(), 40, 0.01, 9);
    FitOptions one;
    one.max_evals = 300;
    FitOptions many = one;
    many.restarts = 3;
    const auto init = perturbed(generator(), 0.5, 4);
    CHECK(fit_constants(pts, init, many).sse <= fit_constants(pts, init, one).sse);
}

TEST_CASE("bootstrap indices") {
    CHECK(bootstrap_indices(50, 7, 3) == bootstrap_indices(50, 7, 3));
    CHECK(bootstrap_indices(50, 7, 3) != bootstrap_indices(50, 7, 4));
    CHECK(bootstrap_indices(50, 7, 3) != bootstrap_indices(50, 8, 3));
    for (auto i : bootstrap_indices(50, 1, 0)) CHECK(i < 50);
}

TEST_CASE("bootstrap on exact data has no spread") {
    const auto truth = generator();
    const auto pts = synthetic(truth, 40, 0.0, 5);
    const auto base = fit_constants(pts, truth);
    const auto res = bootstrap_se(pts, base, 10, 42);
    CHECK(res.successes == 10);
    for (double se : res.se) CHECK(se < 1e-6);
    CHECK_THROWS_AS(bootstrap_se(pts, base, 0, 42), Error);
    CHECK_THROWS_AS(bootstrap_se(pts, base, 1, 42), Error);
}

TEST_CASE("bootstrap is deterministic and thread independent") {
    const auto pts = synthetic(generator(), 40, 0.01, 6);
    const auto base = fit_constants(pts, generator());
    const auto a = bootstrap_se(pts, base, 12, 42, {}, 1);
    const auto b = bootstrap_se(pts, base, 12, 42, {}, 1);
    const auto c = bootstrap_se(pts, base, 12, 42, {}, 3);
    CHECK(a.se == b.se);
    CHECK(a.se == c.se);
    CHECK(a.se != bootstrap_se(pts, base, 12, 43, {}, 1).se);
}

TEST_CASE("bootstrap standard errors shrink with more data") {
    // Quadrupling the points should roughly halve every standard error.
    const auto truth = generator();
    const auto small = synthetic(truth, 100, 0.0005, 10);
    const auto large = synthetic(truth, 400, 0.0005, 11);
    const auto se_small = bootstrap_se(small, fit_constants(small, truth), 60, 42).se;
    const auto se_large = bootstrap_se(large, fit_constants(large, truth), 60, 42).se;
    for (std::size_t j = 0; j < se_small.size(); ++j) {
        INFO(ScalingConstants::kNames[j]);
        CHECK(se_small[j] > 0.0);
        CHECK(se_large[j] > 0.0);
        const double ratio = se_small[j] / se_large[j];
        CHECK(ratio > 1.2);
        CHECK(ratio < 3.5);
    }
}
