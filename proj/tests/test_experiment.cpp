#include "segwise/error.hpp"
#include "segwise/experiment.hpp"
#include "segwise/random.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

using namespace segwise;

namespace {

ExperimentConfig iid(std::size_t reps = 20) {
    ExperimentConfig c;
    c.reps = reps;
    c.ns = {100, 300};
    c.seed = 9;
    return c;
}

struct ThreadsEnv {
    explicit ThreadsEnv(const char* v) { setenv("SEGWISE_THREADS", v, 1); }
    ~ThreadsEnv() { unsetenv("SEGWISE_THREADS"); }
};

} // namespace

TEST_CASE("change-point positions") {
    CHECK(change_points_for({0.2, 0.8}, 100) == std::vector<std::size_t>{20, 80});
    CHECK(change_points_for({0.1, 0.3}, 1000) == std::vector<std::size_t>{100, 300});
    CHECK(change_points_for({0.3}, 10) == std::vector<std::size_t>{3});
}

TEST_CASE("i.i.d. generator") {
    SUBCASE("zero noise is piecewise constant") {
        auto c = iid();
        c.noise_sd = 0.0;
        Rng rng = make_rng(1);
        const auto g = gen_iid_means(c, 100, rng);
        CHECK(g.change_points == std::vector<std::size_t>{20, 80});
        for (std::size_t i = 0; i < 100; ++i) {
            CHECK(g.series(i, 0) == (i < 20 ? -1.0 : i < 80 ? 0.0 : 1.0));
        }
    }
    SUBCASE("multivariate means") {
        auto c = iid();
        c.means = {{0, 1}, {2, 3}, {4, 5}};
        c.noise_sd = 0.0;
        Rng rng = make_rng(1);
        const auto g = gen_iid_means(c, 10, rng);
        CHECK(g.series.dims() == 2);
        CHECK(g.series(9, 1) == 5.0);
    }
    SUBCASE("deterministic per seed") {
        Rng a = make_rng(5), b = make_rng(5), c = make_rng(6);
        const auto x = gen_iid_means(iid(), 300, a).series;
        CHECK(x == gen_iid_means(iid(), 300, b).series);
        CHECK_FALSE(x == gen_iid_means(iid(), 300, c).series);
    }
}

TEST_CASE("segment-wise AR generator") {
    ExperimentConfig c;
    c.generator = Generator::segmentwise_ar;
    c.fractions = {0.1, 0.3};
    c.filters = {{0.0, 0.8, -0.3}, {0.0, -0.5, 0.1}, {0.0, 0.5, -0.5}};
    SUBCASE("true change points and filters") {
        Rng rng = make_rng(2);
        const auto g = generate(c, 1000, rng);
        CHECK(g.change_points == std::vector<std::size_t>{100, 300});
        CHECK(g.filters == c.filters);
        CHECK(g.series.size() == 1000);
    }
    SUBCASE("one segment equals the plain simulator") {
        ExperimentConfig one = c;
        one.fractions = {};
        one.filters = {{0.5, 0.6, -0.2}};
        Rng a = make_rng(3), b = make_rng(3);
        ARFilter f;
        f.order = 2;
        f.coeffs = one.filters.front();
        CHECK(generate(one, 400, a).series == simulate_ar(f, 1.0, 400, default_burn_in(2), b));
    }
    SUBCASE("lags carry across boundaries") {
        ExperimentConfig z = c;
        z.noise_sd = 0.0;
        z.burn_in = 0;
        z.filters = {{1.0, 0.0}, {0.0, 1.0}};
        z.fractions = {0.5};
        Rng rng = make_rng(4);
        const auto s = generate(z, 10, rng).series;
        // second segment repeats the last value of the first
        for (std::size_t i = 5; i < 10; ++i) {
            CHECK(s(i, 0) == 1.0);
        }
    }
    SUBCASE("random stable filters per draw") {
        ExperimentConfig r = c;
        r.filters.clear();
        Rng rng = make_rng(5);
        const auto a = generate(r, 500, rng);
        const auto b = generate(r, 500, rng);
        REQUIRE(a.filters.size() == 3);
        CHECK(a.filters != b.filters);
        for (const auto& f : a.filters) {
            CHECK(is_stable(std::span<const double>(f).subspan(1)));
        }
    }
    SUBCASE("unstable filters warn and proceed") {
        ExperimentConfig u = c;
        u.filters = {{0.0, 1.2}, {0.0, 0.5}, {0.0, 0.5}};
        std::ostringstream captured;
        auto* old = std::cerr.rdbuf(captured.rdbuf());
        Rng rng = make_rng(6);
        const auto g = generate(u, 100, rng);
        std::cerr.rdbuf(old);
        CHECK(captured.str().find("not stable") != std::string::npos);
        CHECK(g.series.size() == 100);
    }
}

TEST_CASE("configuration validation") {
    auto c = iid();
    c.fractions = {0.5, 0.4};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = iid();
    c.fractions = {0.0, 0.5};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = iid();
    c.reps = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = iid();
    c.means = {{0}, {1}};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = iid();
    c.generator = Generator::segmentwise_ar;
    c.filters = {{0, 0.5}, {0, 0.1}};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = iid();
    c.fractions = {0.001, 0.002};
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(generate(c, 100, rng), ConfigError);
}

TEST_CASE("experiment reports") {
    SUBCASE("percentages sum to 100 and summaries are consistent") {
        const auto rep = run_experiment(iid());
        REQUIRE(rep.per_n.size() == 2);
        for (const auto& s : rep.per_n) {
            CHECK(s.f_under + s.f_exact + s.f_over == doctest::Approx(100.0));
            CHECK(s.sd_count >= 0.0);
            CHECK(s.counts.size() == 20);
            double mean = 0.0;
            for (const auto k : s.counts) {
                mean += static_cast<double>(k);
            }
            CHECK(s.mean_count == doctest::Approx(mean / 20.0));
            CHECK(s.hit_rate >= 0.0);
            CHECK(s.hit_rate <= 1.0);
            CHECK_FALSE(s.median_ms.has_value());
        }
    }
    SUBCASE("one rep reproduces the single run") {
        auto c = iid(1);
        c.ns = {300};
        const auto rep = run_experiment(c);
        Rng rng = make_rng(c.seed, 0);
        const auto data = generate(c, 300, rng);
        const auto out = run_method(c, data);
        CHECK(rep.per_n[0].counts == std::vector<std::size_t>{out.count});
        CHECK(rep.per_n[0].mean_count == static_cast<double>(out.count));
        CHECK(rep.per_n[0].sd_count == 0.0);
        CHECK(rep.per_n[0].hit_rate == doctest::Approx(static_cast<double>(out.hits) / 2.0));
    }
    SUBCASE("byte-identical for a fixed seed and any thread count") {
        std::string a, b;
        {
            ThreadsEnv env("1");
            a = to_json(run_experiment(iid())).dump();
        }
        {
            ThreadsEnv env("3");
            b = to_json(run_experiment(iid())).dump();
        }
        CHECK(a == b);
        auto other = iid();
        other.seed = 10;
        CHECK(to_json(run_experiment(other)).dump() != a);
    }
    SUBCASE("JSON layout") {
        const auto j = to_json(run_experiment(iid(3)));
        CHECK(j.contains("config_echo"));
        CHECK(j["config_echo"]["seed"] == 9);
        for (const char* key : {"n", "f_under", "f_exact", "f_over", "mean_count", "sd_count", "hit_rate",
                                "all_covered_rate", "median_ms"}) {
            CHECK(j["per_n"][0].contains(key));
        }
    }
    SUBCASE("timing records medians") {
        auto c = iid(3);
        c.timing = true;
        const auto rep = run_experiment(c);
        CHECK(rep.per_n[0].median_ms.has_value());
        CHECK(*rep.per_n[0].median_ms >= 0.0);
    }
    SUBCASE("multi-window method reports ranges") {
        ExperimentConfig c;
        c.generator = Generator::segmentwise_ar;
        c.fractions = {0.1, 0.3};
        c.filters = {{0.0, 0.8, -0.3}, {0.0, -0.5, 0.1}, {0.0, 0.5, -0.5}};
        c.method = Method::mw;
        c.m_max = 5;
        c.penalty.multiplier = 1.0;
        c.windows = {100, 50, 20, 10};
        c.ns = {1000};
        c.reps = 10;
        c.seed = 3;
        const auto rep = run_experiment(c);
        CHECK(rep.per_n[0].all_covered_rate >= 0.6);
        CHECK(rep.per_n[0].mean_count >= 1.0);
    }
}

TEST_CASE("exact-detection frequency grows with N") {
    ExperimentConfig c;
    c.ns = {100, 300, 1000};
    c.reps = 100;
    c.seed = 4;
    c.penalty.rescale_by_variance = false;
    const auto rep = run_experiment(c);
    for (std::size_t i = 1; i < rep.per_n.size(); ++i) {
        CHECK(rep.per_n[i].f_exact >= rep.per_n[i - 1].f_exact - 5.0);
    }
}

TEST_CASE("windows and runtime helpers") {
    ExperimentConfig c;
    CHECK(windows_for(c, 1000) == std::vector<std::size_t>{100, 50, 20, 10});
    c.windows = {60, 30};
    CHECK(windows_for(c, 1000) == std::vector<std::size_t>{60, 30});

    CHECK(loglog_slope({10, 100, 1000}, {3, 300, 30000}) == doctest::Approx(2.0));
    CHECK(loglog_slope({1, 2, 4}, {5, 5, 5}) == doctest::Approx(0.0));

    BenchmarkConfig b;
    b.base.generator = Generator::segmentwise_ar;
    b.base.seed = 2;
    b.base.penalty.multiplier = 1.0;
    b.ns = {300, 600};
    b.reps = 3;
    b.warmup = false;
    const auto t = benchmark_runtime(b);
    CHECK(t.rows.size() == 4);
    CHECK(t.slopes.size() == 2);
    CHECK(t.median_ms(Method::bs, 600) > 0.0);
    const auto j = to_json(t);
    CHECK(j.contains("timings"));
    CHECK(j.contains("loglog_slopes"));
}
