#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "trajlab/metrics.hpp"
#include "trajlab/models.hpp"
#include "trajlab/quadratic_variation.hpp"
#include "trajlab/rng.hpp"

using namespace trajlab;

TEST_CASE("poisson-exponential member: constants and the frozen formula value") {
    auto flat = gen_poisson_exp({100.0, 0.0, 0.0}, {}, 4);
    for (std::int64_t k = 0; k <= flat.steps(); ++k) REQUIRE(flat.value(k) == 100.0);
    REQUIRE(flat.jump_marks().empty());

    auto x = gen_poisson_exp({100.0, 0.1, -0.2}, {0.5}, 4);
    REQUIRE(x.value_at(1.0) == Catch::Approx(88.41367344605182).margin(1e-12));
    REQUIRE(x.jump_marks().size() == 1);
    REQUIRE(x.jump_marks()[0].index == 8);
    REQUIRE(x.left_value_at(0.5) == Catch::Approx(100.0 * std::exp(0.05)).margin(1e-12));
    REQUIRE(x.value_at(0.25) == Catch::Approx(100.0 * std::exp(0.025)).margin(1e-12));
    REQUIRE(x.class_info()->klass == "poisson_exp");

    auto three = gen_poisson_exp({100.0, 0.3, -0.1}, {0.25, 0.5, 0.75}, 4);
    REQUIRE(three.jump_marks().size() == 3);  // n(T) = number of supplied jumps
}

TEST_CASE("poisson-exponential member: validation and jump snapping") {
    REQUIRE_THROWS_AS(gen_poisson_exp({100.0, 0.1, -0.2}, {0.5, 0.5}, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_poisson_exp({100.0, 0.1, 0.2}, {0.5}, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_poisson_exp({100.0, 0.1, -1.0}, {0.5}, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_poisson_exp({-1.0, 0.1, -0.2}, {0.5}, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_poisson_exp({100.0, 0.1, -0.2}, {1.5}, 4), std::invalid_argument);

    // two times landing on the same node: the second moves right
    auto x = gen_poisson_exp({100.0, 0.1, -0.2}, {0.5, 0.500001}, 4);
    REQUIRE(x.jump_marks().size() == 2);
    REQUIRE(x.jump_marks()[0].index == 8);
    REQUIRE(x.jump_marks()[1].index == 9);
}

TEST_CASE("brownian driver: start, determinism, QV band") {
    auto z = gen_brownian_z(10, 42);
    REQUIRE(z[0] == 0.0);
    REQUIRE(z == gen_brownian_z(10, 42));
    REQUIRE(z != gen_brownian_z(10, 43));

    int inside = 0;
    for (int s = 0; s < 100; ++s) {
        const double qv = path_qv(gen_brownian_z(12, derive_seed(1, 10, std::uint64_t(s))), 12, 12);
        if (qv >= 0.9 && qv <= 1.1) ++inside;
    }
    REQUIRE(inside >= 95);
}

TEST_CASE("walk driver realizes unit QV exactly") {
    for (int level : {6, 10, 14}) {
        auto z = gen_walk_z(level, 7);
        REQUIRE(z[0] == 0.0);
        REQUIRE(path_qv(z, level, level) == Catch::Approx(1.0).margin(1e-12));
    }
    REQUIRE(gen_walk_z(8, 5) == gen_walk_z(8, 5));
}

TEST_CASE("jump-diffusion member: formula, marks, and class metadata") {
    // flat driver, one +10% jump at 0.5: the canonical step path
    std::vector<double> z0(17, 0.0);
    JumpDiffusionClassParams p{100.0, 0.2, FactorSet::finite({-0.2, 0.1})};
    auto x = gen_jump_diffusion_member(p, z0, {{0.5, 0.1}});
    REQUIRE(x.value_at(0.25) == 100.0);
    REQUIRE(x.value_at(0.75) == Catch::Approx(110.0).margin(1e-12));
    REQUIRE(x.jump_marks().size() == 1);
    REQUIRE(x.left_value_at(0.5) == 100.0);

    auto z = gen_brownian_z(8, 11);
    auto cont = gen_jump_diffusion_member(p, z, {});
    REQUIRE(cont.jump_marks().empty());
    for (std::int64_t k = 0; k <= cont.steps(); ++k)
        REQUIRE(cont.value(k) == 100.0 * std::exp(0.2 * z[std::size_t(k)]));

    REQUIRE_THROWS_WITH(gen_jump_diffusion_member(p, z, {{0.5, 0.3}}),
                        Catch::Matchers::ContainsSubstring("outside C"));
    REQUIRE_THROWS_AS(gen_jump_diffusion_member(p, std::vector<double>(16, 0.0), {}),
                      std::invalid_argument);  // 16 nodes is not 2^level + 1

    JumpDiffusionClassParams iv{100.0, 0.2, FactorSet::interval(-0.3, -0.05)};
    REQUIRE_NOTHROW(gen_jump_diffusion_member(iv, z, {{0.25, -0.1}}));
    REQUIRE_THROWS_AS(gen_jump_diffusion_member(iv, z, {{0.25, 0.1}}), std::invalid_argument);
}

TEST_CASE("jump-diffusion member round-trips through its own metadata") {
    JumpDiffusionClassParams p{100.0, 0.25, FactorSet::interval(-0.4, 0.4)};
    auto z = gen_brownian_z(9, 99);
    auto x = gen_jump_diffusion_member(p, z, {{0.25, 0.2}, {0.7, -0.15}});
    const auto& info = *x.class_info();
    REQUIRE(info.klass == "jump_diffusion");
    for (std::int64_t k = 0; k <= x.steps(); ++k) {
        double prod = 1.0;
        for (std::size_t j = 0; j < info.jump_times.size(); ++j)
            if (info.jump_times[j] <= x.time(k)) prod *= 1.0 + info.jump_factors[j];
        const double re = info.x0 * std::exp(info.sigma * info.driver[std::size_t(k)]) * prod;
        REQUIRE(std::abs(re - x.value(k)) <= 1e-12 * x.value(k));
    }
}

TEST_CASE("factor set admissibility helpers") {
    auto fin = FactorSet::finite({-0.2, 0.1});
    REQUIRE(fin.min_abs() == 0.1);
    REQUIRE_FALSE(fin.all_positive());
    REQUIRE(FactorSet::interval(-0.3, 0.2).min_abs() == 0.0);
    REQUIRE(FactorSet::interval(0.05, 0.1).min_abs() == 0.05);
    REQUIRE(FactorSet::interval(0.05, 0.1).all_positive());
    REQUIRE_THROWS_AS(FactorSet::finite({}), std::invalid_argument);
    REQUIRE_THROWS_AS(FactorSet::finite({-1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(FactorSet::interval(-1.2, 0.5), std::invalid_argument);
}

TEST_CASE("continuous member QV density tracks sigma^2 x^2 (walk driver)") {
    JumpDiffusionClassParams p{100.0, 0.2, FactorSet::finite({0.1})};
    for (int s = 0; s < 5; ++s) {
        auto x = gen_jump_diffusion_member(p, gen_walk_z(14, derive_seed(2, 20, std::uint64_t(s))), {});
        auto qv = quadratic_variation(x, 14);
        double worst = 0.0;
        for (std::int64_t k = 0; k < x.steps(); ++k) {
            const double want = 0.04 * x.value(k) * x.value(k);
            worst = std::max(worst, std::abs(qv.density[std::size_t(k)] / want - 1.0));
        }
        REQUIRE(worst <= 0.03);
    }
}

TEST_CASE("jump-diffusion process: no-jump limit and determinism") {
    JumpDiffusionProcessParams p;
    p.lambda = 0.0;
    auto x = sample_jump_diffusion_process(p, 8, 5);
    REQUIRE(x.jump_marks().empty());
    REQUIRE(x.value(0) == 100.0);
    for (std::int64_t k = 0; k <= x.steps(); ++k) REQUIRE(x.value(k) > 0.0);

    JumpDiffusionProcessParams q;
    q.lambda = 2.0;
    q.law = {{-0.1, 0.15}, {0.5, 0.5}};
    auto a = sample_jump_diffusion_process(q, 8, 77);
    REQUIRE(a.values() == sample_jump_diffusion_process(q, 8, 77).values());
    REQUIRE(a.values() != sample_jump_diffusion_process(q, 8, 78).values());
}

TEST_CASE("jump-diffusion process: Poisson count calibration") {
    JumpDiffusionProcessParams p;
    p.lambda = 2.0;
    p.law = {{0.1, -0.1}, {0.5, 0.5}};
    const int n = 10000;
    double total = 0.0;
    for (int s = 0; s < n; ++s)
        total += double(sample_jump_diffusion_process(p, 6, derive_seed(3, 30, std::uint64_t(s)))
                            .jump_marks()
                            .size());
    const double mean = total / n;
    const double se = std::sqrt(p.lambda / n);
    REQUIRE(std::abs(mean - p.lambda) <= 3.0 * se);
}

TEST_CASE("jump-diffusion process: compensated drift makes the mean flat") {
    JumpDiffusionProcessParams p;
    p.sigma = 0.2;
    p.lambda = 1.0;
    p.law = {{-0.1, 0.2}, {2.0, 1.0}};
    p.mu = martingale_drift(p.lambda, p.law);
    REQUIRE(p.mu == Catch::Approx(1.0 / 1.0 * -(2.0 * -0.1 + 1.0 * 0.2) / 3.0).margin(1e-15));

    const int n = 10000;
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < n; ++s) {
        const double zt =
            sample_jump_diffusion_process(p, 7, derive_seed(4, 40, std::uint64_t(s))).value_at(1.0);
        sum += zt;
        sumsq += zt * zt;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sumsq - n * mean * mean) / (n - 1));
    REQUIRE(std::abs(mean - 100.0) <= 3.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("regularized CIR: deterministic limit and prehistory blend") {
    HestonTypeParams p;
    p.xi = 1e-8;
    p.theta = 0.04;
    p.v0 = 0.04;
    p.kappa = 2.0;
    auto cir = sample_cir_regularized(p, 10, 9);
    for (double v : cir.v) REQUIRE(std::abs(v - 0.04) <= 1e-6);
    for (double s : cir.sigma) REQUIRE(std::abs(s - 0.2) <= 1e-6);
    REQUIRE(cir.sigma[0] == Catch::Approx(0.2).margin(1e-12));  // pure prehistory window

    HestonTypeParams bad;
    bad.kappa = 1.0;
    bad.theta = 0.02;
    bad.xi = 0.3;
    REQUIRE_THROWS_WITH(sample_cir_regularized(bad, 8, 1),
                        Catch::Matchers::ContainsSubstring("Feller"));
}

TEST_CASE("regularized CIR: long-run mean matches the closed formula") {
    HestonTypeParams p;
    p.kappa = 2.0;
    p.theta = 0.04;
    p.xi = 0.3;
    p.v0 = 0.09;
    const double want = p.theta + (p.v0 - p.theta) * std::exp(-p.kappa * 1.0);
    const int n = 1000;
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < n; ++s) {
        const double vt = sample_cir_regularized(p, 9, derive_seed(5, 50, std::uint64_t(s))).v.back();
        sum += vt;
        sumsq += vt * vt;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sumsq - n * mean * mean) / (n - 1));
    REQUIRE(std::abs(mean - want) <= 3.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("regularized CIR: sigma is positive with finite variation") {
    HestonTypeParams p;
    auto cir = sample_cir_regularized(p, 12, 31);
    for (double s : cir.sigma) REQUIRE(s > 0.0);
    const double tv = total_variation(cir.sigma);
    REQUIRE(std::isfinite(tv));
    REQUIRE(tv < 10.0);  // window averaging keeps sigma slow
}

TEST_CASE("heston-type sampler: start value, determinism, metadata") {
    HestonTypeParams p;
    auto z = sample_heston_type(p, 10, 3);
    REQUIRE(z.value(0) == 100.0);
    REQUIRE(z.values() == sample_heston_type(p, 10, 3).values());
    REQUIRE(z.class_info()->klass == "heston");
    REQUIRE(std::int64_t(z.class_info()->sigma_curve.size()) == z.node_count());

    // closed-form d_QV runs off the attached sigma curve
    auto w = sample_heston_type(p, 10, 4);
    REQUIRE(qv_metric(z, w, QvMode::closed_form, 10).distance > 0.0);
}

TEST_CASE("heston-type sampler: QV density law at the fine level (walk driver)") {
    HestonTypeParams p;
    p.driver = HestonDriver::walk;
    for (int s = 0; s < 20; ++s) {
        auto z = sample_heston_type(p, 14, derive_seed(6, 60, std::uint64_t(s)));
        const auto& sig = z.class_info()->sigma_curve;
        auto qv = quadratic_variation(z, 14);
        double worst = 0.0;
        for (std::int64_t k = 0; k < z.steps(); ++k) {
            const double want = z.value(k) * z.value(k) * sig[std::size_t(k)] * sig[std::size_t(k)];
            worst = std::max(worst, std::abs(qv.density[std::size_t(k)] / want - 1.0));
        }
        REQUIRE(worst <= 0.05);
    }
}

TEST_CASE("heston-type sampler: constant-vol degeneracy matches the class law") {
    HestonTypeParams p;
    p.xi = 1e-8;
    p.v0 = p.theta = 0.04;
    p.driver = HestonDriver::walk;
    auto z = sample_heston_type(p, 14, 8);
    auto qv = quadratic_variation(z, 14);
    double worst = 0.0;
    for (std::int64_t k = 0; k < z.steps(); ++k) {
        const double want = 0.04 * z.value(k) * z.value(k);
        worst = std::max(worst, std::abs(qv.density[std::size_t(k)] / want - 1.0));
    }
    REQUIRE(worst <= 0.03);
}

TEST_CASE("fbm sampler: range checks, start, determinism") {
    REQUIRE_THROWS_AS(sample_fbm(0.5, 8, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(sample_fbm(0.76, 8, 1), std::invalid_argument);
    REQUIRE_NOTHROW(sample_fbm(0.75, 8, 1));
    auto y = sample_fbm(0.6, 10, 5);
    REQUIRE(y[0] == 0.0);
    REQUIRE(y == sample_fbm(0.6, 10, 5));
    REQUIRE(y != sample_fbm(0.6, 10, 6));
}

TEST_CASE("fbm sampler: terminal variance matches the covariance law") {
    const double hurst = 0.6;
    const int n = 1000;
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < n; ++s) {
        const double yt = sample_fbm(hurst, 8, derive_seed(7, 70, std::uint64_t(s))).back();
        sum += yt * yt;
        sumsq += yt * yt * yt * yt;
    }
    const double mean = sum / n;  // estimates Var[Y_1] = 1
    const double sd = std::sqrt((sumsq - n * mean * mean) / (n - 1));
    REQUIRE(std::abs(mean - 1.0) <= 3.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("fbm sampler: level-14 QV sits at the N^(1-2H) scale, not below it") {
    // For H = 0.6 the expected level-14 QV is 2^(14 * (1 - 2H)/ ... ) =
    // 2^(-2.8) ~ 0.1436; the sampler must reproduce that scaling.
    const double expected = std::pow(2.0, 14.0 * (1.0 - 2.0 * 0.6));
    double mean = 0.0;
    const int reps = 5;
    for (int s = 0; s < reps; ++s)
        mean += path_qv(sample_fbm(0.6, 14, derive_seed(8, 80, std::uint64_t(s))), 14, 14);
    mean /= reps;
    REQUIRE(mean == Catch::Approx(expected).epsilon(0.15));
    REQUIRE(mean > 0.02);  // an honest fBm(0.6) cannot sit in the sub-0.02 regime at this depth
}

TEST_CASE("modified heston: degenerate Y reproduces the plain sampler bit for bit") {
    ModifiedHestonParams p;
    p.y = YSpec::none();
    auto a = sample_modified_heston(p, 10, 21);
    auto b = sample_heston_type(p.heston, 10, 21);
    REQUIRE(a.values() == b.values());
    REQUIRE(a.value(0) == 100.0);
}

TEST_CASE("modified heston: smooth null-QV perturbation leaves the log-QV density intact") {
    const int level = 14;
    const std::int64_t n = std::int64_t{1} << level;
    std::vector<double> y(std::size_t(n) + 1);
    for (std::int64_t k = 0; k <= n; ++k)
        y[std::size_t(k)] = 0.05 * std::sin(2.0 * std::acos(-1.0) * double(k) / double(n));

    ModifiedHestonParams p;
    p.heston.driver = HestonDriver::walk;
    p.y = YSpec::user(y);
    auto with = sample_modified_heston(p, level, 33);
    auto without = sample_heston_type(p.heston, level, 33);

    const double dt = 1.0 / double(n);
    double worst = 0.0;
    for (std::int64_t k = 0; k < n; ++k) {
        const double da = std::log(with.value(k + 1)) - std::log(with.value(k));
        const double db = std::log(without.value(k + 1)) - std::log(without.value(k));
        worst = std::max(worst, std::abs((da * da) / (db * db) - 1.0));
        (void)dt;
    }
    REQUIRE(worst <= 0.05);
}

TEST_CASE("modified heston: fbm add-on visibly perturbs the log-QV density") {
    ModifiedHestonParams p;
    p.heston.driver = HestonDriver::walk;
    p.y = YSpec::fractional(0.6, /*threshold=*/1.0);
    const int level = 12;
    auto with = sample_modified_heston(p, level, 44);
    auto without = sample_heston_type(p.heston, level, 44);
    double worst = 0.0;
    for (std::int64_t k = 0; k < with.steps(); ++k) {
        const double da = std::log(with.value(k + 1)) - std::log(with.value(k));
        const double db = std::log(without.value(k + 1)) - std::log(without.value(k));
        worst = std::max(worst, std::abs((da * da) / (db * db) - 1.0));
    }
    REQUIRE(worst > 0.05);  // unit-scale fBm(0.6) is not QV-invisible at this depth
}

TEST_CASE("modified heston: declared null-QV threshold is enforced") {
    ModifiedHestonParams p;
    p.y = YSpec::fractional(0.6);  // default threshold 0.02; fbm QV ~ 0.19 at level 12
    REQUIRE_THROWS_WITH(sample_modified_heston(p, 12, 1),
                        Catch::Matchers::ContainsSubstring("null-QV"));

    std::vector<double> bad(std::size_t(1 << 8) + 1, 0.0);
    bad[0] = 1.0;  // does not start at zero
    ModifiedHestonParams q;
    q.y = YSpec::user(bad);
    REQUIRE_THROWS_WITH(sample_modified_heston(q, 8, 1),
                        Catch::Matchers::ContainsSubstring("start at 0"));
}
