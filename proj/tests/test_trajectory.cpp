#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "trajlab/csv.hpp"
#include "trajlab/partition.hpp"
#include "trajlab/quadratic_variation.hpp"
#include "trajlab/rng.hpp"
#include "trajlab/trajectory.hpp"

using namespace trajlab;

namespace {

// Gaussian driver sampled directly in the test: the oracle side stays
// independent of the library's generators.
std::vector<double> gauss_path(int level, std::uint64_t seed) {
    const std::int64_t n = std::int64_t{1} << level;
    const double sd = std::sqrt(1.0 / double(n));
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal(0.0, sd);
    std::vector<double> z(std::size_t(n) + 1, 0.0);
    for (std::int64_t k = 1; k <= n; ++k) z[std::size_t(k)] = z[std::size_t(k - 1)] + normal(eng);
    return z;
}

Trajectory shifted_trajectory(const std::vector<double>& z, double base) {
    std::vector<double> vals(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) vals[i] = base + z[i];
    return make_trajectory(int(std::log2(double(z.size() - 1)) + 0.5), 1.0, vals);
}

}  // namespace

TEST_CASE("dyadic partitions nest bitwise and refine") {
    PartitionSequence part(1.0, 16);
    for (int l = 0; l < 16; ++l) {
        for (std::int64_t k = 0; k <= part.step_count(l); k += std::max<std::int64_t>(1, part.step_count(l) / 64))
            REQUIRE(part.time(l, k) == part.time(l + 1, 2 * k));
        REQUIRE(part.mesh(l + 1) == part.mesh(l) / 2.0);
    }
    REQUIRE(part.node_count(4) == 17);
    REQUIRE(part.time(4, 16) == 1.0);
    REQUIRE_THROWS_AS(PartitionSequence(0.0, 8), std::invalid_argument);
    REQUIRE_THROWS_AS(PartitionSequence(1.0, 40), std::invalid_argument);
}

TEST_CASE("dyadic_index accepts grid times only") {
    REQUIRE(dyadic_index(0.5, 4, 1.0) == 8);
    REQUIRE(dyadic_index(0.0, 4, 1.0) == 0);
    REQUIRE(dyadic_index(1.0, 4, 1.0) == 16);
    REQUIRE_THROWS_AS(dyadic_index(0.3, 4, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(dyadic_index(1.5, 4, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(dyadic_index(-0.25, 4, 1.0), std::invalid_argument);
}

TEST_CASE("make_trajectory validates its inputs with named errors") {
    PartitionSequence part(1.0, 3);
    auto grid = part.points(3);
    std::vector<double> vals(grid.size(), 100.0);

    REQUIRE_NOTHROW(make_trajectory(grid, vals));

    SECTION("grid and value sizes must agree") {
        auto bad = vals;
        bad.pop_back();
        REQUIRE_THROWS_WITH(make_trajectory(grid, bad), Catch::Matchers::ContainsSubstring("size mismatch"));
    }
    SECTION("node count must be dyadic") {
        std::vector<double> g{0.0, 0.5, 1.0};
        g.insert(g.begin() + 1, 0.25);  // 4 nodes, 3 steps
        REQUIRE_THROWS_WITH(make_trajectory(g, std::vector<double>(4, 1.0)),
                            Catch::Matchers::ContainsSubstring("2^level"));
    }
    SECTION("grid must be the dyadic grid") {
        auto g = grid;
        g[1] += 1e-3;
        REQUIRE_THROWS_WITH(make_trajectory(g, vals), Catch::Matchers::ContainsSubstring("dyadic"));
    }
    SECTION("values must be positive and finite") {
        auto v = vals;
        v[2] = 0.0;
        REQUIRE_THROWS_WITH(make_trajectory(grid, v), Catch::Matchers::ContainsSubstring("positive"));
        v[2] = std::nan("");
        REQUIRE_THROWS_AS(make_trajectory(grid, v), std::invalid_argument);
    }
    SECTION("marks must be in range, unique, nonzero") {
        auto v = vals;
        v[4] = 110.0;
        REQUIRE_THROWS_WITH(make_trajectory(grid, v, {{0, 100.0}}),
                            Catch::Matchers::ContainsSubstring("out of range"));
        REQUIRE_THROWS_WITH(make_trajectory(grid, v, {{4, 100.0}, {4, 100.0}}),
                            Catch::Matchers::ContainsSubstring("duplicate"));
        REQUIRE_THROWS_WITH(make_trajectory(grid, v, {{4, 110.0}}),
                            Catch::Matchers::ContainsSubstring("zero-size"));
        REQUIRE_THROWS_WITH(make_trajectory(grid, v, {{4, -1.0}}),
                            Catch::Matchers::ContainsSubstring("left value"));
        REQUIRE_NOTHROW(make_trajectory(grid, v, {{4, 100.0}}));
    }
}

TEST_CASE("left limits and jump observation") {
    // piecewise constant with one marked jump at t = 0.5 (index 4 of level 3)
    std::vector<double> vals{100, 100, 100, 100, 110, 110, 110, 110, 110};
    auto x = make_trajectory(3, 1.0, vals, {{4, 100.0}});

    REQUIRE(x.left_value(4) == 100.0);        // marked: the recorded left value
    REQUIRE(x.left_value(5) == 110.0);        // unmarked: previous node
    REQUIRE(x.left_value_at(0.5) == 100.0);
    REQUIRE(x.pre_jump_value(4) == 100.0);
    REQUIRE(x.pre_jump_value(5) == 110.0);    // unmarked: the node itself
    REQUIRE(x.jump_size(4) == 10.0);
    REQUIRE(x.jump_size(3) == 0.0);
    REQUIRE_THROWS_AS(x.left_value(0), std::invalid_argument);

    auto js = jumps(x);
    REQUIRE(js.size() == 1);
    REQUIRE(js[0].time == 0.5);
    REQUIRE(js[0].size == 10.0);
    REQUIRE(js[0].left_value == 100.0);
}

TEST_CASE("constant path has zero quadratic variation at every level") {
    auto x = make_trajectory(8, 1.0, std::vector<double>(257, 42.0));
    for (int l : {0, 3, 8}) {
        auto qv = quadratic_variation(x, l);
        REQUIRE(qv.total() == 0.0);
        REQUIRE(*std::max_element(qv.density.begin(), qv.density.end()) == 0.0);
    }
}

TEST_CASE("pure-jump path: QV is the sum of squared jump sizes, exactly") {
    // jumps +10 at t=0.25 and -5 at t=0.75 on a flat path
    std::vector<double> vals{100, 110, 110, 105, 105};
    auto x = make_trajectory(2, 1.0, vals, {{1, 100.0}, {3, 110.0}});

    for (int l : {0, 1, 2}) {
        auto qv = quadratic_variation(x, l);
        REQUIRE(qv.total() == 125.0);
        REQUIRE(qv.jump_total() == 125.0);
        REQUIRE(qv.continuous_total() == 0.0);
    }

    auto qv = quadratic_variation(x, 2);
    // cumulative curve steps exactly at the jumps
    REQUIRE(qv.cumulative[0] == 0.0);
    REQUIRE(qv.cumulative[1] == 100.0);
    REQUIRE(qv.cumulative[2] == 100.0);
    REQUIRE(qv.cumulative[3] == 125.0);
    REQUIRE(qv.cumulative[4] == 125.0);
}

TEST_CASE("jump additivity is an identity of the record") {
    std::mt19937_64 eng(7);
    std::normal_distribution<double> normal(0.0, 0.02);
    std::vector<double> vals(65, 100.0);
    for (std::size_t k = 1; k < vals.size(); ++k)
        vals[k] = vals[k - 1] * std::exp(normal(eng));
    vals[20] *= 1.10;
    vals[40] *= 0.93;
    auto x = make_trajectory(6, 1.0, vals,
                             {{20, vals[20] / 1.10}, {40, vals[40] / 0.93}});
    for (int l : {2, 4, 6}) {
        auto qv = quadratic_variation(x, l);
        for (std::size_t k = 0; k < qv.cumulative.size(); ++k)
            REQUIRE(qv.cumulative[k] == qv.cont_cumulative[k] + qv.jump_cumulative[k]);
        for (std::size_t k = 1; k < qv.cumulative.size(); ++k)
            REQUIRE(qv.cumulative[k] >= qv.cumulative[k - 1]);
        for (double d : qv.density) REQUIRE(d >= 0.0);
    }
}

TEST_CASE("Brownian-like path at level 16: QV(1) lands in [0.95, 1.05]") {
    // chi-square concentration: std of the dyadic QV sum is sqrt(2/2^16) ~ 0.6%,
    // so the band is ~9 standard deviations wide; require >= 95 of 100 seeds.
    int inside = 0;
    for (int s = 0; s < 100; ++s) {
        auto z = gauss_path(16, derive_seed(2024, stream::brownian, std::uint64_t(s)));
        auto x = shifted_trajectory(z, 100.0);
        const double q = quadratic_variation(x, 16).total();
        if (q >= 0.95 && q <= 1.05) ++inside;
    }
    REQUIRE(inside >= 95);
}

TEST_CASE("coarser readings of the same path wander further from t") {
    // |[z]_1 at level l - 1| shrinks in median as l grows
    std::vector<double> dev8, dev12, dev16;
    for (int s = 0; s < 50; ++s) {
        auto z = gauss_path(16, derive_seed(55, stream::brownian, std::uint64_t(s)));
        dev8.push_back(std::abs(path_qv(z, 16, 8) - 1.0));
        dev12.push_back(std::abs(path_qv(z, 16, 12) - 1.0));
        dev16.push_back(std::abs(path_qv(z, 16, 16) - 1.0));
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    const double m8 = median(dev8), m12 = median(dev12), m16 = median(dev16);
    REQUIRE(m8 > m12);
    REQUIRE(m12 > m16);
}

TEST_CASE("QV level must not exceed the path level") {
    auto x = make_trajectory(4, 1.0, std::vector<double>(17, 1.0));
    REQUIRE_THROWS_AS(quadratic_variation(x, 5), std::invalid_argument);
    REQUIRE_NOTHROW(quadratic_variation(x, 4));
}

TEST_CASE("trajectory CSV round-trips values and marks exactly") {
    std::vector<double> vals{100.0, 101.5, 99.875, 112.33333333333333, 112.33333333333333,
                             108.0, 108.0, 95.0, 97.25};
    auto x = make_trajectory(3, 1.0, vals, {{3, 99.875}, {7, 108.0}});

    const std::string csv = trajectory_to_csv(x);
    std::istringstream in(csv);
    auto y = trajectory_from_csv(in);

    REQUIRE(y.level() == x.level());
    REQUIRE(y.horizon() == x.horizon());
    REQUIRE(y.values() == x.values());
    REQUIRE(y.jump_marks().size() == 2);
    REQUIRE(y.jump_marks()[0].index == 3);
    REQUIRE(y.jump_marks()[0].left_value == 99.875);
    REQUIRE(y.jump_marks()[1].index == 7);

    // header line is mandatory
    std::istringstream headless("0,100,0,100\n");
    REQUIRE_THROWS_WITH(trajectory_from_csv(headless),
                        Catch::Matchers::ContainsSubstring("header"));
    // times print in fixed point
    REQUIRE(csv.substr(0, csv.find('\n')) == "t,value,is_jump,left_value");
    REQUIRE(csv.find("0.125,") != std::string::npos);
}

TEST_CASE("exact-QV walk reads back its quadratic variation at the walk level") {
    const int level = 12;
    const std::int64_t n = std::int64_t{1} << level;
    const double step = std::sqrt(1.0 / double(n));
    std::mt19937_64 eng(99);
    std::vector<double> z(std::size_t(n) + 1, 0.0);
    for (std::int64_t k = 1; k <= n; ++k)
        z[std::size_t(k)] = z[std::size_t(k - 1)] + (eng() & 1 ? step : -step);
    REQUIRE(path_qv(z, level, level) == Catch::Approx(1.0).epsilon(1e-12));
}
