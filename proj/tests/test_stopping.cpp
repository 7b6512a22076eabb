#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "trajlab/rng.hpp"
#include "trajlab/stopping.hpp"
#include "trajlab/trajectory.hpp"

using namespace trajlab;

namespace {

Trajectory single_jump_path(int level = 4) {
    const std::int64_t n = std::int64_t{1} << level;
    std::vector<double> vals(std::size_t(n) + 1);
    const std::int64_t j = n / 2;
    for (std::int64_t k = 0; k <= n; ++k) vals[std::size_t(k)] = k < j ? 100.0 : 110.0;
    return make_trajectory(level, 1.0, vals, {{j, 100.0}});
}

Trajectory two_jump_path() {
    // jumps at t = 0.25 (100 -> 104) and t = 0.75 (104 -> 96)
    std::vector<double> vals(17, 100.0);
    for (std::size_t k = 4; k < 17; ++k) vals[k] = 104.0;
    for (std::size_t k = 12; k < 17; ++k) vals[k] = 96.0;
    return make_trajectory(4, 1.0, vals, {{4, 100.0}, {12, 104.0}});
}

// Exponential Gaussian walk with a few multiplicative jumps spliced in.
Trajectory jumpy_path(int level, std::uint64_t seed) {
    const std::int64_t n = std::int64_t{1} << level;
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / double(n)));
    std::vector<double> vals(std::size_t(n) + 1);
    double z = 0.0;
    vals[0] = 100.0;
    for (std::int64_t k = 1; k <= n; ++k) {
        z += normal(eng);
        vals[std::size_t(k)] = 100.0 * std::exp(0.25 * z);
    }
    std::uniform_int_distribution<int> njumps(0, 3);
    std::uniform_int_distribution<std::int64_t> node(1, n);
    std::uniform_real_distribution<double> mag(0.05, 0.2);
    std::bernoulli_distribution sign(0.5);
    std::vector<std::int64_t> idx;
    for (int j = njumps(eng); j > 0; --j) idx.push_back(node(eng));
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    std::vector<JumpMark> marks;
    for (std::int64_t m : idx) {
        const double a = (sign(eng) ? 1.0 : -1.0) * mag(eng);
        marks.push_back({m, vals[std::size_t(m)]});
        for (std::int64_t k = m; k <= n; ++k) vals[std::size_t(k)] *= 1.0 + a;
    }
    return make_trajectory(level, 1.0, vals, marks);
}

// y agrees with x on nodes [0, s] and sits 7.5 higher afterwards.
Trajectory splice_after(const Trajectory& x, std::int64_t s) {
    std::vector<double> vals = x.values();
    for (std::int64_t k = s + 1; k <= x.steps(); ++k) vals[std::size_t(k)] += 7.5;
    std::vector<JumpMark> marks;
    for (const JumpMark& m : x.jump_marks())
        marks.push_back({m.index, m.index <= s ? m.left_value : m.left_value + 7.5});
    return make_trajectory(x.level(), x.horizon(), vals, marks);
}

}  // namespace

TEST_CASE("constant stopping time") {
    auto x = single_jump_path();
    REQUIRE(constant_time(0.0)(x) == 0.0);
    REQUIRE(constant_time(1.0)(x) == 1.0);
    REQUIRE(constant_time(0.25)(x) == 0.25);
    REQUIRE_THROWS_AS(constant_time(-0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(constant_time(1.5)(x), std::invalid_argument);
}

TEST_CASE("hitting time of a closed set") {
    auto x = single_jump_path();
    const double inf = std::numeric_limits<double>::infinity();
    REQUIRE(hitting_time_closed(ClosedSet({{100.0, inf}}))(x) == 0.0);
    REQUIRE(hitting_time_closed(ClosedSet({{120.0, inf}}))(x) == 1.0);
    REQUIRE(hitting_time_closed(ClosedSet({{105.0, inf}}))(x) == 0.5);
    REQUIRE(hitting_time_closed(ClosedSet({{-inf, 90.0}}))(x) == 1.0);
    REQUIRE(hitting_time_closed(ClosedSet({{90.0, 95.0}, {110.0, 115.0}}))(x) == 0.5);
    REQUIRE_THROWS_AS(ClosedSet({}), std::invalid_argument);
    REQUIRE_THROWS_AS(ClosedSet({{2.0, 1.0}}), std::invalid_argument);
}

TEST_CASE("level crossing") {
    auto x = single_jump_path();
    REQUIRE(level_crossing(100.0)(x) == 0.0);
    REQUIRE(level_crossing(120.0)(x) == 1.0);
    REQUIRE(level_crossing(105.0)(x) == 0.5);
}

TEST_CASE("jump magnitude time uses a strict threshold") {
    auto x = single_jump_path();
    auto cont = make_trajectory(2, 1.0, {100.0, 101.0, 102.0, 103.0, 104.0});
    REQUIRE(jump_magnitude_time(5.0)(cont) == 1.0);
    REQUIRE(jump_magnitude_time(5.0)(x) == 0.5);
    REQUIRE(jump_magnitude_time(15.0)(x) == 1.0);
    REQUIRE(jump_magnitude_time(10.0)(x) == 1.0);  // |jump| = 10 is not > 10
    REQUIRE_THROWS_AS(jump_magnitude_time(0.0), std::invalid_argument);
}

TEST_CASE("jump count time") {
    auto x = single_jump_path();
    auto xx = two_jump_path();
    auto cont = make_trajectory(2, 1.0, {100.0, 101.0, 102.0, 103.0, 104.0});
    REQUIRE(jump_count_time(1)(cont) == 1.0);
    REQUIRE(jump_count_time(1)(x) == 0.5);
    REQUIRE(jump_count_time(2)(x) == 1.0);
    REQUIRE(jump_count_time(1)(xx) == 0.25);
    REQUIRE(jump_count_time(2)(xx) == 0.75);
    REQUIRE(jump_count_time(3)(xx) == 1.0);
    REQUIRE_THROWS_AS(jump_count_time(0), std::invalid_argument);
}

TEST_CASE("sum, min and sup combinators") {
    auto x = single_jump_path();
    REQUIRE(sum_capped(constant_time(0.6), constant_time(0.6))(x) == 1.0);
    REQUIRE(sum_capped(constant_time(0.25), constant_time(0.25))(x) == 0.5);
    REQUIRE(min_of({constant_time(0.3), constant_time(0.7)})(x) == 0.3);
    REQUIRE(sup_of({constant_time(0.25), constant_time(0.75), constant_time(0.5)})(x) == 0.75);
    REQUIRE_THROWS_AS(min_of({}), std::invalid_argument);
    REQUIRE_THROWS_AS(sup_of({}), std::invalid_argument);
}

TEST_CASE("level ladder sequences") {
    auto x = single_jump_path();  // max value 110

    auto never = level_ladder({120.0, 140.0});
    REQUIRE(never.times(x) == std::vector<double>{0.0, 1.0});
    REQUIRE(never.count_m(x) == 1);

    auto ladder = level_ladder({105.0, 200.0});
    REQUIRE(ladder.times(x) == std::vector<double>{0.0, 0.5, 1.0});
    REQUIRE(ladder.count_m(x) == 2);

    auto grid4 = deterministic_sequence(4);
    REQUIRE(grid4.times(x) == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    REQUIRE(grid4.count_m(x) == 4);

    REQUIRE_THROWS_AS(level_ladder({120.0, 110.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(level_ladder({}), std::invalid_argument);
    REQUIRE_THROWS_AS(level_ladder({90.0, 120.0}).times(x), std::invalid_argument);
}

TEST_CASE("ladder times stay monotone and on-grid over a fuzz corpus") {
    for (int rep = 0; rep < 200; ++rep) {
        auto x = jumpy_path(8, derive_seed(100, stream::splice, std::uint64_t(rep)));
        auto ladder = level_ladder({x.value(0) + 2.0, x.value(0) + 6.0, x.value(0) + 12.0});
        auto ts = ladder.times(x);  // throws internally if not nondecreasing
        REQUIRE(int(ts.size()) == ladder.count_m(x) + 1);
        for (double t : ts) REQUIRE_NOTHROW(dyadic_index(t, x.level(), x.horizon()));
        REQUIRE(ts.front() == 0.0);
        REQUIRE(ts.back() == x.horizon());
    }
}

TEST_CASE("defining property: targeted cases") {
    auto x = single_jump_path();
    REQUIRE(check_np_property(level_crossing(105.0), x, x) == NpVerdict::pass);

    auto y = splice_after(x, x.index_of(0.5));
    REQUIRE(check_np_property(constant_time(0.5), x, y) == NpVerdict::pass);
    REQUIRE(check_np_property(level_crossing(105.0), x, y) == NpVerdict::pass);

    auto early = splice_after(x, 2);
    REQUIRE(check_np_property(constant_time(0.5), x, early) == NpVerdict::not_applicable);

    auto coarse = make_trajectory(2, 1.0, {100.0, 101.0, 102.0, 103.0, 104.0});
    REQUIRE_THROWS_AS(check_np_property(constant_time(0.5), x, coarse), std::invalid_argument);
}

TEST_CASE("defining property: splice fuzz over the catalogue") {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<StoppingTime> catalogue;
    catalogue.push_back(constant_time(0.25));
    catalogue.push_back(level_crossing(105.0));
    catalogue.push_back(hitting_time_closed(ClosedSet({{80.0, 90.0}, {110.0, inf}})));
    catalogue.push_back(jump_magnitude_time(3.0));
    catalogue.push_back(jump_count_time(1));
    catalogue.push_back(jump_count_time(2));
    catalogue.push_back(sum_capped(constant_time(0.25), level_crossing(105.0)));
    catalogue.push_back(min_of({level_crossing(105.0), constant_time(0.5)}));
    catalogue.push_back(sup_of({constant_time(0.25), jump_count_time(1)}));
    catalogue.push_back(parse_stopping("min(level(105), const(0.5))"));

    std::mt19937_64 eng(20240601);
    int pass = 0, na = 0;
    for (const auto& tau : catalogue) {
        for (int rep = 0; rep < 1000; ++rep) {
            auto x = jumpy_path(7, derive_seed(7, stream::splice, eng()));
            std::uniform_int_distribution<std::int64_t> node(0, x.steps() - 1);
            auto y = splice_after(x, node(eng));
            const NpVerdict v = check_np_property(tau, x, y);
            REQUIRE(v != NpVerdict::fail);
            (v == NpVerdict::pass ? pass : na) += 1;
        }
    }
    REQUIRE(pass > 0);  // the corpus must exercise the non-vacuous branch
    REQUIRE(na > 0);
}

TEST_CASE("stopping expression parser") {
    auto x = single_jump_path();
    REQUIRE(parse_stopping("min(level(105), const(0.5))")(x) == 0.5);
    REQUIRE(parse_stopping(" sup( const(0.25) , jumpcount(1) ) ")(x) == 0.5);
    REQUIRE(parse_stopping("sum(const(0.75), const(0.75))")(x) == 1.0);
    REQUIRE(parse_stopping("jumpmag(3)")(x) == 0.5);

    auto ladder = parse_stopping_sequence("ladder(105, 120, 140)");
    REQUIRE(ladder.times(x) == std::vector<double>{0.0, 0.5, 1.0});
    auto grid = parse_stopping_sequence("grid(2)");
    REQUIRE(grid.times(x) == std::vector<double>{0.0, 0.5, 1.0});
    auto single = parse_stopping_sequence("jumpcount(1)");
    REQUIRE(single.times(x) == std::vector<double>{0.0, 0.5, 1.0});

    REQUIRE_THROWS_AS(parse_stopping("frobnicate(1)"), std::invalid_argument);
    REQUIRE_THROWS_AS(parse_stopping("min(level(105)"), std::invalid_argument);
    REQUIRE_THROWS_AS(parse_stopping("const(oops)"), std::invalid_argument);
    REQUIRE_THROWS_AS(parse_stopping("const(0.5) junk"), std::invalid_argument);
    REQUIRE_THROWS_AS(parse_stopping("sum(const(0.1))"), std::invalid_argument);
}
