#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "trajlab/metrics.hpp"
#include "trajlab/models.hpp"
#include "trajlab/parallel.hpp"
#include "trajlab/portfolio.hpp"
#include "trajlab/rng.hpp"
#include "trajlab/stopping.hpp"
#include "trajlab/trajectory.hpp"

namespace trajlab {

using PathMetric = std::function<double(const Trajectory&, const Trajectory&)>;
using PathSampler = std::function<Trajectory(std::uint64_t)>;
using PathEval = std::function<ValuePath(const Trajectory&)>;

/*
 * Neighborhood recipes: constructive samplers of a center's neighborhood.
 * emit(k) produces the k-th sequence term, shrinking its displacement by half
 * per term; satisfied() checks the declared constraints on an emitted path.
 * Class membership itself is structural (the emitters rebuild members from
 * the center's own formula data), so satisfied() checks only the ordering or
 * ball constraints that define the neighborhood.
 */
struct NeighborhoodRecipe {
    std::string tag;
    std::function<Trajectory(int)> emit;
    std::function<bool(const Trajectory&)> satisfied;
};

/** Emit from `gen`, require both constraint sets. */
inline NeighborhoodRecipe intersect(const NeighborhoodRecipe& gen, const NeighborhoodRecipe& extra) {
    NeighborhoodRecipe r;
    r.tag = gen.tag + "&" + extra.tag;
    r.emit = gen.emit;
    const auto a = gen.satisfied;
    const auto b = extra.satisfied;
    r.satisfied = [a, b](const Trajectory& y) { return a(y) && b(y); };
    return r;
}

namespace detail {

inline const ClassInfo& member_info(const Trajectory& x, const char* who) {
    if (!x.class_info() || x.class_info()->klass != "jump_diffusion" || x.class_info()->driver.empty())
        throw std::invalid_argument(std::string(who) +
                                    ": center must carry jump-diffusion class metadata with its driver");
    return *x.class_info();
}

inline Trajectory rebuild_member(const ClassInfo& info, std::vector<double> driver,
                                 const std::vector<double>& jump_times,
                                 const std::vector<double>& jump_factors, double horizon) {
    JumpDiffusionClassParams p{info.x0, info.sigma, FactorSet::interval(-0.999, 1e6)};
    std::vector<std::pair<double, double>> spec;
    spec.reserve(jump_times.size());
    for (std::size_t i = 0; i < jump_times.size(); ++i) spec.push_back({jump_times[i], jump_factors[i]});
    return gen_jump_diffusion_member(p, driver, std::move(spec), horizon);
}

/** x scaled by s: values, mark left values and the recorded x0. */
inline Trajectory scaled_copy(const Trajectory& x, double s) {
    std::vector<double> vals = x.values();
    for (double& v : vals) v *= s;
    std::vector<JumpMark> marks;
    for (const JumpMark& m : x.jump_marks()) marks.push_back({m.index, m.left_value * s});
    Trajectory y = make_trajectory(x.level(), x.horizon(), vals, marks);
    if (x.class_info()) {
        ClassInfo info = *x.class_info();
        info.x0 *= s;
        y = y.with_class_info(std::make_shared<const ClassInfo>(std::move(info)));
    }
    return y;
}

/** x tilted by exp(a * ramp(t)), ramp linear from 0 to 1 over [0, eps]. */
inline Trajectory tilted_copy(const Trajectory& x, double a, double eps) {
    const std::int64_t n = x.steps();
    auto ramp = [&](double t) { return std::min(t / eps, 1.0); };
    std::vector<double> vals(std::size_t(n) + 1);
    for (std::int64_t k = 0; k <= n; ++k) vals[std::size_t(k)] = x.value(k) * std::exp(a * ramp(x.time(k)));
    std::vector<JumpMark> marks;
    for (const JumpMark& m : x.jump_marks())
        marks.push_back({m.index, m.left_value * std::exp(a * ramp(x.time(m.index)))});
    Trajectory y = make_trajectory(x.level(), x.horizon(), vals, marks);
    if (x.class_info()) y = y.with_class_info(x.class_info());
    return y;
}

}  // namespace detail

/** 0 < d(y, center) < eps; terms are scaled copies closing in on the center. */
inline NeighborhoodRecipe recipe_metric_ball(const Trajectory& center, PathMetric metric, double eps,
                                             double h0 = 1e-3) {
    if (!(eps > 0.0) || !(h0 > 0.0)) throw std::invalid_argument("recipe_metric_ball: eps and h0 must be positive");
    NeighborhoodRecipe r;
    r.tag = "ball";
    r.emit = [center, h0](int k) { return detail::scaled_copy(center, 1.0 + h0 * std::pow(2.0, -k)); };
    r.satisfied = [center, metric, eps](const Trajectory& y) {
        const double d = metric(y, center);
        return d > 0.0 && d < eps;
    };
    return r;
}

/** Every jump strictly earlier; the displacement halves down to one node. */
inline NeighborhoodRecipe recipe_jump_times_earlier(const Trajectory& center, std::int64_t nodes0 = 16) {
    const ClassInfo info = detail::member_info(center, "recipe_jump_times_earlier");
    if (info.jump_times.empty())
        throw std::invalid_argument("recipe_jump_times_earlier: center has no jumps to displace");
    if (nodes0 < 1) throw std::invalid_argument("recipe_jump_times_earlier: need a positive displacement");
    const double mesh = center.mesh();
    for (double s : info.jump_times)
        if (s - double(nodes0) * mesh <= 0.0)
            throw std::invalid_argument("recipe_jump_times_earlier: displacement pushes a jump before 0");

    NeighborhoodRecipe r;
    r.tag = "jump-times-earlier";
    r.emit = [center, info, nodes0, mesh](int k) {
        const double shift = double(std::max<std::int64_t>(1, nodes0 >> k)) * mesh;
        std::vector<double> times = info.jump_times;
        for (double& s : times) s -= shift;
        return detail::rebuild_member(info, info.driver, times, info.jump_factors, center.horizon());
    };
    r.satisfied = [center](const Trajectory& y) {
        const auto& a = y.jump_marks();
        const auto& b = center.jump_marks();
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!(a[i].index < b[i].index)) return false;
        return true;
    };
    return r;
}

/**
 * Driver ordering after eps: the emitted member's driver sits strictly above
 * (or below) the center's on [eps, T], approaching it from that side.
 */
inline NeighborhoodRecipe recipe_driver_ordered(const Trajectory& center, double eps, bool above,
                                                double amp0 = 0.05) {
    const ClassInfo info = detail::member_info(center, "recipe_driver_ordered");
    if (!(eps > 0.0) || eps >= center.horizon())
        throw std::invalid_argument("recipe_driver_ordered: eps must lie inside (0, horizon)");
    if (!(amp0 > 0.0)) throw std::invalid_argument("recipe_driver_ordered: amplitude must be positive");

    NeighborhoodRecipe r;
    r.tag = above ? "driver-above" : "driver-below";
    const double sign = above ? 1.0 : -1.0;
    r.emit = [center, info, eps, amp0, sign](int k) {
        const double amp = sign * amp0 * std::pow(2.0, -k);
        std::vector<double> z = info.driver;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double t = center.time(std::int64_t(i));
            z[i] += amp * std::min(t / eps, 1.0);
        }
        return detail::rebuild_member(info, std::move(z), info.jump_times, info.jump_factors,
                                      center.horizon());
    };
    r.satisfied = [center, info, eps, sign](const Trajectory& y) {
        if (!y.class_info() || y.class_info()->driver.size() != info.driver.size()) return false;
        const auto& zy = y.class_info()->driver;
        for (std::int64_t k = 0; k <= center.steps(); ++k)
            if (center.time(k) >= eps && !(sign * (zy[std::size_t(k)] - info.driver[std::size_t(k)]) > 0.0))
                return false;
        return true;
    };
    return r;
}

/** Jump factor ordering: every emitted factor strictly above (below) the center's. */
inline NeighborhoodRecipe recipe_factors_ordered(const Trajectory& center, bool above, double amp0 = 0.05) {
    const ClassInfo info = detail::member_info(center, "recipe_factors_ordered");
    if (info.jump_factors.empty())
        throw std::invalid_argument("recipe_factors_ordered: center has no jumps to perturb");
    if (!(amp0 > 0.0)) throw std::invalid_argument("recipe_factors_ordered: amplitude must be positive");
    for (double a : info.jump_factors)
        if (1.0 + a - amp0 <= 0.0)
            throw std::invalid_argument("recipe_factors_ordered: amplitude would break 1 + a > 0");

    NeighborhoodRecipe r;
    r.tag = above ? "factors-above" : "factors-below";
    const double sign = above ? 1.0 : -1.0;
    r.emit = [center, info, amp0, sign](int k) {
        std::vector<double> factors = info.jump_factors;
        for (double& a : factors) a += sign * amp0 * std::pow(2.0, -k);
        return detail::rebuild_member(info, info.driver, info.jump_times, factors, center.horizon());
    };
    r.satisfied = [info, sign](const Trajectory& y) {
        if (!y.class_info() || y.class_info()->jump_factors.size() != info.jump_factors.size()) return false;
        for (std::size_t i = 0; i < info.jump_factors.size(); ++i)
            if (!(sign * (y.class_info()->jump_factors[i] - info.jump_factors[i]) > 0.0)) return false;
        return true;
    };
    return r;
}

/**
 * Signed jump displacement: each jump moves against (or along) the sign of
 * its factor, so (s_y - s_center) * a_center is negative (positive).
 */
inline NeighborhoodRecipe recipe_jump_displaced(const Trajectory& center, bool opposite,
                                                std::int64_t nodes0 = 16) {
    const ClassInfo info = detail::member_info(center, "recipe_jump_displaced");
    if (info.jump_times.empty())
        throw std::invalid_argument("recipe_jump_displaced: center has no jumps to displace");
    if (nodes0 < 1) throw std::invalid_argument("recipe_jump_displaced: need a positive displacement");
    const double mesh = center.mesh();
    for (std::size_t i = 0; i < info.jump_times.size(); ++i) {
        if (info.jump_factors[i] == 0.0)
            throw std::invalid_argument("recipe_jump_displaced: zero factor has no displacement side");
        const double dir = (info.jump_factors[i] > 0.0) == opposite ? -1.0 : 1.0;
        const double moved = info.jump_times[i] + dir * double(nodes0) * mesh;
        if (moved <= 0.0 || moved >= center.horizon())
            throw std::invalid_argument("recipe_jump_displaced: displacement leaves (0, horizon)");
    }

    NeighborhoodRecipe r;
    r.tag = opposite ? "displacement-opposite" : "displacement-along";
    r.emit = [center, info, nodes0, mesh, opposite](int k) {
        const double shift = double(std::max<std::int64_t>(1, nodes0 >> k)) * mesh;
        std::vector<double> times = info.jump_times;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double dir = (info.jump_factors[i] > 0.0) == opposite ? -1.0 : 1.0;
            times[i] += dir * shift;
        }
        return detail::rebuild_member(info, info.driver, times, info.jump_factors, center.horizon());
    };
    r.satisfied = [center, info, opposite](const Trajectory& y) {
        const auto& my = y.jump_marks();
        const auto& mc = center.jump_marks();
        if (my.size() != mc.size()) return false;
        for (std::size_t i = 0; i < my.size(); ++i) {
            const double disp = double(my[i].index - mc[i].index) * info.jump_factors[i];
            if (opposite ? !(disp < 0.0) : !(disp > 0.0)) return false;
        }
        return true;
    };
    return r;
}

/** Pathwise domination after eps: y(t) > x(t) (or <) for every grid t >= eps. */
inline NeighborhoodRecipe recipe_path_ordered(const Trajectory& center, double eps, bool above,
                                              double amp0 = 0.01) {
    if (!(eps > 0.0) || eps >= center.horizon())
        throw std::invalid_argument("recipe_path_ordered: eps must lie inside (0, horizon)");
    if (!(amp0 > 0.0)) throw std::invalid_argument("recipe_path_ordered: amplitude must be positive");
    NeighborhoodRecipe r;
    r.tag = above ? "path-above" : "path-below";
    const double sign = above ? 1.0 : -1.0;
    r.emit = [center, eps, amp0, sign](int k) {
        return detail::tilted_copy(center, sign * amp0 * std::pow(2.0, -k), eps);
    };
    r.satisfied = [center, eps, sign](const Trajectory& y) {
        if (y.level() != center.level()) return false;
        for (std::int64_t k = 0; k <= center.steps(); ++k)
            if (center.time(k) >= eps && !(sign * (y.value(k) - center.value(k)) > 0.0)) return false;
        return true;
    };
    return r;
}

/* ------------------------------------------------------------------ */
/* Small-ball estimation                                               */
/* ------------------------------------------------------------------ */

struct SmallBallReport {
    double epsilon = 0.0;
    std::int64_t n = 0;
    std::int64_t hits = 0;
    double frequency = 0.0;
    double ci_low = 0.0;   // exact binomial (Clopper-Pearson), 95%
    double ci_high = 1.0;
};

inline std::pair<double, double> clopper_pearson(std::int64_t hits, std::int64_t n, double conf = 0.95) {
    if (n < 1 || hits < 0 || hits > n) throw std::invalid_argument("clopper_pearson: need 0 <= hits <= n");
    const double alpha = 1.0 - conf;
    double lo = 0.0, hi = 1.0;
    if (hits > 0)
        lo = boost::math::quantile(boost::math::beta_distribution<double>(double(hits), double(n - hits + 1)),
                                   alpha / 2.0);
    if (hits < n)
        hi = boost::math::quantile(boost::math::beta_distribution<double>(double(hits + 1), double(n - hits)),
                                   1.0 - alpha / 2.0);
    return {lo, hi};
}

inline std::vector<double> small_ball_distances(const PathSampler& sampler, const Trajectory& target,
                                                const PathMetric& metric, std::int64_t n,
                                                int jobs = 1) {
    if (n < 1) throw std::invalid_argument("small_ball_distances: need at least one sample");
    return parallel_map<double>(n, jobs,
                                [&](std::int64_t i) { return metric(sampler(std::uint64_t(i)), target); });
}

inline SmallBallReport small_ball_tally(const std::vector<double>& dist, double eps) {
    SmallBallReport rep;
    rep.epsilon = eps;
    rep.n = std::int64_t(dist.size());
    for (double d : dist)
        if (d < eps) ++rep.hits;
    rep.frequency = double(rep.hits) / double(rep.n);
    const auto ci = clopper_pearson(rep.hits, rep.n);
    rep.ci_low = ci.first;
    rep.ci_high = ci.second;
    return rep;
}

/**
 * Monte Carlo frequency of d(Z_seed, target) < eps for each eps, sharing one
 * set of sampled distances: the reported frequency is then non-decreasing in
 * eps by construction, not merely in expectation.
 */
inline std::vector<SmallBallReport> small_ball_curve(const PathSampler& sampler, const Trajectory& target,
                                                     const PathMetric& metric,
                                                     const std::vector<double>& eps_list, std::int64_t n,
                                                     int jobs = 1) {
    if (eps_list.empty()) throw std::invalid_argument("small_ball_curve: need at least one radius");
    const std::vector<double> dist = small_ball_distances(sampler, target, metric, n, jobs);
    std::vector<SmallBallReport> out;
    out.reserve(eps_list.size());
    for (double eps : eps_list) out.push_back(small_ball_tally(dist, eps));
    return out;
}

inline SmallBallReport small_ball_estimate(const PathSampler& sampler, const Trajectory& target,
                                           const PathMetric& metric, double eps, std::int64_t n,
                                           int jobs = 1) {
    return small_ball_curve(sampler, target, metric, {eps}, n, jobs).front();
}

/* ------------------------------------------------------------------ */
/* Adversarial mutators                                                */
/* ------------------------------------------------------------------ */

using Mutator = std::function<Trajectory(const Trajectory&, std::mt19937_64&)>;

namespace detail {

inline bool node_marked(const std::vector<JumpMark>& marks, std::int64_t idx) {
    for (const JumpMark& m : marks)
        if (m.index == idx) return true;
    return false;
}

/** Multiply everything from node idx on by f and record the new mark. */
inline Trajectory with_extra_jump(const Trajectory& x, std::int64_t idx, double f) {
    std::vector<double> vals = x.values();
    std::vector<JumpMark> marks;
    for (const JumpMark& m : x.jump_marks())
        marks.push_back({m.index, m.index >= idx ? m.left_value * f : m.left_value});
    marks.push_back({idx, vals[std::size_t(idx)]});
    std::sort(marks.begin(), marks.end(),
              [](const JumpMark& a, const JumpMark& b) { return a.index < b.index; });
    for (std::int64_t k = idx; k <= x.steps(); ++k) vals[std::size_t(k)] *= f;
    Trajectory y = make_trajectory(x.level(), x.horizon(), vals, marks);
    if (x.class_info()) {
        ClassInfo info = *x.class_info();
        info.jump_times.push_back(x.time(idx));
        info.jump_factors.push_back(f - 1.0);
        y = y.with_class_info(std::make_shared<const ClassInfo>(std::move(info)));
    }
    return y;
}

/** Undo the pick-th mark's factor from its node onward. */
inline Trajectory without_jump(const Trajectory& x, std::size_t pick) {
    const JumpMark gone = x.jump_marks()[pick];
    const double f = x.value(gone.index) / gone.left_value;
    std::vector<double> vals = x.values();
    for (std::int64_t k = gone.index; k <= x.steps(); ++k) vals[std::size_t(k)] /= f;
    std::vector<JumpMark> marks;
    for (std::size_t i = 0; i < x.jump_marks().size(); ++i) {
        if (i == pick) continue;
        const JumpMark& m = x.jump_marks()[i];
        marks.push_back({m.index, m.index >= gone.index ? m.left_value / f : m.left_value});
    }
    Trajectory y = make_trajectory(x.level(), x.horizon(), vals, marks);
    if (x.class_info()) {
        ClassInfo info = *x.class_info();
        const double t = x.time(gone.index);
        for (std::size_t i = 0; i < info.jump_times.size(); ++i)
            if (info.jump_times[i] == t) {
                info.jump_times.erase(info.jump_times.begin() + std::ptrdiff_t(i));
                info.jump_factors.erase(info.jump_factors.begin() + std::ptrdiff_t(i));
                break;
            }
        y = y.with_class_info(std::make_shared<const ClassInfo>(std::move(info)));
    }
    return y;
}

}  // namespace detail

/** Adds one jump at a fresh node, reusing one of the path's own factors. */
inline Trajectory mutate_jump_insert(const Trajectory& x, std::mt19937_64& eng) {
    const auto& marks = x.jump_marks();
    if (marks.empty()) return x;
    std::uniform_int_distribution<std::size_t> pick(0, marks.size() - 1);
    const JumpMark& model = marks[pick(eng)];
    const double f = x.value(model.index) / model.left_value;
    std::uniform_int_distribution<std::int64_t> node(1, x.steps());
    for (int tries = 0; tries < 16; ++tries) {
        const std::int64_t idx = node(eng);
        if (!detail::node_marked(marks, idx)) return detail::with_extra_jump(x, idx, f);
    }
    return x;
}

inline Trajectory mutate_jump_delete(const Trajectory& x, std::mt19937_64& eng) {
    const auto& marks = x.jump_marks();
    if (marks.empty()) return x;
    std::uniform_int_distribution<std::size_t> pick(0, marks.size() - 1);
    return detail::without_jump(x, pick(eng));
}

/** Moves one jump a few nodes sideways, keeping its factor. */
inline Trajectory mutate_jump_shift(const Trajectory& x, std::mt19937_64& eng) {
    const auto& marks = x.jump_marks();
    if (marks.empty()) return x;
    std::uniform_int_distribution<std::size_t> pick(0, marks.size() - 1);
    const std::size_t at = pick(eng);
    std::uniform_int_distribution<std::int64_t> step(1, 8);
    std::bernoulli_distribution flip(0.5);
    const std::int64_t idx = marks[at].index;
    const std::int64_t moved = idx + (flip(eng) ? 1 : -1) * step(eng);
    if (moved < 1 || moved > x.steps() || detail::node_marked(marks, moved)) return x;
    const double f = x.value(idx) / marks[at].left_value;
    return detail::with_extra_jump(detail::without_jump(x, at), moved, f);
}

/** Flips the driver's sign; needs the member's formula metadata. */
inline Trajectory mutate_driver_flip(const Trajectory& x, std::mt19937_64&) {
    if (!x.class_info() || x.class_info()->klass != "jump_diffusion" || x.class_info()->driver.empty())
        return x;
    const ClassInfo& info = *x.class_info();
    std::vector<double> z = info.driver;
    for (double& v : z) v = -v;
    return detail::rebuild_member(info, std::move(z), info.jump_times, info.jump_factors, x.horizon());
}

inline std::vector<Mutator> standard_mutators() {
    return {mutate_jump_insert, mutate_jump_delete, mutate_jump_shift, mutate_driver_flip};
}

/* ------------------------------------------------------------------ */
/* NP-arbitrage search                                                 */
/* ------------------------------------------------------------------ */

enum class ArbOutcome { no_violation_found, negative_value_witness, arbitrage_candidate };

inline const char* to_string(ArbOutcome o) {
    switch (o) {
        case ArbOutcome::no_violation_found: return "no-violation-found";
        case ArbOutcome::negative_value_witness: return "negative-value-witness";
        case ArbOutcome::arbitrage_candidate: return "arbitrage-candidate";
    }
    return "?";
}

struct ArbSearchConfig {
    std::int64_t n = 1000;        // base draws; mutators multiply the corpus
    int jobs = 1;
    double zero_tol = 1e-9;
    std::uint64_t root_seed = 0;  // seeds the mutation streams
    std::vector<Mutator> mutators;
};

struct ArbitrageVerdict {
    ArbOutcome outcome = ArbOutcome::no_violation_found;
    std::int64_t corpus_size = 0;
    double min_terminal = 0.0;
    double max_terminal = 0.0;
    // witness coordinates: sampler seed, mutator index (-1 for a plain draw)
    // and the mutation engine seed; enough to rebuild the exact path
    std::int64_t witness_base_seed = -1;
    int witness_mutator = -1;
    std::uint64_t witness_mutation_seed = 0;
    double witness_value = 0.0;
    double witness_time = 0.0;  // where the witness's value path bottomed out
};

/** Rebuilds corpus entry i = base draws first, then mutated blocks. */
inline Trajectory arb_corpus_path(const PathSampler& sampler, const ArbSearchConfig& cfg, std::int64_t i) {
    if (i < cfg.n) return sampler(std::uint64_t(i));
    const std::int64_t j = i - cfg.n;
    const std::size_t which = std::size_t(j / cfg.n);
    const std::int64_t base = j % cfg.n;
    auto eng = make_engine(derive_seed(cfg.root_seed, stream::mutate, std::uint64_t(i)));
    return cfg.mutators[which](sampler(std::uint64_t(base)), eng);
}

/**
 * Corpus-relative reading of the no-arbitrage definition: a portfolio from
 * zero wealth is an arbitrage candidate when its terminal value never goes
 * below -zero_tol on the scanned corpus and exceeds +zero_tol somewhere. A
 * terminal value below the tolerance is a disproving witness instead. The
 * corpus is the n sampled paths plus every mutator applied to each of them.
 */
inline ArbitrageVerdict np_arbitrage_search(const PathEval& eval, const PathSampler& sampler,
                                            const ArbSearchConfig& cfg = {}) {
    if (cfg.n < 1) throw std::invalid_argument("np_arbitrage_search: need at least one base draw");
    if (eval(sampler(0)).v0 != 0.0)
        throw std::invalid_argument("np_arbitrage_search: the portfolio must start from zero wealth");

    const std::int64_t total = cfg.n * std::int64_t(1 + cfg.mutators.size());
    const std::vector<double> terminal = parallel_map<double>(
        total, cfg.jobs, [&](std::int64_t i) { return eval(arb_corpus_path(sampler, cfg, i)).terminal(); });

    ArbitrageVerdict v;
    v.corpus_size = total;
    std::int64_t argmin = 0, argmax = 0;
    v.min_terminal = v.max_terminal = terminal[0];
    for (std::int64_t i = 1; i < total; ++i) {
        if (terminal[std::size_t(i)] < v.min_terminal) v.min_terminal = terminal[std::size_t(i)], argmin = i;
        if (terminal[std::size_t(i)] > v.max_terminal) v.max_terminal = terminal[std::size_t(i)], argmax = i;
    }

    const auto fill_witness = [&](std::int64_t i) {
        v.witness_base_seed = i < cfg.n ? i : (i - cfg.n) % cfg.n;
        v.witness_mutator = i < cfg.n ? -1 : int((i - cfg.n) / cfg.n);
        v.witness_mutation_seed = derive_seed(cfg.root_seed, stream::mutate, std::uint64_t(i));
        v.witness_value = terminal[std::size_t(i)];
        const ValuePath vp = eval(arb_corpus_path(sampler, cfg, i));
        std::size_t low = 0;
        for (std::size_t k = 1; k < vp.v.size(); ++k)
            if (vp.v[k] < vp.v[low]) low = k;
        v.witness_time = vp.times[low];
    };

    if (v.min_terminal < -cfg.zero_tol) {
        v.outcome = ArbOutcome::negative_value_witness;
        fill_witness(argmin);
    } else if (v.max_terminal > cfg.zero_tol) {
        v.outcome = ArbOutcome::arbitrage_candidate;
        fill_witness(argmax);
    } else {
        v.outcome = ArbOutcome::no_violation_found;
    }
    return v;
}

/* ------------------------------------------------------------------ */
/* Joint strong local continuity                                       */
/* ------------------------------------------------------------------ */

struct SLCReport {
    std::vector<double> distances;                   // d(x_k, x*) per term
    std::vector<std::vector<double>> tau_table;      // stopping times per term
    std::vector<std::vector<double>> stopped_table;  // stopped values per term
    std::vector<int> m_counts;                       // M(x_k) per term
    std::vector<double> tau_star;
    std::vector<double> stopped_star;
    int m_star = 0;
    double mesh = 0.0;
    bool pass_times = false;
    bool pass_values = false;
    bool pass_count = false;
};

/**
 * Runs the three-part convergence reading of joint strong local continuity
 * at the final sequence term: stopping times within one grid mesh, stopped
 * values within the sup-distance plus the center's one-step oscillation at
 * the matching node, and the interval count M equal on the nose.
 */
inline SLCReport jointly_slc_test(const StoppingSequence& seq, const Trajectory& star,
                                  const NeighborhoodRecipe& recipe, const PathMetric& metric,
                                  int m_terms) {
    if (m_terms < 2) throw std::invalid_argument("jointly_slc_test: need at least two sequence terms");

    SLCReport rep;
    rep.tau_star = seq.times(star);
    rep.m_star = int(rep.tau_star.size()) - 1;
    for (double t : rep.tau_star) rep.stopped_star.push_back(star.value_at(t));
    rep.mesh = star.mesh();

    Trajectory last;
    for (int k = 0; k < m_terms; ++k) {
        Trajectory y = recipe.emit(k);
        if (!recipe.satisfied(y))
            throw std::invalid_argument(
                "jointly_slc_test: recipe emitted a trajectory outside its declared neighborhood");
        require_same_grid(y, star, "jointly_slc_test");
        rep.distances.push_back(metric(y, star));
        const std::vector<double> ty = seq.times(y);
        rep.m_counts.push_back(int(ty.size()) - 1);
        std::vector<double> stopped;
        for (double t : ty) stopped.push_back(y.value_at(t));
        rep.tau_table.push_back(ty);
        rep.stopped_table.push_back(std::move(stopped));
        last = std::move(y);
    }

    const auto& tau_n = rep.tau_table.back();
    const auto& val_n = rep.stopped_table.back();
    rep.pass_count = rep.m_counts.back() == rep.m_star;
    rep.pass_times = rep.pass_count;
    rep.pass_values = rep.pass_count;
    if (rep.pass_count) {
        const double sup_gap = uniform_distance(last, star);
        for (std::size_t i = 0; i < rep.tau_star.size(); ++i) {
            if (std::abs(tau_n[i] - rep.tau_star[i]) > rep.mesh + 1e-12) rep.pass_times = false;
            const std::int64_t node = star.index_of(rep.tau_star[i]);
            double osc = 0.0;
            if (node > 0) osc = std::max(osc, std::abs(star.value(node) - star.value(node - 1)));
            if (node < star.steps()) osc = std::max(osc, std::abs(star.value(node + 1) - star.value(node)));
            if (std::abs(val_n[i] - rep.stopped_star[i]) > sup_gap + osc + 1e-12) rep.pass_values = false;
        }
    }
    return rep;
}

/* ------------------------------------------------------------------ */
/* Jump correspondence along a sequence                                 */
/* ------------------------------------------------------------------ */

struct JumpCorrespondenceReport {
    std::vector<int> star_counts;               // jumps of x* per interval (tau_i, tau_{i+1}]
    std::vector<std::vector<int>> term_counts;  // same for each sequence term
    int lock_index = -1;  // first term from which every later term matches
    bool locked = false;
};

inline JumpCorrespondenceReport jump_correspondence_check(const std::function<Trajectory(int)>& seq_gen,
                                                          int m_terms, const Trajectory& star,
                                                          const StoppingSequence& seq) {
    if (m_terms < 1) throw std::invalid_argument("jump_correspondence_check: need at least one term");
    const auto counts_of = [&seq](const Trajectory& x) {
        const std::vector<double> ts = seq.times(x);
        std::vector<int> c(ts.size() - 1, 0);
        for (const JumpMark& m : x.jump_marks()) {
            const double t = x.time(m.index);
            for (std::size_t i = 0; i + 1 < ts.size(); ++i)
                if (ts[i] < t && t <= ts[i + 1]) {
                    ++c[i];
                    break;
                }
        }
        return c;
    };

    JumpCorrespondenceReport rep;
    rep.star_counts = counts_of(star);
    for (int k = 0; k < m_terms; ++k) rep.term_counts.push_back(counts_of(seq_gen(k)));

    int lock = m_terms;
    for (int k = m_terms - 1; k >= 0; --k) {
        if (rep.term_counts[std::size_t(k)] == rep.star_counts)
            lock = k;
        else
            break;
    }
    rep.locked = lock < m_terms;
    rep.lock_index = rep.locked ? lock : -1;
    return rep;
}

/* ------------------------------------------------------------------ */
/* Isomorphic-portfolio transfer experiment                             */
/* ------------------------------------------------------------------ */

struct TransferConfig {
    std::int64_t n = 10000;
    int jobs = 1;
    bool martingale_precheck = true;  // disable only when no martingale oracle exists
    std::int64_t precheck_n = 1000;
    double zero_tol = 1e-9;
};

struct TransferReport {
    std::int64_t n = 0;
    double mean = 0.0;
    double se = 0.0;
    double frac_positive = 0.0;
    double min_terminal = 0.0;
    double max_terminal = 0.0;
    std::int64_t argmin_index = 0;  // sampler indices of the extremes, for replay
    std::int64_t argmax_index = 0;
    bool mean_within_3se = false;
    bool def5_pattern = false;  // nonnegative corpus with a strict profit somewhere
};

/**
 * Evaluates the pathwise portfolio on sampler draws: the stochastic-side
 * portfolio is the same functional applied to each realized path, so its
 * terminal distribution is read off directly. The precheck rejects samplers
 * whose terminal price mean drifts from x(0) by more than five standard
 * errors; run with it disabled for samplers that are not meant to be
 * martingales, where only the arbitrage-pattern reading applies.
 */
inline TransferReport transfer_experiment(const PathEval& eval, const PathSampler& sampler,
                                          const TransferConfig& cfg = {}) {
    if (cfg.n < 2) throw std::invalid_argument("transfer_experiment: need at least two samples");

    if (cfg.martingale_precheck) {
        const std::int64_t m = std::min(cfg.precheck_n, cfg.n);
        const double x0 = sampler(0).value(0);
        const std::vector<double> xt = parallel_map<double>(m, cfg.jobs, [&](std::int64_t i) {
            const Trajectory x = sampler(std::uint64_t(i));
            return x.value(x.steps());
        });
        double sum = 0.0, sumsq = 0.0;
        for (double v : xt) sum += v, sumsq += v * v;
        const double mean = sum / double(m);
        const double sd = std::sqrt(std::max(0.0, (sumsq - double(m) * mean * mean) / double(m - 1)));
        if (std::abs(mean - x0) > 5.0 * sd / std::sqrt(double(m)))
            throw std::invalid_argument("transfer_experiment: sampler fails the martingale sanity precheck");
    }

    const std::vector<double> vt = parallel_map<double>(
        cfg.n, cfg.jobs, [&](std::int64_t i) { return eval(sampler(std::uint64_t(i))).terminal(); });

    TransferReport rep;
    rep.n = cfg.n;
    rep.min_terminal = rep.max_terminal = vt[0];
    double sum = 0.0, sumsq = 0.0;
    std::int64_t pos = 0;
    for (std::int64_t i = 0; i < cfg.n; ++i) {
        const double v = vt[std::size_t(i)];
        sum += v;
        sumsq += v * v;
        if (v > cfg.zero_tol) ++pos;
        if (v < rep.min_terminal) rep.min_terminal = v, rep.argmin_index = i;
        if (v > rep.max_terminal) rep.max_terminal = v, rep.argmax_index = i;
    }
    rep.mean = sum / double(cfg.n);
    const double var = std::max(0.0, (sumsq - double(cfg.n) * rep.mean * rep.mean) / double(cfg.n - 1));
    rep.se = std::sqrt(var / double(cfg.n));
    rep.frac_positive = double(pos) / double(cfg.n);
    rep.mean_within_3se = std::abs(rep.mean) <= 3.0 * rep.se;
    rep.def5_pattern = rep.min_terminal >= -cfg.zero_tol && rep.max_terminal > cfg.zero_tol;
    return rep;
}

}  // namespace trajlab
