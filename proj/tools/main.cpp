// trajlab: deterministic trajectory-market experiments driven by config files.
//
// Every run writes <out>/<op>.json carrying the effective config (canonical
// text + FNV-1a hash), the verdict, and a witness list whose entries can be
// recomputed from coordinates alone. `trajlab replay` does exactly that, so a
// report is evidence only as long as the replay agrees bit-for-bit (well,
// 1e-12-for-1e-12). No timestamps, no environment reads: same config hash and
// same build means byte-identical output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trajlab/arbitrage.hpp"
#include "trajlab/config.hpp"
#include "trajlab/csv.hpp"
#include "trajlab/integration.hpp"
#include "trajlab/metrics.hpp"
#include "trajlab/models.hpp"
#include "trajlab/portfolio.hpp"
#include "trajlab/quadratic_variation.hpp"
#include "trajlab/rng.hpp"
#include "trajlab/stopping.hpp"
#include "trajlab/trajectory.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using trajlab::Config;
using trajlab::Trajectory;

namespace {

[[noreturn]] void bad_config(const std::string& what) { throw std::invalid_argument(what); }

std::string hex64(std::uint64_t v) {
    std::ostringstream out;
    out << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
    return out.str();
}

std::uint64_t parse_seed(const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        bad_config("config: seed must be a nonnegative integer, got '" + s + "'");
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        bad_config("config: seed '" + s + "' does not fit in 64 bits");
    }
}

std::vector<std::string> split_names(const std::string& raw) {
    std::vector<std::string> out;
    std::istringstream in(raw);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto a = item.find_first_not_of(" \t");
        const auto b = item.find_last_not_of(" \t");
        if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

/* ------------------------------------------------------------------ */
/* Experiment scaffolding                                              */
/* ------------------------------------------------------------------ */

struct Experiment {
    Config cfg;
    std::uint64_t seed = 0;
    int level = 8;
    int jobs = 1;
    double horizon = 1.0;
    std::string out = "out";
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> level;
    std::optional<int> jobs;
    std::optional<std::string> out;
};

Experiment experiment_from(Config cfg) {
    Experiment ex;
    ex.cfg = std::move(cfg);
    const Config& c = ex.cfg;
    c.require_known_top({"seed", "level", "jobs", "out", "horizon"});
    c.require_known_blocks({"class", "portfolio", "metric", "harness"});

    ex.seed = c.has("seed") ? parse_seed(c.str("seed")) : 0;

    const double lv = c.num_or("level", 8.0);
    ex.level = int(lv);
    if (double(ex.level) != lv || ex.level < 1 || ex.level > 20)
        bad_config("config: level must be an integer in [1, 20]");

    const double jb = c.num_or("jobs", 1.0);
    ex.jobs = int(jb);
    if (double(ex.jobs) != jb || ex.jobs < 1 || ex.jobs > 256)
        bad_config("config: jobs must be an integer in [1, 256]");

    ex.horizon = c.num_or("horizon", 1.0);
    if (!(ex.horizon > 0.0)) bad_config("config: horizon must be positive");

    ex.out = c.str_or("out", "out");
    return ex;
}

// Overrides are folded into the config before anything reads it, so the
// recorded hash covers the values actually used.
Experiment make_experiment(const std::string& path, const Overrides& ov) {
    Config cfg = Config::load(path);
    if (ov.seed) cfg.set("seed", std::to_string(*ov.seed));
    if (ov.level) cfg.set("level", std::to_string(*ov.level));
    if (ov.jobs) cfg.set("jobs", std::to_string(*ov.jobs));
    if (ov.out) cfg.set("out", *ov.out);
    return experiment_from(std::move(cfg));
}

void check_op_tag(const Experiment& ex, const std::string& op) {
    const std::string declared = ex.cfg.str_or("harness", "op", op);
    if (declared != op)
        bad_config("config: harness.op is '" + declared + "' but the subcommand is '" + op + "'");
}

void check_harness_keys(const Experiment& ex, std::vector<std::string> allowed) {
    allowed.push_back("op");
    allowed.push_back("expect");
    ex.cfg.require_known_keys("harness", allowed);
}

/* ------------------------------------------------------------------ */
/* Builders: config blocks -> library objects                          */
/* ------------------------------------------------------------------ */

// Distinct grid nodes in (0, horizon), ascending; collisions are discarded so
// the draw stays deterministic in the number of attempts.
std::vector<double> draw_jump_times(std::mt19937_64& eng, int count, int level, double horizon) {
    const std::int64_t n = std::int64_t{1} << level;
    std::uniform_int_distribution<std::int64_t> node(1, n - 1);
    std::set<std::int64_t> used;
    for (int i = 0; i < count; ++i) used.insert(node(eng));
    std::vector<double> times;
    for (std::int64_t k : used) times.push_back(horizon * (double(k) / double(n)));
    return times;
}

trajlab::PathSampler build_sampler(const Experiment& ex) {
    const Config& c = ex.cfg;
    if (!c.has_block("class")) bad_config("config: missing class block");
    const std::string kind = c.str("class", "kind");
    const int level = ex.level;
    const double horizon = ex.horizon;
    const std::uint64_t root = ex.seed;

    if (kind == "poisson_exp") {
        c.require_known_keys("class", {"kind", "x0", "mu", "a", "lambda"});
        trajlab::PoissonExpParams p;
        p.x0 = c.num_or("class", "x0", 100.0);
        p.mu = c.num_or("class", "mu", 0.0);
        p.a = c.num_or("class", "a", 0.0);
        if (!(p.x0 > 0.0)) bad_config("config: class.x0 must be positive");
        if (!(1.0 + p.a > 0.0)) bad_config("config: class.a must exceed -1");
        if (p.mu * p.a > 0.0)
            bad_config("config: class.mu, class.a: drift and jump direction must oppose "
                       "(mu * a <= 0)");
        const double lambda = c.num_or("class", "lambda", 1.0);
        if (!(lambda >= 0.0)) bad_config("config: class.lambda must be nonnegative");
        if (lambda > 0.0 && p.a == 0.0)
            bad_config("config: class.a must be nonzero when class.lambda > 0 "
                       "(jumps need a factor)");
        return [=](std::uint64_t i) {
            auto eng = trajlab::make_engine(trajlab::derive_seed(root, trajlab::stream::jumps, i));
            int nj = 0;
            if (lambda > 0.0) nj = std::poisson_distribution<int>(lambda * horizon)(eng);
            return trajlab::gen_poisson_exp(p, draw_jump_times(eng, nj, level, horizon), level,
                                            horizon);
        };
    }

    if (kind == "jump_diffusion") {
        c.require_known_keys("class", {"kind", "x0", "sigma", "driver", "factors", "factors_lo",
                                       "factors_hi", "njumps_max"});
        trajlab::JumpDiffusionClassParams p;
        p.x0 = c.num_or("class", "x0", 100.0);
        p.sigma = c.num_or("class", "sigma", 0.2);
        if (!(p.x0 > 0.0)) bad_config("config: class.x0 must be positive");
        if (!(p.sigma > 0.0)) bad_config("config: class.sigma must be positive");

        std::vector<double> flist;
        double flo = 0.0, fhi = 0.0;
        if (c.has("class", "factors")) {
            if (c.has("class", "factors_lo") || c.has("class", "factors_hi"))
                bad_config("config: class.factors and class.factors_lo/factors_hi are "
                           "mutually exclusive");
            flist = c.list("class", "factors");
            for (double f : flist)
                if (!(f > -1.0)) bad_config("config: class.factors must all exceed -1");
            p.factors = trajlab::FactorSet::finite(flist);
        } else if (c.has("class", "factors_lo") && c.has("class", "factors_hi")) {
            flo = c.num("class", "factors_lo");
            fhi = c.num("class", "factors_hi");
            if (!(flo > -1.0) || !(flo <= fhi))
                bad_config("config: class.factors_lo/factors_hi need -1 < lo <= hi");
            p.factors = trajlab::FactorSet::interval(flo, fhi);
        } else {
            bad_config("config: class block needs factors (finite list) or "
                       "factors_lo/factors_hi (interval)");
        }
        if (!(p.factors.min_abs() > 0.0))
            bad_config("config: class.factors: inf |c| over the admissible factor set must "
                       "be positive (no vanishing jumps)");

        const std::string driver = c.str_or("class", "driver", "walk");
        if (driver != "walk" && driver != "brownian")
            bad_config("config: class.driver must be walk or brownian");
        const std::int64_t njmax = c.integer_or("class", "njumps_max", 3);
        if (njmax < 0 || njmax > 64)
            bad_config("config: class.njumps_max must be an integer in [0, 64]");

        return [=](std::uint64_t i) {
            const std::vector<double> z =
                driver == "walk"
                    ? trajlab::gen_walk_z(level, trajlab::derive_seed(root, trajlab::stream::walk, i),
                                          horizon)
                    : trajlab::gen_brownian_z(
                          level, trajlab::derive_seed(root, trajlab::stream::brownian, i), horizon);
            auto eng = trajlab::make_engine(trajlab::derive_seed(root, trajlab::stream::jumps, i));
            int nj = 0;
            if (njmax > 0) nj = std::uniform_int_distribution<int>(0, int(njmax))(eng);
            const std::vector<double> times = draw_jump_times(eng, nj, level, horizon);
            std::vector<std::pair<double, double>> spec;
            for (double t : times) {
                double f = 0.0;
                if (!flist.empty())
                    f = flist[std::uniform_int_distribution<std::size_t>(0, flist.size() - 1)(eng)];
                else
                    f = std::uniform_real_distribution<double>(flo, fhi)(eng);
                spec.push_back({t, f});
            }
            return trajlab::gen_jump_diffusion_member(p, z, spec, horizon);
        };
    }

    if (kind == "jump_diffusion_process") {
        c.require_known_keys("class", {"kind", "x0", "mu", "sigma", "lambda", "law_factors",
                                       "law_weights"});
        trajlab::JumpDiffusionProcessParams p;
        p.x0 = c.num_or("class", "x0", 100.0);
        p.sigma = c.num_or("class", "sigma", 0.2);
        p.lambda = c.num_or("class", "lambda", 1.0);
        if (!(p.x0 > 0.0)) bad_config("config: class.x0 must be positive");
        if (!(p.sigma > 0.0)) bad_config("config: class.sigma must be positive");
        if (!(p.lambda >= 0.0)) bad_config("config: class.lambda must be nonnegative");

        if (c.has("class", "law_factors")) {
            p.law.factors = c.list("class", "law_factors");
            p.law.weights = c.has("class", "law_weights")
                                ? c.list("class", "law_weights")
                                : std::vector<double>(p.law.factors.size(), 1.0);
        } else if (c.has("class", "law_weights")) {
            bad_config("config: class.law_weights given without class.law_factors");
        }
        if (p.law.factors.size() != p.law.weights.size())
            bad_config("config: class.law_factors and class.law_weights must match in length");
        for (double f : p.law.factors)
            if (!(f > -1.0)) bad_config("config: class.law_factors must all exceed -1");
        double wsum = 0.0;
        for (double w : p.law.weights) {
            if (!(w >= 0.0)) bad_config("config: class.law_weights must be nonnegative");
            wsum += w;
        }
        if (!(wsum > 0.0)) bad_config("config: class.law_weights must not all vanish");

        // mu = martingale picks the drift that compensates the jump law
        const std::string mu_raw = c.str_or("class", "mu", "0");
        p.mu = mu_raw == "martingale" ? trajlab::martingale_drift(p.lambda, p.law)
                                      : c.num_or("class", "mu", 0.0);
        return [=](std::uint64_t i) {
            return trajlab::sample_jump_diffusion_process(
                p, level, trajlab::derive_seed(root, trajlab::stream::jumps, i), horizon);
        };
    }

    if (kind == "heston" || kind == "modified_heston") {
        std::vector<std::string> keys = {"kind",  "x0", "mu",     "alpha", "kappa",
                                         "theta", "xi", "window", "v0",    "driver"};
        if (kind == "modified_heston") {
            keys.push_back("y");
            keys.push_back("hurst");
            keys.push_back("y_threshold");
        }
        c.require_known_keys("class", keys);

        trajlab::HestonTypeParams p;
        p.z0 = c.num_or("class", "x0", 100.0);
        p.mu = c.num_or("class", "mu", 0.0);
        p.alpha = c.num_or("class", "alpha", 0.5);
        p.kappa = c.num_or("class", "kappa", 2.0);
        p.theta = c.num_or("class", "theta", 0.04);
        p.xi = c.num_or("class", "xi", 0.3);
        p.window = c.num_or("class", "window", 0.125);
        p.v0 = c.num_or("class", "v0", 0.04);
        if (!(p.z0 > 0.0)) bad_config("config: class.x0 must be positive");
        if (!(p.alpha > 0.0) || !(p.alpha < 1.0))
            bad_config("config: class.alpha must lie strictly inside (0, 1)");
        if (!(p.kappa > 0.0)) bad_config("config: class.kappa must be positive");
        if (!(p.theta > 0.0)) bad_config("config: class.theta must be positive");
        if (!(p.xi > 0.0)) bad_config("config: class.xi must be positive");
        if (!(p.window > 0.0)) bad_config("config: class.window must be positive");
        if (!(p.v0 > 0.0)) bad_config("config: class.v0 must be positive");
        if (2.0 * p.kappa * p.theta < p.xi * p.xi)
            bad_config("config: class.kappa, class.theta, class.xi: Feller condition "
                       "2*kappa*theta >= xi^2 violated (2*kappa*theta = " +
                       std::to_string(2.0 * p.kappa * p.theta) +
                       ", xi^2 = " + std::to_string(p.xi * p.xi) + ")");
        const std::string driver = c.str_or("class", "driver", "gaussian");
        if (driver != "gaussian" && driver != "walk")
            bad_config("config: class.driver must be gaussian or walk");
        p.driver = driver == "walk" ? trajlab::HestonDriver::walk : trajlab::HestonDriver::gaussian;

        if (kind == "heston") {
            return [=](std::uint64_t i) {
                return trajlab::sample_heston_type(
                    p, level, trajlab::derive_seed(root, trajlab::stream::heston, i), horizon);
            };
        }

        trajlab::ModifiedHestonParams mp;
        mp.heston = p;
        const std::string y = c.str_or("class", "y", "none");
        if (y == "fbm") {
            const double hurst = c.num_or("class", "hurst", 0.6);
            if (!(hurst > 0.0) || !(hurst < 1.0))
                bad_config("config: class.hurst must lie strictly inside (0, 1)");
            const double thr = c.num_or("class", "y_threshold", 0.02);
            if (!(thr > 0.0)) bad_config("config: class.y_threshold must be positive");
            mp.y = trajlab::YSpec::fractional(hurst, thr);
        } else if (y != "none") {
            bad_config("config: class.y must be none or fbm");
        }
        return [=](std::uint64_t i) {
            return trajlab::sample_modified_heston(
                mp, level, trajlab::derive_seed(root, trajlab::stream::heston, i), horizon);
        };
    }

    bad_config("config: class.kind '" + kind +
               "' is not one of poisson_exp, jump_diffusion, jump_diffusion_process, heston, "
               "modified_heston");
}

struct MetricSpec {
    std::string name = "uniform";
    trajlab::PathMetric fn;
    int warp_m = 16;
    int refine = 4;
    int qv_level = 0;
};

MetricSpec build_metric(const Experiment& ex) {
    const Config& c = ex.cfg;
    MetricSpec spec;
    spec.fn = [](const Trajectory& x, const Trajectory& y) {
        return trajlab::uniform_distance(x, y);
    };
    if (!c.has_block("metric")) return spec;

    c.require_known_keys("metric", {"kind", "warp_m", "refine", "qv_level"});
    spec.name = c.str_or("metric", "kind", "uniform");
    if (spec.name == "uniform") return spec;

    if (spec.name == "skorokhod") {
        const std::int64_t m = c.integer_or("metric", "warp_m", 16);
        const std::int64_t r = c.integer_or("metric", "refine", 4);
        const std::int64_t nsteps = std::int64_t{1} << ex.level;
        if (m < 2 || m > nsteps || nsteps % m != 0)
            bad_config("config: metric.warp_m must divide the grid step count 2^level");
        if (r < 1 || r > 64) bad_config("config: metric.refine must be an integer in [1, 64]");
        spec.warp_m = int(m);
        spec.refine = int(r);
        spec.fn = [m = spec.warp_m, r = spec.refine](const Trajectory& x, const Trajectory& y) {
            return trajlab::skorokhod_distance_ub(x, y, m, r).distance;
        };
        return spec;
    }

    if (spec.name == "qv_definitional" || spec.name == "qv_closed") {
        const std::int64_t lvl = c.integer_or("metric", "qv_level", ex.level);
        if (lvl < 0 || lvl > ex.level)
            bad_config("config: metric.qv_level must be an integer in [0, level]");
        spec.qv_level = int(lvl);
        const auto mode = spec.name == "qv_definitional" ? trajlab::QvMode::definitional
                                                         : trajlab::QvMode::closed_form;
        spec.fn = [mode, lvl = spec.qv_level](const Trajectory& x, const Trajectory& y) {
            return trajlab::qv_metric(x, y, mode, lvl).distance;
        };
        return spec;
    }

    bad_config("config: metric.kind must be one of uniform, skorokhod, qv_definitional, "
               "qv_closed");
}

struct PortfolioBundle {
    trajlab::PathEval eval;
    std::function<double(const Trajectory&)> residual;
    std::string kind = "simple";
    double v0 = 0.0;
    double default_tol = 1e-9;
};

PortfolioBundle build_portfolio(const Experiment& ex) {
    const Config& c = ex.cfg;
    if (!c.has_block("portfolio")) bad_config("config: missing portfolio block");
    c.require_known_keys("portfolio", {"kind", "v0", "stopping", "holdings", "holdings_rule",
                                       "holdings_scale", "phi", "phi_value", "phi_scale"});

    PortfolioBundle pb;
    pb.kind = c.str_or("portfolio", "kind", "simple");
    pb.v0 = c.num_or("portfolio", "v0", 0.0);

    trajlab::StoppingSequence seq = trajlab::deterministic_sequence(1);
    try {
        seq = trajlab::parse_stopping_sequence(c.str_or("portfolio", "stopping", "grid(1)"));
    } catch (const std::exception& e) {
        bad_config("config: portfolio.stopping: " + std::string(e.what()));
    }

    if (pb.kind == "simple") {
        const bool has_list = c.has("portfolio", "holdings");
        const bool has_rule = c.has("portfolio", "holdings_rule");
        if (has_list == has_rule)
            bad_config("config: portfolio block needs exactly one of holdings (list) or "
                       "holdings_rule");

        trajlab::HoldingsRule rule = trajlab::HoldingsRule::constant(0.0);
        std::vector<double> hs;
        if (has_list) {
            hs = c.list("portfolio", "holdings");
        } else {
            const std::string name = c.str("portfolio", "holdings_rule");
            if (name != "proportional")
                bad_config("config: portfolio.holdings_rule must be proportional");
            const double scale = c.num_or("portfolio", "holdings_scale", 0.01);
            rule = trajlab::HoldingsRule::of_stopped_value(
                [scale](double y) { return scale * y; });
        }

        // the realized interval count varies per path (ladders), so the
        // portfolio is assembled path by path
        const double v0 = pb.v0;
        auto make = [seq, hs, rule, has_list, v0](const Trajectory& x) {
            trajlab::SimplePortfolio p;
            p.seq = seq;
            p.v0 = v0;
            const int m = seq.count_m(x);
            if (!has_list || hs.size() == 1) {
                const trajlab::HoldingsRule r =
                    has_list ? trajlab::HoldingsRule::constant(hs[0]) : rule;
                p.holdings.assign(std::size_t(m), r);
            } else {
                for (double h : hs) p.holdings.push_back(trajlab::HoldingsRule::constant(h));
            }
            return p;
        };
        pb.eval = [make](const Trajectory& x) { return trajlab::value_simple(make(x), x); };
        pb.residual = [make](const Trajectory& x) {
            return trajlab::check_self_financing(make(x), x);
        };
        pb.default_tol = 1e-9;
        return pb;
    }

    if (pb.kind == "rebalanced") {
        const std::string phi = c.str_or("portfolio", "phi", "constant");
        trajlab::RebalanceRule rule;
        if (phi == "constant") {
            const double cphi = c.num_or("portfolio", "phi_value", 1.0);
            rule.phi = [cphi](double, double) { return cphi; };
            rule.field = trajlab::SmoothField{[cphi](double, double y) { return cphi * y; },
                                              [](double, double) { return 0.0; },
                                              [cphi](double, double) { return cphi; },
                                              [](double, double) { return 0.0; }};
        } else if (phi == "price") {
            // phi = s y integrates the field u = s y^2 / 2
            const double s = c.num_or("portfolio", "phi_scale", 0.01);
            rule.phi = [s](double, double y) { return s * y; };
            rule.field = trajlab::SmoothField{[s](double, double y) { return 0.5 * s * y * y; },
                                              [](double, double) { return 0.0; },
                                              [s](double, double y) { return s * y; },
                                              [s](double, double) { return s; }};
        } else {
            bad_config("config: portfolio.phi must be constant or price");
        }

        const double v0 = pb.v0;
        auto make = [seq, rule, v0](const Trajectory& x) {
            trajlab::RebalancedPortfolio p;
            p.seq = seq;
            p.v0 = v0;
            p.rules.assign(std::size_t(seq.count_m(x)), rule);
            return p;
        };
        pb.eval = [make](const Trajectory& x) {
            return trajlab::value_rebalanced(make(x), x, x.level());
        };
        pb.residual = [make](const Trajectory& x) {
            return trajlab::check_self_financing(make(x), x, x.level());
        };
        pb.default_tol = 1e-2;  // Riemann route vs decomposition route, grid-limited
        return pb;
    }

    bad_config("config: portfolio.kind must be simple or rebalanced");
}

std::vector<trajlab::Mutator> build_mutators(const Experiment& ex) {
    if (!ex.cfg.has("harness", "mutators")) return trajlab::standard_mutators();
    const std::string raw = ex.cfg.str("harness", "mutators");
    if (raw == "none") return {};
    std::vector<trajlab::Mutator> out;
    for (const std::string& name : split_names(raw)) {
        if (name == "insert")
            out.push_back(trajlab::mutate_jump_insert);
        else if (name == "delete")
            out.push_back(trajlab::mutate_jump_delete);
        else if (name == "shift")
            out.push_back(trajlab::mutate_jump_shift);
        else if (name == "flip")
            out.push_back(trajlab::mutate_driver_flip);
        else
            bad_config("config: harness.mutators: unknown mutator '" + name +
                       "' (insert, delete, shift, flip, or none)");
    }
    return out;
}

// "ball(5) & path_above(0.125, 0.001)": factory terms joined by '&', folded
// into one recipe whose membership test is the conjunction.
std::pair<std::string, std::vector<double>> parse_call(const std::string& term) {
    std::string s = term;
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    if (a == std::string::npos) bad_config("config: harness.recipe: empty term");
    s = s.substr(a, b - a + 1);
    const std::size_t lp = s.find('(');
    if (lp == std::string::npos) return {s, {}};
    if (s.back() != ')') bad_config("config: harness.recipe: malformed term '" + s + "'");
    const std::string name = s.substr(0, lp);
    std::vector<double> args;
    std::istringstream in(s.substr(lp + 1, s.size() - lp - 2));
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
                ++used;
            if (used != item.size()) throw std::invalid_argument(item);
            args.push_back(v);
        } catch (const std::exception&) {
            bad_config("config: harness.recipe: '" + item + "' in term '" + s +
                       "' is not a number");
        }
    }
    return {name, args};
}

trajlab::NeighborhoodRecipe recipe_term(const std::string& term, const Trajectory& center,
                                        const trajlab::PathMetric& metric) {
    const auto [name, args] = parse_call(term);
    const auto want = [&](std::size_t lo, std::size_t hi) {
        if (args.size() < lo || args.size() > hi)
            bad_config("config: harness.recipe: '" + name + "' takes " + std::to_string(lo) +
                       (hi > lo ? ".." + std::to_string(hi) : "") + " arguments");
    };
    if (name == "ball") {
        want(1, 2);
        return args.size() == 1 ? trajlab::recipe_metric_ball(center, metric, args[0])
                                : trajlab::recipe_metric_ball(center, metric, args[0], args[1]);
    }
    if (name == "jump_earlier") {
        want(0, 1);
        return trajlab::recipe_jump_times_earlier(center,
                                                  args.empty() ? 16 : std::int64_t(args[0]));
    }
    if (name == "driver_above" || name == "driver_below") {
        want(1, 2);
        return trajlab::recipe_driver_ordered(center, args[0], name == "driver_above",
                                              args.size() > 1 ? args[1] : 0.05);
    }
    if (name == "factors_above" || name == "factors_below") {
        want(0, 1);
        return trajlab::recipe_factors_ordered(center, name == "factors_above",
                                               args.empty() ? 0.05 : args[0]);
    }
    if (name == "jump_opposite" || name == "jump_along") {
        want(0, 1);
        return trajlab::recipe_jump_displaced(center, name == "jump_opposite",
                                              args.empty() ? 16 : std::int64_t(args[0]));
    }
    if (name == "path_above" || name == "path_below") {
        want(1, 2);
        return trajlab::recipe_path_ordered(center, args[0], name == "path_above",
                                            args.size() > 1 ? args[1] : 0.01);
    }
    bad_config("config: harness.recipe: unknown recipe '" + name + "'");
}

trajlab::NeighborhoodRecipe build_recipe(const Experiment& ex, const Trajectory& center,
                                         const trajlab::PathMetric& metric) {
    const std::string text = ex.cfg.str("harness", "recipe");
    std::vector<std::string> terms;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, '&')) terms.push_back(item);
    if (terms.empty()) bad_config("config: harness.recipe must name at least one term");

    trajlab::NeighborhoodRecipe recipe = recipe_term(terms[0], center, metric);
    for (std::size_t i = 1; i < terms.size(); ++i)
        recipe = trajlab::intersect(recipe, recipe_term(terms[i], center, metric));
    return recipe;
}

// Ball center for small-ball runs: by default a draw of this experiment's own
// sampler, or a draw under target_seed when probing across seeds.
Trajectory small_ball_target(const Experiment& ex) {
    const std::int64_t idx = ex.cfg.integer_or("harness", "target_index", 0);
    if (idx < 0) bad_config("config: harness.target_index must be nonnegative");
    if (ex.cfg.has("harness", "target_seed")) {
        Experiment alt = ex;
        alt.seed = parse_seed(ex.cfg.str("harness", "target_seed"));
        return build_sampler(alt)(std::uint64_t(idx));
    }
    return build_sampler(ex)(std::uint64_t(idx));
}

/* ------------------------------------------------------------------ */
/* Reports and witnesses                                               */
/* ------------------------------------------------------------------ */

json make_witness(const std::string& kind, json coords, double value) {
    return json{{"kind", kind}, {"coords", std::move(coords)}, {"value", value}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << text;
}

int finish(const Experiment& ex, const std::string& op, json results, json witnesses,
           const std::string& verdict, const std::string& default_expect) {
    const std::string expect = ex.cfg.str_or("harness", "expect", default_expect);

    json rep;
    rep["tool"] = "trajlab";
    rep["op"] = op;
    rep["config_hash"] = hex64(ex.cfg.hash());
    rep["seed"] = ex.seed;
    rep["level"] = ex.level;
    rep["jobs"] = ex.jobs;
    rep["verdict"] = verdict;
    rep["expected"] = expect;
    rep["results"] = std::move(results);
    rep["witnesses"] = std::move(witnesses);
    rep["config"] = ex.cfg.canonical();

    fs::create_directories(ex.out);
    const std::string path = ex.out + "/" + op + ".json";
    write_text(path, rep.dump(2) + "\n");

    std::cout << op << ": verdict " << verdict << ", expected " << expect << "\n";
    std::cout << "report: " << path << "\n";
    return verdict == expect ? 0 : 2;
}

/* ------------------------------------------------------------------ */
/* Subcommands                                                         */
/* ------------------------------------------------------------------ */

int run_generate(const Experiment& ex) {
    check_op_tag(ex, "generate");
    check_harness_keys(ex, {"n"});
    const auto sampler = build_sampler(ex);
    const std::int64_t n = ex.cfg.integer_or("harness", "n", 1);
    if (n < 1 || n > 100000) bad_config("config: harness.n must be an integer in [1, 100000]");

    fs::create_directories(ex.out + "/paths");
    json rows = json::array();
    json wits = json::array();
    for (std::int64_t i = 0; i < n; ++i) {
        const Trajectory x = sampler(std::uint64_t(i));
        trajlab::write_trajectory_csv(ex.out + "/paths/path_" + std::to_string(i) + ".csv", x);
        const trajlab::QVCurve qv = trajlab::quadratic_variation(x, x.level());
        const auto [mn, mx] = std::minmax_element(x.values().begin(), x.values().end());
        rows.push_back({{"index", i},
                        {"terminal", x.value(x.steps())},
                        {"min", *mn},
                        {"max", *mx},
                        {"jumps", std::int64_t(x.jump_marks().size())},
                        {"qv_total", qv.total()},
                        {"qv_jump", qv.jump_total()}});
        if (i < 8) wits.push_back(make_witness("path-terminal", {{"index", i}}, x.value(x.steps())));
    }
    json results{{"n", n}, {"paths", std::move(rows)}};
    return finish(ex, "generate", std::move(results), std::move(wits), "generated", "generated");
}

trajlab::SmoothField field_by_name(const std::string& name) {
    if (name == "half_square") return trajlab::field_half_square();
    if (name == "identity") return trajlab::field_identity();
    bad_config("config: harness.field must be half_square or identity");
}

int run_integrate(const Experiment& ex) {
    check_op_tag(ex, "integrate");
    check_harness_keys(ex, {"path_index", "field", "a", "b", "quad_level", "tolerance"});
    const auto sampler = build_sampler(ex);
    const std::int64_t pi = ex.cfg.integer_or("harness", "path_index", 0);
    if (pi < 0) bad_config("config: harness.path_index must be nonnegative");
    const Trajectory x = sampler(std::uint64_t(pi));

    const std::string fname = ex.cfg.str_or("harness", "field", "half_square");
    const trajlab::SmoothField F = field_by_name(fname);
    const double a = ex.cfg.num_or("harness", "a", 0.0);
    const double b = ex.cfg.num_or("harness", "b", x.horizon());
    const std::int64_t q = ex.cfg.integer_or("harness", "quad_level", ex.level);
    if (q < 0 || q > ex.level)
        bad_config("config: harness.quad_level must be an integer in [0, level]");
    const double tol = ex.cfg.num_or("harness", "tolerance", 1e-8);

    const auto rep = trajlab::ito_follmer_decomposition(F, x, a, b, int(q));

    // running left-point sums of dU/dy for the CSV curve
    const std::vector<double> curve =
        trajlab::follmer_cumulative([&F](double t, double y) { return F.du_dy(t, y); }, x, int(q));
    std::string csv = "t,integral\n";
    const std::int64_t stride = std::int64_t{1} << (ex.level - int(q));
    for (std::size_t k = 0; k < curve.size(); ++k) {
        csv += trajlab::detail::fmt_double(x.time(std::int64_t(k) * stride));
        csv += ',';
        csv += trajlab::detail::fmt_double(curve[k]);
        csv += '\n';
    }
    fs::create_directories(ex.out);
    write_text(ex.out + "/integrate_curve.csv", csv);

    json results{{"path_index", pi},
                 {"field", fname},
                 {"a", rep.a},
                 {"b", rep.b},
                 {"quad_level", rep.level},
                 {"boundary", rep.boundary},
                 {"time_integral", rep.time_integral},
                 {"qv_term", rep.qv_term},
                 {"jump_compensation", rep.jump_compensation},
                 {"integral", rep.u},
                 {"direct_riemann", rep.direct},
                 {"residual", rep.residual},
                 {"tolerance", tol}};
    json wits = json::array();
    wits.push_back(make_witness("decomposition-residual", {{"index", pi}}, rep.residual));
    wits.push_back(make_witness("path-terminal", {{"index", pi}}, x.value(x.steps())));
    const std::string verdict = rep.residual <= tol ? "within-tolerance" : "exceeds-tolerance";
    return finish(ex, "integrate", std::move(results), std::move(wits), verdict,
                  "within-tolerance");
}

int run_metric(const Experiment& ex) {
    check_op_tag(ex, "metric");
    check_harness_keys(ex, {"index_a", "index_b"});
    const auto sampler = build_sampler(ex);
    const MetricSpec spec = build_metric(ex);
    const std::int64_t ia = ex.cfg.integer_or("harness", "index_a", 0);
    const std::int64_t ib = ex.cfg.integer_or("harness", "index_b", 1);
    if (ia < 0 || ib < 0) bad_config("config: harness.index_a/index_b must be nonnegative");
    const Trajectory x = sampler(std::uint64_t(ia));
    const Trajectory y = sampler(std::uint64_t(ib));

    json results{{"metric", spec.name}, {"index_a", ia}, {"index_b", ib}};
    double d = 0.0;
    if (spec.name == "skorokhod") {
        const auto rep = trajlab::skorokhod_distance_ub(x, y, spec.warp_m, spec.refine);
        d = rep.distance;
        results["distance"] = rep.distance;
        results["time_deviation"] = rep.time_deviation;
        results["value_mismatch"] = rep.value_mismatch;
        results["uniform_distance"] = trajlab::uniform_distance(x, y);
    } else if (spec.name == "qv_definitional" || spec.name == "qv_closed") {
        const auto mode = spec.name == "qv_definitional" ? trajlab::QvMode::definitional
                                                         : trajlab::QvMode::closed_form;
        const auto rep = trajlab::qv_metric(x, y, mode, spec.qv_level);
        d = rep.distance;
        results["distance"] = rep.distance;
        results["uniform_part"] = rep.uniform_part;
        results["density_part"] = rep.density_part;
    } else {
        d = spec.fn(x, y);
        results["distance"] = d;
    }

    json wits = json::array();
    wits.push_back(make_witness("metric-distance", {{"index_a", ia}, {"index_b", ib}}, d));
    return finish(ex, "metric", std::move(results), std::move(wits), "computed", "computed");
}

int run_portfolio_eval(const Experiment& ex) {
    check_op_tag(ex, "portfolio-eval");
    check_harness_keys(ex, {"path_index", "tolerance"});
    const auto sampler = build_sampler(ex);
    const PortfolioBundle pb = build_portfolio(ex);
    const std::int64_t pi = ex.cfg.integer_or("harness", "path_index", 0);
    if (pi < 0) bad_config("config: harness.path_index must be nonnegative");
    const Trajectory x = sampler(std::uint64_t(pi));

    const trajlab::ValuePath vp = pb.eval(x);
    const double resid = pb.residual(x);
    const double tol = ex.cfg.num_or("harness", "tolerance", pb.default_tol);

    std::string csv = "t,v,phi,psi\n";
    for (std::size_t k = 0; k < vp.times.size(); ++k) {
        csv += trajlab::detail::fmt_double(vp.times[k]);
        csv += ',';
        csv += trajlab::detail::fmt_double(vp.v[k]);
        csv += ',';
        csv += trajlab::detail::fmt_double(vp.phi[k]);
        csv += ',';
        csv += trajlab::detail::fmt_double(vp.psi[k]);
        csv += '\n';
    }
    fs::create_directories(ex.out);
    write_text(ex.out + "/portfolio_value.csv", csv);

    const auto [mn, mx] = std::minmax_element(vp.v.begin(), vp.v.end());
    json results{{"kind", pb.kind},
                 {"path_index", pi},
                 {"v0", vp.v0},
                 {"terminal", vp.terminal()},
                 {"min_value", *mn},
                 {"max_value", *mx},
                 {"self_financing_residual", resid},
                 {"tolerance", tol}};
    json wits = json::array();
    wits.push_back(make_witness("portfolio-terminal", {{"index", pi}}, vp.terminal()));
    wits.push_back(make_witness("self-financing-residual", {{"index", pi}}, resid));
    const std::string verdict = resid <= tol ? "self-financing" : "residual-breach";
    return finish(ex, "portfolio-eval", std::move(results), std::move(wits), verdict,
                  "self-financing");
}

int run_small_ball(const Experiment& ex) {
    check_op_tag(ex, "small-ball");
    check_harness_keys(ex, {"n", "eps", "target_index", "target_seed"});
    const auto sampler = build_sampler(ex);
    const MetricSpec spec = build_metric(ex);
    const Trajectory target = small_ball_target(ex);
    const std::int64_t n = ex.cfg.integer_or("harness", "n", 1000);
    if (n < 1 || n > 10000000)
        bad_config("config: harness.n must be an integer in [1, 10000000]");
    std::vector<double> eps = ex.cfg.list("harness", "eps");
    for (double e : eps)
        if (!(e > 0.0)) bad_config("config: harness.eps radii must be positive");

    const std::vector<double> dist =
        trajlab::small_ball_distances(sampler, target, spec.fn, n, ex.jobs);
    std::int64_t argmin = 0;
    for (std::int64_t i = 1; i < n; ++i)
        if (dist[std::size_t(i)] < dist[std::size_t(argmin)]) argmin = i;

    std::string csv = "epsilon,n,hits,frequency,ci_low,ci_high\n";
    json curve = json::array();
    std::string first_empty;
    for (double e : eps) {
        const trajlab::SmallBallReport r = trajlab::small_ball_tally(dist, e);
        curve.push_back({{"epsilon", r.epsilon},
                         {"hits", r.hits},
                         {"frequency", r.frequency},
                         {"ci_low", r.ci_low},
                         {"ci_high", r.ci_high}});
        csv += trajlab::detail::fmt_double(r.epsilon);
        csv += ',' + std::to_string(r.n) + ',' + std::to_string(r.hits) + ',';
        csv += trajlab::detail::fmt_double(r.frequency);
        csv += ',';
        csv += trajlab::detail::fmt_double(r.ci_low);
        csv += ',';
        csv += trajlab::detail::fmt_double(r.ci_high);
        csv += '\n';
        if (r.hits == 0 && first_empty.empty())
            first_empty = trajlab::detail::fmt_double(r.epsilon);
    }
    fs::create_directories(ex.out);
    write_text(ex.out + "/small_ball.csv", csv);

    json results{{"metric", spec.name},
                 {"n", n},
                 {"target_index", ex.cfg.integer_or("harness", "target_index", 0)},
                 {"min_distance", dist[std::size_t(argmin)]},
                 {"argmin_index", argmin},
                 {"curve", std::move(curve)}};
    if (ex.cfg.has("harness", "target_seed"))
        results["target_seed"] = parse_seed(ex.cfg.str("harness", "target_seed"));
    if (!first_empty.empty()) results["first_empty_epsilon"] = first_empty;

    json wits = json::array();
    wits.push_back(make_witness("ball-distance", {{"index", argmin}}, dist[std::size_t(argmin)]));
    const std::string verdict = first_empty.empty() ? "all-charged" : "empty-ball";
    return finish(ex, "small-ball", std::move(results), std::move(wits), verdict, "all-charged");
}

int run_arb_search(const Experiment& ex) {
    check_op_tag(ex, "arb-search");
    check_harness_keys(ex, {"n", "zero_tol", "mutators"});
    const auto sampler = build_sampler(ex);
    const PortfolioBundle pb = build_portfolio(ex);
    if (pb.v0 != 0.0)
        bad_config("config: portfolio.v0: arbitrage searches must start from zero wealth");

    trajlab::ArbSearchConfig cfg;
    cfg.n = ex.cfg.integer_or("harness", "n", 1000);
    if (cfg.n < 1 || cfg.n > 10000000)
        bad_config("config: harness.n must be an integer in [1, 10000000]");
    cfg.jobs = ex.jobs;
    cfg.zero_tol = ex.cfg.num_or("harness", "zero_tol", 1e-9);
    if (!(cfg.zero_tol >= 0.0)) bad_config("config: harness.zero_tol must be nonnegative");
    cfg.root_seed = ex.seed;
    cfg.mutators = build_mutators(ex);

    const trajlab::ArbitrageVerdict v = trajlab::np_arbitrage_search(pb.eval, sampler, cfg);

    json results{{"n", cfg.n},
                 {"mutators", std::int64_t(cfg.mutators.size())},
                 {"corpus_size", v.corpus_size},
                 {"zero_tol", cfg.zero_tol},
                 {"min_terminal", v.min_terminal},
                 {"max_terminal", v.max_terminal}};
    json wits = json::array();
    if (v.outcome != trajlab::ArbOutcome::no_violation_found) {
        results["witness_time"] = v.witness_time;
        wits.push_back(make_witness("arb-witness",
                                    {{"base_index", v.witness_base_seed},
                                     {"mutator", v.witness_mutator},
                                     {"mutation_seed", v.witness_mutation_seed}},
                                    v.witness_value));
    }
    return finish(ex, "arb-search", std::move(results), std::move(wits),
                  trajlab::to_string(v.outcome), "no-violation-found");
}

int run_slc_test(const Experiment& ex) {
    check_op_tag(ex, "slc-test");
    check_harness_keys(ex, {"path_index", "stopping", "recipe", "m_terms"});
    const auto sampler = build_sampler(ex);
    const MetricSpec spec = build_metric(ex);
    const std::int64_t pi = ex.cfg.integer_or("harness", "path_index", 0);
    if (pi < 0) bad_config("config: harness.path_index must be nonnegative");
    const Trajectory star = sampler(std::uint64_t(pi));

    trajlab::StoppingSequence seq = trajlab::deterministic_sequence(1);
    try {
        seq = trajlab::parse_stopping_sequence(ex.cfg.str("harness", "stopping"));
    } catch (const std::exception& e) {
        bad_config("config: harness.stopping: " + std::string(e.what()));
    }
    const trajlab::NeighborhoodRecipe recipe = build_recipe(ex, star, spec.fn);
    const std::int64_t m_terms = ex.cfg.integer_or("harness", "m_terms", 6);
    if (m_terms < 2 || m_terms > 64)
        bad_config("config: harness.m_terms must be an integer in [2, 64]");

    const trajlab::SLCReport rep =
        trajlab::jointly_slc_test(seq, star, recipe, spec.fn, int(m_terms));

    std::string csv = "term,distance,m_count\n";
    for (std::size_t k = 0; k < rep.distances.size(); ++k)
        csv += std::to_string(k) + ',' + trajlab::detail::fmt_double(rep.distances[k]) + ',' +
               std::to_string(rep.m_counts[k]) + '\n';
    fs::create_directories(ex.out);
    write_text(ex.out + "/slc_terms.csv", csv);

    json results{{"recipe", rep.distances.empty() ? std::string() : recipe.tag},
                 {"metric", spec.name},
                 {"m_terms", m_terms},
                 {"mesh", rep.mesh},
                 {"m_star", rep.m_star},
                 {"tau_star", rep.tau_star},
                 {"stopped_star", rep.stopped_star},
                 {"distances", rep.distances},
                 {"m_counts", rep.m_counts},
                 {"tau_terms", rep.tau_table},
                 {"stopped_terms", rep.stopped_table},
                 {"pass_times", rep.pass_times},
                 {"pass_values", rep.pass_values},
                 {"pass_count", rep.pass_count}};
    json wits = json::array();
    wits.push_back(
        make_witness("slc-distance", {{"term", m_terms - 1}}, rep.distances.back()));

    // a count mismatch makes the per-term comparisons moot, so it wins
    std::string verdict = "slc-pass";
    if (!rep.pass_count)
        verdict = "fails-count";
    else if (!rep.pass_times)
        verdict = "fails-times";
    else if (!rep.pass_values)
        verdict = "fails-values";
    return finish(ex, "slc-test", std::move(results), std::move(wits), verdict, "slc-pass");
}

int run_transfer(const Experiment& ex) {
    check_op_tag(ex, "transfer");
    check_harness_keys(ex, {"n", "zero_tol", "precheck", "precheck_n"});
    const auto sampler = build_sampler(ex);
    const PortfolioBundle pb = build_portfolio(ex);
    if (pb.v0 != 0.0)
        bad_config("config: portfolio.v0: transfer experiments must start from zero wealth");

    trajlab::TransferConfig cfg;
    cfg.n = ex.cfg.integer_or("harness", "n", 10000);
    if (cfg.n < 2 || cfg.n > 10000000)
        bad_config("config: harness.n must be an integer in [2, 10000000]");
    cfg.jobs = ex.jobs;
    cfg.martingale_precheck = ex.cfg.flag_or("harness", "precheck", true);
    cfg.precheck_n = ex.cfg.integer_or("harness", "precheck_n", 1000);
    if (cfg.precheck_n < 2) bad_config("config: harness.precheck_n must be at least 2");
    cfg.zero_tol = ex.cfg.num_or("harness", "zero_tol", 1e-9);
    if (!(cfg.zero_tol >= 0.0)) bad_config("config: harness.zero_tol must be nonnegative");

    const trajlab::TransferReport rep = trajlab::transfer_experiment(pb.eval, sampler, cfg);

    json results{{"n", rep.n},
                 {"mean", rep.mean},
                 {"se", rep.se},
                 {"frac_positive", rep.frac_positive},
                 {"min_terminal", rep.min_terminal},
                 {"max_terminal", rep.max_terminal},
                 {"argmin_index", rep.argmin_index},
                 {"argmax_index", rep.argmax_index},
                 {"mean_within_3se", rep.mean_within_3se},
                 {"def5_pattern", rep.def5_pattern}};
    json wits = json::array();
    wits.push_back(
        make_witness("portfolio-terminal", {{"index", rep.argmin_index}}, rep.min_terminal));
    wits.push_back(
        make_witness("portfolio-terminal", {{"index", rep.argmax_index}}, rep.max_terminal));

    const std::string verdict = rep.def5_pattern
                                    ? "def5-pattern"
                                    : (rep.mean_within_3se ? "transfer-consistent" : "mean-drift");
    return finish(ex, "transfer", std::move(results), std::move(wits), verdict,
                  "transfer-consistent");
}

/* ------------------------------------------------------------------ */
/* Replay                                                              */
/* ------------------------------------------------------------------ */

double recompute_witness(const Experiment& ex, const json& w) {
    const std::string kind = w.at("kind").get<std::string>();
    const json& c = w.at("coords");

    if (kind == "path-terminal") {
        const Trajectory x = build_sampler(ex)(c.at("index").get<std::uint64_t>());
        return x.value(x.steps());
    }
    if (kind == "portfolio-terminal")
        return build_portfolio(ex)
            .eval(build_sampler(ex)(c.at("index").get<std::uint64_t>()))
            .terminal();
    if (kind == "self-financing-residual")
        return build_portfolio(ex).residual(build_sampler(ex)(c.at("index").get<std::uint64_t>()));
    if (kind == "decomposition-residual") {
        const Trajectory x = build_sampler(ex)(c.at("index").get<std::uint64_t>());
        const trajlab::SmoothField F =
            field_by_name(ex.cfg.str_or("harness", "field", "half_square"));
        const double a = ex.cfg.num_or("harness", "a", 0.0);
        const double b = ex.cfg.num_or("harness", "b", x.horizon());
        const std::int64_t q = ex.cfg.integer_or("harness", "quad_level", ex.level);
        return trajlab::ito_follmer_decomposition(F, x, a, b, int(q)).residual;
    }
    if (kind == "metric-distance") {
        const auto sampler = build_sampler(ex);
        return build_metric(ex).fn(sampler(c.at("index_a").get<std::uint64_t>()),
                                   sampler(c.at("index_b").get<std::uint64_t>()));
    }
    if (kind == "ball-distance")
        return build_metric(ex).fn(build_sampler(ex)(c.at("index").get<std::uint64_t>()),
                                   small_ball_target(ex));
    if (kind == "arb-witness") {
        Trajectory x = build_sampler(ex)(c.at("base_index").get<std::uint64_t>());
        const int mut = c.at("mutator").get<int>();
        if (mut >= 0) {
            const auto mutators = build_mutators(ex);
            if (std::size_t(mut) >= mutators.size())
                throw std::runtime_error("replay: witness names mutator " + std::to_string(mut) +
                                         " but the config lists only " +
                                         std::to_string(mutators.size()));
            auto eng = trajlab::make_engine(c.at("mutation_seed").get<std::uint64_t>());
            x = mutators[std::size_t(mut)](x, eng);
        }
        return build_portfolio(ex).eval(x).terminal();
    }
    if (kind == "slc-distance") {
        const std::int64_t pi = ex.cfg.integer_or("harness", "path_index", 0);
        const Trajectory star = build_sampler(ex)(std::uint64_t(pi));
        const MetricSpec spec = build_metric(ex);
        const auto recipe = build_recipe(ex, star, spec.fn);
        return spec.fn(recipe.emit(c.at("term").get<int>()), star);
    }
    throw std::runtime_error("replay: unknown witness kind '" + kind + "'");
}

int run_replay(const std::string& report_path, const std::optional<std::string>& config_path) {
    std::ifstream f(report_path, std::ios::binary);
    if (!f) throw std::runtime_error("replay: cannot read report '" + report_path + "'");
    const json rep = json::parse(f);

    const Config cfg = Config::parse(rep.at("config").get<std::string>());
    const std::string recorded_hash = rep.at("config_hash").get<std::string>();
    if (hex64(cfg.hash()) != recorded_hash)
        throw std::runtime_error("replay: report is corrupt: embedded config hashes to " +
                                 hex64(cfg.hash()) + " but the report records " + recorded_hash);
    if (config_path) {
        const Config given = Config::load(*config_path);
        if (given.hash() != cfg.hash())
            throw std::runtime_error("replay: config hash mismatch: report records " +
                                     recorded_hash + ", '" + *config_path + "' hashes to " +
                                     hex64(given.hash()));
    }

    const Experiment ex = experiment_from(cfg);
    const json& wits = rep.at("witnesses");
    int mismatches = 0;
    int index = 0;
    for (const json& w : wits) {
        const double recorded = w.at("value").get<double>();
        const double recomputed = recompute_witness(ex, w);
        const bool ok =
            std::abs(recorded - recomputed) <= 1e-12 * std::max(1.0, std::abs(recorded));
        std::cout << "witness " << index << " [" << w.at("kind").get<std::string>()
                  << "]: recorded " << trajlab::detail::fmt_double(recorded) << ", recomputed "
                  << trajlab::detail::fmt_double(recomputed) << (ok ? " ok" : " MISMATCH")
                  << "\n";
        mismatches += ok ? 0 : 1;
        ++index;
    }
    std::cout << "replay: " << index << " witnesses, " << mismatches << " mismatches\n";
    return mismatches == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajectory-market laboratory: deterministic pathwise experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string report_path;
    std::string replay_config;
    Overrides ov;

    const std::map<std::string, std::pair<const char*, int (*)(const Experiment&)>> ops = {
        {"generate", {"sample class members and write their path CSVs", run_generate}},
        {"integrate", {"pathwise change-of-variable decomposition along one member", run_integrate}},
        {"metric", {"distance between two sampled members", run_metric}},
        {"portfolio-eval", {"value a portfolio along one member and check self-financing",
                            run_portfolio_eval}},
        {"small-ball", {"empirical small-ball frequencies around a target member", run_small_ball}},
        {"arb-search", {"scan a sampled corpus for arbitrage patterns", run_arb_search}},
        {"slc-test", {"joint strong local continuity of a stopping sequence", run_slc_test}},
        {"transfer", {"terminal-value statistics of a portfolio under a process law",
                      run_transfer}}};

    for (const auto& [name, op] : ops) {
        CLI::App* sub = app.add_subcommand(name, op.first);
        sub->add_option("config", config_path, "experiment config file")->required();
        sub->add_option("--seed", ov.seed, "override the root seed");
        sub->add_option("--level", ov.level, "override the dyadic refinement level");
        sub->add_option("--jobs", ov.jobs, "override the worker count");
        sub->add_option("--out", ov.out, "override the output directory");
    }

    CLI::App* replay = app.add_subcommand("replay", "recompute the witnesses of a report");
    replay->add_option("report,--report", report_path, "report JSON written by a run")->required();
    replay->add_option("--config", replay_config, "config file to check against the report hash");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const CLI::App* sub = app.get_subcommands().front();
        if (sub->get_name() == "replay")
            return run_replay(report_path, replay_config.empty()
                                               ? std::nullopt
                                               : std::optional<std::string>(replay_config));
        return ops.at(sub->get_name()).second(make_experiment(config_path, ov));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
