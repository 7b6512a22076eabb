#pragma once

// Generators for the trajectory classes and the sampled processes the
// laboratory's experiments run on: deterministic jump-drift members,
// Brownian and exact-QV walk drivers, jump-diffusion class members and
// processes, the regularized Heston-type model with averaged CIR variance,
// fractional Brownian motion add-ons, and the modified Heston variant.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trajlab/fbm.hpp"
#include "trajlab/quadratic_variation.hpp"
#include "trajlab/rng.hpp"
#include "trajlab/trajectory.hpp"

namespace trajlab {

inline double total_variation(const std::vector<double>& v) {
    double tv = 0.0;
    for (std::size_t k = 0; k + 1 < v.size(); ++k) tv += std::abs(v[k + 1] - v[k]);
    return tv;
}

namespace detail {

// Nearest grid node for each jump time; a taken node (or node 0) moves to the
// next free node to the right so every jump keeps its own mark.
inline std::vector<std::int64_t> snap_jump_times(const std::vector<double>& times, int level,
                                                 double horizon) {
    const std::int64_t n = std::int64_t{1} << level;
    const double dt = horizon / double(n);
    std::vector<std::int64_t> out;
    std::vector<bool> used(std::size_t(n) + 1, false);
    for (double t : times) {
        if (!(t > 0.0) || !(t < horizon))
            throw std::invalid_argument("jump times must lie strictly inside (0, horizon)");
        std::int64_t k = std::llround(t / dt);
        k = std::max<std::int64_t>(k, 1);
        while (k <= n && used[std::size_t(k)]) ++k;
        if (k > n) throw std::invalid_argument("too many jumps near the horizon for this grid");
        used[std::size_t(k)] = true;
        out.push_back(k);
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// x(t) = x0 e^(mu t) (1+a)^n(t): drift plus equal multiplicative jumps, the
// drift sign opposing the jump direction.

struct PoissonExpParams {
    double x0 = 100.0;
    double mu = 0.0;
    double a = 0.0;
};

inline void validate(const PoissonExpParams& p) {
    if (!(p.x0 > 0.0)) throw std::invalid_argument("poisson_exp: x0 must be positive");
    if (!(1.0 + p.a > 0.0)) throw std::invalid_argument("poisson_exp: need 1 + a > 0");
    if (p.mu * p.a > 0.0)
        throw std::invalid_argument("poisson_exp: drift and jumps must not share a sign");
}

inline Trajectory gen_poisson_exp(const PoissonExpParams& p, std::vector<double> jump_times,
                                  int level, double horizon = 1.0) {
    validate(p);
    std::sort(jump_times.begin(), jump_times.end());
    if (std::adjacent_find(jump_times.begin(), jump_times.end()) != jump_times.end())
        throw std::invalid_argument("gen_poisson_exp: duplicate jump times");
    if (!jump_times.empty() && p.a == 0.0)
        throw std::invalid_argument("gen_poisson_exp: jump factor a = 0 cannot mark jumps");

    const auto idx = detail::snap_jump_times(jump_times, level, horizon);
    const std::int64_t n = std::int64_t{1} << level;
    std::vector<double> vals(std::size_t(n) + 1);
    std::vector<JumpMark> marks;
    std::size_t next = 0;
    int count = 0;
    auto info = std::make_shared<ClassInfo>();
    for (std::int64_t k = 0; k <= n; ++k) {
        const double t = horizon * (double(k) / double(n));
        if (next < idx.size() && idx[next] == k) {
            marks.push_back({k, p.x0 * std::exp(p.mu * t) * std::pow(1.0 + p.a, count)});
            ++count;
            ++next;
            info->jump_times.push_back(t);
            info->jump_factors.push_back(p.a);
        }
        vals[std::size_t(k)] = p.x0 * std::exp(p.mu * t) * std::pow(1.0 + p.a, count);
    }
    info->klass = "poisson_exp";
    info->x0 = p.x0;
    info->mu = p.mu;
    return make_trajectory(level, horizon, vals, marks).with_class_info(std::move(info));
}

// ---------------------------------------------------------------------------
// Drivers z with z(0) = 0.

inline std::vector<double> gen_brownian_z(int level, std::uint64_t seed, double horizon = 1.0) {
    const std::int64_t n = std::int64_t{1} << level;
    auto eng = make_engine(derive_seed(seed, stream::brownian, 0));
    std::normal_distribution<double> normal(0.0, std::sqrt(horizon / double(n)));
    std::vector<double> z(std::size_t(n) + 1, 0.0);
    for (std::int64_t k = 1; k <= n; ++k) z[std::size_t(k)] = z[std::size_t(k) - 1] + normal(eng);
    return z;
}

// Rademacher walk with steps +-sqrt(dt): realizes [z]_t = t exactly at every
// refinement level, which the Gaussian driver only approaches in law.
inline std::vector<double> gen_walk_z(int level, std::uint64_t seed, double horizon = 1.0) {
    const std::int64_t n = std::int64_t{1} << level;
    auto eng = make_engine(derive_seed(seed, stream::walk, 0));
    std::bernoulli_distribution coin(0.5);
    const double step = std::sqrt(horizon / double(n));
    std::vector<double> z(std::size_t(n) + 1, 0.0);
    for (std::int64_t k = 1; k <= n; ++k)
        z[std::size_t(k)] = z[std::size_t(k) - 1] + (coin(eng) ? step : -step);
    return z;
}

// ---------------------------------------------------------------------------
// x(t) = x0 e^(sigma z(t)) prod (1+a_i): the jump-diffusion class.

// Admissible jump factors: either a finite list or a closed interval, with
// inf C > -1 so prices stay positive.
class FactorSet {
  public:
    static FactorSet finite(std::vector<double> values) {
        if (values.empty()) throw std::invalid_argument("FactorSet: empty factor list");
        for (double c : values)
            if (!(c > -1.0)) throw std::invalid_argument("FactorSet: factors must exceed -1");
        FactorSet s;
        s.values_ = std::move(values);
        return s;
    }

    static FactorSet interval(double lo, double hi) {
        if (!(lo > -1.0) || !(lo <= hi))
            throw std::invalid_argument("FactorSet: need -1 < lo <= hi");
        FactorSet s;
        s.lo_ = lo;
        s.hi_ = hi;
        return s;
    }

    bool contains(double c) const {
        if (!values_.empty())
            return std::find(values_.begin(), values_.end(), c) != values_.end();
        return c >= lo_ && c <= hi_;
    }

    // inf over C of |c|; jump-magnitude stopping and the transfer harness
    // need this positive, else zero-size jumps would evade detection
    double min_abs() const {
        if (!values_.empty()) {
            double m = std::abs(values_.front());
            for (double c : values_) m = std::min(m, std::abs(c));
            return m;
        }
        if (lo_ <= 0.0 && hi_ >= 0.0) return 0.0;
        return std::min(std::abs(lo_), std::abs(hi_));
    }

    bool all_positive() const {
        if (!values_.empty()) return *std::min_element(values_.begin(), values_.end()) > 0.0;
        return lo_ > 0.0;
    }

  private:
    std::vector<double> values_;
    double lo_ = 0.0, hi_ = 0.0;
};

struct JumpDiffusionClassParams {
    double x0 = 100.0;
    double sigma = 0.2;
    FactorSet factors = FactorSet::interval(-0.5, 0.5);
};

inline void validate(const JumpDiffusionClassParams& p) {
    if (!(p.x0 > 0.0)) throw std::invalid_argument("jump_diffusion: x0 must be positive");
    if (!(p.sigma > 0.0)) throw std::invalid_argument("jump_diffusion: sigma must be positive");
}

inline Trajectory gen_jump_diffusion_member(const JumpDiffusionClassParams& p,
                                            const std::vector<double>& z,
                                            std::vector<std::pair<double, double>> jump_spec,
                                            double horizon = 1.0) {
    validate(p);
    const std::int64_t n = std::int64_t(z.size()) - 1;
    if (n < 1 || (n & (n - 1)) != 0)
        throw std::invalid_argument("gen_jump_diffusion_member: driver size must be 2^level + 1");
    int level = 0;
    while ((std::int64_t{1} << level) < n) ++level;
    if (z[0] != 0.0)
        throw std::invalid_argument("gen_jump_diffusion_member: driver must start at 0");

    std::sort(jump_spec.begin(), jump_spec.end());
    std::vector<double> times;
    for (const auto& [t, c] : jump_spec) {
        if (!p.factors.contains(c))
            throw std::invalid_argument("gen_jump_diffusion_member: factor outside C");
        if (c == 0.0)
            throw std::invalid_argument("gen_jump_diffusion_member: zero factor cannot mark a jump");
        times.push_back(t);
    }
    if (std::adjacent_find(times.begin(), times.end()) != times.end())
        throw std::invalid_argument("gen_jump_diffusion_member: duplicate jump times");
    const auto idx = detail::snap_jump_times(times, level, horizon);

    std::vector<double> vals(z.size());
    std::vector<JumpMark> marks;
    auto info = std::make_shared<ClassInfo>();
    std::size_t next = 0;
    double prod = 1.0;
    for (std::int64_t k = 0; k <= n; ++k) {
        const double cont = p.x0 * std::exp(p.sigma * z[std::size_t(k)]);
        if (next < idx.size() && idx[next] == k) {
            marks.push_back({k, cont * prod});
            prod *= 1.0 + jump_spec[next].second;
            info->jump_times.push_back(horizon * (double(k) / double(n)));
            info->jump_factors.push_back(jump_spec[next].second);
            ++next;
        }
        vals[std::size_t(k)] = cont * prod;
    }
    info->klass = "jump_diffusion";
    info->x0 = p.x0;
    info->sigma = p.sigma;
    info->driver = z;
    return make_trajectory(level, horizon, vals, marks).with_class_info(std::move(info));
}

// ---------------------------------------------------------------------------
// Z_t = x0 e^((mu - sigma^2/2) t + sigma W_t) prod (1+X_i): the sampled
// exponential jump-diffusion process.

// Finite-support jump factor law.
struct JumpLaw {
    std::vector<double> factors;
    std::vector<double> weights;

    double mean() const {
        double wsum = 0.0, fsum = 0.0;
        for (std::size_t i = 0; i < factors.size(); ++i) {
            wsum += weights[i];
            fsum += weights[i] * factors[i];
        }
        return fsum / wsum;
    }
};

inline void validate(const JumpLaw& law) {
    if (law.factors.empty() || law.factors.size() != law.weights.size())
        throw std::invalid_argument("JumpLaw: factors and weights must match and be nonempty");
    double wsum = 0.0;
    for (double w : law.weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("JumpLaw: weights must be nonnegative");
        wsum += w;
    }
    if (!(wsum > 0.0)) throw std::invalid_argument("JumpLaw: weights must not all vanish");
    for (double f : law.factors)
        if (!(f > -1.0)) throw std::invalid_argument("JumpLaw: factors must exceed -1");
}

struct JumpDiffusionProcessParams {
    double x0 = 100.0;
    double mu = 0.0;
    double sigma = 0.2;
    double lambda = 1.0;
    JumpLaw law{{0.1}, {1.0}};
};

// Drift that makes e^(-0 t) Z a martingale: mu = -lambda E[X].
inline double martingale_drift(double lambda, const JumpLaw& law) { return -lambda * law.mean(); }

inline void validate(const JumpDiffusionProcessParams& p) {
    if (!(p.x0 > 0.0)) throw std::invalid_argument("jump_diffusion_process: x0 must be positive");
    if (!(p.sigma > 0.0))
        throw std::invalid_argument("jump_diffusion_process: sigma must be positive");
    if (!(p.lambda >= 0.0))
        throw std::invalid_argument("jump_diffusion_process: lambda must be nonnegative");
    validate(p.law);
}

inline Trajectory sample_jump_diffusion_process(const JumpDiffusionProcessParams& p, int level,
                                                std::uint64_t seed, double horizon = 1.0) {
    validate(p);
    const std::int64_t n = std::int64_t{1} << level;
    const double dt = horizon / double(n);

    auto ej = make_engine(derive_seed(seed, stream::jumps, 0));
    int njumps = 0;
    if (p.lambda > 0.0) njumps = std::poisson_distribution<int>(p.lambda * horizon)(ej);
    std::uniform_real_distribution<double> uni(0.0, horizon);
    std::vector<double> raw_times;
    for (int i = 0; i < njumps; ++i) {
        double t = uni(ej);
        while (!(t > 0.0) || !(t < horizon)) t = uni(ej);
        raw_times.push_back(t);
    }
    std::sort(raw_times.begin(), raw_times.end());
    std::discrete_distribution<int> pick(p.law.weights.begin(), p.law.weights.end());
    std::vector<double> factors;
    for (int i = 0; i < njumps; ++i) factors.push_back(p.law.factors[std::size_t(pick(ej))]);
    const auto idx = detail::snap_jump_times(raw_times, level, horizon);

    auto ew = make_engine(derive_seed(seed, stream::brownian, 0));
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));

    std::vector<double> vals(std::size_t(n) + 1);
    std::vector<JumpMark> marks;
    auto info = std::make_shared<ClassInfo>();
    double w = 0.0, prod = 1.0;
    std::size_t next = 0;
    std::vector<double> driver(std::size_t(n) + 1, 0.0);
    for (std::int64_t k = 0; k <= n; ++k) {
        if (k > 0) w += normal(ew);
        driver[std::size_t(k)] = w;
        const double t = double(k) * dt;
        const double cont = p.x0 * std::exp((p.mu - 0.5 * p.sigma * p.sigma) * t + p.sigma * w);
        if (next < idx.size() && idx[next] == k) {
            marks.push_back({k, cont * prod});
            prod *= 1.0 + factors[next];
            info->jump_times.push_back(t);
            info->jump_factors.push_back(factors[next]);
            ++next;
        }
        vals[std::size_t(k)] = cont * prod;
    }
    info->klass = "jump_diffusion_process";
    info->x0 = p.x0;
    info->mu = p.mu;
    info->sigma = p.sigma;
    info->driver = std::move(driver);
    info->seed = seed;
    return make_trajectory(level, horizon, vals, marks).with_class_info(std::move(info));
}

// ---------------------------------------------------------------------------
// Heston-type model with window-averaged CIR variance.

enum class HestonDriver { gaussian, walk };

struct HestonTypeParams {
    double z0 = 100.0;
    double mu = 0.0;
    double alpha = 0.5;   // weight splitting the price noise across B1 and B2
    double kappa = 2.0;   // CIR mean-reversion speed
    double theta = 0.04;  // CIR long-run variance
    double xi = 0.3;      // CIR vol-of-vol
    double window = 0.125;  // trailing average width h
    double v0 = 0.04;
    HestonDriver driver = HestonDriver::gaussian;
};

inline void validate(const HestonTypeParams& p) {
    if (!(p.z0 > 0.0)) throw std::invalid_argument("heston: z0 must be positive");
    if (!(p.alpha > 0.0) || !(p.alpha < 1.0))
        throw std::invalid_argument("heston: alpha must lie strictly inside (0, 1)");
    if (!(p.kappa > 0.0) || !(p.theta > 0.0) || !(p.xi > 0.0))
        throw std::invalid_argument("heston: kappa, theta, xi must be positive");
    if (!(p.window > 0.0)) throw std::invalid_argument("heston: window must be positive");
    if (!(p.v0 > 0.0)) throw std::invalid_argument("heston: v0 must be positive");
    if (2.0 * p.kappa * p.theta < p.xi * p.xi)
        throw std::invalid_argument("heston: Feller condition 2 k theta >= xi^2 violated");
}

struct CirPaths {
    std::vector<double> v;       // full-truncation Euler variance path
    std::vector<double> v_bar;   // trailing window average of v^+
    std::vector<double> sigma;   // sqrt(v_bar)
};

namespace detail {

// CIR + window average; optionally hands back the B2 increments so the price
// sampler can share them (the model's correlation structure).
inline CirPaths run_cir(const HestonTypeParams& p, int level, std::uint64_t seed, double horizon,
                        std::vector<double>* db2_out) {
    const std::int64_t n = std::int64_t{1} << level;
    const double dt = horizon / double(n);
    auto eng = make_engine(derive_seed(seed, stream::cir, 0));
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));

    CirPaths out;
    out.v.assign(std::size_t(n) + 1, 0.0);
    out.v[0] = p.v0;
    if (db2_out) db2_out->assign(std::size_t(n), 0.0);
    for (std::int64_t k = 0; k < n; ++k) {
        const double vp = std::max(out.v[std::size_t(k)], 0.0);
        const double db = normal(eng);
        if (db2_out) (*db2_out)[std::size_t(k)] = db;
        out.v[std::size_t(k) + 1] =
            out.v[std::size_t(k)] + p.kappa * (p.theta - vp) * dt + p.xi * std::sqrt(vp) * db;
    }

    // trailing trapezoid over [t - h, t] with v = v0 before time 0
    const std::int64_t hn = std::max<std::int64_t>(1, std::llround(p.window / dt));
    auto vplus = [&](std::int64_t j) { return j < 0 ? p.v0 : std::max(out.v[std::size_t(j)], 0.0); };
    out.v_bar.assign(std::size_t(n) + 1, 0.0);
    out.sigma.assign(std::size_t(n) + 1, 0.0);
    double interior = 0.0;  // sum of vplus over (k - hn, k) exclusive
    for (std::int64_t j = 1 - hn; j < 0; ++j) interior += vplus(j);
    for (std::int64_t k = 0; k <= n; ++k) {
        const double bar =
            (0.5 * vplus(k - hn) + interior + 0.5 * vplus(k)) / double(hn);
        out.v_bar[std::size_t(k)] = bar;
        out.sigma[std::size_t(k)] = std::sqrt(std::max(bar, 1e-12));
        interior += vplus(k) - vplus(k + 1 - hn);
    }
    return out;
}

}  // namespace detail

inline CirPaths sample_cir_regularized(const HestonTypeParams& p, int level, std::uint64_t seed,
                                       double horizon = 1.0) {
    validate(p);
    return detail::run_cir(p, level, seed, horizon, nullptr);
}

namespace detail {

inline std::pair<std::vector<double>, std::vector<double>> heston_log_path(
    const HestonTypeParams& p, int level, std::uint64_t seed, double horizon) {
    validate(p);
    const std::int64_t n = std::int64_t{1} << level;
    const double dt = horizon / double(n);

    std::vector<double> db2;
    CirPaths cir = run_cir(p, level, seed, horizon, &db2);

    std::vector<double> logpath(std::size_t(n) + 1, 0.0);
    if (p.driver == HestonDriver::gaussian) {
        auto e1 = make_engine(derive_seed(seed, stream::heston, 0));
        std::normal_distribution<double> normal(0.0, std::sqrt(dt));
        const double beta = std::sqrt(1.0 - p.alpha * p.alpha);
        for (std::int64_t k = 0; k < n; ++k) {
            const double s = cir.sigma[std::size_t(k)];
            logpath[std::size_t(k) + 1] =
                logpath[std::size_t(k)] + (p.mu - 0.5 * s * s) * dt +
                s * (p.alpha * normal(e1) + beta * db2[std::size_t(k)]);
        }
    } else {
        auto e1 = make_engine(derive_seed(seed, stream::walk, 0));
        std::bernoulli_distribution coin(0.5);
        const double step = std::sqrt(dt);
        for (std::int64_t k = 0; k < n; ++k) {
            const double s = cir.sigma[std::size_t(k)];
            logpath[std::size_t(k) + 1] = logpath[std::size_t(k)] + (p.mu - 0.5 * s * s) * dt +
                                          s * (coin(e1) ? step : -step);
        }
    }
    return {std::move(logpath), std::move(cir.sigma)};
}

}  // namespace detail

inline Trajectory sample_heston_type(const HestonTypeParams& p, int level, std::uint64_t seed,
                                     double horizon = 1.0) {
    auto [logpath, sigma] = detail::heston_log_path(p, level, seed, horizon);
    std::vector<double> vals(logpath.size());
    for (std::size_t k = 0; k < vals.size(); ++k) vals[k] = p.z0 * std::exp(logpath[k]);
    auto info = std::make_shared<ClassInfo>();
    info->klass = "heston";
    info->x0 = p.z0;
    info->mu = p.mu;
    info->sigma_curve = std::move(sigma);
    info->seed = seed;
    return make_trajectory(level, horizon, vals).with_class_info(std::move(info));
}

// ---------------------------------------------------------------------------
// Modified Heston: the same log-path plus an independent additive term Y.

struct YSpec {
    enum class Kind { none, fbm, user };
    Kind kind = Kind::none;
    double hurst = 0.6;
    std::vector<double> path;        // for Kind::user, sampled on the same grid
    double null_qv_threshold = 0.02;  // declared ceiling for [Y] at path level

    static YSpec none() { return {}; }
    static YSpec fractional(double hurst, double threshold = 0.02) {
        YSpec y;
        y.kind = Kind::fbm;
        y.hurst = hurst;
        y.null_qv_threshold = threshold;
        return y;
    }
    static YSpec user(std::vector<double> path, double threshold = 0.02) {
        YSpec y;
        y.kind = Kind::user;
        y.path = std::move(path);
        y.null_qv_threshold = threshold;
        return y;
    }
};

struct ModifiedHestonParams {
    HestonTypeParams heston;
    YSpec y;
};

inline Trajectory sample_modified_heston(const ModifiedHestonParams& p, int level,
                                         std::uint64_t seed, double horizon = 1.0) {
    const std::int64_t n = std::int64_t{1} << level;
    std::vector<double> y;
    switch (p.y.kind) {
        case YSpec::Kind::none:
            y.assign(std::size_t(n) + 1, 0.0);
            break;
        case YSpec::Kind::fbm:
            y = sample_fbm(p.y.hurst, level, derive_seed(seed, stream::fbm, 0), horizon);
            break;
        case YSpec::Kind::user:
            y = p.y.path;
            break;
    }
    if (std::int64_t(y.size()) != n + 1)
        throw std::invalid_argument("sample_modified_heston: Y size does not match the grid");
    if (y[0] != 0.0) throw std::invalid_argument("sample_modified_heston: Y must start at 0");
    for (double v : y)
        if (!std::isfinite(v))
            throw std::invalid_argument("sample_modified_heston: Y must be finite");
    if (p.y.kind != YSpec::Kind::none) {
        const double qv = path_qv(y, level, level);
        if (qv > p.y.null_qv_threshold)
            throw std::invalid_argument(
                "sample_modified_heston: Y breaches the declared null-QV threshold ([Y] = " +
                std::to_string(qv) + ")");
    }

    auto [logpath, sigma] = detail::heston_log_path(p.heston, level, seed, horizon);
    std::vector<double> vals(logpath.size());
    for (std::size_t k = 0; k < vals.size(); ++k)
        vals[k] = p.heston.z0 * std::exp(logpath[k] + y[k]);
    auto info = std::make_shared<ClassInfo>();
    info->klass = "modified_heston";
    info->x0 = p.heston.z0;
    info->mu = p.heston.mu;
    info->sigma_curve = std::move(sigma);
    info->seed = seed;
    return make_trajectory(level, horizon, vals).with_class_info(std::move(info));
}

}  // namespace trajlab
