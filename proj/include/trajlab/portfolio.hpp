#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "trajlab/integration.hpp"
#include "trajlab/stopping.hpp"
#include "trajlab/trajectory.hpp"

namespace trajlab {

/**
 * Holdings for one interval of a simple portfolio. The family is deliberately
 * closed: every form reads the path only through x(tau_k), so "holdings
 * depend on x restricted to [0, tau_k]" holds by construction and the
 * truncation fuzz in the test suite is decidable.
 */
class HoldingsRule {
  public:
    static HoldingsRule constant(double c) {
        HoldingsRule r;
        r.kind_ = Kind::constant;
        r.c_ = c;
        return r;
    }

    /** f applied to the stopped value x(tau_k); f must be continuous. */
    static HoldingsRule of_stopped_value(std::function<double(double)> f) {
        if (!f) throw std::invalid_argument("of_stopped_value: empty function");
        HoldingsRule r;
        r.kind_ = Kind::stopped;
        r.f_ = std::move(f);
        return r;
    }

    static HoldingsRule min_of(HoldingsRule a, HoldingsRule b) { return compose(Kind::min, std::move(a), std::move(b)); }
    static HoldingsRule max_of(HoldingsRule a, HoldingsRule b) { return compose(Kind::max, std::move(a), std::move(b)); }

    double eval(double stopped_value) const {
        switch (kind_) {
            case Kind::constant: return c_;
            case Kind::stopped: return f_(stopped_value);
            case Kind::min: return std::min(kids_[0].eval(stopped_value), kids_[1].eval(stopped_value));
            case Kind::max: return std::max(kids_[0].eval(stopped_value), kids_[1].eval(stopped_value));
        }
        return c_;
    }

  private:
    enum class Kind { constant, stopped, min, max };

    static HoldingsRule compose(Kind k, HoldingsRule a, HoldingsRule b) {
        HoldingsRule r;
        r.kind_ = k;
        r.kids_.push_back(std::move(a));
        r.kids_.push_back(std::move(b));
        return r;
    }

    Kind kind_ = Kind::constant;
    double c_ = 0.0;
    std::function<double(double)> f_;
    std::vector<HoldingsRule> kids_;
};

/** Piecewise-constant holdings over a stopping sequence, started at V_0. */
struct SimplePortfolio {
    StoppingSequence seq = deterministic_sequence(1);  // single interval [0, T]
    std::vector<HoldingsRule> holdings;  // one per interval (tau_k, tau_{k+1}]
    double v0 = 0.0;
};

/**
 * Continuously rebalanced holdings: on (tau_i, tau_{i+1}] the position is
 * phi(t, x(t-)). The optional field must satisfy field.du_dy == phi; it is
 * what the decomposition cross-check differentiates.
 */
struct RebalanceRule {
    std::function<double(double, double)> phi;
    std::optional<SmoothField> field;
};

struct RebalancedPortfolio {
    StoppingSequence seq = deterministic_sequence(1);  // single interval [0, T]
    std::vector<RebalanceRule> rules;  // one per interval (tau_i, tau_{i+1}]
    double v0 = 0.0;
};

/**
 * Wealth bookkeeping along one path. psi is the bank account; the accounting
 * identity V = psi + phi * x holds exactly at every node because psi is
 * defined by it (rate r = 0, so the bank neither accrues nor decays).
 */
struct ValuePath {
    std::vector<double> times;
    std::vector<double> v;
    std::vector<double> phi;
    std::vector<double> psi;
    double v0 = 0.0;

    double terminal() const { return v.back(); }
};

/**
 * The simple integrand whose exact integral is the portfolio gain: stopping
 * times become breakpoints, holdings become coefficients. Zero-length
 * intervals are dropped (their increment is empty), and a leading cash
 * interval is added when the sequence starts after 0.
 */
inline SimpleIntegrand induced_integrand(const SimplePortfolio& p, const Trajectory& x) {
    const std::vector<double> st = p.seq.times(x);
    const std::size_t m = st.size() - 1;
    if (p.holdings.size() < m)
        throw std::invalid_argument(
            "value_simple: portfolio needs one holdings rule per interval of the "
            "stopping sequence on this path");

    SimpleIntegrand y;
    y.breakpoints.push_back(0.0);
    if (st.front() > 0.0) {
        y.coefficients.push_back(0.0);
        y.breakpoints.push_back(st.front());
    }
    for (std::size_t k = 0; k < m; ++k) {
        if (st[k + 1] == y.breakpoints.back()) continue;  // empty interval, no increment
        const double hk = p.holdings[k].eval(x.value_at(st[k]));
        if (!std::isfinite(hk)) throw std::domain_error("value_simple: holdings rule evaluated non-finite");
        y.coefficients.push_back(hk);
        y.breakpoints.push_back(st[k + 1]);
    }
    if (y.breakpoints.size() == 1) {  // sequence was the bare horizon: all cash
        y.coefficients.push_back(0.0);
        y.breakpoints.push_back(x.horizon());
    }
    return y;
}

/**
 * Exact evaluation of a simple portfolio on the full path grid. The gain at
 * each node is the truncated exact integral of the induced integrand, so the
 * terminal value reproduces integrate_simple bit for bit.
 */
inline ValuePath value_simple(const SimplePortfolio& p, const Trajectory& x) {
    const SimpleIntegrand y = induced_integrand(p, x);
    const auto& bp = y.breakpoints;

    ValuePath out;
    out.v0 = p.v0;
    const std::int64_t n = x.steps();
    out.times.resize(std::size_t(n) + 1);
    out.v.resize(std::size_t(n) + 1);
    out.phi.resize(std::size_t(n) + 1);
    out.psi.resize(std::size_t(n) + 1);

    std::size_t j = 0;  // interval (bp[j], bp[j+1]] tracks the node time
    for (std::int64_t k = 0; k <= n; ++k) {
        const double t = x.time(k);
        while (j + 2 < bp.size() && bp[j + 1] < t) ++j;
        out.times[std::size_t(k)] = t;
        out.v[std::size_t(k)] = p.v0 + integrate_simple(y, x, t);
        out.phi[std::size_t(k)] = y.coefficients[j];
        out.psi[std::size_t(k)] = out.v[std::size_t(k)] - out.phi[std::size_t(k)] * x.value(k);
    }
    return out;
}

/**
 * Left-point Riemann evaluation of a rebalanced portfolio on the level-l
 * grid. The integrand at a cell's left node t is rule_i(t, x(t-)) for the
 * interval (tau_i, tau_{i+1}] containing t (the first interval is closed at
 * 0); the reported phi at a node is that same reading, so phi switches rules
 * at the first node strictly past each stopping time.
 */
inline ValuePath value_rebalanced(const RebalancedPortfolio& p, const Trajectory& x, int level) {
    if (level < 0 || level > x.level())
        throw std::invalid_argument("value_rebalanced: level must be in [0, path level]");
    const std::vector<double> st = p.seq.times(x);
    const std::size_t m = st.size() - 1;
    if (p.rules.size() < m)
        throw std::invalid_argument(
            "value_rebalanced: portfolio needs one rule per interval of the stopping "
            "sequence on this path");
    for (std::size_t i = 0; i < m; ++i)
        if (!p.rules[i].phi) throw std::invalid_argument("value_rebalanced: interval rule is empty");

    const std::int64_t stride = std::int64_t{1} << (x.level() - level);
    const std::int64_t nsteps = std::int64_t{1} << level;

    ValuePath out;
    out.v0 = p.v0;
    out.times.resize(std::size_t(nsteps) + 1);
    out.v.resize(std::size_t(nsteps) + 1);
    out.phi.resize(std::size_t(nsteps) + 1);
    out.psi.resize(std::size_t(nsteps) + 1);

    std::size_t idx = 0;  // interval of the current node time
    double acc = p.v0;
    for (std::int64_t k = 0; k <= nsteps; ++k) {
        const std::int64_t node = k * stride;
        const double t = x.time(node);
        while (idx + 1 < m && st[idx + 1] < t) ++idx;
        double c = 0.0;
        if (m > 0 && t >= st.front()) {
            c = p.rules[idx].phi(t, x.pre_jump_value(node));
            if (!std::isfinite(c)) throw std::domain_error("value_rebalanced: interval rule evaluated non-finite");
        }
        out.times[std::size_t(k)] = t;
        out.v[std::size_t(k)] = acc;
        out.phi[std::size_t(k)] = c;
        out.psi[std::size_t(k)] = acc - c * x.value(node);
        if (k < nsteps) acc += c * (x.value(node + stride) - x.value(node));
    }
    return out;
}

/**
 * Self-financing residual of a simple portfolio: sup over grid times of
 * |V(t) - V_0 - int_0^t phi dx|. Zero up to summation identity because the
 * value path is computed through the same exact kernel.
 */
inline double check_self_financing(const SimplePortfolio& p, const Trajectory& x) {
    const SimpleIntegrand y = induced_integrand(p, x);
    const ValuePath vp = value_simple(p, x);
    double worst = 0.0;
    for (std::int64_t k = 0; k <= x.steps(); ++k) {
        const double gain = integrate_simple(y, x, x.time(k));
        worst = std::max(worst, std::abs(vp.v[std::size_t(k)] - p.v0 - gain));
    }
    return worst;
}

/**
 * For a rebalanced portfolio the construction already defines V through the
 * integral, so the meaningful residual is the decomposition cross-check:
 * reconstruct each interval's gain from the field's boundary, time, QV and
 * jump terms and compare with the Riemann route. Returns the relative gap.
 */
inline double check_self_financing(const RebalancedPortfolio& p, const Trajectory& x, int level) {
    const std::vector<double> st = p.seq.times(x);
    const std::size_t m = st.size() - 1;
    if (p.rules.size() < m)
        throw std::invalid_argument(
            "check_self_financing: portfolio needs one rule per interval of the stopping "
            "sequence on this path");

    double recon = 0.0;  // cash before tau_0 contributes nothing
    for (std::size_t i = 0; i < m; ++i) {
        if (st[i + 1] == st[i]) continue;
        if (!p.rules[i].field)
            throw std::invalid_argument(
                "check_self_financing: decomposition cross-check needs a field with "
                "derivatives on every interval");
        recon += ito_follmer_decomposition(*p.rules[i].field, x, st[i], st[i + 1], level).u;
    }
    const double direct = value_rebalanced(p, x, level).terminal() - p.v0;
    return std::abs(recon - direct) / std::max(1.0, std::abs(direct));
}

struct AdmissibilityReport {
    bool pass = true;
    std::int64_t first_seed = -1;
    double first_time = 0.0;
    double worst_value = std::numeric_limits<double>::infinity();
};

/**
 * Scans V over the grid across sampled paths and reports the first breach of
 * the floor V >= -a, if any. The scan is seed-ordered, so the witness is
 * deterministic.
 */
inline AdmissibilityReport check_admissible(const std::function<ValuePath(const Trajectory&)>& eval,
                                            const std::function<Trajectory(std::uint64_t)>& sampler,
                                            std::int64_t n_paths, double a) {
    if (a < 0.0) throw std::invalid_argument("check_admissible: the floor constant must be nonnegative");
    if (n_paths <= 0) throw std::invalid_argument("check_admissible: need at least one path");
    AdmissibilityReport rep;
    for (std::int64_t s = 0; s < n_paths; ++s) {
        const ValuePath vp = eval(sampler(std::uint64_t(s)));
        for (std::size_t k = 0; k < vp.v.size(); ++k) {
            rep.worst_value = std::min(rep.worst_value, vp.v[k]);
            if (vp.v[k] < -a) {
                rep.pass = false;
                rep.first_seed = s;
                rep.first_time = vp.times[k];
                return rep;
            }
        }
    }
    return rep;
}

struct ProbeRow {
    double distance = 0.0;
    double value_gap = 0.0;
};

struct ProbeReport {
    std::vector<ProbeRow> rows;
    double initial_gap = 0.0;
    double final_gap = 0.0;
    bool pass = false;
};

struct ProbeOptions {
    double factor = 1e-2;  // pass when final gap <= factor * initial gap
    std::function<bool(const Trajectory&)> membership;  // declared neighborhood, optional
};

/**
 * Empirical continuity of x -> V(T, x) at x_star along a sequence from its
 * neighborhood: tabulates (d(x_k, x_star), |V(T,x_k) - V(T,x_star)|) and
 * passes when the value gap contracts by the declared factor. A sequence
 * whose gap starts at (numerical) zero passes iff it stays there.
 */
inline ProbeReport v_continuity_probe(const std::function<ValuePath(const Trajectory&)>& eval,
                                      const Trajectory& x_star,
                                      const std::function<Trajectory(int)>& seq_gen,
                                      const std::function<double(const Trajectory&, const Trajectory&)>& metric,
                                      int n, const ProbeOptions& opts = {}) {
    if (n < 2) throw std::invalid_argument("v_continuity_probe: need at least two sequence terms");
    const double v_star = eval(x_star).terminal();
    ProbeReport rep;
    rep.rows.reserve(std::size_t(n));
    for (int k = 0; k < n; ++k) {
        const Trajectory xk = seq_gen(k);
        if (opts.membership && !opts.membership(xk))
            throw std::invalid_argument("v_continuity_probe: sequence member leaves the declared neighborhood");
        rep.rows.push_back({metric(xk, x_star), std::abs(eval(xk).terminal() - v_star)});
    }
    rep.initial_gap = rep.rows.front().value_gap;
    rep.final_gap = rep.rows.back().value_gap;
    const double tiny = 1e-12 * std::max(1.0, std::abs(v_star));
    rep.pass = rep.initial_gap <= tiny ? rep.final_gap <= tiny
                                       : rep.final_gap <= opts.factor * rep.initial_gap;
    return rep;
}

}  // namespace trajlab
