#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "trajlab/quadratic_variation.hpp"
#include "trajlab/trajectory.hpp"

namespace trajlab {

/**
 * Piecewise-constant integrand: value c_0 on [0, t_1], c_i on (t_i, t_{i+1}].
 * Breakpoints satisfy 0 = t_0 < t_1 <= ... <= t_n = T; repeated breakpoints
 * encode empty intervals and contribute nothing.
 */
struct SimpleIntegrand {
    std::vector<double> breakpoints;
    std::vector<double> coefficients;  // one per interval, size = breakpoints - 1
};

inline void validate_simple_integrand(const SimpleIntegrand& y, const Trajectory& x) {
    const auto& bp = y.breakpoints;
    if (bp.size() < 2)
        throw std::invalid_argument("simple integrand: need at least two breakpoints");
    if (y.coefficients.size() + 1 != bp.size())
        throw std::invalid_argument("simple integrand: coefficient count must be breakpoints - 1");
    if (bp.front() != 0.0)
        throw std::invalid_argument("simple integrand: first breakpoint must be 0");
    if (bp[1] <= 0.0)
        throw std::invalid_argument("simple integrand: second breakpoint must be positive");
    if (bp.back() != x.horizon())
        throw std::invalid_argument("simple integrand: last breakpoint must equal the horizon");
    for (std::size_t i = 1; i + 1 < bp.size(); ++i)
        if (bp[i + 1] < bp[i])
            throw std::invalid_argument("simple integrand: breakpoints must be nondecreasing");
    for (double t : bp) x.index_of(t);  // each breakpoint must sit on the grid
    for (double c : y.coefficients)
        if (!std::isfinite(c))
            throw std::invalid_argument("simple integrand: coefficients must be finite");
}

/**
 * Exact integral of a simple integrand against x up to time t:
 *
 *   sum_{i=0}^{k-2} c_i [x(t_{i+1}) - x(t_i)]  +  c_{k-1} [x(t) - x(t_{k-1})],
 *
 * with k the smallest index such that t <= t_k. Left-to-right accumulation;
 * the portfolio engine reuses this exact expression tree, which is what makes
 * its terminal values bit-identical to this function.
 */
inline double integrate_simple(const SimpleIntegrand& y, const Trajectory& x, double t) {
    validate_simple_integrand(y, x);
    x.index_of(t);  // t itself must be a grid time
    if (t == 0.0) return 0.0;

    const auto& bp = y.breakpoints;
    double acc = 0.0;
    std::size_t i = 0;
    while (i + 2 < bp.size() && bp[i + 1] < t) {
        acc += y.coefficients[i] * (x.value_at(bp[i + 1]) - x.value_at(bp[i]));
        ++i;
    }
    acc += y.coefficients[i] * (x.value_at(t) - x.value_at(bp[i]));
    return acc;
}

/**
 * Left-point Riemann sum of phi against x along the level-l partition:
 * sum_k phi(t_k, x(t_k-)) (x(t_{k+1}) - x(t_k)). x(t_k-) is the pre-jump node
 * value: the marked left value at a jump node, the node value otherwise (the
 * grid wiggle between nodes is not a discontinuity, only marks are).
 * Returns the running sums at every level-l node; [back()] is the integral
 * over the whole horizon.
 */
template <class Phi>
std::vector<double> follmer_cumulative(Phi&& phi, const Trajectory& x, int level) {
    if (level < 0 || level > x.level())
        throw std::invalid_argument("follmer_cumulative: level must be in [0, path level]");
    const std::int64_t stride = std::int64_t{1} << (x.level() - level);
    const std::int64_t nsteps = std::int64_t{1} << level;
    std::vector<double> out(std::size_t(nsteps) + 1);
    out[0] = 0.0;
    double acc = 0.0;
    for (std::int64_t k = 0; k < nsteps; ++k) {
        const std::int64_t lo = k * stride, hi = lo + stride;
        const double left = phi(x.time(lo), x.pre_jump_value(lo));
        if (!std::isfinite(left))
            throw std::domain_error("follmer_cumulative: integrand is not finite");
        acc += left * (x.value(hi) - x.value(lo));
        out[std::size_t(k + 1)] = acc;
    }
    return out;
}

template <class Phi>
double follmer_integral(Phi&& phi, const Trajectory& x, int level) {
    return follmer_cumulative(phi, x, level).back();
}

/** Twice-differentiable field U(t, y) with the partials needed pathwise. */
struct SmoothField {
    std::function<double(double, double)> u;
    std::function<double(double, double)> du_dt;
    std::function<double(double, double)> du_dy;
    std::function<double(double, double)> d2u_dy2;
};

inline SmoothField field_identity() {
    return {[](double, double y) { return y; }, [](double, double) { return 0.0; },
            [](double, double) { return 1.0; }, [](double, double) { return 0.0; }};
}

inline SmoothField field_half_square() {
    return {[](double, double y) { return 0.5 * y * y; }, [](double, double) { return 0.0; },
            [](double, double y) { return y; }, [](double, double) { return 1.0; }};
}

/**
 * Pathwise change-of-variable split over (a, b], all terms at one quadrature
 * level. The identity u = boundary - time_integral - qv_term - jump_compensation
 * holds exactly: u is stored as that very expression.
 */
struct DecompositionReport {
    double a = 0.0, b = 0.0;
    int level = 0;
    double boundary = 0.0;           // U(b, x(b)) - U(a, x(a))
    double time_integral = 0.0;      // int dU/dt (s, x(s-)) ds
    double qv_term = 0.0;            // 1/2 int d2U/dy2 (s, x(s-)) d<x>_s (continuous part)
    double jump_compensation = 0.0;  // sum of U-jumps minus first-order terms over (a, b]
    double u = 0.0;                  // reconstructed integral of dU/dy dx
    double direct = 0.0;             // left-point Riemann sum of dU/dy, same partition
    double residual = 0.0;           // |u - direct|
};

/**
 * Computes the decomposition of U along x over (a, b].
 *
 * Riemann sums run on {a, b} plus the level-l nodes strictly inside (a, b),
 * so a and b may be any grid times of x. The QV measure is differenced from
 * the path-resolution QVCurve (continuous part): the quadrature level governs
 * the sums, not the variation measure itself.
 */
inline DecompositionReport ito_follmer_decomposition(const SmoothField& U, const Trajectory& x,
                                                     double a, double b, int level) {
    if (!(a < b))
        throw std::invalid_argument("ito_follmer_decomposition: need a < b");
    if (level < 0 || level > x.level())
        throw std::invalid_argument("ito_follmer_decomposition: level must be in [0, path level]");
    const std::int64_t ia = x.index_of(a), ib = x.index_of(b);
    const std::int64_t stride = std::int64_t{1} << (x.level() - level);

    // quadrature nodes (fine-grid indices): a, interior level-l nodes, b
    std::vector<std::int64_t> nodes;
    nodes.push_back(ia);
    for (std::int64_t i = (ia / stride + 1) * stride; i < ib; i += stride)
        if (i > ia) nodes.push_back(i);
    nodes.push_back(ib);

    const QVCurve qv = quadratic_variation(x, x.level());

    DecompositionReport rep;
    rep.a = a;
    rep.b = b;
    rep.level = level;
    rep.boundary = U.u(b, x.value(ib)) - U.u(a, x.value(ia));

    double time_int = 0.0, qv_term = 0.0, direct = 0.0;
    for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
        const std::int64_t lo = nodes[j], hi = nodes[j + 1];
        const double s = x.time(lo);
        const double yleft = x.pre_jump_value(lo);
        time_int += U.du_dt(s, yleft) * (x.time(hi) - s);
        qv_term += 0.5 * U.d2u_dy2(s, yleft) *
                   (qv.cont_cumulative[std::size_t(hi)] - qv.cont_cumulative[std::size_t(lo)]);
        direct += U.du_dy(s, yleft) * (x.value(hi) - x.value(lo));
    }

    double s_sum = 0.0;
    for (const JumpMark& m : x.jump_marks()) {
        if (m.index <= ia || m.index > ib) continue;
        const double t = x.time(m.index);
        const double post = x.value(m.index), pre = m.left_value;
        s_sum += U.u(t, post) - U.u(t, pre) - U.du_dy(t, pre) * (post - pre);
    }

    rep.time_integral = time_int;
    rep.qv_term = qv_term;
    rep.jump_compensation = s_sum;
    rep.u = rep.boundary - rep.time_integral - rep.qv_term - rep.jump_compensation;
    rep.direct = direct;
    rep.residual = std::abs(rep.u - rep.direct);
    return rep;
}

}  // namespace trajlab
