#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "trajlab/trajectory.hpp"

namespace trajlab {

/**
 * Discrete quadratic variation along the level-l partition.
 *
 * Per step (t_k, t_{k+1}]: marked jumps inside the cell contribute their
 * squared sizes discretely; the continuous part is (increment - sum of jump
 * sizes in the cell)^2. By construction
 *
 *     cumulative(T) = cont_cumulative(T) + sum of (jump size)^2,
 *
 * exactly, and density >= 0 always. density[k] is the continuous part of step
 * k divided by the step width (no smoothing).
 */
struct QVCurve {
    int level = 0;
    double horizon = 1.0;
    std::vector<double> times;             // 2^level + 1 nodes
    std::vector<double> cumulative;        // [x]_t at each node, jumps included
    std::vector<double> cont_cumulative;   // continuous part only
    std::vector<double> jump_cumulative;   // sum of squared jump sizes
    std::vector<double> density;           // size 2^level, left-indexed per step

    double total() const { return cumulative.back(); }
    double continuous_total() const { return cont_cumulative.back(); }
    double jump_total() const { return jump_cumulative.back(); }
};

inline QVCurve quadratic_variation(const Trajectory& x, int level) {
    if (level < 0 || level > x.level())
        throw std::invalid_argument("quadratic_variation: level must be in [0, path level]");

    const std::int64_t stride = std::int64_t{1} << (x.level() - level);
    const std::int64_t nsteps = std::int64_t{1} << level;
    const double dt = x.horizon() / double(nsteps);

    QVCurve qv;
    qv.level = level;
    qv.horizon = x.horizon();
    qv.times.resize(std::size_t(nsteps) + 1);
    qv.cumulative.resize(std::size_t(nsteps) + 1);
    qv.cont_cumulative.resize(std::size_t(nsteps) + 1);
    qv.jump_cumulative.resize(std::size_t(nsteps) + 1);
    qv.density.resize(std::size_t(nsteps));

    qv.times[0] = 0.0;
    qv.cumulative[0] = 0.0;
    qv.cont_cumulative[0] = 0.0;
    qv.jump_cumulative[0] = 0.0;

    auto mark = x.jump_marks().begin();
    const auto mark_end = x.jump_marks().end();

    double cont_cum = 0.0, jump_cum = 0.0;
    for (std::int64_t k = 0; k < nsteps; ++k) {
        const std::int64_t lo = k * stride;        // cell is (lo, hi]
        const std::int64_t hi = lo + stride;

        double jump_sum = 0.0, jump_sq = 0.0;
        while (mark != mark_end && mark->index <= hi) {
            // marks are sorted; all marks with lo < index <= hi land here
            const double size = x.value(mark->index) - mark->left_value;
            jump_sum += size;
            jump_sq += size * size;
            ++mark;
        }

        const double incr = x.value(hi) - x.value(lo);
        const double cont = (incr - jump_sum) * (incr - jump_sum);

        cont_cum += cont;
        jump_cum += jump_sq;
        qv.times[std::size_t(k + 1)] = x.time(hi);
        // jump additivity holds bitwise: cumulative is defined as the sum
        qv.cumulative[std::size_t(k + 1)] = cont_cum + jump_cum;
        qv.cont_cumulative[std::size_t(k + 1)] = cont_cum;
        qv.jump_cumulative[std::size_t(k + 1)] = jump_cum;
        qv.density[std::size_t(k)] = cont / dt;
    }
    return qv;
}

// Squared-increment sum of a raw value sequence (driver paths, fBm samples)
// read at `level` when the sequence was sampled at `from_level` >= level.
inline double path_qv(const std::vector<double>& values, int from_level, int level) {
    const std::int64_t n = std::int64_t(values.size()) - 1;
    if (n != (std::int64_t{1} << from_level))
        throw std::invalid_argument("path_qv: size does not match from_level");
    if (level < 0 || level > from_level)
        throw std::invalid_argument("path_qv: level must be in [0, from_level]");
    const std::int64_t stride = std::int64_t{1} << (from_level - level);
    double sum = 0.0;
    for (std::int64_t k = 0; k + stride <= n; k += stride) {
        const double d = values[std::size_t(k + stride)] - values[std::size_t(k)];
        sum += d * d;
    }
    return sum;
}

}  // namespace trajlab
