#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace trajlab {

/**
 * Refining sequence of dyadic partitions of [0, T].
 *
 * Level l splits [0, T] into 2^l equal steps; node k sits at k * T / 2^l.
 * Levels nest: every level-l node is a level-(l+1) node, bitwise (the quotient
 * k / 2^l is exact in binary floating point, so nesting holds as an identity
 * on doubles, not just up to rounding).
 */
struct PartitionSequence {
    double horizon;
    int max_level;

    explicit PartitionSequence(double T = 1.0, int lmax = 16)
        : horizon(T), max_level(lmax) {
        if (!(T > 0.0))
            throw std::invalid_argument("PartitionSequence: horizon must be positive");
        if (lmax < 0 || lmax > 30)
            throw std::invalid_argument("PartitionSequence: max level out of [0, 30]");
    }

    std::int64_t step_count(int level) const {
        check_level(level);
        return std::int64_t{1} << level;
    }

    std::int64_t node_count(int level) const { return step_count(level) + 1; }

    double mesh(int level) const { return horizon / double(step_count(level)); }

    double time(int level, std::int64_t k) const {
        if (k < 0 || k > step_count(level))
            throw std::invalid_argument("PartitionSequence: node index out of range");
        // k / 2^l is exact; one rounding from the multiply by T.
        return horizon * (double(k) / double(step_count(level)));
    }

    std::vector<double> points(int level) const {
        std::vector<double> ts(std::size_t(node_count(level)));
        for (std::int64_t k = 0; k < node_count(level); ++k)
            ts[std::size_t(k)] = time(level, k);
        return ts;
    }

private:
    void check_level(int level) const {
        if (level < 0 || level > max_level)
            throw std::invalid_argument("PartitionSequence: level " + std::to_string(level) +
                                        " outside [0, " + std::to_string(max_level) + "]");
    }
};

// Maps a time to its node index on the level-l grid over [0, horizon].
// Throws if t is not a grid point (within 1e-12 * horizon absolute slack).
inline std::int64_t dyadic_index(double t, int level, double horizon) {
    const std::int64_t n = std::int64_t{1} << level;
    const double pos = t / horizon * double(n);
    const std::int64_t k = std::int64_t(pos + (pos < 0 ? -0.5 : 0.5));
    if (k < 0 || k > n)
        throw std::invalid_argument("dyadic_index: time outside [0, horizon]");
    const double snapped = horizon * (double(k) / double(n));
    if (!(t == snapped || (t > snapped ? t - snapped : snapped - t) <= 1e-12 * horizon))
        throw std::invalid_argument("dyadic_index: time is not on the level grid");
    return k;
}

}  // namespace trajlab
