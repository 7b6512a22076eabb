#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trajlab/partition.hpp"

namespace trajlab {

// Explicit discontinuity: the path is worth left_value just before node
// `index` and values[index] at it. Everything between grid nodes is read
// piecewise-constant from the left.
struct JumpMark {
    std::int64_t index;
    double left_value;
};

// Optional provenance attached by the class samplers: enough to re-derive the
// path from its structural pieces (driver, factors, vol curve) and to check
// class-membership constraints without re-parsing the values.
struct ClassInfo {
    std::string klass;
    double x0 = 0.0;
    double mu = 0.0;
    double sigma = 0.0;          // constant volatility, when the class has one
    std::vector<double> sigma_curve;  // per-node volatility, when it varies
    std::vector<double> driver;       // z values per node (walk / Brownian / combined)
    std::vector<double> jump_times;
    std::vector<double> jump_factors;
    std::uint64_t seed = 0;
};

/**
 * Positive cadlag path sampled on one dyadic grid, immutable after build.
 *
 * Invariants (enforced by make_trajectory):
 *   - node count is 2^level + 1 over [0, horizon], times strictly increasing;
 *   - every value is finite and > 0;
 *   - marks are sorted, unique, at indices >= 1, with left_value > 0 and a
 *     nonzero jump size.
 */
class Trajectory {
public:
    Trajectory() = default;

    int level() const { return level_; }
    double horizon() const { return horizon_; }
    std::int64_t steps() const { return std::int64_t(values_.size()) - 1; }
    std::int64_t node_count() const { return std::int64_t(values_.size()); }
    double mesh() const { return horizon_ / double(steps()); }

    double time(std::int64_t k) const {
        return horizon_ * (double(k) / double(steps()));
    }

    double value(std::int64_t k) const { return values_[std::size_t(k)]; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<JumpMark>& jump_marks() const { return marks_; }

    std::int64_t index_of(double t) const { return dyadic_index(t, level_, horizon_); }
    double value_at(double t) const { return values_[std::size_t(index_of(t))]; }

    const JumpMark* mark_at(std::int64_t k) const {
        auto it = std::lower_bound(marks_.begin(), marks_.end(), k,
                                   [](const JumpMark& m, std::int64_t i) { return m.index < i; });
        return (it != marks_.end() && it->index == k) ? &*it : nullptr;
    }

    bool is_marked(std::int64_t k) const { return mark_at(k) != nullptr; }

    // Left limit at node k > 0: the marked left value, else the previous node
    // (piecewise-constant-from-the-left reading of the grid samples).
    double left_value(std::int64_t k) const {
        if (k <= 0 || k > steps())
            throw std::invalid_argument("Trajectory::left_value: need 0 < k <= steps");
        if (const JumpMark* m = mark_at(k)) return m->left_value;
        return values_[std::size_t(k - 1)];
    }

    double left_value_at(double t) const { return left_value(index_of(t)); }

    // Value just before the marked discontinuity at node k, the node value
    // when nothing is marked there. This is what integrands see as x(s-):
    // between marks the path is its grid samples, only marks are jumps.
    double pre_jump_value(std::int64_t k) const {
        if (const JumpMark* m = mark_at(k)) return m->left_value;
        return values_[std::size_t(k)];
    }

    // Jump size at a marked node; zero elsewhere.
    double jump_size(std::int64_t k) const {
        if (const JumpMark* m = mark_at(k)) return values_[std::size_t(k)] - m->left_value;
        return 0.0;
    }

    const std::shared_ptr<const ClassInfo>& class_info() const { return info_; }

    Trajectory with_class_info(std::shared_ptr<const ClassInfo> info) const {
        Trajectory out = *this;
        out.info_ = std::move(info);
        return out;
    }

    friend Trajectory make_trajectory(const std::vector<double>&, const std::vector<double>&,
                                      const std::vector<JumpMark>&);

private:
    double horizon_ = 1.0;
    int level_ = 0;
    std::vector<double> values_;
    std::vector<JumpMark> marks_;
    std::shared_ptr<const ClassInfo> info_;
};

/**
 * Validates and assembles a trajectory from an explicit dyadic grid, node
 * values and jump marks. Every failure names its cause.
 */
inline Trajectory make_trajectory(const std::vector<double>& grid,
                                  const std::vector<double>& values,
                                  const std::vector<JumpMark>& marks = {}) {
    if (grid.size() != values.size())
        throw std::invalid_argument("make_trajectory: grid/value size mismatch");
    if (grid.size() < 2)
        throw std::invalid_argument("make_trajectory: need at least two nodes");
    if (grid.front() != 0.0)
        throw std::invalid_argument("make_trajectory: grid must start at 0");

    const std::int64_t steps = std::int64_t(grid.size()) - 1;
    int level = 0;
    while ((std::int64_t{1} << level) < steps && level < 31) ++level;
    if ((std::int64_t{1} << level) != steps)
        throw std::invalid_argument("make_trajectory: node count is not 2^level + 1");

    const double horizon = grid.back();
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("make_trajectory: horizon must be positive");
    for (std::int64_t k = 0; k <= steps; ++k) {
        const double want = horizon * (double(k) / double(steps));
        const double got = grid[std::size_t(k)];
        if (!(std::abs(got - want) <= 1e-12 * horizon))
            throw std::invalid_argument("make_trajectory: grid is not the level-" +
                                        std::to_string(level) + " dyadic grid");
    }

    for (double v : values)
        if (!std::isfinite(v) || !(v > 0.0))
            throw std::invalid_argument("make_trajectory: values must be finite and positive");

    std::vector<JumpMark> sorted = marks;
    std::sort(sorted.begin(), sorted.end(),
              [](const JumpMark& a, const JumpMark& b) { return a.index < b.index; });
    std::int64_t prev = 0;
    for (const JumpMark& m : sorted) {
        if (m.index < 1 || m.index > steps)
            throw std::invalid_argument("make_trajectory: jump mark index out of range");
        if (m.index == prev)
            throw std::invalid_argument("make_trajectory: duplicate jump mark index");
        if (!std::isfinite(m.left_value) || !(m.left_value > 0.0))
            throw std::invalid_argument("make_trajectory: jump left value must be positive");
        if (values[std::size_t(m.index)] == m.left_value)
            throw std::invalid_argument("make_trajectory: zero-size jump mark");
        prev = m.index;
    }

    Trajectory x;
    x.horizon_ = horizon;
    x.level_ = level;
    x.values_ = values;
    x.marks_ = std::move(sorted);
    return x;
}

// Grid-aligned convenience: values on the level-l grid over [0, horizon].
inline Trajectory make_trajectory(int level, double horizon, std::vector<double> values,
                                  std::vector<JumpMark> marks = {}) {
    PartitionSequence part(horizon, level);
    return make_trajectory(part.points(level), values, marks);
}

// All marked discontinuities as (time, size, left value) rows.
struct JumpRecord {
    double time;
    double size;
    double left_value;
};

inline std::vector<JumpRecord> jumps(const Trajectory& x) {
    std::vector<JumpRecord> out;
    out.reserve(x.jump_marks().size());
    for (const JumpMark& m : x.jump_marks())
        out.push_back({x.time(m.index), x.value(m.index) - m.left_value, m.left_value});
    return out;
}

// Shared-grid precondition used across metrics and pairwise checks.
inline void require_same_grid(const Trajectory& x, const Trajectory& y, const char* who) {
    if (x.level() != y.level() || x.horizon() != y.horizon())
        throw std::invalid_argument(std::string(who) + ": trajectories live on different grids");
}

}  // namespace trajlab
