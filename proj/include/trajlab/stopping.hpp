#pragma once

// Trajectory-based stopping times. Each evaluator maps a trajectory to a time
// in [0, T] using only values observable up to the returned time; the defining
// property (agreement on [0, tau(x)] forces tau(y) = tau(x)) is falsifiable
// through check_np_property and the splice fuzz in the test suite.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trajlab/trajectory.hpp"

namespace trajlab {

class StoppingTime {
  public:
    using Eval = std::function<double(const Trajectory&)>;

    StoppingTime(std::string tag, Eval eval) : tag_(std::move(tag)), eval_(std::move(eval)) {
        if (!eval_) throw std::invalid_argument("StoppingTime: empty evaluator");
    }

    double operator()(const Trajectory& x) const {
        const double t = eval_(x);
        if (!(t >= 0.0) || t > x.horizon())
            throw std::logic_error("StoppingTime '" + tag_ + "': value escaped [0, T]");
        return t;
    }

    const std::string& tag() const { return tag_; }

  private:
    std::string tag_;
    Eval eval_;
};

// A finite union of closed intervals; ends may be infinite.
struct ClosedInterval {
    double lo;
    double hi;
};

class ClosedSet {
  public:
    explicit ClosedSet(std::vector<ClosedInterval> parts) : parts_(std::move(parts)) {
        if (parts_.empty()) throw std::invalid_argument("ClosedSet: empty descriptor");
        for (const auto& p : parts_) {
            if (std::isnan(p.lo) || std::isnan(p.hi) || p.lo > p.hi)
                throw std::invalid_argument("ClosedSet: interval needs lo <= hi");
        }
    }

    bool contains(double v) const {
        for (const auto& p : parts_)
            if (v >= p.lo && v <= p.hi) return true;
        return false;
    }

  private:
    std::vector<ClosedInterval> parts_;
};

inline StoppingTime constant_time(double c) {
    if (!(c >= 0.0)) throw std::invalid_argument("constant_time: need c >= 0");
    return {"constant", [c](const Trajectory& x) {
                if (c > x.horizon()) throw std::invalid_argument("constant_time: c beyond horizon");
                return c;
            }};
}

// First grid time whose value lies in A; T if the path never visits A.
inline StoppingTime hitting_time_closed(ClosedSet a) {
    return {"hitting", [a = std::move(a)](const Trajectory& x) {
                for (std::int64_t k = 0; k <= x.steps(); ++k)
                    if (a.contains(x.value(k))) return x.time(k);
                return x.horizon();
            }};
}

inline StoppingTime level_crossing(double a) {
    return {"level", [a](const Trajectory& x) {
                for (std::int64_t k = 0; k <= x.steps(); ++k)
                    if (x.value(k) >= a) return x.time(k);
                return x.horizon();
            }};
}

// First marked jump with |size| strictly above delta.
inline StoppingTime jump_magnitude_time(double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("jump_magnitude_time: need delta > 0");
    return {"jump-magnitude", [delta](const Trajectory& x) {
                for (const JumpMark& m : x.jump_marks())
                    if (std::abs(x.value(m.index) - m.left_value) > delta) return x.time(m.index);
                return x.horizon();
            }};
}

// Time of the i-th marked jump regardless of size.
inline StoppingTime jump_count_time(int i) {
    if (i < 1) throw std::invalid_argument("jump_count_time: need i >= 1");
    return {"jump-count", [i](const Trajectory& x) {
                const auto& marks = x.jump_marks();
                if (std::size_t(i) <= marks.size()) return x.time(marks[std::size_t(i) - 1].index);
                return x.horizon();
            }};
}

inline StoppingTime sum_capped(StoppingTime t1, StoppingTime t2) {
    return {"sum", [t1 = std::move(t1), t2 = std::move(t2)](const Trajectory& x) {
                return std::min(t1(x) + t2(x), x.horizon());
            }};
}

inline StoppingTime min_of(std::vector<StoppingTime> ts) {
    if (ts.empty()) throw std::invalid_argument("min_of: empty collection");
    return {"min", [ts = std::move(ts)](const Trajectory& x) {
                double best = ts.front()(x);
                for (std::size_t i = 1; i < ts.size(); ++i) best = std::min(best, ts[i](x));
                return best;
            }};
}

inline StoppingTime sup_of(std::vector<StoppingTime> ts) {
    if (ts.empty()) throw std::invalid_argument("sup_of: empty family");
    return {"sup", [ts = std::move(ts)](const Trajectory& x) {
                double best = ts.front()(x);
                for (std::size_t i = 1; i < ts.size(); ++i) best = std::max(best, ts[i](x));
                return best;
            }};
}

// Nondecreasing family tau_0 <= tau_1 <= ... with tau_0 = 0. M(x) is the
// smallest index whose value is T; if no listed member reaches T the sequence
// behaves as if one final tau = T entry were appended, so M(x) always exists.
class StoppingSequence {
  public:
    explicit StoppingSequence(std::vector<StoppingTime> taus,
                              std::function<void(const Trajectory&)> precheck = {})
        : taus_(std::move(taus)), precheck_(std::move(precheck)) {
        if (taus_.empty()) throw std::invalid_argument("StoppingSequence: empty family");
    }

    std::size_t listed_size() const { return taus_.size(); }

    // Values tau_0(x), ..., tau_M(x); validates monotonicity along the way.
    std::vector<double> times(const Trajectory& x) const {
        if (precheck_) precheck_(x);
        std::vector<double> out;
        out.reserve(taus_.size() + 1);
        for (const auto& tau : taus_) {
            const double t = tau(x);
            if (!out.empty() && t < out.back())
                throw std::logic_error("StoppingSequence: times must be nondecreasing");
            out.push_back(t);
            if (t == x.horizon()) return out;
        }
        out.push_back(x.horizon());  // implicit terminal member
        return out;
    }

    int count_m(const Trajectory& x) const { return int(times(x).size()) - 1; }

  private:
    std::vector<StoppingTime> taus_;
    std::function<void(const Trajectory&)> precheck_;
};

// tau_i(x) = min(inf{t : x(t) >= K_i}, T) for strictly increasing levels K
// sitting above the starting value.
inline StoppingSequence level_ladder(std::vector<double> levels) {
    if (levels.empty()) throw std::invalid_argument("level_ladder: empty level list");
    for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        if (!(levels[i] < levels[i + 1]))
            throw std::invalid_argument("level_ladder: levels must be strictly increasing");
    std::vector<StoppingTime> taus;
    taus.push_back(constant_time(0.0));
    for (double k : levels) taus.push_back(level_crossing(k));
    const double k1 = levels.front();
    return StoppingSequence(std::move(taus), [k1](const Trajectory& x) {
        if (!(x.value(0) < k1))
            throw std::invalid_argument("level_ladder: first level must sit above x(0)");
    });
}

// tau_i(x) = min(i T / n, T): the deterministic grid family.
inline StoppingSequence deterministic_sequence(int n) {
    if (n < 1) throw std::invalid_argument("deterministic_sequence: need n >= 1");
    std::vector<StoppingTime> taus;
    for (int i = 0; i <= n; ++i)
        taus.push_back({"constant", [i, n](const Trajectory& x) {
                            return x.horizon() * (double(i) / double(n));
                        }});
    return StoppingSequence(std::move(taus));
}

enum class NpVerdict { pass, fail, not_applicable };

// Grid-pointwise agreement of x and y on [0, t], marks included.
inline bool agree_up_to(const Trajectory& x, const Trajectory& y, double t) {
    for (std::int64_t k = 0; k <= x.steps() && x.time(k) <= t; ++k) {
        if (x.value(k) != y.value(k)) return false;
        const JumpMark* mx = x.mark_at(k);
        const JumpMark* my = y.mark_at(k);
        if ((mx == nullptr) != (my == nullptr)) return false;
        if (mx && mx->left_value != my->left_value) return false;
    }
    return true;
}

// If x and y agree on [0, tau(x)], the defining property demands
// tau(y) = tau(x); disagreement before tau(x) makes the test vacuous.
inline NpVerdict check_np_property(const StoppingTime& tau, const Trajectory& x,
                                   const Trajectory& y) {
    require_same_grid(x, y, "check_np_property");
    const double tx = tau(x);
    if (!agree_up_to(x, y, tx)) return NpVerdict::not_applicable;
    return tau(y) == tx ? NpVerdict::pass : NpVerdict::fail;
}

// ----- textual expression form used by CLI configs ------------------------
//
//   const(0.5)  level(105)  jumpmag(2.5)  jumpcount(2)
//   sum(e1, e2)  min(e1, ..., ek)  sup(e1, ..., ek)
//   sequences: ladder(105, 120, 140)  grid(4)

namespace detail {

struct StoppingParser {
    const std::string& text;
    std::size_t pos = 0;

    explicit StoppingParser(const std::string& s) : text(s) {}

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("stopping expression: " + what + " at offset " +
                                    std::to_string(pos) + " in '" + text + "'");
    }

    bool consume(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    std::string ident() {
        skip_ws();
        std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        if (start == pos) fail("expected a name");
        return text.substr(start, pos - start);
    }

    double number() {
        skip_ws();
        std::size_t consumed = 0;
        double v = 0.0;
        try {
            v = std::stod(text.substr(pos), &consumed);
        } catch (const std::exception&) {
            fail("expected a number");
        }
        pos += consumed;
        return v;
    }

    std::vector<double> number_args() {
        std::vector<double> out;
        if (!consume('(')) fail("expected '('");
        out.push_back(number());
        while (consume(',')) out.push_back(number());
        if (!consume(')')) fail("expected ')'");
        return out;
    }

    StoppingTime expr() {
        const std::string name = ident();
        if (name == "const" || name == "level" || name == "jumpmag" || name == "jumpcount") {
            auto args = number_args();
            if (args.size() != 1) fail("'" + name + "' takes one argument");
            if (name == "const") return constant_time(args[0]);
            if (name == "level") return level_crossing(args[0]);
            if (name == "jumpmag") return jump_magnitude_time(args[0]);
            return jump_count_time(int(std::llround(args[0])));
        }
        if (name == "sum" || name == "min" || name == "sup") {
            if (!consume('(')) fail("expected '('");
            std::vector<StoppingTime> parts;
            parts.push_back(expr());
            while (consume(',')) parts.push_back(expr());
            if (!consume(')')) fail("expected ')'");
            if (name == "sum") {
                if (parts.size() != 2) fail("'sum' takes two arguments");
                return sum_capped(std::move(parts[0]), std::move(parts[1]));
            }
            return name == "min" ? min_of(std::move(parts)) : sup_of(std::move(parts));
        }
        fail("unknown stopping time '" + name + "'");
    }
};

}  // namespace detail

inline StoppingTime parse_stopping(const std::string& text) {
    detail::StoppingParser p(text);
    StoppingTime tau = p.expr();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing input");
    return tau;
}

inline StoppingSequence parse_stopping_sequence(const std::string& text) {
    detail::StoppingParser p(text);
    const std::size_t mark = p.pos;
    const std::string name = p.ident();
    if (name == "ladder") {
        auto args = p.number_args();
        p.skip_ws();
        if (p.pos != text.size()) p.fail("trailing input");
        return level_ladder(std::move(args));
    }
    if (name == "grid") {
        auto args = p.number_args();
        if (args.size() != 1) p.fail("'grid' takes one argument");
        p.skip_ws();
        if (p.pos != text.size()) p.fail("trailing input");
        return deterministic_sequence(int(std::llround(args[0])));
    }
    // a single stopping-time expression becomes {0, tau}
    p.pos = mark;
    StoppingTime tau = p.expr();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing input");
    std::vector<StoppingTime> taus;
    taus.push_back(constant_time(0.0));
    taus.push_back(std::move(tau));
    return StoppingSequence(std::move(taus));
}

}  // namespace trajlab
