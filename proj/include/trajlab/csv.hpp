#pragma once

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajlab/trajectory.hpp"

namespace trajlab {

namespace detail {

// Shortest round-trip decimal for a double. All candidate precisions are
// scanned because the first one that round-trips is not always the shortest
// string ("%.1g" renders 100 as "1e+02", "%.3g" as "100").
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    std::string best = buf;
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[40];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(shorter, "%lf", &back);
        if (back == v && std::strlen(shorter) < best.size()) best = shorter;
    }
    return best;
}

// Dyadic times print in fixed point: k / 2^l terminates after l decimal
// digits (times the horizon's own digits; exact for horizon 1).
inline std::string fmt_time(double t, int level) {
    const int digits = level < 1 ? 1 : (level > 17 ? 17 : level);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, t);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    return back == t ? std::string(buf) : fmt_double(t);
}

}  // namespace detail

inline constexpr const char* kTrajectoryCsvHeader = "t,value,is_jump,left_value";

/** Serializes one trajectory; schema: t,value,is_jump,left_value. */
inline std::string trajectory_to_csv(const Trajectory& x) {
    std::string out(kTrajectoryCsvHeader);
    out += '\n';
    for (std::int64_t k = 0; k <= x.steps(); ++k) {
        const bool marked = x.is_marked(k);
        const double left = k == 0 ? x.value(0) : x.left_value(k);
        out += detail::fmt_time(x.time(k), x.level());
        out += ',';
        out += detail::fmt_double(x.value(k));
        out += marked ? ",1," : ",0,";
        out += detail::fmt_double(left);
        out += '\n';
    }
    return out;
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& x) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
    f << trajectory_to_csv(x);
}

/** Parses the schema above; the header row is mandatory. */
inline Trajectory trajectory_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("trajectory_from_csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrajectoryCsvHeader)
        throw std::invalid_argument("trajectory_from_csv: missing header '" +
                                    std::string(kTrajectoryCsvHeader) + "'");

    std::vector<double> grid, values;
    std::vector<JumpMark> marks;
    std::int64_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double t = 0.0, v = 0.0, left = 0.0;
        int is_jump = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%d,%lf", &t, &v, &is_jump, &left) != 4)
            throw std::invalid_argument("trajectory_from_csv: bad row '" + line + "'");
        grid.push_back(t);
        values.push_back(v);
        if (is_jump != 0) marks.push_back({row, left});
        ++row;
    }
    return make_trajectory(grid, values, marks);
}

inline Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_trajectory_csv: cannot open " + path);
    return trajectory_from_csv(f);
}

}  // namespace trajlab
