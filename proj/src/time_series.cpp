#include "motorid/time_series.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "motorid/errors.hpp"

namespace motorid {

void validate(const TimeSeries& s, const std::string& what) {
    if (!(s.dt > 0.0))
        throw ValidationError(what + ": sample period must be positive, got " +
                              std::to_string(s.dt));
    if (s.values.empty())
        throw ValidationError(what + ": series is empty");
}

std::string format_double(double v, int significant) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", significant, v);
    return buf;
}

void write_csv(const TimeSeries& s, const std::string& path,
               const std::string& value_name) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "t," << value_name << "\n";
    for (std::size_t k = 0; k < s.size(); ++k)
        f << format_double(s.time_at(k)) << "," << format_double(s[k]) << "\n";
    if (!f) throw IoError("write failed: " + path);
}

TimeSeries read_series_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty file: " + path);
    TimeSeries s;
    std::vector<double> times;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        if (!std::getline(ls, cell, ',')) throw IoError("bad row in " + path);
        times.push_back(std::stod(cell));
        if (!std::getline(ls, cell, ',')) throw IoError("bad row in " + path);
        s.values.push_back(std::stod(cell));
    }
    if (times.size() < 2) throw IoError("need at least two samples: " + path);
    s.t0 = times.front();
    s.dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    // Reject non-uniform grids early; downstream math assumes one period.
    for (std::size_t k = 0; k < times.size(); ++k) {
        double expect = s.t0 + static_cast<double>(k) * s.dt;
        if (std::abs(times[k] - expect) > 1e-6 * (std::abs(expect) + s.dt))
            throw ValidationError("non-uniform time grid in " + path);
    }
    return s;
}

void write_provenance(const Provenance& p, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (const auto& [k, v] : p) f << k << " = " << v << "\n";
    if (!f) throw IoError("write failed: " + path);
}

Provenance read_provenance(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    Provenance p;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto eq = line.find(" = ");
        if (eq == std::string::npos) throw IoError("bad provenance line: " + line);
        p.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }
    return p;
}

const std::string* find_key(const Provenance& p, const std::string& key) {
    for (const auto& [k, v] : p)
        if (k == key) return &v;
    return nullptr;
}

} // namespace motorid
