#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace motorid {

// Uniformly sampled scalar signal. dt is the sample period in seconds.
struct TimeSeries {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }
};

// Throws ValidationError unless dt > 0 and the series is non-empty.
void validate(const TimeSeries& s, const std::string& what);

// CSV with header "t,<value_name>", 15 significant digits.
void write_csv(const TimeSeries& s, const std::string& path,
               const std::string& value_name = "value");
TimeSeries read_series_csv(const std::string& path);

// Ordered key = value pairs describing how a file was produced.
using Provenance = std::vector<std::pair<std::string, std::string>>;

void write_provenance(const Provenance& p, const std::string& path);
Provenance read_provenance(const std::string& path);
const std::string* find_key(const Provenance& p, const std::string& key);

std::string format_double(double v, int significant = 15);

} // namespace motorid
