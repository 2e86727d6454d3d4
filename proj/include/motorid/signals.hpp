#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "motorid/time_series.hpp"

namespace motorid {

// Drive voltage limit shared by every excitation kind.
inline constexpr double kVoltageLimit = 24.0;

struct Constant {
    double level = 0.0; // V
};

struct Ramp {
    double gradient = 0.0; // V/s, u(t) = gradient * t
};

// Linear amplitude envelope times a sine whose frequency sweeps linearly
// from f_lo to f_hi over the duration. Phase is accumulated by trapezoidal
// integration of the instantaneous frequency.
struct Chirp {
    double amp_lo = 0.0; // V at t = 0
    double amp_hi = 0.0; // V at t = duration
    double f_lo = 0.0;   // Hz
    double f_hi = 0.0;   // Hz
};

// Chirp with a trapezoidal amplitude envelope and a vee-shaped frequency
// sweep: amplitude rises 0 -> peak over the first `ramp` seconds, holds, and
// falls back to 0 over the last `ramp` seconds; frequency runs f_end -> f_mid
// linearly over the first half of the duration and back over the second.
// Keeps the start and end of the record in the stick-dominated low-torque
// regime (fast, small reversals) while the middle exercises full-amplitude
// sliding.
struct TrapezoidChirp {
    double peak = 0.0;  // V
    double ramp = 0.0;  // s, rise time = fall time, needs 2*ramp < duration
    double f_end = 0.0; // Hz at t = 0 and t = duration
    double f_mid = 0.0; // Hz at t = duration/2
};

// Piecewise-constant schedule. Each entry holds `level` for `hold` seconds;
// a sample landing exactly on a boundary belongs to the next step. If the
// schedule is shorter than the requested duration the last level is held.
struct StepSchedule {
    struct Step {
        double hold = 0.0;  // s
        double level = 0.0; // V
    };
    std::vector<Step> steps;
};

struct ExcitationSpec {
    std::variant<Constant, Ramp, Chirp, TrapezoidChirp, StepSchedule> shape;
    double duration = 0.0; // s
};

void validate(const ExcitationSpec& spec);

// Samples the excitation on t = k*dt, k = 0..ceil(duration/dt)-1.
TimeSeries generate_excitation(const ExcitationSpec& spec, double dt);

// Causal moving average: output k is the mean of the last `window` samples
// (fewer at the start). window = 1 is the identity.
TimeSeries moving_average(const TimeSeries& s, std::size_t window);

// Central differences in the interior, one-sided first-order at both ends.
// Needs at least 3 samples.
TimeSeries differentiate(const TimeSeries& s);

// resolution * round(v / resolution), ties away from zero. resolution = 0
// disables quantization.
double quantize(double value, double resolution);
TimeSeries quantize(const TimeSeries& s, double resolution);

} // namespace motorid
