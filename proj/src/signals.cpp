#include "motorid/signals.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "motorid/errors.hpp"

namespace motorid {

namespace {

void check_level(double v, const char* what) {
    if (std::abs(v) > kVoltageLimit)
        throw ValidationError(std::string(what) + " outside the +/-24 V drive range: " +
                              std::to_string(v));
}

// Sample count for a duration: ceil(duration/dt) with a small guard so an
// exact multiple stored inexactly does not gain a sample.
std::size_t sample_count(double duration, double dt) {
    double n = std::ceil(duration / dt - 1e-9);
    return static_cast<std::size_t>(n < 1.0 ? 1.0 : n);
}

} // namespace

void validate(const ExcitationSpec& spec) {
    if (!(spec.duration > 0.0))
        throw ValidationError("excitation duration must be positive");
    if (const auto* c = std::get_if<Constant>(&spec.shape)) {
        check_level(c->level, "constant level");
    } else if (const auto* r = std::get_if<Ramp>(&spec.shape)) {
        check_level(r->gradient * spec.duration, "ramp endpoint");
    } else if (const auto* ch = std::get_if<Chirp>(&spec.shape)) {
        if (ch->amp_lo < 0.0 || ch->amp_hi < ch->amp_lo)
            throw ValidationError("chirp amplitudes need 0 <= amp_lo <= amp_hi");
        check_level(ch->amp_hi, "chirp amplitude");
        if (!(ch->f_lo > 0.0) || ch->f_hi < ch->f_lo)
            throw ValidationError("chirp frequencies need 0 < f_lo <= f_hi");
    } else if (const auto* tc = std::get_if<TrapezoidChirp>(&spec.shape)) {
        if (tc->peak < 0.0)
            throw ValidationError("trapezoid chirp peak must be >= 0");
        check_level(tc->peak, "trapezoid chirp peak");
        if (!(tc->ramp > 0.0) || 2.0 * tc->ramp >= spec.duration)
            throw ValidationError("trapezoid chirp needs 0 < 2*ramp < duration");
        if (!(tc->f_end > 0.0) || !(tc->f_mid > 0.0))
            throw ValidationError("trapezoid chirp frequencies must be positive");
    } else if (const auto* ss = std::get_if<StepSchedule>(&spec.shape)) {
        if (ss->steps.empty())
            throw ValidationError("step schedule has no steps");
        for (const auto& st : ss->steps) {
            if (!(st.hold > 0.0))
                throw ValidationError("step hold time must be positive");
            check_level(st.level, "step level");
        }
    }
}

TimeSeries generate_excitation(const ExcitationSpec& spec, double dt) {
    validate(spec);
    if (!(dt > 0.0)) throw ValidationError("sample period must be positive");
    const std::size_t n = sample_count(spec.duration, dt);
    TimeSeries out;
    out.t0 = 0.0;
    out.dt = dt;
    out.values.resize(n);

    if (const auto* c = std::get_if<Constant>(&spec.shape)) {
        for (std::size_t k = 0; k < n; ++k) out.values[k] = c->level;
    } else if (const auto* r = std::get_if<Ramp>(&spec.shape)) {
        for (std::size_t k = 0; k < n; ++k)
            out.values[k] = r->gradient * (static_cast<double>(k) * dt);
    } else if (const auto* ch = std::get_if<Chirp>(&spec.shape)) {
        const double T = spec.duration;
        double phase = 0.0;
        double f_prev = ch->f_lo;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * dt;
            const double frac = t / T;
            const double f = ch->f_lo + (ch->f_hi - ch->f_lo) * frac;
            if (k > 0) phase += std::numbers::pi * (f_prev + f) * dt; // 2*pi*(f_prev+f)/2*dt
            f_prev = f;
            const double amp = ch->amp_lo + (ch->amp_hi - ch->amp_lo) * frac;
            out.values[k] = amp * std::sin(phase);
        }
    } else if (const auto* tc = std::get_if<TrapezoidChirp>(&spec.shape)) {
        const double T = spec.duration;
        const double half = 0.5 * T;
        double phase = 0.0;
        double f_prev = tc->f_end;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * dt;
            const double frac = (t < half ? t : T - t) / half;
            const double f = tc->f_end + (tc->f_mid - tc->f_end) * frac;
            if (k > 0) phase += std::numbers::pi * (f_prev + f) * dt;
            f_prev = f;
            double amp = tc->peak;
            if (t < tc->ramp) amp = tc->peak * t / tc->ramp;
            else if (t > T - tc->ramp) amp = tc->peak * (T - t) / tc->ramp;
            out.values[k] = amp * std::sin(phase);
        }
    } else {
        const auto& ss = std::get<StepSchedule>(spec.shape);
        std::size_t idx = 0;
        double seg_end = ss.steps[0].hold;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * dt;
            while (idx + 1 < ss.steps.size() && t >= seg_end - 1e-12) {
                ++idx;
                seg_end += ss.steps[idx].hold;
            }
            out.values[k] = ss.steps[idx].level;
        }
    }
    return out;
}

TimeSeries moving_average(const TimeSeries& s, std::size_t window) {
    validate(s, "moving_average input");
    if (window < 1) throw ValidationError("moving average window must be >= 1");
    if (window == 1) return s;
    TimeSeries out = s;
    const std::size_t n = s.size();
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t lo = (k + 1 >= window) ? k + 1 - window : 0;
        double acc = 0.0;
        for (std::size_t j = lo; j <= k; ++j) acc += s[j];
        out.values[k] = acc / static_cast<double>(k - lo + 1);
    }
    return out;
}

TimeSeries differentiate(const TimeSeries& s) {
    validate(s, "differentiate input");
    const std::size_t n = s.size();
    if (n < 3) throw ValidationError("differentiate needs at least 3 samples");
    TimeSeries out = s;
    const double dt = s.dt;
    out.values[0] = (s[1] - s[0]) / dt;
    for (std::size_t k = 1; k + 1 < n; ++k)
        out.values[k] = (s[k + 1] - s[k - 1]) / (2.0 * dt);
    out.values[n - 1] = (s[n - 1] - s[n - 2]) / dt;
    return out;
}

double quantize(double value, double resolution) {
    if (resolution < 0.0) throw ValidationError("resolution must be >= 0");
    if (resolution == 0.0) return value;
    return resolution * std::round(value / resolution);
}

TimeSeries quantize(const TimeSeries& s, double resolution) {
    TimeSeries out = s;
    for (auto& v : out.values) v = quantize(v, resolution);
    return out;
}

} // namespace motorid
