#include "motorid/control.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "motorid/errors.hpp"

namespace motorid {

void validate(const ControllerGains& g) {
    if (!(g.kp >= 0.0) || !(g.ki >= 0.0))
        throw ValidationError("controller gains must be >= 0");
    if (!(g.output_clamp > 0.0) || !(g.output_clamp <= kVoltageLimit))
        throw ValidationError("output clamp needs 0 < clamp <= " +
                              std::to_string(kVoltageLimit) + " V");
}

PiController::PiController(const ControllerGains& gains, double period)
    : gains_(gains), period_(period) {
    validate(gains);
    if (!(period > 0.0)) throw ValidationError("control period must be positive");
}

double PiController::step(double error, double feedforward) {
    const double trial = integral_ + error * period_;
    const double raw = gains_.kp * error + gains_.ki * trial + feedforward;
    const double out = std::clamp(raw, -gains_.output_clamp, gains_.output_clamp);
    // Clamp-and-hold: keep the integral only when the output it produced is
    // actually applied.
    if (out == raw || !gains_.anti_windup) integral_ = trial;
    return out;
}

void validate(const CompensatorConfig& cfg) {
    if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0))
        throw ValidationError("compensator gain lambda must lie in [0, 1], got " +
                              std::to_string(cfg.lambda));
    if (const auto* lugre = std::get_if<LuGreSource>(&cfg.source))
        validate(lugre->params);
    else
        validate(std::get<LearnedSource>(cfg.source).model);
}

double compensation_voltage(double f_hat, double f_hat_dot, const MotorParams& mp,
                            const CompensatorConfig& cfg) {
    const double ic = f_hat / mp.K_t;
    const double ic_dot = f_hat_dot / mp.K_t;
    const double inductive = cfg.include_inductive_term ? mp.L * ic_dot : 0.0;
    return cfg.lambda * (inductive + mp.R * ic);
}

FrictionEstimator::FrictionEstimator(const CompensatorConfig& cfg, const MotorParams& mp,
                                     double period)
    : cfg_(cfg), period_(period) {
    if (!(period > 0.0)) throw ValidationError("estimator period must be positive");
    validate(cfg);
    if (const auto* learned = std::get_if<LearnedSource>(&cfg_.source)) {
        learned_torque_ = extract_friction(learned->model, mp.J);
        learned_rate_ = extract_z_rate(learned->model);
    }
    // The discovered rate rows live at the sample timescale, so a modest
    // fixed substep count covers them; a model stiff enough to escape it
    // lands in the fault path below rather than poisoning the loop.
    substeps_ = 40;
}

void FrictionEstimator::reset() {
    z_ = 0.0;
    f_prev_ = 0.0;
    has_prev_ = false;
}

FrictionEstimate FrictionEstimator::propagate(double v) {
    FrictionEstimate est;
    if (const auto* lugre = std::get_if<LuGreSource>(&cfg_.source)) {
        const LuGreParams& p = lugre->params;
        // zdot = v - k z with k = sigma0 |v| / s(v); exact over one period
        // of held velocity. k reaches sigma0 v / alpha0 ~ 4e4 1/s at speed,
        // far too stiff for RK4 at the control period.
        const double k = p.sigma0 * std::abs(v) / stribeck_envelope(p, v);
        if (k > 0.0) {
            const double decay = -std::expm1(-k * period_); // 1 - e^(-k dt)
            z_ = z_ + (v / k - z_) * decay;
        } // v = 0 holds z
        const double zdot = v - k * z_;
        est.f_hat = p.sigma0 * z_ + p.sigma1 * zdot + p.alpha2 * v;
    } else {
        const double h = period_ / substeps_;
        for (int j = 0; j < substeps_; ++j) {
            const double k1 = learned_rate_(v, z_);
            const double k2 = learned_rate_(v, z_ + 0.5 * h * k1);
            const double k3 = learned_rate_(v, z_ + 0.5 * h * k2);
            const double k4 = learned_rate_(v, z_ + h * k3);
            z_ += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        est.f_hat = learned_torque_(v, z_);
    }
    return est;
}

FrictionEstimate FrictionEstimator::step(double v_measured) {
    FrictionEstimate est;
    if (std::isfinite(v_measured)) est = propagate(v_measured);
    est.f_hat_dot = has_prev_ ? (est.f_hat - f_prev_) / period_ : 0.0;
    if (!std::isfinite(v_measured) || !std::isfinite(est.f_hat) ||
        !std::isfinite(est.f_hat_dot) || !std::isfinite(z_)) {
        reset();
        return FrictionEstimate{0.0, 0.0, true};
    }
    f_prev_ = est.f_hat;
    has_prev_ = true;
    return est;
}

namespace {

bool loop_state_ok(const MotorState& s) {
    return std::isfinite(s.x) && std::isfinite(s.v) && std::isfinite(s.z) &&
           std::isfinite(s.I) && std::abs(s.v) < 1e9 && std::abs(s.I) < 1e9;
}

double rms(const std::vector<double>& e) {
    double acc = 0.0;
    for (double v : e) acc += v * v;
    return std::sqrt(acc / static_cast<double>(e.size()));
}

} // namespace

ClosedLoopResult run_closed_loop(const TimeSeries& reference, const MotorParams& mp,
                                 const FrictionModel& plant_friction,
                                 const SensorModel& sensor, const ControllerGains& gains,
                                 const std::optional<CompensatorConfig>& compensator,
                                 int substeps) {
    validate(reference, "reference");
    validate(mp);
    validate(plant_friction);
    validate(sensor);
    validate(gains);
    if (std::abs(reference.dt - sensor.sample_dt) > 1e-9 * sensor.sample_dt)
        throw ValidationError("reference sample period must equal the sensor period");
    for (double r : reference.values)
        if (!std::isfinite(r)) throw ValidationError("reference contains a non-finite sample");

    const double h = sensor.sample_dt;
    if (substeps <= 0) substeps = stable_substeps(mp, plant_friction, h, gains.output_clamp);
    const double sub_h = h / substeps;

    PiController pi(gains, h);
    std::optional<FrictionEstimator> estimator;
    if (compensator) estimator.emplace(*compensator, mp, h);

    const std::size_t n = reference.size();
    const std::size_t window = sensor.velocity_window;
    std::vector<double> recent; // quantized positions feeding the average
    recent.reserve(window);
    std::size_t next_slot = 0;

    ClosedLoopResult out;
    for (TimeSeries* s : {&out.reference, &out.velocity, &out.control_voltage,
                          &out.compensation_voltage}) {
        s->t0 = reference.t0;
        s->dt = h;
        s->values.reserve(n);
    }
    out.reference.values = reference.values;

    auto finish_stats = [](ClosedLoopResult& r) {
        std::vector<double> err(r.velocity.size());
        for (std::size_t k = 0; k < err.size(); ++k)
            err[k] = r.reference[k] - r.velocity[k];
        r.rms_error = err.empty() ? 0.0 : rms(err);
        r.max_abs_error = 0.0;
        for (double e : err) r.max_abs_error = std::max(r.max_abs_error, std::abs(e));
    };

    MotorState state; // rest
    double prev_avg = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        // Measurement chain, causal edition of the offline one.
        const double q = quantize(state.x, sensor.position_resolution);
        if (recent.size() < window) {
            recent.push_back(q);
        } else {
            recent[next_slot] = q;
            next_slot = (next_slot + 1) % window;
        }
        const double avg = std::accumulate(recent.begin(), recent.end(), 0.0) /
                           static_cast<double>(recent.size());
        const double v_meas = k == 0 ? 0.0 : (avg - prev_avg) / h;
        prev_avg = avg;

        double vc = 0.0;
        if (estimator) {
            const FrictionEstimate est = estimator->step(v_meas);
            vc = est.fault
                     ? 0.0
                     : compensation_voltage(est.f_hat, est.f_hat_dot, mp, *compensator);
            if (!std::isfinite(vc)) vc = 0.0;
        }
        const double u = pi.step(reference[k] - v_meas, vc);

        out.velocity.values.push_back(v_meas);
        out.control_voltage.values.push_back(u);
        out.compensation_voltage.values.push_back(vc);

        for (int j = 0; j < substeps; ++j)
            state = rk4_step(state, u, sub_h, mp, plant_friction);
        if (!loop_state_ok(state)) {
            const double t = reference.t0 + static_cast<double>(k + 1) * h;
            out.reference.values.resize(out.velocity.size());
            finish_stats(out);
            throw ClosedLoopDivergedError(
                "plant diverged in closed loop at t = " + std::to_string(t), t,
                std::move(out));
        }
    }

    finish_stats(out);
    return out;
}

void write_closed_loop_csv(const ClosedLoopResult& r, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "t,ref,v,u,vc,err\n";
    for (std::size_t k = 0; k < r.size(); ++k)
        f << format_double(r.reference.time_at(k)) << "," << format_double(r.reference[k])
          << "," << format_double(r.velocity[k]) << "," << format_double(r.control_voltage[k])
          << "," << format_double(r.compensation_voltage[k]) << ","
          << format_double(r.reference[k] - r.velocity[k]) << "\n";
    if (!f) throw IoError("write failed: " + path);
}

} // namespace motorid
