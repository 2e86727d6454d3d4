#pragma once

#include <optional>
#include <string>
#include <variant>

#include "motorid/motor.hpp"
#include "motorid/sindy.hpp"
#include "motorid/time_series.hpp"

namespace motorid {

// Velocity-loop PI gains. Defaults are tuned against the default plant and
// sensor chain; pushing them much harder runs into the phase lag of the
// window-10 velocity estimate.
struct ControllerGains {
    double kp = 0.05;                    // V s / rad
    double ki = 0.5;                     // V / rad
    double output_clamp = kVoltageLimit; // V, symmetric
    bool anti_windup = true;             // freeze the integrator while clamped
};

// kp, ki >= 0; 0 < output_clamp <= kVoltageLimit.
void validate(const ControllerGains& g);

// Discrete PI with a symmetric output clamp. Anti-windup is clamp-and-hold:
// on a step whose output saturates the integrator keeps its previous value,
// so the command leaves the rail as soon as the error allows instead of
// first unwinding an overcharged sum.
class PiController {
public:
    PiController(const ControllerGains& gains, double period);

    // One update. `feedforward` joins the sum before the clamp, so a large
    // feedforward can saturate the output (and freeze the integrator) on
    // its own.
    double step(double error, double feedforward = 0.0);

    double integrator() const { return integral_; }
    void reset() { integral_ = 0.0; }

private:
    ControllerGains gains_;
    double period_;
    double integral_ = 0.0;
};

struct LuGreSource {
    LuGreParams params;
};

struct LearnedSource {
    SindycModel model;
};

struct CompensatorConfig {
    std::variant<LuGreSource, LearnedSource> source;
    double lambda = 0.8;                // scale on the compensation voltage
    bool include_inductive_term = true; // keep the L dI_c/dt part of V_c
};

// lambda in [0, 1]; the source parameters/model must validate.
void validate(const CompensatorConfig& cfg);

// Voltage that drives the extra current I_c = F_hat / K_t through the
// winding: V_c = lambda * (L dI_c/dt + R I_c), the dI_c/dt part only when
// include_inductive_term is set. lambda = 0 returns exactly 0.
double compensation_voltage(double f_hat, double f_hat_dot, const MotorParams& mp,
                            const CompensatorConfig& cfg);

struct FrictionEstimate {
    double f_hat = 0.0;     // N m
    double f_hat_dot = 0.0; // N m / s, backward difference at the call rate
    bool fault = false;     // estimate left the finite range; use zero
};

// Friction observer fed by measured velocity only. Holds one internal
// deformation state per source kind and advances it one control period per
// step: the bristle state by the exact exponential update of its linear
// relaxation (stiff at speed, so RK4 at the control period would blow up),
// a learned model's state by RK4 on its discovered rate row. The learned
// state lives in the model's own normalized coordinates throughout.
// A non-finite velocity or a blown-up state flags the step as a fault and
// re-arms the observer from zero so later steps can recover.
class FrictionEstimator {
public:
    FrictionEstimator(const CompensatorConfig& cfg, const MotorParams& mp, double period);

    FrictionEstimate step(double v_measured);

    double internal_state() const { return z_; }
    void reset();

private:
    FrictionEstimate propagate(double v);

    CompensatorConfig cfg_;
    double period_;
    int substeps_; // learned-source RK4 substeps per period
    std::function<double(double, double)> learned_torque_;
    std::function<double(double, double)> learned_rate_;
    double z_ = 0.0;
    double f_prev_ = 0.0;
    bool has_prev_ = false;
};

struct ClosedLoopResult {
    TimeSeries reference;            // rad/s
    TimeSeries velocity;             // rad/s, as measured by the sensor chain
    TimeSeries control_voltage;      // V, clamped command applied to the plant
    TimeSeries compensation_voltage; // V
    double rms_error = 0.0;          // rms(reference - velocity)
    double max_abs_error = 0.0;

    std::size_t size() const { return reference.size(); }
};

// Plant blew up inside the loop; carries everything recorded before the
// failing step.
class ClosedLoopDivergedError : public IntegrationDivergedError {
public:
    ClosedLoopDivergedError(const std::string& msg, double t, ClosedLoopResult partial_)
        : IntegrationDivergedError(msg, t), partial(std::move(partial_)) {}
    ClosedLoopResult partial;
};

// Sampled velocity servo around the simulated plant, starting from rest.
// Each period: quantized position -> causal moving average -> backward
// difference gives the measured velocity (the offline chain's central
// difference would need a sample from the future); PI on the tracking error
// plus the optional compensation voltage, clamped, drives the plant for one
// period. reference.dt must equal sensor.sample_dt, which is the control
// period. substeps = 0 picks a stability-safe count for the plant.
ClosedLoopResult run_closed_loop(const TimeSeries& reference, const MotorParams& mp,
                                 const FrictionModel& plant_friction,
                                 const SensorModel& sensor, const ControllerGains& gains,
                                 const std::optional<CompensatorConfig>& compensator = {},
                                 int substeps = 0);

// CSV with header "t,ref,v,u,vc,err" at 15 significant digits, err = ref - v.
void write_closed_loop_csv(const ClosedLoopResult& r, const std::string& path);

} // namespace motorid
