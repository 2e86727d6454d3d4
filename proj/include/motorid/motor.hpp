#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>

#include "motorid/signals.hpp"
#include "motorid/time_series.hpp"

namespace motorid {

// Electromechanical constants. K_t, K_b and R follow from the 24 V / 6.39 A /
// 2720 rpm rating point; J and L are frame-size assumptions, not derived, and
// are flagged as such in dataset provenance.
struct MotorParams {
    double J = 1.2e-4;   // kg m^2
    double K_t = 0.0715; // N m / A
    double K_b = 0.0715; // V s / rad
    double R = 0.216;    // ohm
    double L = 1.4e-4;   // H
};

// Bristle friction with Stribeck-shaped sliding envelope:
//   F = sigma0 z + sigma1 zdot + alpha2 v
//   zdot = v (1 - sgn(v) sigma0 z / s(v)),  s(v) = alpha0 + alpha1 exp(-(v/v_s)^2)
struct LuGreParams {
    double alpha0 = 0.08;    // N m, Coulomb level
    double alpha1 = 0.0175;  // N m, static excess
    double alpha2 = 0.0016;  // N m s / rad, viscous slope
    double v_s = 3.676;      // rad/s, Stribeck velocity
    double sigma0 = 317.225; // N m / rad, bristle stiffness
    double sigma1 = 22.2464; // N m s / rad, bristle damping
};

// Rate-independent hysteresis: F = k z, zdot = v (1 - sgn(v) k z / F_c).
struct DahlParams {
    double k = 0.0;   // N m / rad
    double F_c = 0.0; // N m
};

struct ViscousParams {
    double b = 0.0; // N m s / rad
};

// Data-driven friction surface plus optional internal-state dynamics, both in
// the coordinates the surface was identified in.
struct LearnedFriction {
    std::function<double(double v, double z)> torque;
    std::function<double(double v, double z)> z_rate; // may be empty -> zdot = 0
};

using FrictionModel = std::variant<ViscousParams, DahlParams, LuGreParams, LearnedFriction>;

void validate(const MotorParams& p);
void validate(const LuGreParams& p);
void validate(const DahlParams& p);
void validate(const FrictionModel& m);

// Stribeck envelope s(v) and steady-sliding curve F_ss(v) = s(v) sgn(v) + alpha2 v.
double stribeck_envelope(const LuGreParams& p, double v);
double steady_sliding_friction(const LuGreParams& p, double v);

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Friction torque at the given kinematic state. zdot must be the current
// asperity rate for models with internal state (ignored by Viscous/Learned).
double friction_torque(const FrictionModel& m, double v, double z, double zdot);

// Internal-state rate. Defined for Dahl and LuGre only.
double asperity_rate(const FrictionModel& m, double v, double z);

struct MotorState {
    double x = 0.0; // rad
    double v = 0.0; // rad/s
    double z = 0.0; // rad
    double I = 0.0; // A
};

// Right-hand side of the coupled electromechanical system:
//   xdot = v, J vdot = K_t I - F_f, zdot per friction model,
//   L Idot = -R I - K_b v + u
MotorState motor_derivative(const MotorState& s, double u,
                            const MotorParams& mp, const FrictionModel& fm);

// One classical RK4 step with zero-order-hold input.
MotorState rk4_step(const MotorState& s, double u, double h,
                    const MotorParams& mp, const FrictionModel& fm);

// Largest dynamic rate (1/s) the plant can express with |u| <= u_max. Used to
// pick an integration step: stiffest of the electrical pole, the bristle
// damping mode and the sliding bristle relaxation at top speed.
double max_dynamic_rate(const MotorParams& mp, const FrictionModel& fm, double u_max);

// Integrator substeps per sample so that h * max_rate <= 0.8.
int stable_substeps(const MotorParams& mp, const FrictionModel& fm,
                    double sample_dt, double u_max);

// Integrate holding u constant, recording the state every sample_dt (the
// pre-step state, so out[0] is the state on entry). `state` is advanced in
// place by samples * sample_dt.
std::vector<MotorState> integrate_hold(MotorState& state, double u, std::size_t samples,
                                       double sample_dt, int substeps,
                                       const MotorParams& mp, const FrictionModel& fm);

// Sampling chain applied to the continuous plant: position quantized at
// `position_resolution` (0 = ideal), smoothed with a causal moving average of
// `velocity_window` samples, velocity by central differences of the smoothed
// position. Optional white noise on the current readout.
struct SensorModel {
    double sample_dt = 0.012;          // s
    double position_resolution = 0.095; // rad, 0 disables quantization
    std::size_t velocity_window = 10;   // samples, >= 1
    double current_noise_sd = 0.0;      // A
};

void validate(const SensorModel& s);

// Recorded run: drive voltage plus measured position/velocity and the
// simulator-truth internal state and (optionally noisy) current.
struct Dataset {
    TimeSeries u;    // V, as applied (zero-order hold between samples)
    TimeSeries x;    // rad, smoothed quantized position
    TimeSeries xdot; // rad/s, derived from x
    TimeSeries z;    // rad, true internal friction state
    TimeSeries i;    // A, current (noise added if configured)
    Provenance provenance;

    std::size_t size() const { return u.size(); }
    MotorState initial_state() const;
    Dataset truncated(std::size_t n) const;
};

// Integrate the plant from rest under the excitation and run the sensor
// chain. integrator_dt must divide sensor.sample_dt; pass 0 to let
// stable_substeps choose. Throws IntegrationDivergedError on blow-up.
Dataset simulate(const ExcitationSpec& spec, const MotorParams& mp,
                 const FrictionModel& fm, const SensorModel& sensor,
                 double integrator_dt = 0.0, std::uint64_t seed = 0);

// CSV with header "t,u,x,xdot,z,i" at 15 significant digits, plus a
// key = value provenance sidecar at <path>.prov.
void write_csv(const Dataset& ds, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

} // namespace motorid
