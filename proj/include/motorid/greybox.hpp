#pragma once

#include <vector>

#include "motorid/motor.hpp"
#include "motorid/trust_region.hpp"

namespace motorid {

// LuGre parameter identification in three stages: a constant-voltage sweep
// pins the static sliding curve, slow voltage ramps read the asperity
// stiffness off the pre-sliding deflection, and a trust-region refinement on
// transient data recovers the dynamic pair (sigma0, sigma1).

struct SteadyStatePoint {
    double voltage = 0.0; // V
    double v_ss = 0.0;    // rad/s
    double F_ss = 0.0;    // N m, K_t * steady current
};

struct SweepConfig {
    double sample_dt = 0.012;     // s
    double settle_window = 2.0;   // trailing span that must sit in the band
    double settle_band_rel = 0.005;
    double budget = 30.0;         // s per voltage before giving up
};

// Holds each voltage until the velocity band closes; throws
// SettlingTimeoutError for drives that never settle (the plant limit-cycles
// on part of the low-voltage range, so sweep points must avoid that band).
std::vector<SteadyStatePoint> run_steady_state_sweep(const std::vector<double>& voltages,
                                                     const MotorParams& mp,
                                                     const FrictionModel& fm,
                                                     const SweepConfig& cfg = {});

struct StaticFrictionParams {
    double alpha0 = 0.0; // N m
    double alpha1 = 0.0; // N m
    double alpha2 = 0.0; // N m s / rad
    double v_s = 1.0;    // rad/s
};

struct StaticFitResult {
    StaticFrictionParams params;
    FitResult fit;
};

// Least squares of alpha0 + alpha1*exp(-(v/v_s)^2) + alpha2*v against the
// sweep points (stiction points with v_ss ~ 0 are excluded: their torque sits
// below the curve). Needs >= 6 sliding points spanning the Stribeck knee.
StaticFitResult fit_static_params(const std::vector<SteadyStatePoint>& points);

struct DynamicInit {
    double sigma0 = 0.0; // N m / rad
    double sigma1 = 0.0; // N m s / rad
};

// Pre-sliding slope of torque vs position, averaged over the ramp records,
// plus a critical-damping guess for sigma1. Quantized position hides the
// deflection entirely; that raises InitFailedError.
DynamicInit init_dynamic_params(const std::vector<Dataset>& ramps,
                                const StaticFrictionParams& statics,
                                const MotorParams& mp);

// Stacked per-sample mismatch between the model state derivatives at the
// measured states and the central-difference derivatives of the record, each
// of the four rows normalized by its measured RMS; xi = (sigma0, sigma1).
ResidualFn dynamic_residual(const Dataset& ds, const StaticFrictionParams& statics,
                            const MotorParams& mp);

// Bounds sigma0 in [1, 1e5], sigma1 in [0, 1e3]; radius sized for the
// parameter scale.
TrustRegionConfig default_dynamic_config();

struct DynamicFitResult {
    double sigma0 = 0.0;
    double sigma1 = 0.0;
    FitResult fit;
};

DynamicFitResult fit_dynamic_params(const Dataset& ds, const StaticFrictionParams& statics,
                                    const DynamicInit& init, const MotorParams& mp,
                                    const TrustRegionConfig& cfg = default_dynamic_config());

// Assembled estimation result: the physical plant description the evaluation
// and compensation stages consume.
struct LuGreModel {
    MotorParams motor;
    LuGreParams friction;
};

void save_lugre_model(const LuGreModel& m, const std::string& path);
LuGreModel load_lugre_model(const std::string& path);

} // namespace motorid
