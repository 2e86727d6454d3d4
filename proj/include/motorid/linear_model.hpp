#pragma once

#include <string>

#include "motorid/sindy.hpp"

namespace motorid {

// Frictionless-baseline motor model fitted by ordinary least squares on the
// measured (v, I, u) record:
//   vdot = p_vv v + p_vi I
//   Idot = p_iv v + p_ii I + p_iu u
// with xdot = v and a frozen internal state.
struct LinearModel {
    double p_vv = 0.0;
    double p_vi = 0.0;
    double p_iv = 0.0;
    double p_ii = 0.0;
    double p_iu = 0.0;
};

void validate(const LinearModel& m);

LinearModel fit_linear_model(const Dataset& ds);

// RK4 free run under zero-order-hold input; z stays at its initial value.
ModelTrajectory simulate_linear(const LinearModel& m, const TimeSeries& u,
                                const MotorState& x0, int substeps);

// Substeps keeping the stiff electrical row stable at the given sample period.
int linear_substeps(const LinearModel& m, double sample_dt);

void save_linear_model(const LinearModel& m, const std::string& path);
LinearModel load_linear_model(const std::string& path);

} // namespace motorid
