#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motorid/errors.hpp"
#include "motorid/motor.hpp"

namespace motorid {

// Candidate-term count of the regression library. The order is fixed; a
// coefficient file or matrix column is meaningless without it.
inline constexpr int kLibraryTerms = 17;

// Term names in library order: x, xdot, z, I, tanh(a*xdot), tanh(a*z),
// |xdot|*xdot, |xdot|*xdot^2, |z|*z, |z|*z^2, z*xdot, z^2*xdot, z*xdot^2,
// u, z*u, z^2*u, z*u^2.
const std::array<std::string, kLibraryTerms>& library_term_names();

// a sharpens the tanh terms toward a step; 100 keeps the transition well
// below the sensor's velocity resolution so the term reads as a sign at
// measurement scale.
struct CandidateLibrary {
    double a = 100.0;
};

void validate(const CandidateLibrary& lib);

using Xi = Eigen::Matrix<double, 4, kLibraryTerms>;
using ActiveMask = std::array<std::array<bool, kLibraryTerms>, 4>;

ActiveMask full_mask();

// Rows are the xdot, vdot, zdot, Idot equations; masked-out entries are
// exactly zero.
struct CoefficientMatrix {
    Xi xi = Xi::Zero();
    ActiveMask active{};

    int active_count() const;
    int row_active_count(int row) const;
};

// One design row evaluated at a single sample.
Eigen::Matrix<double, 1, kLibraryTerms> library_row(const MotorState& s, double u, double a);

// n x 17 design matrix over the dataset samples.
Eigen::MatrixXd build_library(const Dataset& ds, double a);

// Sample-wise derivative targets for regression: rows are the central
// differences of the four stored state series, in order d/dt of x, xdot, z, I.
Eigen::MatrixXd estimate_derivatives(const Dataset& ds);

// Per-row least squares restricted to the active columns; everything else is
// zero. Throws RankDeficiencyError naming the dependent columns if the active
// set is collinear.
CoefficientMatrix least_squares_fit(const Eigen::MatrixXd& theta,
                                    const Eigen::MatrixXd& xdot,
                                    const ActiveMask& mask);

// Per-row minimizer of ||xdot_k - theta xi_k||^2 + alpha * ||xi_k||_1 by
// cyclic coordinate descent. alpha = 0 falls back to plain least squares.
CoefficientMatrix lasso_fit(const Eigen::MatrixXd& theta,
                            const Eigen::MatrixXd& xdot, double alpha);

// One removal trial during iterative thresholding, in execution order.
struct RemovalEvent {
    int row = 0;
    int col = 0;
    double normalized_magnitude = 0.0;
    double fit_after = 0.0; // -inf when the trial simulation diverged
    bool accepted = false;
};

struct TrainingRecord {
    double full_fit = 0.0;  // validation fit of the dense starting model
    double final_fit = 0.0; // validation fit of the returned model
    std::vector<RemovalEvent> removals;
};

struct SindycModel {
    CandidateLibrary library;
    CoefficientMatrix coeff;
    double z_scale = 1.0; // embedding normalization absorbed by the z columns
    TrainingRecord training;
};

void validate(const SindycModel& model);

struct ModelTrajectory {
    TimeSeries x, xdot, z, i;

    std::size_t size() const { return x.size(); }
};

// Free-run blow-up; carries whatever was integrated before the state left
// the finite range so thresholding can treat divergence as a failed trial.
class ModelDivergedError : public IntegrationDivergedError {
public:
    ModelDivergedError(const std::string& msg, double t, ModelTrajectory partial_)
        : IntegrationDivergedError(msg, t), partial(std::move(partial_)) {}
    ModelTrajectory partial;
};

// RK4 free run of d(state)/dt = Xi * theta(state, u)^T with zero-order-hold
// input and `substeps` internal steps per sample. out[0] is the initial state.
ModelTrajectory simulate_model(const SindycModel& model, const TimeSeries& u,
                               const MotorState& x0, int substeps);

// Sequential hard thresholding validated by free-run fit. Starting from the
// dense least-squares model, repeatedly zero the active coefficient with the
// smallest column-normalized magnitude (|xi_kj| * ||theta_j|| / ||Xdot_k||,
// never a row's last term), refit, and simulate on the validation record; a
// removal is kept while the mean of the position and velocity fit percentages
// drops no more than min_fit_drop from the current model. A diverged trial
// only vetoes that candidate; a fit rejection ends the loop.
SindycModel threshold_iteratively(const Eigen::MatrixXd& theta_train,
                                  const Eigen::MatrixXd& xdot_train,
                                  const Dataset& validation, double min_fit_drop,
                                  double a = 100.0, int substeps = 40);

// Friction torque surface implied by the velocity equation: J times the
// velocity-row terms built from velocity and internal state only (current and
// voltage columns are the motor's, not friction's). The row carries friction
// with a leading minus sign, so the sign is restored here to make positive
// sliding give positive torque.
std::function<double(double v, double z)> extract_friction(const SindycModel& model, double J);

// Internal-state rate from the zdot row, restricted to the same
// velocity/state terms, for propagating z outside a full 4-state run.
std::function<double(double v, double z)> extract_z_rate(const SindycModel& model);

// Text serialization: term names, a, z_scale, and the coefficient rows with
// their masks, round-tripping doubles exactly.
void save_model(const SindycModel& model, const std::string& path);
SindycModel load_model(const std::string& path);

} // namespace motorid
