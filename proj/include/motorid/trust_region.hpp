#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace motorid {

// Box-constrained nonlinear least squares, min ||r(xi)||^2 over lo <= xi <= hi.
// Trust-region iteration with a Gauss-Newton model; each subproblem is solved
// exactly on the two-dimensional subspace spanned by the gradient and the
// Gauss-Newton step, then candidate steps are truncated or reflected at the
// box faces and the best model value wins.

struct TrustRegionConfig {
    double initial_radius = 1.0;
    double max_radius = 1e3;
    double shrink = 0.25;       // radius factor after a poor or rejected step
    double grow = 2.0;          // radius factor after a near-boundary good step
    double accept_ratio = 1e-4; // actual/predicted reduction below this: reject
    double poor_ratio = 0.25;   // below: shrink
    double good_ratio = 0.75;   // above, with the step near the boundary: grow
    double grad_tol = 1e-9;     // on the inf-norm of the projected gradient
    double step_tol = 1e-12;    // on accepted relative step length and radius
    int max_iter = 200;
    Eigen::VectorXd lower; // empty = unbounded
    Eigen::VectorXd upper;
};

enum class Termination { Gradient, Step, MaxIter };
const char* to_string(Termination reason);

struct TracePoint {
    int iter = 0;
    double cost = 0.0;      // accepted cost after this iteration
    double radius = 0.0;    // radius used for the attempt
    double grad_norm = 0.0; // projected-gradient inf-norm at the iterate
    bool accepted = true;
};

struct FitResult {
    Eigen::VectorXd parameters;
    double cost = 0.0; // ||r||^2 at the returned parameters
    int iterations = 0;
    Termination reason = Termination::MaxIter;
    std::vector<TracePoint> trace; // row 0 is the starting point
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// One-sided difference Jacobian with step sqrt(eps)*max(|xi_i|, 1) per
// coordinate; r0 = residual(xi) is passed in so callers can reuse it.
Eigen::MatrixXd forward_difference_jacobian(const ResidualFn& residual,
                                            const Eigen::VectorXd& xi,
                                            const Eigen::VectorXd& r0);

// jacobian may be empty; forward differences are used then.
FitResult trr_least_squares(const ResidualFn& residual, const Eigen::VectorXd& xi0,
                            const TrustRegionConfig& config,
                            const JacobianFn& jacobian = nullptr);

// CSV export of the iteration trace: iter,cost,delta,grad_norm,accepted.
void write_trace_csv(const FitResult& result, const std::string& path);

} // namespace motorid
