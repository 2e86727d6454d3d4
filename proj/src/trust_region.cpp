#include "motorid/trust_region.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "motorid/errors.hpp"
#include "motorid/time_series.hpp"

namespace motorid {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_finite(const VectorXd& r, const VectorXd& xi) {
    if (r.allFinite()) return;
    std::ostringstream os;
    os << "residual evaluation returned a non-finite value at xi = [";
    for (Eigen::Index i = 0; i < xi.size(); ++i) os << (i ? ", " : "") << xi[i];
    os << "]";
    throw NumericalError(os.str());
}

void validate(const TrustRegionConfig& c, const VectorXd& xi0) {
    if (!(c.initial_radius > 0.0) || !(c.max_radius >= c.initial_radius))
        throw ValidationError("trust region radii need 0 < initial <= max");
    if (!(c.shrink > 0.0 && c.shrink < 1.0 && c.grow > 1.0))
        throw ValidationError("trust region factors need 0 < shrink < 1 < grow");
    if (!(c.grad_tol > 0.0) || !(c.step_tol > 0.0))
        throw ValidationError("trust region tolerances must be positive");
    if (c.max_iter < 0) throw ValidationError("max_iter must be >= 0");
    if (c.lower.size() != c.upper.size())
        throw ValidationError("lower and upper bounds must have equal size");
    if (c.lower.size() > 0) {
        if (c.lower.size() != xi0.size())
            throw ValidationError("bounds dimension does not match the parameter vector");
        if (!((c.lower.array() < c.upper.array()).all()))
            throw ValidationError("bounds need lower < upper elementwise");
        if (((xi0.array() < c.lower.array()) || (xi0.array() > c.upper.array())).any())
            throw ValidationError("starting point violates the bounds");
    }
    if (!xi0.allFinite()) throw ValidationError("starting point must be finite");
}

struct Box {
    bool active = false;
    VectorXd lo, hi;

    void clamp(VectorXd& x) const {
        if (active) x = x.cwiseMax(lo).cwiseMin(hi);
    }
    bool at_lower(const VectorXd& x, Eigen::Index i) const {
        return active && x[i] <= lo[i] + 1e-12 * std::max(1.0, std::abs(lo[i]));
    }
    bool at_upper(const VectorXd& x, Eigen::Index i) const {
        return active && x[i] >= hi[i] - 1e-12 * std::max(1.0, std::abs(hi[i]));
    }
    // Largest fraction of the step that stays inside, and the first blocking
    // coordinate (-1 if the whole step fits).
    std::pair<double, Eigen::Index> max_fraction(const VectorXd& x, const VectorXd& p) const {
        if (!active) return {1.0, -1};
        double tau = 1.0;
        Eigen::Index blocker = -1;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            double room = kInf;
            if (p[i] > 0.0) room = (hi[i] - x[i]) / p[i];
            else if (p[i] < 0.0) room = (lo[i] - x[i]) / p[i];
            if (room < tau) {
                tau = std::max(room, 0.0);
                blocker = i;
            }
        }
        return {tau, blocker};
    }
};

// Gradient with the components that push into an active bound zeroed; its
// inf-norm is the first-order optimality measure on the box.
VectorXd projected_gradient(const VectorXd& g, const VectorXd& x, const Box& box) {
    VectorXd pg = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if ((box.at_lower(x, i) && g[i] > 0.0) || (box.at_upper(x, i) && g[i] < 0.0))
            pg[i] = 0.0;
    }
    return pg;
}

// Exact minimizer of g.y + y^T B y / 2 over ||y|| <= radius for a symmetric
// positive semidefinite B of dimension <= 2 (Gauss-Newton model restricted to
// the subspace). Solved through the eigendecomposition and a bisection on the
// boundary multiplier.
VectorXd solve_ball_quadratic(const VectorXd& g, const MatrixXd& B, double radius) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(B);
    const VectorXd lam = eig.eigenvalues();
    const MatrixXd V = eig.eigenvectors();
    const VectorXd gh = V.transpose() * g;
    const double lam_max = lam.size() ? lam.maxCoeff() : 0.0;
    const double tol = 1e-14 * std::max(lam_max, 1.0);

    // Pseudo-inverse Newton point; flags a direction of unbounded descent when
    // the gradient has weight on a (numerically) null eigenvector.
    VectorXd yh = VectorXd::Zero(gh.size());
    bool needs_boundary = false;
    for (Eigen::Index i = 0; i < gh.size(); ++i) {
        if (lam[i] > tol) yh[i] = -gh[i] / lam[i];
        else if (std::abs(gh[i]) > tol) needs_boundary = true;
    }
    if (!needs_boundary && yh.norm() <= radius) return V * yh;

    auto norm_at = [&](double mu) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < gh.size(); ++i) {
            const double d = lam[i] + mu;
            if (d > 0.0) s += (gh[i] / d) * (gh[i] / d);
            else if (std::abs(gh[i]) > 0.0) return kInf;
        }
        return std::sqrt(s);
    };
    double lo = 0.0;
    double hi = g.norm() / radius + lam_max + 1e-300;
    while (norm_at(hi) > radius) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (norm_at(mid) > radius ? lo : hi) = mid;
    }
    const double mu = hi;
    for (Eigen::Index i = 0; i < gh.size(); ++i) {
        const double d = lam[i] + mu;
        yh[i] = d > 0.0 ? -gh[i] / d : 0.0;
    }
    return V * yh;
}

} // namespace

const char* to_string(Termination reason) {
    switch (reason) {
        case Termination::Gradient: return "gradient";
        case Termination::Step: return "step";
        case Termination::MaxIter: return "max-iter";
    }
    return "unknown";
}

MatrixXd forward_difference_jacobian(const ResidualFn& residual, const VectorXd& xi,
                                     const VectorXd& r0) {
    const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    MatrixXd J(r0.size(), xi.size());
    VectorXd x = xi;
    for (Eigen::Index j = 0; j < xi.size(); ++j) {
        const double h = sqrt_eps * std::max(std::abs(xi[j]), 1.0);
        x[j] = xi[j] + h;
        J.col(j) = (residual(x) - r0) / h;
        x[j] = xi[j];
    }
    return J;
}

FitResult trr_least_squares(const ResidualFn& residual, const VectorXd& xi0,
                            const TrustRegionConfig& cfg, const JacobianFn& jacobian) {
    validate(cfg, xi0);
    Box box;
    if (cfg.lower.size() > 0) {
        box.active = true;
        box.lo = cfg.lower;
        box.hi = cfg.upper;
    }

    VectorXd x = xi0;
    box.clamp(x);
    VectorXd r = residual(x);
    check_finite(r, x);
    double cost = r.squaredNorm();
    double radius = cfg.initial_radius;

    FitResult res;
    res.reason = Termination::MaxIter;

    auto jac_at = [&](const VectorXd& at, const VectorXd& r_at) {
        return jacobian ? jacobian(at) : forward_difference_jacobian(residual, at, r_at);
    };

    int iter = 0;
    MatrixXd J = jac_at(x, r);
    VectorXd g = 2.0 * J.transpose() * r;
    VectorXd pg = projected_gradient(g, x, box);
    res.trace.push_back({0, cost, radius, pg.lpNorm<Eigen::Infinity>(), true});

    while (true) {
        if (pg.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
            res.reason = Termination::Gradient;
            break;
        }
        if (iter >= cfg.max_iter) {
            res.reason = Termination::MaxIter;
            break;
        }
        if (radius <= cfg.step_tol * std::max(x.norm(), 1.0)) {
            res.reason = Termination::Step;
            break;
        }
        ++iter;

        // Free subspace: drop the coordinates pinned by an active bound so a
        // blocked direction cannot zero out the whole step.
        std::vector<Eigen::Index> free_idx;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (pg[i] != 0.0 || ((!box.at_lower(x, i)) && (!box.at_upper(x, i))))
                free_idx.push_back(i);
        const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());

        MatrixXd Jf(J.rows(), nf);
        VectorXd gf(nf);
        for (Eigen::Index k = 0; k < nf; ++k) {
            Jf.col(k) = J.col(free_idx[k]);
            gf[k] = g[free_idx[k]];
        }
        const VectorXd gn_f = Jf.colPivHouseholderQr().solve(-r);

        // Two-dimensional subspace spanned by the gradient and the
        // Gauss-Newton step (free coordinates).
        MatrixXd Q(nf, 0);
        const double gf_norm = gf.norm();
        if (gf_norm > 0.0) {
            Q.conservativeResize(nf, 1);
            Q.col(0) = -gf / gf_norm;
        }
        VectorXd orth = gn_f;
        if (Q.cols() == 1) orth -= Q.col(0).dot(gn_f) * Q.col(0);
        if (orth.norm() > 1e-12 * std::max(gn_f.norm(), 1.0)) {
            Q.conservativeResize(nf, Q.cols() + 1);
            Q.col(Q.cols() - 1) = orth / orth.norm();
        }

        const MatrixXd B2 = 2.0 * (Jf * Q).transpose() * (Jf * Q);
        const VectorXd g2 = Q.transpose() * gf;
        const VectorXd y = solve_ball_quadratic(g2, B2, radius);
        VectorXd pf = Q * y;

        auto scatter = [&](const VectorXd& v) {
            VectorXd full = VectorXd::Zero(x.size());
            for (Eigen::Index k = 0; k < nf; ++k) full[free_idx[k]] = v[k];
            return full;
        };
        auto model_value = [&](const VectorXd& p) {
            const VectorXd Jp = J * p;
            return g.dot(p) + Jp.squaredNorm();
        };

        // Candidate steps: the subspace solution truncated at the box, its
        // reflection off the first blocking face, and a truncated Cauchy step.
        VectorXd best;
        double best_m = 0.0;
        auto consider = [&](const VectorXd& p) {
            const double m = model_value(p);
            if (!best.size() || m < best_m) {
                best = p;
                best_m = m;
            }
        };

        const VectorXd p_full = scatter(pf);
        auto [tau, blocker] = box.max_fraction(x, p_full);
        consider(tau * p_full);
        if (blocker >= 0 && tau < 1.0) {
            const VectorXd x_hit = x + tau * p_full;
            VectorXd p_rem = (1.0 - tau) * p_full;
            p_rem[blocker] = -p_rem[blocker];
            const double tau_r = box.max_fraction(x_hit, p_rem).first;
            VectorXd leg = tau_r * p_rem;
            const VectorXd base = tau * p_full;
            // Pull the second leg back inside the trust ball if needed.
            const double a = leg.squaredNorm();
            if (a > 0.0) {
                const double b = 2.0 * base.dot(leg);
                const double c = base.squaredNorm() - radius * radius;
                double t = 1.0;
                if (c + b + a > 0.0) {
                    const double disc = std::max(b * b - 4.0 * a * c, 0.0);
                    t = std::clamp((-b + std::sqrt(disc)) / (2.0 * a), 0.0, 1.0);
                }
                consider(base + t * leg);
            }
        }
        if (gf_norm > 0.0) {
            const VectorXd d = scatter(-gf);
            const double dBd = 2.0 * (J * d).squaredNorm();
            double t_c = radius / d.norm();
            if (dBd > 0.0) t_c = std::min(t_c, -g.dot(d) / dBd);
            VectorXd pc = t_c * d;
            pc *= box.max_fraction(x, pc).first;
            consider(pc);
        }

        const double pred = -best_m;
        if (!(pred > 0.0)) {
            res.trace.push_back({iter, cost, radius, pg.lpNorm<Eigen::Infinity>(), false});
            radius *= cfg.shrink;
            continue;
        }

        VectorXd x_trial = x + best;
        box.clamp(x_trial);
        const VectorXd r_trial = residual(x_trial);
        check_finite(r_trial, x_trial);
        const double cost_trial = r_trial.squaredNorm();
        const double rho = (cost - cost_trial) / pred;
        const double step_norm = best.norm();

        if (rho >= cfg.accept_ratio && cost_trial < cost) {
            x = x_trial;
            r = r_trial;
            cost = cost_trial;
            J = jac_at(x, r);
            g = 2.0 * J.transpose() * r;
            pg = projected_gradient(g, x, box);
            res.trace.push_back({iter, cost, radius, pg.lpNorm<Eigen::Infinity>(), true});
            if (rho > cfg.good_ratio && step_norm >= 0.95 * radius)
                radius = std::min(cfg.grow * radius, cfg.max_radius);
            else if (rho < cfg.poor_ratio)
                radius *= cfg.shrink;
            if (step_norm <= cfg.step_tol * (x.norm() + cfg.step_tol)) {
                res.reason = Termination::Step;
                break;
            }
        } else {
            res.trace.push_back({iter, cost, radius, pg.lpNorm<Eigen::Infinity>(), false});
            radius *= cfg.shrink;
        }
    }

    res.parameters = x;
    res.cost = cost;
    res.iterations = iter;
    return res;
}

void write_trace_csv(const FitResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open trace file for writing: " + path);
    out << "iter,cost,delta,grad_norm,accepted\n";
    for (const auto& p : result.trace) {
        out << p.iter << "," << format_double(p.cost) << "," << format_double(p.radius)
            << "," << format_double(p.grad_norm) << "," << (p.accepted ? 1 : 0) << "\n";
    }
    if (!out.good()) throw IoError("failed while writing trace file: " + path);
}

} // namespace motorid
