#include "motorid/sindy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "motorid/errors.hpp"
#include "motorid/metrics.hpp"
#include "motorid/signals.hpp"
#include "motorid/time_series.hpp"

namespace motorid {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using LibRow = Eigen::Matrix<double, 1, kLibraryTerms>;

const std::array<std::string, kLibraryTerms>& library_term_names() {
    static const std::array<std::string, kLibraryTerms> names = {
        "x",          "xdot",        "z",         "I",
        "tanh(a*xdot)", "tanh(a*z)", "|xdot|*xdot", "|xdot|*xdot^2",
        "|z|*z",      "|z|*z^2",     "z*xdot",    "z^2*xdot",
        "z*xdot^2",   "u",           "z*u",       "z^2*u",
        "z*u^2"};
    return names;
}

void validate(const CandidateLibrary& lib) {
    if (!(lib.a > 0.0)) throw ValidationError("library sharpness a must be positive");
}

ActiveMask full_mask() {
    ActiveMask m;
    for (auto& row : m) row.fill(true);
    return m;
}

int CoefficientMatrix::active_count() const {
    int n = 0;
    for (int k = 0; k < 4; ++k) n += row_active_count(k);
    return n;
}

int CoefficientMatrix::row_active_count(int row) const {
    int n = 0;
    for (bool on : active[static_cast<std::size_t>(row)]) n += on ? 1 : 0;
    return n;
}

LibRow library_row(const MotorState& s, double u, double a) {
    const double v = s.v, z = s.z;
    LibRow r;
    r << s.x, v, z, s.I,
        std::tanh(a * v), std::tanh(a * z),
        std::abs(v) * v, std::abs(v) * v * v,
        std::abs(z) * z, std::abs(z) * z * z,
        z * v, z * z * v, z * v * v,
        u, z * u, z * z * u, z * u * u;
    return r;
}

MatrixXd build_library(const Dataset& ds, double a) {
    if (!(a > 0.0)) throw ValidationError("library sharpness a must be positive");
    const std::size_t n = ds.size();
    if (n == 0) throw ValidationError("cannot build a library over an empty dataset");
    const TimeSeries* series[5] = {&ds.x, &ds.xdot, &ds.z, &ds.i, &ds.u};
    for (const TimeSeries* s : series)
        if (s->size() != n || s->dt != ds.u.dt)
            throw ValidationError("dataset series are not aligned");

    MatrixXd theta(static_cast<Eigen::Index>(n), kLibraryTerms);
    for (std::size_t k = 0; k < n; ++k) {
        const MotorState s{ds.x[k], ds.xdot[k], ds.z[k], ds.i[k]};
        theta.row(static_cast<Eigen::Index>(k)) = library_row(s, ds.u[k], a);
    }
    return theta;
}

Eigen::MatrixXd estimate_derivatives(const Dataset& ds) {
    const std::size_t n = ds.size();
    if (n < 3) throw ValidationError("derivative estimation needs at least 3 samples");
    const TimeSeries* series[4] = {&ds.x, &ds.xdot, &ds.z, &ds.i};
    Eigen::MatrixXd d(4, static_cast<Eigen::Index>(n));
    for (int row = 0; row < 4; ++row) {
        if (series[row]->size() != n || series[row]->dt != ds.x.dt)
            throw ValidationError("dataset series are not aligned");
        const TimeSeries diff = differentiate(*series[row]);
        for (std::size_t k = 0; k < n; ++k)
            d(row, static_cast<Eigen::Index>(k)) = diff[k];
    }
    return d;
}

namespace {

void check_regression_shapes(const MatrixXd& theta, const MatrixXd& xdot) {
    if (theta.cols() != kLibraryTerms)
        throw ValidationError("design matrix must have one column per library term");
    if (xdot.rows() != 4)
        throw ValidationError("derivative matrix must have four rows");
    if (theta.rows() != xdot.cols())
        throw ValidationError("design matrix and derivative matrix disagree on sample count");
    if (theta.rows() < 1) throw ValidationError("regression needs samples");
}

// Least squares on one row's active columns. Rank loss names the columns the
// pivoting pushed past the numerical rank.
void solve_row(const MatrixXd& theta, const MatrixXd& xdot, int row,
               const std::array<bool, kLibraryTerms>& active, Xi& xi) {
    std::vector<int> cols;
    for (int j = 0; j < kLibraryTerms; ++j)
        if (active[static_cast<std::size_t>(j)]) cols.push_back(j);
    if (cols.empty()) return;
    if (theta.rows() < static_cast<Eigen::Index>(cols.size()))
        throw ValidationError("fewer samples than active terms in row " + std::to_string(row));

    MatrixXd A(theta.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) A.col(static_cast<Eigen::Index>(c)) = theta.col(cols[c]);

    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    if (rank < static_cast<Eigen::Index>(cols.size())) {
        std::string names;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index p = rank; p < perm.size(); ++p) {
            if (!names.empty()) names += ", ";
            names += library_term_names()[static_cast<std::size_t>(cols[static_cast<std::size_t>(perm[p])])];
        }
        throw RankDeficiencyError("active columns are collinear in row " + std::to_string(row) +
                                  ": " + names);
    }
    const VectorXd sol = qr.solve(xdot.row(row).transpose());
    for (std::size_t c = 0; c < cols.size(); ++c) xi(row, cols[c]) = sol[static_cast<Eigen::Index>(c)];
}

} // namespace

CoefficientMatrix least_squares_fit(const MatrixXd& theta, const MatrixXd& xdot,
                                    const ActiveMask& mask) {
    check_regression_shapes(theta, xdot);
    CoefficientMatrix out;
    out.active = mask;
    for (int row = 0; row < 4; ++row)
        solve_row(theta, xdot, row, mask[static_cast<std::size_t>(row)], out.xi);
    return out;
}

namespace {

// Duality gap of 0.5||y - theta xi||^2 + lambda ||xi||_1 at the current
// iterate; doubled by the caller to match the stated objective.
double lasso_gap(const MatrixXd& theta, const VectorXd& y, const VectorXd& xi,
                 const VectorXd& r, double lambda) {
    const double primal = 0.5 * r.squaredNorm() + lambda * xi.lpNorm<1>();
    const double corr_inf = (theta.transpose() * r).lpNorm<Eigen::Infinity>();
    const double s = corr_inf > lambda ? lambda / corr_inf : 1.0;
    const VectorXd nu = s * r;
    const double dual = -0.5 * nu.squaredNorm() + nu.dot(y);
    return primal - dual;
}

} // namespace

CoefficientMatrix lasso_fit(const MatrixXd& theta, const MatrixXd& xdot, double alpha) {
    check_regression_shapes(theta, xdot);
    if (alpha < 0.0) throw ValidationError("lasso weight must be non-negative");
    if (alpha == 0.0) return least_squares_fit(theta, xdot, full_mask());

    CoefficientMatrix out;
    const double lambda = 0.5 * alpha;
    Eigen::Matrix<double, kLibraryTerms, 1> col_sq;
    for (int j = 0; j < kLibraryTerms; ++j) col_sq[j] = theta.col(j).squaredNorm();

    for (int row = 0; row < 4; ++row) {
        const VectorXd y = xdot.row(row).transpose();
        VectorXd xi = VectorXd::Zero(kLibraryTerms);
        VectorXd r = y;
        const double gap_tol = 1e-12 * std::max(1.0, 0.5 * y.squaredNorm());
        const int max_sweeps = 100000;
        double gap = std::numeric_limits<double>::infinity();
        bool converged = false;
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            for (int j = 0; j < kLibraryTerms; ++j) {
                if (col_sq[j] == 0.0) continue;
                const double old = xi[j];
                if (old != 0.0) r += theta.col(j) * old;
                const double c = theta.col(j).dot(r);
                const double shrunk = std::abs(c) - lambda;
                const double next = shrunk > 0.0 ? (c > 0.0 ? shrunk : -shrunk) / col_sq[j] : 0.0;
                xi[j] = next;
                if (next != 0.0) r -= theta.col(j) * next;
            }
            gap = lasso_gap(theta, y, xi, r, lambda);
            if (gap <= gap_tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw ConvergenceError("lasso coordinate descent for row " + std::to_string(row) +
                                       " did not close its duality gap",
                                   2.0 * gap);
        for (int j = 0; j < kLibraryTerms; ++j) {
            out.xi(row, j) = xi[j];
            out.active[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] = xi[j] != 0.0;
        }
    }
    return out;
}

void validate(const SindycModel& model) {
    validate(model.library);
    if (!(model.z_scale > 0.0)) throw ValidationError("z_scale must be positive");
    if (!model.coeff.xi.allFinite())
        throw ValidationError("model coefficients must be finite");
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < kLibraryTerms; ++j)
            if (!model.coeff.active[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] &&
                model.coeff.xi(k, j) != 0.0)
                throw ValidationError("masked-out coefficient is non-zero");
}

ModelTrajectory simulate_model(const SindycModel& model, const TimeSeries& u,
                               const MotorState& x0, int substeps) {
    validate(model);
    validate(u, "input series");
    if (substeps < 1) throw ValidationError("substeps must be at least 1");

    const double a = model.library.a;
    const Xi& xi = model.coeff.xi;
    const auto rhs = [&](const Eigen::Vector4d& s, double uu) -> Eigen::Vector4d {
        return xi * library_row({s[0], s[1], s[2], s[3]}, uu, a).transpose();
    };

    ModelTrajectory out;
    for (TimeSeries* s : {&out.x, &out.xdot, &out.z, &out.i}) {
        s->t0 = u.t0;
        s->dt = u.dt;
        s->values.reserve(u.size());
    }
    const auto record = [&](const Eigen::Vector4d& s) {
        out.x.values.push_back(s[0]);
        out.xdot.values.push_back(s[1]);
        out.z.values.push_back(s[2]);
        out.i.values.push_back(s[3]);
    };

    Eigen::Vector4d s(x0.x, x0.v, x0.z, x0.I);
    const double h = u.dt / substeps;
    for (std::size_t k = 0; k < u.size(); ++k) {
        record(s);
        const double uu = u[k];
        for (int i = 0; i < substeps; ++i) {
            const Eigen::Vector4d k1 = rhs(s, uu);
            const Eigen::Vector4d k2 = rhs(s + 0.5 * h * k1, uu);
            const Eigen::Vector4d k3 = rhs(s + 0.5 * h * k2, uu);
            const Eigen::Vector4d k4 = rhs(s + h * k3, uu);
            s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!s.allFinite())
            throw ModelDivergedError("discovered-model free run diverged",
                                     u.time_at(k) + u.dt, std::move(out));
    }
    return out;
}

namespace {

// Mean of the position and velocity fit percentages for a free run on the
// validation record; -inf when the run diverges or a fit is undefined.
double validation_fit(const SindycModel& model, const Dataset& validation, int substeps) {
    try {
        const ModelTrajectory traj =
            simulate_model(model, validation.u, validation.initial_state(), substeps);
        return 0.5 * (fit_percentage(validation.x, traj.x) +
                      fit_percentage(validation.xdot, traj.xdot));
    } catch (const IntegrationDivergedError&) {
        return -std::numeric_limits<double>::infinity();
    }
}

} // namespace

SindycModel threshold_iteratively(const MatrixXd& theta_train, const MatrixXd& xdot_train,
                                  const Dataset& validation, double min_fit_drop,
                                  double a, int substeps) {
    check_regression_shapes(theta_train, xdot_train);
    if (validation.size() < 2) throw ValidationError("validation record is too short");
    if (std::isnan(min_fit_drop)) throw ValidationError("min_fit_drop must not be NaN");

    Eigen::Matrix<double, kLibraryTerms, 1> col_norm;
    for (int j = 0; j < kLibraryTerms; ++j) col_norm[j] = theta_train.col(j).norm();
    Eigen::Vector4d row_norm;
    for (int k = 0; k < 4; ++k) row_norm[k] = xdot_train.row(k).norm();

    SindycModel model;
    model.library.a = a;
    model.coeff = least_squares_fit(theta_train, xdot_train, full_mask());
    double fit_current = validation_fit(model, validation, substeps);
    model.training.full_fit = fit_current;

    const auto normalized = [&](int k, int j) {
        const double ref = row_norm[k] > 0.0 ? row_norm[k] : 1.0;
        return std::abs(model.coeff.xi(k, j)) * col_norm[j] / ref;
    };

    std::array<std::array<bool, kLibraryTerms>, 4> vetoed{};
    bool stop = false;
    while (!stop) {
        int best_k = -1, best_j = -1;
        double best_mag = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 4; ++k) {
            if (model.coeff.row_active_count(k) < 2) continue;
            for (int j = 0; j < kLibraryTerms; ++j) {
                if (!model.coeff.active[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)])
                    continue;
                if (vetoed[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]) continue;
                const double mag = normalized(k, j);
                if (mag < best_mag) {
                    best_mag = mag;
                    best_k = k;
                    best_j = j;
                }
            }
        }
        if (best_k < 0) break; // every row is down to one term, or all vetoed

        ActiveMask trial_mask = model.coeff.active;
        trial_mask[static_cast<std::size_t>(best_k)][static_cast<std::size_t>(best_j)] = false;
        SindycModel trial = model;
        trial.coeff = least_squares_fit(theta_train, xdot_train, trial_mask);
        const double fit_trial = validation_fit(trial, validation, substeps);

        RemovalEvent ev{best_k, best_j, best_mag, fit_trial, false};
        if (std::isinf(fit_trial) && fit_trial < 0.0) {
            // Divergence vetoes the candidate; the next-smallest gets its turn.
            vetoed[static_cast<std::size_t>(best_k)][static_cast<std::size_t>(best_j)] = true;
        } else if (fit_trial >= fit_current - min_fit_drop) {
            ev.accepted = true;
            model.coeff = trial.coeff;
            fit_current = fit_trial;
            vetoed = {};
        } else {
            stop = true;
        }
        model.training.removals.push_back(ev);
    }
    model.training.final_fit = fit_current;
    return model;
}

namespace {

// Velocity-row columns that read on (xdot, z) only; the x, current and
// voltage columns belong to the rigid-body and electrical physics.
constexpr std::array<int, 10> kFrictionCols = {1, 2, 4, 6, 7, 8, 9, 10, 11, 12};
// zdot-row columns over the same variables (tanh(a*z) included).
constexpr std::array<int, 11> kZRateCols = {1, 2, 4, 5, 6, 7, 8, 9, 10, 11, 12};

} // namespace

std::function<double(double, double)> extract_friction(const SindycModel& model, double J) {
    validate(model);
    if (!(J > 0.0)) throw ValidationError("inertia must be positive");
    const Xi xi = model.coeff.xi;
    const double a = model.library.a;
    return [xi, a, J](double v, double z) {
        const LibRow row = library_row({0.0, v, z, 0.0}, 0.0, a);
        double acc = 0.0;
        for (int j : kFrictionCols) acc += xi(1, j) * row[j];
        return -J * acc;
    };
}

std::function<double(double, double)> extract_z_rate(const SindycModel& model) {
    validate(model);
    const Xi xi = model.coeff.xi;
    const double a = model.library.a;
    return [xi, a](double v, double z) {
        const LibRow row = library_row({0.0, v, z, 0.0}, 0.0, a);
        double acc = 0.0;
        for (int j : kZRateCols) acc += xi(2, j) * row[j];
        return acc;
    };
}

void save_model(const SindycModel& model, const std::string& path) {
    validate(model);
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "sindyc-model 1\n";
    f << "a " << format_double(model.library.a, 17) << "\n";
    f << "z_scale " << format_double(model.z_scale, 17) << "\n";
    f << "full_fit " << format_double(model.training.full_fit, 17) << "\n";
    f << "final_fit " << format_double(model.training.final_fit, 17) << "\n";
    f << "terms";
    for (const auto& name : library_term_names()) f << " " << name;
    f << "\n";
    for (int k = 0; k < 4; ++k) {
        f << "row " << k << " mask";
        for (int j = 0; j < kLibraryTerms; ++j)
            f << " " << (model.coeff.active[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] ? 1 : 0);
        f << " xi";
        for (int j = 0; j < kLibraryTerms; ++j) f << " " << format_double(model.coeff.xi(k, j), 17);
        f << "\n";
    }
    if (!f) throw IoError("write failed on " + path);
}

SindycModel load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "sindyc-model 1")
        throw IoError(path + " is not a sindyc model file");

    SindycModel model;
    const auto read_kv = [&](const std::string& key) {
        if (!std::getline(f, line)) throw IoError(path + ": truncated before " + key);
        std::istringstream is(line);
        std::string k;
        double v = 0.0;
        if (!(is >> k >> v) || k != key) throw IoError(path + ": expected '" + key + " <value>'");
        return v;
    };
    model.library.a = read_kv("a");
    model.z_scale = read_kv("z_scale");
    model.training.full_fit = read_kv("full_fit");
    model.training.final_fit = read_kv("final_fit");

    if (!std::getline(f, line)) throw IoError(path + ": truncated before terms");
    {
        std::istringstream is(line);
        std::string word;
        if (!(is >> word) || word != "terms") throw IoError(path + ": expected terms line");
        for (const auto& name : library_term_names()) {
            if (!(is >> word) || word != name)
                throw IoError(path + ": library terms do not match this build");
        }
    }
    for (int k = 0; k < 4; ++k) {
        if (!std::getline(f, line)) throw IoError(path + ": truncated before row " + std::to_string(k));
        std::istringstream is(line);
        std::string word;
        int row = -1;
        if (!(is >> word >> row) || word != "row" || row != k)
            throw IoError(path + ": expected row " + std::to_string(k));
        if (!(is >> word) || word != "mask") throw IoError(path + ": expected mask");
        for (int j = 0; j < kLibraryTerms; ++j) {
            int bit = 0;
            if (!(is >> bit) || (bit != 0 && bit != 1)) throw IoError(path + ": bad mask bit");
            model.coeff.active[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = bit == 1;
        }
        if (!(is >> word) || word != "xi") throw IoError(path + ": expected xi");
        for (int j = 0; j < kLibraryTerms; ++j) {
            double v = 0.0;
            if (!(is >> v)) throw IoError(path + ": bad coefficient");
            model.coeff.xi(k, j) = v;
        }
    }
    validate(model);
    return model;
}

} // namespace motorid
