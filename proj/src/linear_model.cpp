#include "motorid/linear_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "motorid/errors.hpp"
#include "motorid/time_series.hpp"

namespace motorid {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void validate(const LinearModel& m) {
    for (double p : {m.p_vv, m.p_vi, m.p_iv, m.p_ii, m.p_iu})
        if (!std::isfinite(p)) throw ValidationError("linear model coefficients must be finite");
}

LinearModel fit_linear_model(const Dataset& ds) {
    const Eigen::MatrixXd d = estimate_derivatives(ds);
    const Eigen::Index n = d.cols();

    VectorXd v(n), i(n), u(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        v[k] = ds.xdot[static_cast<std::size_t>(k)];
        i[k] = ds.i[static_cast<std::size_t>(k)];
        u[k] = ds.u[static_cast<std::size_t>(k)];
    }

    const auto solve = [&](const MatrixXd& A, const VectorXd& y, const char* row) {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
        qr.setThreshold(1e-10);
        if (qr.rank() < A.cols())
            throw RankDeficiencyError(std::string("linear model regressors are collinear in the ") +
                                      row + " equation");
        return VectorXd(qr.solve(y));
    };

    MatrixXd Av(n, 2);
    Av.col(0) = v;
    Av.col(1) = i;
    const VectorXd pv = solve(Av, d.row(1).transpose(), "velocity");

    MatrixXd Ai(n, 3);
    Ai.col(0) = v;
    Ai.col(1) = i;
    Ai.col(2) = u;
    const VectorXd pi = solve(Ai, d.row(3).transpose(), "current");

    LinearModel m{pv[0], pv[1], pi[0], pi[1], pi[2]};
    validate(m);
    return m;
}

int linear_substeps(const LinearModel& m, double sample_dt) {
    if (!(sample_dt > 0.0)) throw ValidationError("sample period must be positive");
    // Row-sum bound on the (v, I) block's eigenvalues, same h * rate <= 0.8
    // margin the plant integrator uses.
    const double rate = std::max(std::abs(m.p_vv) + std::abs(m.p_vi),
                                 std::abs(m.p_iv) + std::abs(m.p_ii));
    return std::max(1, static_cast<int>(std::ceil(sample_dt * rate / 0.8)));
}

ModelTrajectory simulate_linear(const LinearModel& m, const TimeSeries& u,
                                const MotorState& x0, int substeps) {
    validate(m);
    validate(u, "input series");
    if (substeps < 1) throw ValidationError("substeps must be at least 1");

    ModelTrajectory out;
    for (TimeSeries* s : {&out.x, &out.xdot, &out.z, &out.i}) {
        s->t0 = u.t0;
        s->dt = u.dt;
        s->values.reserve(u.size());
    }

    double x = x0.x, v = x0.v, I = x0.I;
    const double z = x0.z;
    const double h = u.dt / substeps;
    const auto fv = [&](double vv, double II) { return m.p_vv * vv + m.p_vi * II; };
    const auto fi = [&](double vv, double II, double uu) {
        return m.p_iv * vv + m.p_ii * II + m.p_iu * uu;
    };
    for (std::size_t k = 0; k < u.size(); ++k) {
        out.x.values.push_back(x);
        out.xdot.values.push_back(v);
        out.z.values.push_back(z);
        out.i.values.push_back(I);
        const double uu = u[k];
        for (int s = 0; s < substeps; ++s) {
            const double k1x = v, k1v = fv(v, I), k1i = fi(v, I, uu);
            const double k2x = v + 0.5 * h * k1v, k2v = fv(v + 0.5 * h * k1v, I + 0.5 * h * k1i),
                         k2i = fi(v + 0.5 * h * k1v, I + 0.5 * h * k1i, uu);
            const double k3x = v + 0.5 * h * k2v, k3v = fv(v + 0.5 * h * k2v, I + 0.5 * h * k2i),
                         k3i = fi(v + 0.5 * h * k2v, I + 0.5 * h * k2i, uu);
            const double k4x = v + h * k3v, k4v = fv(v + h * k3v, I + h * k3i),
                         k4i = fi(v + h * k3v, I + h * k3i, uu);
            x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            I += (h / 6.0) * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
        }
        if (!std::isfinite(x) || !std::isfinite(v) || !std::isfinite(I))
            throw ModelDivergedError("linear-model free run diverged", u.time_at(k) + u.dt,
                                     std::move(out));
    }
    return out;
}

void save_linear_model(const LinearModel& m, const std::string& path) {
    validate(m);
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "linear-model 1\n";
    f << "p_vv " << format_double(m.p_vv, 17) << "\n";
    f << "p_vi " << format_double(m.p_vi, 17) << "\n";
    f << "p_iv " << format_double(m.p_iv, 17) << "\n";
    f << "p_ii " << format_double(m.p_ii, 17) << "\n";
    f << "p_iu " << format_double(m.p_iu, 17) << "\n";
    if (!f) throw IoError("write failed on " + path);
}

LinearModel load_linear_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "linear-model 1")
        throw IoError(path + " is not a linear model file");
    LinearModel m;
    const auto read_kv = [&](const std::string& key, double& dst) {
        if (!std::getline(f, line)) throw IoError(path + ": truncated before " + key);
        std::istringstream is(line);
        std::string k;
        if (!(is >> k >> dst) || k != key) throw IoError(path + ": expected '" + key + " <value>'");
    };
    read_kv("p_vv", m.p_vv);
    read_kv("p_vi", m.p_vi);
    read_kv("p_iv", m.p_iv);
    read_kv("p_ii", m.p_ii);
    read_kv("p_iu", m.p_iu);
    validate(m);
    return m;
}

} // namespace motorid
