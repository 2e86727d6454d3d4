#include "motorid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "motorid/errors.hpp"
#include "motorid/time_series.hpp"

namespace motorid {

namespace {

void check_pair(std::size_t n_y, std::size_t n_hat, std::size_t min_n, const char* what) {
    if (n_y != n_hat) throw ValidationError(std::string(what) + ": series lengths differ");
    if (n_y < min_n)
        throw ValidationError(std::string(what) + ": needs at least " + std::to_string(min_n) +
                              " samples");
}

} // namespace

double fit_percentage(const std::vector<double>& y, const std::vector<double>& y_hat) {
    check_pair(y.size(), y_hat.size(), 2, "fit percentage");
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double dev = 0.0, err = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        dev += (y[k] - mean) * (y[k] - mean);
        err += (y[k] - y_hat[k]) * (y[k] - y_hat[k]);
    }
    if (dev == 0.0) throw IllPosedFitError("fit percentage: reference series is constant");
    return 100.0 * (1.0 - std::sqrt(err / dev));
}

double fit_percentage(const TimeSeries& y, const TimeSeries& y_hat) {
    return fit_percentage(y.values, y_hat.values);
}

double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    check_pair(y.size(), y_hat.size(), 1, "rmse");
    double acc = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) acc += (y[k] - y_hat[k]) * (y[k] - y_hat[k]);
    return std::sqrt(acc / static_cast<double>(y.size()));
}

double pearson(const TimeSeries& a, const TimeSeries& b, const SampleMask& mask) {
    check_pair(a.size(), b.size(), 3, "pearson");
    double sa = 0.0, sb = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (mask && !mask(k)) continue;
        sa += a[k];
        sb += b[k];
        ++n;
    }
    if (n < 3) throw ValidationError("pearson: fewer than 3 samples admitted by the mask");
    const double ma = sa / static_cast<double>(n), mb = sb / static_cast<double>(n);
    double cab = 0.0, caa = 0.0, cbb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (mask && !mask(k)) continue;
        cab += (a[k] - ma) * (b[k] - mb);
        caa += (a[k] - ma) * (a[k] - ma);
        cbb += (b[k] - mb) * (b[k] - mb);
    }
    if (caa == 0.0 || cbb == 0.0)
        throw IllPosedFitError("pearson: an input is constant on the masked samples");
    const double r = cab / std::sqrt(caa * cbb);
    return std::clamp(r, -1.0, 1.0);
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void score_state(const TimeSeries& ref, const TimeSeries& pred, double& fit_out, double& rmse_out) {
    rmse_out = rmse(ref.values, pred.values);
    try {
        fit_out = fit_percentage(ref, pred);
    } catch (const IllPosedFitError&) {
        fit_out = kNaN; // constant reference: the percentage has no meaning here
    }
}

std::string dataset_label(const Dataset& ds) {
    if (const std::string* kind = find_key(ds.provenance, "excitation.kind")) return *kind;
    return "dataset";
}

ModelTrajectory simulate_lugre_choice(const LuGreModel& m, const Dataset& ds,
                                      const MotorState& x0, int substeps) {
    const FrictionModel fm{m.friction};
    int nsub = substeps;
    if (nsub <= 0) {
        double u_max = 0.0;
        for (double u : ds.u.values) u_max = std::max(u_max, std::abs(u));
        nsub = stable_substeps(m.motor, fm, ds.u.dt, u_max);
    }
    ModelTrajectory out;
    for (TimeSeries* s : {&out.x, &out.xdot, &out.z, &out.i}) {
        s->t0 = ds.u.t0;
        s->dt = ds.u.dt;
        s->values.reserve(ds.size());
    }
    MotorState s = x0;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        out.x.values.push_back(s.x);
        out.xdot.values.push_back(s.v);
        out.z.values.push_back(s.z);
        out.i.values.push_back(s.I);
        const double h = ds.u.dt / nsub;
        for (int i = 0; i < nsub; ++i) s = rk4_step(s, ds.u[k], h, m.motor, fm);
        if (!std::isfinite(s.x) || !std::isfinite(s.v) || !std::isfinite(s.z) ||
            !std::isfinite(s.I))
            throw ModelDivergedError("plant-model free run diverged", ds.u.time_at(k) + ds.u.dt,
                                     std::move(out));
    }
    return out;
}

} // namespace

FitReport evaluate_model(const ModelChoice& model, const Dataset& ds, const MotorState& x0,
                         int substeps) {
    if (ds.size() < 2) throw ValidationError("evaluation needs at least 2 samples");

    FitReport report;
    report.dataset_id = dataset_label(ds);

    bool diverged = false;
    ModelTrajectory traj;
    try {
        if (const auto* lin = std::get_if<LinearModel>(&model)) {
            report.model_id = "linear";
            const int nsub = substeps > 0 ? substeps : linear_substeps(*lin, ds.u.dt);
            traj = simulate_linear(*lin, ds.u, x0, nsub);
        } else if (const auto* lug = std::get_if<LuGreModel>(&model)) {
            report.model_id = "lugre";
            traj = simulate_lugre_choice(*lug, ds, x0, substeps);
        } else {
            const auto& sm = std::get<SindycModel>(model);
            report.model_id = "sindyc";
            traj = simulate_model(sm, ds.u, x0, substeps > 0 ? substeps : 40);
        }
    } catch (const IntegrationDivergedError&) {
        diverged = true;
    }

    if (diverged) {
        report.fit_x = report.fit_xdot = report.fit_z = report.fit_i = kNegInf;
        report.rmse_x = report.rmse_xdot = report.rmse_z = report.rmse_i = kPosInf;
        return report;
    }
    score_state(ds.x, traj.x, report.fit_x, report.rmse_x);
    score_state(ds.xdot, traj.xdot, report.fit_xdot, report.rmse_xdot);
    score_state(ds.z, traj.z, report.fit_z, report.rmse_z);
    score_state(ds.i, traj.i, report.fit_i, report.rmse_i);
    return report;
}

void write_fit_reports_csv(const std::vector<FitReport>& reports, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "model,dataset,fit_x,fit_xdot,fit_z,fit_i,rmse_x,rmse_xdot,rmse_z,rmse_i\n";
    for (const FitReport& r : reports) {
        f << r.model_id << "," << r.dataset_id;
        for (double v : {r.fit_x, r.fit_xdot, r.fit_z, r.fit_i, r.rmse_x, r.rmse_xdot, r.rmse_z,
                         r.rmse_i})
            f << "," << format_double(v);
        f << "\n";
    }
    if (!f) throw IoError("write failed on " + path);
}

} // namespace motorid
