#include "motorid/greybox.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <numeric>

#include "motorid/errors.hpp"
#include "motorid/sindy.hpp"
#include "motorid/time_series.hpp"

namespace motorid {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<SteadyStatePoint> run_steady_state_sweep(const std::vector<double>& voltages,
                                                     const MotorParams& mp,
                                                     const FrictionModel& fm,
                                                     const SweepConfig& cfg) {
    if (voltages.empty()) throw ValidationError("steady-state sweep needs voltages");
    for (double u : voltages)
        if (!(u > 0.0) || u > 24.0)
            throw ValidationError("sweep voltages must lie in (0, 24] V, got " +
                                  format_double(u));
    if (!(cfg.sample_dt > 0.0) || !(cfg.settle_window > cfg.sample_dt) ||
        !(cfg.budget > cfg.settle_window) || !(cfg.settle_band_rel > 0.0))
        throw ValidationError("sweep config: need dt < window < budget, band > 0");

    validate(mp);
    validate(fm);

    std::vector<SteadyStatePoint> points;
    const std::size_t window_n =
        static_cast<std::size_t>(std::ceil(cfg.settle_window / cfg.sample_dt));
    const std::size_t max_n = static_cast<std::size_t>(std::ceil(cfg.budget / cfg.sample_dt));

    for (double u : voltages) {
        const int nsub = stable_substeps(mp, fm, cfg.sample_dt, u);
        const double h = cfg.sample_dt / nsub;
        MotorState s{};
        std::deque<double> v_win, i_win;
        bool settled = false;
        for (std::size_t k = 0; k < max_n && !settled; ++k) {
            for (int j = 0; j < nsub; ++j) s = rk4_step(s, u, h, mp, fm);
            v_win.push_back(s.v);
            i_win.push_back(s.I);
            if (v_win.size() > window_n) {
                v_win.pop_front();
                i_win.pop_front();
            }
            if (v_win.size() == window_n) {
                const auto [lo, hi] = std::minmax_element(v_win.begin(), v_win.end());
                const double mean =
                    std::accumulate(v_win.begin(), v_win.end(), 0.0) / window_n;
                if (*hi - *lo <= std::max(cfg.settle_band_rel * std::abs(mean), 1e-6)) {
                    const double i_mean =
                        std::accumulate(i_win.begin(), i_win.end(), 0.0) / window_n;
                    points.push_back({u, mean, mp.K_t * i_mean});
                    settled = true;
                }
            }
        }
        if (!settled)
            throw SettlingTimeoutError("velocity never settled within " +
                                       format_double(cfg.budget) + " s at u = " +
                                       format_double(u) + " V");
    }
    return points;
}

namespace {

double static_curve(const StaticFrictionParams& p, double v) {
    return p.alpha0 + p.alpha1 * std::exp(-(v / p.v_s) * (v / p.v_s)) + p.alpha2 * v;
}

} // namespace

StaticFitResult fit_static_params(const std::vector<SteadyStatePoint>& points) {
    std::vector<SteadyStatePoint> pts;
    for (const auto& p : points)
        if (p.v_ss > 1e-3) pts.push_back(p); // drop stiction points, off the curve
    if (pts.size() < 6)
        throw IllPosedFitError("static fit needs at least 6 sliding points, got " +
                               std::to_string(pts.size()));
    std::sort(pts.begin(), pts.end(),
              [](const SteadyStatePoint& a, const SteadyStatePoint& b) {
                  return a.v_ss < b.v_ss;
              });
    const double v_min = pts.front().v_ss, v_max = pts.back().v_ss;
    if (v_max - v_min < 0.5 * v_max)
        throw IllPosedFitError("sweep speeds are clustered; cannot separate the Stribeck "
                               "knee from the viscous slope");

    // Crude regime split for the start point: the viscous asymptote from the
    // two fastest points, the low-speed excess for the exponential.
    const auto& p1 = pts[pts.size() - 2];
    const auto& p2 = pts.back();
    double a2 = (p2.F_ss - p1.F_ss) / std::max(p2.v_ss - p1.v_ss, 1e-9);
    a2 = std::clamp(a2, 1e-8, 9.0);
    double a0 = std::clamp(p2.F_ss - a2 * p2.v_ss, 1e-5, 9.0);
    double a1 = std::clamp(pts.front().F_ss - a2 * pts.front().v_ss - a0, 1e-5, 9.0);
    double vs = pts[pts.size() / 2].v_ss;
    for (const auto& p : pts) {
        if (p.F_ss - a0 - a2 * p.v_ss < 0.5 * a1) {
            vs = std::clamp(p.v_ss / 0.83, 2e-3, 90.0); // exp(-x^2)=0.5 at x=0.83
            break;
        }
    }

    auto residual = [pts](const VectorXd& xi) -> VectorXd {
        StaticFrictionParams p{xi[0], xi[1], xi[2], xi[3]};
        VectorXd r(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = static_curve(p, pts[i].v_ss) - pts[i].F_ss;
        return r;
    };
    auto jacobian = [pts](const VectorXd& xi) -> MatrixXd {
        MatrixXd J(static_cast<Eigen::Index>(pts.size()), 4);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double v = pts[i].v_ss;
            const double e = std::exp(-(v / xi[3]) * (v / xi[3]));
            const auto row = static_cast<Eigen::Index>(i);
            J(row, 0) = 1.0;
            J(row, 1) = e;
            J(row, 2) = v;
            J(row, 3) = xi[1] * e * 2.0 * v * v / (xi[3] * xi[3] * xi[3]);
        }
        return J;
    };

    TrustRegionConfig cfg;
    cfg.grad_tol = 1e-14;
    cfg.lower = (VectorXd(4) << 1e-6, 1e-6, 1e-9, 1e-3).finished();
    cfg.upper = (VectorXd(4) << 10.0, 10.0, 10.0, 100.0).finished();
    VectorXd xi0(4);
    xi0 << a0, a1, a2, vs;

    StaticFitResult out;
    out.fit = trr_least_squares(residual, xi0, cfg, jacobian);
    out.params = {out.fit.parameters[0], out.fit.parameters[1], out.fit.parameters[2],
                  out.fit.parameters[3]};
    return out;
}

DynamicInit init_dynamic_params(const std::vector<Dataset>& ramps,
                                const StaticFrictionParams& statics,
                                const MotorParams& mp) {
    if (ramps.empty()) throw ValidationError("dynamic init needs at least one ramp record");
    const double torque_lim = 0.25 * (statics.alpha0 + statics.alpha1);
    if (!(torque_lim > 0.0))
        throw ValidationError("static parameters give a non-positive breakaway torque");

    double slope_sum = 0.0;
    for (const auto& ds : ramps) {
        // Contiguous stiction prefix, well below breakaway.
        std::size_t n_win = 0;
        while (n_win < ds.size() && mp.K_t * ds.i[n_win] < torque_lim) ++n_win;
        if (n_win < 10)
            throw InitFailedError("ramp record has no usable pre-sliding window (" +
                                  std::to_string(n_win) + " samples below breakaway)");
        double sx = 0.0, st = 0.0, sxx = 0.0, sxt = 0.0;
        for (std::size_t k = 0; k < n_win; ++k) {
            const double x = ds.x[k];
            const double t = mp.K_t * ds.i[k];
            sx += x;
            st += t;
            sxx += x * x;
            sxt += x * t;
        }
        const double nw = static_cast<double>(n_win);
        const double var = sxx - sx * sx / nw;
        if (!(var > 0.0))
            throw InitFailedError(
                "position never moves inside the stiction window; the deflection is below "
                "the sensor resolution");
        const double slope = (sxt - sx * st / nw) / var;
        if (!(slope > 0.0))
            throw InitFailedError("pre-sliding torque/position slope is not positive");
        slope_sum += slope;
    }

    DynamicInit init;
    init.sigma0 = slope_sum / static_cast<double>(ramps.size());
    init.sigma1 = std::max(2.0 * std::sqrt(init.sigma0 * mp.J) - statics.alpha2, 0.0);
    return init;
}

ResidualFn dynamic_residual(const Dataset& ds, const StaticFrictionParams& statics,
                            const MotorParams& mp) {
    if (ds.size() < 3) throw ValidationError("dynamic fit needs at least 3 samples");
    const MatrixXd deriv = estimate_derivatives(ds);
    VectorXd w(4);
    for (int r = 0; r < 4; ++r) {
        const double rms = std::sqrt(deriv.row(r).squaredNorm() /
                                     static_cast<double>(deriv.cols()));
        w[r] = 1.0 / std::max(rms, 1e-12);
    }

    // Copy what the closure needs; Dataset references would dangle.
    struct Sample {
        MotorState s;
        double u;
    };
    std::vector<Sample> samples(ds.size());
    for (std::size_t k = 0; k < ds.size(); ++k)
        samples[k] = {{ds.x[k], ds.xdot[k], ds.z[k], ds.i[k]}, ds.u[k]};

    return [samples = std::move(samples), deriv, w, statics, mp](const VectorXd& xi) {
        LuGreParams p;
        p.alpha0 = statics.alpha0;
        p.alpha1 = statics.alpha1;
        p.alpha2 = statics.alpha2;
        p.v_s = statics.v_s;
        p.sigma0 = xi[0];
        p.sigma1 = xi[1];
        const FrictionModel fm{p};
        const auto n = static_cast<Eigen::Index>(samples.size());
        VectorXd r(4 * n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto& smp = samples[static_cast<std::size_t>(k)];
            const MotorState d = motor_derivative(smp.s, smp.u, mp, fm);
            r[4 * k + 0] = (d.x - deriv(0, k)) * w[0];
            r[4 * k + 1] = (d.v - deriv(1, k)) * w[1];
            r[4 * k + 2] = (d.z - deriv(2, k)) * w[2];
            r[4 * k + 3] = (d.I - deriv(3, k)) * w[3];
        }
        return r;
    };
}

TrustRegionConfig default_dynamic_config() {
    TrustRegionConfig cfg;
    cfg.initial_radius = 100.0;
    cfg.max_radius = 1e5;
    cfg.lower = (VectorXd(2) << 1.0, 0.0).finished();
    cfg.upper = (VectorXd(2) << 1e5, 1e3).finished();
    return cfg;
}

DynamicFitResult fit_dynamic_params(const Dataset& ds, const StaticFrictionParams& statics,
                                    const DynamicInit& init, const MotorParams& mp,
                                    const TrustRegionConfig& cfg) {
    VectorXd xi0(2);
    xi0 << init.sigma0, init.sigma1;
    if (cfg.lower.size() == 2)
        xi0 = xi0.cwiseMax(cfg.lower).cwiseMin(cfg.upper);

    const ResidualFn residual = dynamic_residual(ds, statics, mp);
    DynamicFitResult out;
    out.fit = trr_least_squares(residual, xi0, cfg);
    out.sigma0 = out.fit.parameters[0];
    out.sigma1 = out.fit.parameters[1];
    return out;
}


namespace {

void write_kv(std::ofstream& f, const char* key, double v) {
    f << key << " " << format_double(v, 17) << "\n";
}

double read_kv(std::ifstream& f, const std::string& path, const std::string& key) {
    std::string line;
    if (!std::getline(f, line)) throw IoError(path + ": truncated before " + key);
    std::istringstream is(line);
    std::string k;
    double v = 0.0;
    if (!(is >> k >> v) || k != key) throw IoError(path + ": expected '" + key + " <value>'");
    return v;
}

} // namespace

void save_lugre_model(const LuGreModel& m, const std::string& path) {
    validate(m.motor);
    validate(m.friction);
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "lugre-model 1\n";
    write_kv(f, "J", m.motor.J);
    write_kv(f, "K_t", m.motor.K_t);
    write_kv(f, "K_b", m.motor.K_b);
    write_kv(f, "R", m.motor.R);
    write_kv(f, "L", m.motor.L);
    write_kv(f, "alpha0", m.friction.alpha0);
    write_kv(f, "alpha1", m.friction.alpha1);
    write_kv(f, "alpha2", m.friction.alpha2);
    write_kv(f, "v_s", m.friction.v_s);
    write_kv(f, "sigma0", m.friction.sigma0);
    write_kv(f, "sigma1", m.friction.sigma1);
    if (!f) throw IoError("write failed on " + path);
}

LuGreModel load_lugre_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "lugre-model 1")
        throw IoError(path + " is not a lugre model file");
    LuGreModel m;
    m.motor.J = read_kv(f, path, "J");
    m.motor.K_t = read_kv(f, path, "K_t");
    m.motor.K_b = read_kv(f, path, "K_b");
    m.motor.R = read_kv(f, path, "R");
    m.motor.L = read_kv(f, path, "L");
    m.friction.alpha0 = read_kv(f, path, "alpha0");
    m.friction.alpha1 = read_kv(f, path, "alpha1");
    m.friction.alpha2 = read_kv(f, path, "alpha2");
    m.friction.v_s = read_kv(f, path, "v_s");
    m.friction.sigma0 = read_kv(f, path, "sigma0");
    m.friction.sigma1 = read_kv(f, path, "sigma1");
    validate(m.motor);
    validate(m.friction);
    return m;
}

} // namespace motorid

