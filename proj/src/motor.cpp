#include "motorid/motor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "motorid/errors.hpp"

namespace motorid {

void validate(const MotorParams& p) {
    if (!(p.J > 0.0 && p.K_t > 0.0 && p.K_b > 0.0 && p.R > 0.0 && p.L > 0.0))
        throw ValidationError("motor parameters must all be positive");
}

void validate(const LuGreParams& p) {
    if (!(p.alpha0 > 0.0 && p.alpha1 >= 0.0 && p.alpha2 >= 0.0))
        throw ValidationError("friction levels alpha0 > 0, alpha1 >= 0, alpha2 >= 0 required");
    if (!(p.v_s > 0.0)) throw ValidationError("Stribeck velocity must be positive");
    if (!(p.sigma0 > 0.0 && p.sigma1 >= 0.0))
        throw ValidationError("bristle stiffness must be positive, damping non-negative");
}

void validate(const DahlParams& p) {
    if (!(p.k > 0.0 && p.F_c > 0.0))
        throw ValidationError("Dahl parameters must be positive");
}

void validate(const FrictionModel& m) {
    if (const auto* v = std::get_if<ViscousParams>(&m)) {
        if (v->b < 0.0) throw ValidationError("viscous coefficient must be >= 0");
    } else if (const auto* d = std::get_if<DahlParams>(&m)) {
        validate(*d);
    } else if (const auto* l = std::get_if<LuGreParams>(&m)) {
        validate(*l);
    } else {
        const auto& lf = std::get<LearnedFriction>(m);
        if (!lf.torque) throw ValidationError("learned friction needs a torque function");
    }
}

void validate(const SensorModel& s) {
    if (!(s.sample_dt > 0.0)) throw ValidationError("sensor sample period must be positive");
    if (s.position_resolution < 0.0)
        throw ValidationError("position resolution must be >= 0");
    if (s.velocity_window < 1) throw ValidationError("velocity window must be >= 1");
    if (s.current_noise_sd < 0.0)
        throw ValidationError("current noise level must be >= 0");
}

double stribeck_envelope(const LuGreParams& p, double v) {
    const double r = v / p.v_s;
    return p.alpha0 + p.alpha1 * std::exp(-r * r);
}

double steady_sliding_friction(const LuGreParams& p, double v) {
    return stribeck_envelope(p, v) * sgn(v) + p.alpha2 * v;
}

namespace {

inline double fric_zrate(const ViscousParams&, double, double) { return 0.0; }
inline double fric_zrate(const DahlParams& p, double v, double z) {
    return v - p.k * std::abs(v) * z / p.F_c;
}
inline double fric_zrate(const LuGreParams& p, double v, double z) {
    return v - p.sigma0 * std::abs(v) * z / stribeck_envelope(p, v);
}
inline double fric_zrate(const LearnedFriction& p, double v, double z) {
    return p.z_rate ? p.z_rate(v, z) : 0.0;
}

inline double fric_torque(const ViscousParams& p, double v, double, double) {
    return p.b * v;
}
inline double fric_torque(const DahlParams& p, double, double z, double) {
    return p.k * z;
}
inline double fric_torque(const LuGreParams& p, double v, double z, double zdot) {
    return p.sigma0 * z + p.sigma1 * zdot + p.alpha2 * v;
}
inline double fric_torque(const LearnedFriction& p, double v, double z, double) {
    return p.torque(v, z);
}

template <class F>
inline MotorState derive(const MotorState& s, double u, const MotorParams& mp, const F& fm) {
    MotorState d;
    d.x = s.v;
    d.z = fric_zrate(fm, s.v, s.z);
    const double Ff = fric_torque(fm, s.v, s.z, d.z);
    d.v = (mp.K_t * s.I - Ff) / mp.J;
    d.I = (-mp.R * s.I - mp.K_b * s.v + u) / mp.L;
    return d;
}

template <class F>
inline MotorState rk4_step_impl(const MotorState& s, double u, double h,
                                const MotorParams& mp, const F& fm) {
    const MotorState k1 = derive(s, u, mp, fm);
    const MotorState s2{s.x + 0.5 * h * k1.x, s.v + 0.5 * h * k1.v,
                        s.z + 0.5 * h * k1.z, s.I + 0.5 * h * k1.I};
    const MotorState k2 = derive(s2, u, mp, fm);
    const MotorState s3{s.x + 0.5 * h * k2.x, s.v + 0.5 * h * k2.v,
                        s.z + 0.5 * h * k2.z, s.I + 0.5 * h * k2.I};
    const MotorState k3 = derive(s3, u, mp, fm);
    const MotorState s4{s.x + h * k3.x, s.v + h * k3.v, s.z + h * k3.z, s.I + h * k3.I};
    const MotorState k4 = derive(s4, u, mp, fm);
    const double w = h / 6.0;
    return {s.x + w * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
            s.v + w * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
            s.z + w * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z),
            s.I + w * (k1.I + 2.0 * k2.I + 2.0 * k3.I + k4.I)};
}

inline bool state_ok(const MotorState& s) {
    return std::isfinite(s.x) && std::isfinite(s.v) && std::isfinite(s.z) &&
           std::isfinite(s.I) && std::abs(s.v) < 1e9 && std::abs(s.I) < 1e9;
}

// Deterministic standard normal (Box-Muller on mt19937_64), so outputs do not
// depend on the standard library's normal_distribution implementation.
class GaussianDraw {
public:
    explicit GaussianDraw(std::uint64_t seed) : rng_(seed) {}
    double operator()() {
        if (have_) {
            have_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_ = true;
        return r * std::cos(a);
    }

private:
    double uniform() { return (rng_() >> 11) * 0x1.0p-53; }
    std::mt19937_64 rng_;
    bool have_ = false;
    double spare_ = 0.0;
};

} // namespace

double friction_torque(const FrictionModel& m, double v, double z, double zdot) {
    return std::visit([&](const auto& p) { return fric_torque(p, v, z, zdot); }, m);
}

double asperity_rate(const FrictionModel& m, double v, double z) {
    if (std::holds_alternative<ViscousParams>(m))
        throw UnsupportedModelError("viscous friction has no internal state");
    if (std::holds_alternative<LearnedFriction>(m))
        throw UnsupportedModelError("learned friction exposes no closed-form asperity rate");
    return std::visit([&](const auto& p) { return fric_zrate(p, v, z); }, m);
}

MotorState motor_derivative(const MotorState& s, double u,
                            const MotorParams& mp, const FrictionModel& fm) {
    return std::visit([&](const auto& p) { return derive(s, u, mp, p); }, fm);
}

MotorState rk4_step(const MotorState& s, double u, double h,
                    const MotorParams& mp, const FrictionModel& fm) {
    if (!(h > 0.0)) throw ValidationError("integration step must be positive");
    return std::visit([&](const auto& p) { return rk4_step_impl(s, u, h, mp, p); }, fm);
}

double max_dynamic_rate(const MotorParams& mp, const FrictionModel& fm, double u_max) {
    const double vcap = std::abs(u_max) / mp.K_b * 1.05 + 1.0;
    double rate = mp.R / mp.L;
    const double mech_linear = mp.K_t * mp.K_b / mp.R / mp.J;
    rate = std::max(rate, mech_linear);
    if (const auto* v = std::get_if<ViscousParams>(&fm)) {
        rate = std::max(rate, (mech_linear * mp.J + v->b) / mp.J);
    } else if (const auto* d = std::get_if<DahlParams>(&fm)) {
        rate = std::max({rate, d->k * vcap / d->F_c, std::sqrt(d->k / mp.J)});
    } else if (const auto* l = std::get_if<LuGreParams>(&fm)) {
        // Fastest of: sliding bristle relaxation at top speed (envelope bottoms
        // out at alpha0), the pre-sliding damping mode, the bristle resonance.
        rate = std::max({rate, l->sigma0 * vcap / l->alpha0,
                         (l->sigma1 + l->alpha2) / mp.J, std::sqrt(l->sigma0 / mp.J)});
    } else {
        rate = std::max(rate, 2.0e4); // no structure to inspect; conservative floor
    }
    return rate;
}

int stable_substeps(const MotorParams& mp, const FrictionModel& fm,
                    double sample_dt, double u_max) {
    const double rate = max_dynamic_rate(mp, fm, u_max);
    const int n = static_cast<int>(std::ceil(sample_dt * rate / 0.8));
    return std::max(n, 1);
}

std::vector<MotorState> integrate_hold(MotorState& state, double u, std::size_t samples,
                                       double sample_dt, int substeps,
                                       const MotorParams& mp, const FrictionModel& fm) {
    if (substeps < 1) throw ValidationError("substeps must be >= 1");
    const double h = sample_dt / substeps;
    std::vector<MotorState> out;
    out.reserve(samples);
    std::visit(
        [&](const auto& p) {
            for (std::size_t k = 0; k < samples; ++k) {
                out.push_back(state);
                for (int j = 0; j < substeps; ++j)
                    state = rk4_step_impl(state, u, h, mp, p);
                if (!state_ok(state))
                    throw IntegrationDivergedError(
                        "integration diverged at t = " +
                            std::to_string(static_cast<double>(k + 1) * sample_dt),
                        static_cast<double>(k + 1) * sample_dt);
            }
        },
        fm);
    return out;
}

MotorState Dataset::initial_state() const {
    return {x[0], xdot[0], z[0], i[0]};
}

Dataset Dataset::truncated(std::size_t n) const {
    if (n < 2 || n > size())
        throw ValidationError("truncation length out of range");
    Dataset out = *this;
    auto cut = [n](TimeSeries& s) { s.values.resize(n); };
    cut(out.u);
    cut(out.x);
    cut(out.xdot);
    cut(out.z);
    cut(out.i);
    return out;
}

namespace {

void describe_excitation(const ExcitationSpec& spec, Provenance& p) {
    if (const auto* c = std::get_if<Constant>(&spec.shape)) {
        p.emplace_back("excitation.kind", "constant");
        p.emplace_back("excitation.level", format_double(c->level));
    } else if (const auto* r = std::get_if<Ramp>(&spec.shape)) {
        p.emplace_back("excitation.kind", "ramp");
        p.emplace_back("excitation.gradient", format_double(r->gradient));
    } else if (const auto* ch = std::get_if<Chirp>(&spec.shape)) {
        p.emplace_back("excitation.kind", "chirp");
        p.emplace_back("excitation.amp_lo", format_double(ch->amp_lo));
        p.emplace_back("excitation.amp_hi", format_double(ch->amp_hi));
        p.emplace_back("excitation.f_lo", format_double(ch->f_lo));
        p.emplace_back("excitation.f_hi", format_double(ch->f_hi));
    } else if (const auto* tc = std::get_if<TrapezoidChirp>(&spec.shape)) {
        p.emplace_back("excitation.kind", "trapezoid-chirp");
        p.emplace_back("excitation.peak", format_double(tc->peak));
        p.emplace_back("excitation.ramp", format_double(tc->ramp));
        p.emplace_back("excitation.f_end", format_double(tc->f_end));
        p.emplace_back("excitation.f_mid", format_double(tc->f_mid));
    } else {
        const auto& ss = std::get<StepSchedule>(spec.shape);
        p.emplace_back("excitation.kind", "steps");
        std::ostringstream os;
        for (std::size_t i = 0; i < ss.steps.size(); ++i) {
            if (i) os << ";";
            os << format_double(ss.steps[i].hold) << ":" << format_double(ss.steps[i].level);
        }
        p.emplace_back("excitation.steps", os.str());
    }
    p.emplace_back("excitation.duration", format_double(spec.duration));
}

void describe_friction(const FrictionModel& fm, Provenance& p) {
    if (const auto* v = std::get_if<ViscousParams>(&fm)) {
        p.emplace_back("friction.kind", "viscous");
        p.emplace_back("friction.b", format_double(v->b));
    } else if (const auto* d = std::get_if<DahlParams>(&fm)) {
        p.emplace_back("friction.kind", "dahl");
        p.emplace_back("friction.k", format_double(d->k));
        p.emplace_back("friction.f_c", format_double(d->F_c));
    } else if (const auto* l = std::get_if<LuGreParams>(&fm)) {
        p.emplace_back("friction.kind", "lugre");
        p.emplace_back("friction.alpha0", format_double(l->alpha0));
        p.emplace_back("friction.alpha1", format_double(l->alpha1));
        p.emplace_back("friction.alpha2", format_double(l->alpha2));
        p.emplace_back("friction.v_s", format_double(l->v_s));
        p.emplace_back("friction.sigma0", format_double(l->sigma0));
        p.emplace_back("friction.sigma1", format_double(l->sigma1));
    } else {
        p.emplace_back("friction.kind", "learned");
    }
}

} // namespace

Dataset simulate(const ExcitationSpec& spec, const MotorParams& mp,
                 const FrictionModel& fm, const SensorModel& sensor,
                 double integrator_dt, std::uint64_t seed) {
    validate(mp);
    validate(fm);
    validate(sensor);
    TimeSeries u = generate_excitation(spec, sensor.sample_dt);

    double u_max = 0.0;
    for (double v : u.values) u_max = std::max(u_max, std::abs(v));

    int nsub;
    if (integrator_dt <= 0.0) {
        nsub = stable_substeps(mp, fm, sensor.sample_dt, u_max);
    } else {
        const double ratio = sensor.sample_dt / integrator_dt;
        nsub = static_cast<int>(std::llround(ratio));
        if (nsub < 1 || std::abs(nsub - ratio) > 1e-9 * ratio)
            throw ValidationError("integrator step must divide the sample period");
    }
    const double h = sensor.sample_dt / nsub;

    const std::size_t n = u.size();
    TimeSeries xt = u, zt = u, it = u; // copy grid
    TimeSeries vt = u;
    MotorState st{};
    std::visit(
        [&](const auto& p) {
            for (std::size_t k = 0; k < n; ++k) {
                xt.values[k] = st.x;
                vt.values[k] = st.v;
                zt.values[k] = st.z;
                it.values[k] = st.I;
                const double uk = u[k];
                for (int j = 0; j < nsub; ++j) st = rk4_step_impl(st, uk, h, mp, p);
                if (!state_ok(st))
                    throw IntegrationDivergedError(
                        "plant integration diverged at t = " +
                            std::to_string(static_cast<double>(k + 1) * sensor.sample_dt),
                        static_cast<double>(k + 1) * sensor.sample_dt);
            }
        },
        fm);

    Dataset ds;
    ds.u = u;
    TimeSeries xq = quantize(xt, sensor.position_resolution);
    ds.x = moving_average(xq, sensor.velocity_window);
    ds.xdot = differentiate(ds.x);
    ds.z = zt;
    ds.i = it;
    if (sensor.current_noise_sd > 0.0) {
        GaussianDraw g(seed);
        for (auto& v : ds.i.values) v += sensor.current_noise_sd * g();
    }

    Provenance& p = ds.provenance;
    p.emplace_back("format", "motorid-dataset/1");
    p.emplace_back("seed", std::to_string(seed));
    describe_excitation(spec, p);
    p.emplace_back("plant.j", format_double(mp.J));
    p.emplace_back("plant.kt", format_double(mp.K_t));
    p.emplace_back("plant.kb", format_double(mp.K_b));
    p.emplace_back("plant.r", format_double(mp.R));
    p.emplace_back("plant.l", format_double(mp.L));
    const MotorParams defaults{};
    p.emplace_back("plant.j_source", mp.J == defaults.J ? "assumed-default" : "config");
    p.emplace_back("plant.l_source", mp.L == defaults.L ? "assumed-default" : "config");
    describe_friction(fm, p);
    p.emplace_back("sensor.sample_dt", format_double(sensor.sample_dt));
    p.emplace_back("sensor.position_resolution", format_double(sensor.position_resolution));
    p.emplace_back("sensor.velocity_window", std::to_string(sensor.velocity_window));
    p.emplace_back("sensor.current_noise_sd", format_double(sensor.current_noise_sd));
    p.emplace_back("integrator.dt", format_double(h));
    p.emplace_back("integrator.substeps", std::to_string(nsub));
    return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "t,u,x,xdot,z,i\n";
    for (std::size_t k = 0; k < ds.size(); ++k) {
        f << format_double(ds.u.time_at(k)) << "," << format_double(ds.u[k]) << ","
          << format_double(ds.x[k]) << "," << format_double(ds.xdot[k]) << ","
          << format_double(ds.z[k]) << "," << format_double(ds.i[k]) << "\n";
    }
    if (!f) throw IoError("write failed: " + path);
    write_provenance(ds.provenance, path + ".prov");
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty file: " + path);
    if (line != "t,u,x,xdot,z,i")
        throw IoError("unexpected dataset header in " + path + ": " + line);
    std::vector<double> t;
    Dataset ds;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        double col[6];
        std::string cell;
        for (int c = 0; c < 6; ++c) {
            if (!std::getline(ls, cell, ','))
                throw IoError("short row in " + path);
            col[c] = std::stod(cell);
        }
        t.push_back(col[0]);
        ds.u.values.push_back(col[1]);
        ds.x.values.push_back(col[2]);
        ds.xdot.values.push_back(col[3]);
        ds.z.values.push_back(col[4]);
        ds.i.values.push_back(col[5]);
    }
    if (t.size() < 2) throw IoError("need at least two samples: " + path);
    const double t0 = t.front();
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double expect = t0 + static_cast<double>(k) * dt;
        if (std::abs(t[k] - expect) > 1e-6 * (std::abs(expect) + dt))
            throw ValidationError("non-uniform time grid in " + path);
    }
    for (TimeSeries* s : {&ds.u, &ds.x, &ds.xdot, &ds.z, &ds.i}) {
        s->t0 = t0;
        s->dt = dt;
    }
    std::ifstream probe(path + ".prov");
    if (probe.good()) ds.provenance = read_provenance(path + ".prov");
    return ds;
}

} // namespace motorid
