#include "motorid/tde.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <Eigen/SVD>

#include "motorid/errors.hpp"

namespace motorid {

HankelMatrix build_hankel(const TimeSeries& s, std::size_t m) {
    if (m < 2)
        throw ValidationError("build_hankel: delay count m must be at least 2, got " +
                              std::to_string(m));
    validate(s, "build_hankel input");
    const std::size_t len = s.size();
    if (len < m + 1)
        throw ValidationError("build_hankel: series needs at least m+1 = " +
                              std::to_string(m + 1) + " samples, got " +
                              std::to_string(len));
    const std::size_t n = len - m + 1;
    HankelMatrix H;
    H.data.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            H.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                s.values[i + j];
    H.source_dt = s.dt;
    H.t0 = s.t0;
    return H;
}

SvdFactors decompose(const HankelMatrix& H) {
    if (H.data.size() == 0)
        throw ValidationError("decompose: empty Hankel matrix");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(H.data,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        const auto& s = svd.singularValues();
        const double smax = s.size() ? s(0) : 0.0;
        const double smin = s.size() ? s(s.size() - 1) : 0.0;
        throw NumericalError("decompose: SVD failed to converge (sigma_max=" +
                             std::to_string(smax) + ", sigma_min=" +
                             std::to_string(smin) + ")");
    }
    SvdFactors f;
    f.U = svd.matrixU();
    f.S = svd.singularValues();
    f.V = svd.matrixV();
    f.source_dt = H.source_dt;
    f.t0 = H.t0;
    return f;
}

EnergySpectrum energy_spectrum(const SvdFactors& f) {
    const double total = f.S.sum();
    if (!(total > 0.0))
        throw ExtractionDegenerateError(
            "energy_spectrum: all singular values are zero");
    EnergySpectrum e;
    e.energies.reserve(static_cast<std::size_t>(f.S.size()));
    for (Eigen::Index k = 0; k < f.S.size(); ++k)
        e.energies.push_back(f.S(k) / total);
    return e;
}

IndexRange select_low_energy(const EnergySpectrum& e, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ValidationError("select_low_energy: threshold must lie in (0,1), got " +
                              std::to_string(threshold));
    for (std::size_t k = 0; k < e.energies.size(); ++k)
        if (e.energies[k] <= threshold) return {k, e.energies.size() - 1};
    return {}; // empty
}

Eigen::MatrixXd low_energy_reconstruct(const SvdFactors& f, IndexRange range) {
    const Eigen::Index r = f.S.size();
    if (range.empty()) return Eigen::MatrixXd::Zero(f.U.rows(), f.V.rows());
    if (range.last >= static_cast<std::size_t>(r))
        throw ValidationError("low_energy_reconstruct: range end " +
                              std::to_string(range.last) + " exceeds spectrum size " +
                              std::to_string(r));
    const auto first = static_cast<Eigen::Index>(range.first);
    const auto count = static_cast<Eigen::Index>(range.count());
    return f.U.middleCols(first, count) *
           f.S.segment(first, count).asDiagonal() *
           f.V.middleCols(first, count).transpose();
}

ExtractedState extract_internal_state(const TimeSeries& velocity, std::size_t m,
                                      double threshold) {
    const HankelMatrix H = build_hankel(velocity, m);
    const SvdFactors f = decompose(H);
    ExtractedState out;
    out.spectrum = energy_spectrum(f);
    out.selected = select_low_energy(out.spectrum, threshold);
    if (out.selected.empty())
        throw ExtractionDegenerateError(
            "extract_internal_state: no singular value has energy at or below " +
            std::to_string(threshold) +
            "; increase the delay count m or the threshold");
    const Eigen::MatrixXd Hhat = low_energy_reconstruct(f, out.selected);

    const std::size_t n = H.n();
    out.z_hat.t0 = velocity.t0;
    out.z_hat.dt = velocity.dt;
    out.z_hat.values.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        out.z_hat.values[j] = Hhat(0, static_cast<Eigen::Index>(j));

    // Resolve the SVD sign ambiguity: the asperity state loads and unloads
    // with the velocity, so pick the sign that correlates positively with it.
    double mz = 0.0, mv = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        mz += out.z_hat.values[j];
        mv += velocity.values[j];
    }
    mz /= static_cast<double>(n);
    mv /= static_cast<double>(n);
    double cov = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        cov += (out.z_hat.values[j] - mz) * (velocity.values[j] - mv);
    const double sign = cov < 0.0 ? -1.0 : 1.0;

    double maxabs = 0.0;
    for (double v : out.z_hat.values) maxabs = std::max(maxabs, std::abs(v));
    out.scale = maxabs > 0.0 ? sign * maxabs : 1.0;
    for (double& v : out.z_hat.values) v /= out.scale;
    return out;
}

void write_spectrum_csv(const SvdFactors& f, const std::string& path) {
    const EnergySpectrum e = energy_spectrum(f);
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw IoError("cannot open " + path + " for writing");
    std::fputs("k,sigma,energy\n", fp);
    for (Eigen::Index k = 0; k < f.S.size(); ++k)
        std::fprintf(fp, "%lld,%s,%s\n", static_cast<long long>(k + 1),
                     format_double(f.S(k)).c_str(),
                     format_double(e.energies[static_cast<std::size_t>(k)]).c_str());
    if (std::fclose(fp) != 0) throw IoError("failed to close " + path);
}

} // namespace motorid
