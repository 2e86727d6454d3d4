#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motorid/time_series.hpp"

namespace motorid {

// Delay embedding of a scalar series: row i holds samples i..i+n-1, so every
// anti-diagonal is constant and n = length - m + 1.
struct HankelMatrix {
    Eigen::MatrixXd data;
    double source_dt = 0.0;
    double t0 = 0.0;

    std::size_t m() const { return static_cast<std::size_t>(data.rows()); }
    std::size_t n() const { return static_cast<std::size_t>(data.cols()); }
};

// Economy SVD of a Hankel matrix: H = U diag(S) V^T with r = min(m, n).
struct SvdFactors {
    Eigen::MatrixXd U;
    Eigen::VectorXd S; // descending, non-negative
    Eigen::MatrixXd V;
    double source_dt = 0.0;
    double t0 = 0.0;
};

// Normalized singular-value energies E_k = sigma_k / sum(sigma).
struct EnergySpectrum {
    std::vector<double> energies;
};

// Closed index range; first > last encodes the empty range.
struct IndexRange {
    std::size_t first = 1;
    std::size_t last = 0;

    bool empty() const { return first > last; }
    std::size_t count() const { return empty() ? 0 : last - first + 1; }
};

struct ExtractedState {
    TimeSeries z_hat;   // unit max-abs, sign-aligned to correlate positively
                        // with the source velocity
    double scale = 1.0; // signed: raw first-row values = scale * z_hat
    IndexRange selected;
    EnergySpectrum spectrum;
};

HankelMatrix build_hankel(const TimeSeries& s, std::size_t m);

SvdFactors decompose(const HankelMatrix& H);

EnergySpectrum energy_spectrum(const SvdFactors& f);

// First index whose energy is at or below the threshold, through the end of
// the spectrum. Energies are descending, so the tail is contiguous. An empty
// range is a legal result the caller must handle.
IndexRange select_low_energy(const EnergySpectrum& e, double threshold);

// Rank-restricted reconstruction keeping only the singular values inside the
// range; the empty range yields the zero matrix.
Eigen::MatrixXd low_energy_reconstruct(const SvdFactors& f, IndexRange range);

// Full chain: embed, decompose, pick the low-energy tail, reconstruct, and
// return the first row normalized to unit max-abs. The SVD sign ambiguity is
// resolved by flipping the series, if needed, so it correlates positively
// with the input velocity; the signed scale factor is recorded so downstream
// consumers can undo the normalization.
ExtractedState extract_internal_state(const TimeSeries& velocity, std::size_t m,
                                      double threshold);

// Rows "k,sigma,energy" with k starting at 1 (the sigma_k subscript).
void write_spectrum_csv(const SvdFactors& f, const std::string& path);

} // namespace motorid
