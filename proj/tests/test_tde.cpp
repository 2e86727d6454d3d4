#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "motorid/errors.hpp"
#include "motorid/motor.hpp"
#include "motorid/tde.hpp"

using namespace motorid;

namespace {

TimeSeries series_of(std::vector<double> v, double dt = 1.0) {
    TimeSeries s;
    s.dt = dt;
    s.values = std::move(v);
    return s;
}

TimeSeries random_series(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    TimeSeries s;
    s.dt = 0.012;
    s.values.resize(n);
    for (double& x : s.values) x = d(rng);
    return s;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace

TEST_SUITE("tde") {

TEST_CASE("build_hankel lays out rows as shifted windows") {
    const HankelMatrix H = build_hankel(series_of({1, 2, 3, 4}), 2);
    REQUIRE(H.m() == 2);
    REQUIRE(H.n() == 3);
    CHECK(H.data(0, 0) == 1);
    CHECK(H.data(0, 1) == 2);
    CHECK(H.data(0, 2) == 3);
    CHECK(H.data(1, 0) == 2);
    CHECK(H.data(1, 1) == 3);
    CHECK(H.data(1, 2) == 4);
}

TEST_CASE("Hankel structure holds bit-exactly on random input") {
    const TimeSeries s = random_series(200, 11);
    const HankelMatrix H = build_hankel(s, 17);
    CHECK(H.n() == 200 - 17 + 1);
    CHECK(H.source_dt == s.dt);
    for (Eigen::Index i = 0; i + 1 < H.data.rows(); ++i)
        for (Eigen::Index j = 1; j < H.data.cols(); ++j)
            CHECK(H.data(i, j) == H.data(i + 1, j - 1));
}

TEST_CASE("build_hankel rejects short series naming the required length") {
    CHECK_THROWS_WITH_AS(build_hankel(series_of({1, 2, 3, 4, 5, 6, 7}), 10),
                         doctest::Contains("m+1 = 11"), ValidationError);
    CHECK_THROWS_AS(build_hankel(series_of({1, 2, 3}), 1), ValidationError);
}

TEST_CASE("constant series embeds to a rank-1 all-c matrix") {
    const HankelMatrix H = build_hankel(series_of(std::vector<double>(40, 2.5)), 8);
    for (Eigen::Index i = 0; i < H.data.rows(); ++i)
        for (Eigen::Index j = 0; j < H.data.cols(); ++j)
            CHECK(H.data(i, j) == 2.5);
    const SvdFactors f = decompose(H);
    int above = 0;
    for (Eigen::Index k = 0; k < f.S.size(); ++k)
        if (f.S(k) > 1e-10 * f.S(0)) ++above;
    CHECK(above == 1);
}

TEST_CASE("a pure sinusoid has numerical rank 2") {
    TimeSeries s;
    s.dt = 0.01;
    for (int k = 0; k < 300; ++k)
        s.values.push_back(std::sin(2.0 * std::numbers::pi * 1.3 * k * s.dt));
    const SvdFactors f = decompose(build_hankel(s, 10));
    int above = 0;
    for (Eigen::Index k = 0; k < f.S.size(); ++k)
        if (f.S(k) > 1e-10 * f.S(0)) ++above;
    CHECK(above == 2);
}

TEST_CASE("decompose recovers a diagonal-valued embedding") {
    // Series [3,0,1] embeds to [[3,0],[0,1]], whose singular values are 3, 1.
    const SvdFactors f = decompose(build_hankel(series_of({3, 0, 1}), 2));
    REQUIRE(f.S.size() == 2);
    CHECK(f.S(0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(f.S(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("economy SVD reconstructs a random 60x500 Hankel") {
    const TimeSeries s = random_series(559, 21);
    const HankelMatrix H = build_hankel(s, 60);
    REQUIRE(H.n() == 500);
    const SvdFactors f = decompose(H);

    const Eigen::MatrixXd R = f.U * f.S.asDiagonal() * f.V.transpose();
    CHECK((R - H.data).norm() <= 1e-8 * H.data.norm());

    // Descending non-negative spectrum and orthonormal factors.
    for (Eigen::Index k = 0; k < f.S.size(); ++k) {
        CHECK(f.S(k) >= 0.0);
        if (k) CHECK(f.S(k) <= f.S(k - 1));
    }
    const Eigen::Index r = f.S.size();
    CHECK((f.U.transpose() * f.U - Eigen::MatrixXd::Identity(r, r))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    CHECK((f.V.transpose() * f.V - Eigen::MatrixXd::Identity(r, r))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
}

TEST_CASE("energy spectrum ratios") {
    SvdFactors f;
    f.S = Eigen::Vector2d(3.0, 1.0);
    auto e = energy_spectrum(f);
    CHECK(e.energies[0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(e.energies[1] == doctest::Approx(0.25).epsilon(1e-14));

    f.S = Eigen::VectorXd::Constant(1, 5.0);
    CHECK(energy_spectrum(f).energies == std::vector<double>{1.0});

    f.S = Eigen::VectorXd::Constant(4, 1.0);
    for (double E : energy_spectrum(f).energies)
        CHECK(E == doctest::Approx(0.25).epsilon(1e-14));

    f.S = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(energy_spectrum(f), ExtractionDegenerateError);
}

TEST_CASE("energies sum to one on random spectra") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> mag(0.0, 10.0);
    for (int rep = 0; rep < 50; ++rep) {
        SvdFactors f;
        Eigen::VectorXd s(12);
        for (int k = 0; k < 12; ++k) s(k) = mag(rng);
        std::sort(s.data(), s.data() + 12, std::greater<>());
        f.S = s;
        const auto e = energy_spectrum(f);
        double total = 0.0;
        for (double E : e.energies) {
            CHECK(E >= 0.0);
            CHECK(E <= 1.0);
            total += E;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("select_low_energy picks the tail at or below the threshold") {
    EnergySpectrum e{{0.9, 0.099, 0.0009, 0.0001}};
    const IndexRange r = select_low_energy(e, 0.001);
    CHECK(!r.empty());
    CHECK(r.first == 2);
    CHECK(r.last == 3);

    EnergySpectrum high{{0.6, 0.3, 0.1}};
    CHECK(select_low_energy(high, 0.001).empty());

    CHECK_THROWS_AS(select_low_energy(e, 0.0), ValidationError);
    CHECK_THROWS_AS(select_low_energy(e, 1.0), ValidationError);
}

TEST_CASE("low-energy reconstruction: full, empty, and rank-2 residual") {
    TimeSeries s;
    s.dt = 0.01;
    for (int k = 0; k < 200; ++k)
        s.values.push_back(4.0 * std::sin(2.0 * std::numbers::pi * 0.7 * k * s.dt));
    const HankelMatrix H = build_hankel(s, 12);
    const SvdFactors f = decompose(H);
    const auto r = static_cast<std::size_t>(f.S.size());

    const Eigen::MatrixXd full = low_energy_reconstruct(f, {0, r - 1});
    CHECK((full - H.data).norm() <= 1e-10 * H.data.norm());

    const Eigen::MatrixXd none = low_energy_reconstruct(f, IndexRange{});
    CHECK(none.rows() == H.data.rows());
    CHECK(none.cols() == H.data.cols());
    CHECK(none.norm() == 0.0);

    // A sinusoid is rank 2, so everything from index 2 on is noise floor.
    const Eigen::MatrixXd tail = low_energy_reconstruct(f, {2, r - 1});
    CHECK(tail.norm() < 1e-6 * H.data.norm());

    CHECK_THROWS_AS(low_energy_reconstruct(f, {0, r}), ValidationError);
}

TEST_CASE("split reconstruction sums to the full matrix for every split") {
    const TimeSeries s = random_series(120, 31);
    const HankelMatrix H = build_hankel(s, 20);
    const SvdFactors f = decompose(H);
    const auto r = static_cast<std::size_t>(f.S.size());
    for (std::size_t k = 0; k <= r; ++k) {
        const IndexRange head = k == 0 ? IndexRange{} : IndexRange{0, k - 1};
        const IndexRange tail = k == r ? IndexRange{} : IndexRange{k, r - 1};
        const Eigen::MatrixXd sum =
            low_energy_reconstruct(f, head) + low_energy_reconstruct(f, tail);
        CHECK((sum - H.data).norm() <= 1e-8 * H.data.norm());
    }
}

TEST_CASE("extracting from a pure sinusoid leaves only the noise floor") {
    TimeSeries v;
    v.dt = 0.012;
    const double amp = 5.0;
    for (int k = 0; k < 400; ++k)
        v.values.push_back(amp * std::sin(2.0 * std::numbers::pi * 0.3 * k * v.dt));
    const ExtractedState ex = extract_internal_state(v, 10, 0.001);
    CHECK(ex.z_hat.size() == 400 - 10 + 1);
    CHECK(ex.z_hat.dt == v.dt);
    CHECK(std::abs(ex.scale) < 1e-6 * amp);
    CHECK(!ex.selected.empty());
    CHECK(ex.selected.first == 2);
    // Normalization is exact: unit max-abs after scaling.
    double maxabs = 0.0;
    for (double z : ex.z_hat.values) maxabs = std::max(maxabs, std::abs(z));
    CHECK(maxabs == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("extraction fails loudly when nothing is below threshold") {
    TimeSeries v;
    v.dt = 0.012;
    for (int k = 0; k < 50; ++k)
        v.values.push_back(std::sin(2.0 * std::numbers::pi * 0.3 * k * v.dt));
    // m=3 on a rank-2 signal: spectrum [big, big, tiny]; an extreme threshold
    // below the noise floor ratio leaves nothing selectable.
    CHECK_THROWS_WITH_AS(extract_internal_state(v, 3, 1e-18),
                         doctest::Contains("increase the delay count"),
                         ExtractionDegenerateError);
}

TEST_CASE("extracted state tracks the simulated asperity state at low speed") {
    // Full identification protocol: trapezoid-envelope chirp whose quiet ramp
    // epochs reverse quickly (short sticks, dense breakaway transients) while
    // the 12 V plateau carries the slow heavy oscillations. The bristle state
    // is only observable through the position sensor where the quantizer
    // resolves motion, so the comparison is masked to low measured speed.
    MotorParams mp;
    LuGreParams lp;
    SensorModel sensor;
    Dataset ds = simulate({TrapezoidChirp{12.0, 60.0, 1.0, 0.1}, 200.0}, mp,
                          FrictionModel{lp}, sensor);
    const ExtractedState ex = extract_internal_state(ds.xdot, 60, 0.001);
    REQUIRE(!ex.selected.empty());

    std::vector<double> zh, zt;
    for (std::size_t k = 0; k < ex.z_hat.size(); ++k) {
        if (std::abs(ds.xdot[k]) < 2.0) {
            zh.push_back(ex.z_hat[k]);
            zt.push_back(ds.z[k]);
        }
    }
    REQUIRE(zh.size() > 500);
    CHECK(pearson(zh, zt) >= 0.6);
}

TEST_CASE("spectrum CSV lists 1-based k, sigma, and energy") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "motorid_tde_test";
    fs::create_directories(dir);
    const std::string path = (dir / "spectrum.csv").string();

    SvdFactors f;
    f.S = Eigen::Vector2d(3.0, 1.0);
    write_spectrum_csv(f, path);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "k,sigma,energy");
    std::getline(in, line);
    CHECK(line == "1,3,0.75");
    std::getline(in, line);
    CHECK(line == "2,1,0.25");
    fs::remove_all(dir);
}

} // TEST_SUITE
