#include <doctest.h>

#include <cmath>
#include <random>

#include "dotcav/errors.hpp"
#include "dotcav/model.hpp"
#include "dotcav/units.hpp"

using namespace dotcav;
using namespace dotcav::model;

namespace {

// Fig. 3 device values (Table II).
constexpr double kFr = 1.3038e9;
constexpr double kKappa = 124.5e3;
constexpr double kG0 = 5.5e6;

DeviceParams fig3_device() {
    DeviceParams d;
    d.lever_arms = {0.11, 0.09, 0.04, 0.149, 0.0};
    d.fr_hz = kFr;
    d.z0r_ohm = 575.0;
    d.z0g_ohm = 1.0;
    d.kappa_hz = kKappa;
    d.g0_hz = kG0;
    return d;
}

} // namespace

TEST_CASE("qubit energy closed form") {
    CHECK(qubit_energy(QubitTuning(0.0, 6.14e9)) == doctest::Approx(12.28e9));
    // E -> |eps0| as tc -> 0
    CHECK(qubit_energy(QubitTuning(5.0, 0.001)) ==
          doctest::Approx(5.0000004).epsilon(1e-7));
    CHECK(qubit_energy(QubitTuning(3.0, 2.0)) == doctest::Approx(5.0));
}

TEST_CASE("qubit tuning validation") {
    CHECK_THROWS_AS(QubitTuning(0.0, 0.0), ValidationError);
    CHECK_THROWS_AS(QubitTuning(0.0, -1.0), ValidationError);
    CHECK_THROWS_AS(QubitTuning(std::nan(""), 1.0), ValidationError);
    CHECK_THROWS_AS(QubitTuning(std::numeric_limits<double>::infinity(), 1.0),
                    ValidationError);
}

TEST_CASE("drive resolution S1") {
    const auto d = resolve_drive(DriveSettings::s1(27e6, 1.27e-2, 2.89e-3));
    CHECK(d.eps_q_hz == doctest::Approx(27e6));
    // Table III quotes 340 kHz from the rounded Table I beta2
    CHECK(d.eps_r_hz == doctest::Approx(342.9e3).epsilon(2e-2));
}

TEST_CASE("drive resolution P3") {
    // The Appendix E chain ignores the crosstalk factor, eps_q ~ eps3, so the
    // 397 kHz cavity drive corresponds to eps3 = 137.5 MHz.
    const double eps3 = 137.5e6;
    const auto d = resolve_drive(DriveSettings::p3(eps3, 1.27e-2, 2.89e-3));
    CHECK(d.eps_q_hz == doctest::Approx(-(1.0 - 2.89e-3 / 1.27e-2) * eps3));
    CHECK(d.eps_q_hz < 0.0);
    CHECK(d.eps_r_hz == doctest::Approx(397e3).epsilon(5e-3));
}

TEST_CASE("drive resolution no drive and invalid configs") {
    const auto d = resolve_drive(DriveSettings::s1(0.0, 1.27e-2, 2.89e-3));
    CHECK(d.eps_q_hz == 0.0);
    CHECK(d.eps_r_hz == 0.0);
    CHECK_THROWS_AS(DriveSettings(DriveChannel::s1, 1e6, 1e6, 1.27e-2, 2.89e-3),
                    InvalidConfigurationError);
    CHECK_THROWS_AS(DriveSettings(DriveChannel::s1, 0.0, 1e6, 1.27e-2, 2.89e-3),
                    InvalidConfigurationError);
    CHECK_THROWS_AS(DriveSettings::s1(1e6, 2.89e-3, 1.27e-2),
                    InvalidConfigurationError); // beta3 > beta2
    CHECK_THROWS_AS(DriveSettings::s1(1e6, 1.5, 2.89e-3), InvalidConfigurationError);
}

TEST_CASE("coupling set against Table IV rows") {
    // Fig. 3(d): tc = 6.14 GHz, g0 = 5.5 MHz, eps_q = -137 MHz
    const auto c = coupling_set(QubitTuning(0.0, 6.14e9), kG0, -137e6);
    CHECK(c.g_dy_hz / 1e3 == doctest::Approx(-61.4).epsilon(2e-3));
    CHECK(c.delta_omega_hz / 1e3 == doctest::Approx(4.9).epsilon(2e-2));

    // Fig. 4(d)(iv): tc = 4.65 GHz, g0 = 4.1 MHz, eps_q = -152 MHz. The
    // printed -67.6 kHz carries the rounding of the printed g0; half a digit
    // of g0 propagates to ~0.9 kHz here.
    const auto c4 = coupling_set(QubitTuning(0.0, 4.65e9), 4.1e6, -152e6);
    CHECK(c4.g_dy_hz / 1e3 == doctest::Approx(-67.6).epsilon(0.015));
    CHECK(c4.delta_omega_hz / 1e3 == doctest::Approx(3.7).epsilon(0.04));

    // No drive at the symmetric point
    const auto c0 = coupling_set(QubitTuning(0.0, 6.14e9), kG0, 0.0);
    CHECK(c0.g_dy_hz == 0.0);
    CHECK(c0.g_st_hz == 0.0);
}

TEST_CASE("coupling parity, ratio and linearity laws") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int k = 0; k < 200; ++k) {
        const double eps0 = (u(rng) - 1.55) * 40e9;
        const double tc = u(rng) * 4e9;
        const double g0 = u(rng) * 4e6;
        const double eq = (u(rng) - 1.55) * 200e6;
        const auto cp = coupling_set(QubitTuning(eps0, tc), g0, eq);
        const auto cm = coupling_set(QubitTuning(-eps0, tc), g0, eq);

        CHECK(cp.e_q0_hz >= std::max(std::abs(eps0), 2.0 * tc) * (1.0 - 1e-15));
        CHECK(cp.g_dy_hz == doctest::Approx(cm.g_dy_hz).epsilon(1e-14));
        CHECK(cp.delta_omega_hz == doctest::Approx(cm.delta_omega_hz).epsilon(1e-14));
        CHECK(cp.g_st_hz == doctest::Approx(-cm.g_st_hz).epsilon(1e-14));
        CHECK(cp.delta_omega_hz >= 0.0);
        if (eq != 0.0) {
            // Ratio law, exact in frequency units
            CHECK(cp.g_dy_hz / cp.delta_omega_hz ==
                  doctest::Approx(eq / (2.0 * g0)).epsilon(1e-12));
        }
        // g_dy linear in eps_q, delta_omega independent of eps_q
        const auto c2 = coupling_set(QubitTuning(eps0, tc), g0, 2.0 * eq);
        CHECK(c2.g_dy_hz == doctest::Approx(2.0 * cp.g_dy_hz).epsilon(1e-14));
        CHECK(c2.delta_omega_hz == cp.delta_omega_hz);
    }
}

TEST_CASE("schrieffer-wolff shift") {
    // Adiabatic limit fr -> 0: shift -> 2 g0^2 / (2 tc) = g0^2 / tc
    const double tc = 6.14e9;
    const double sw0 = schrieffer_wolff_shift(kG0, 2.0 * tc, 1e-3);
    CHECK(sw0 == doctest::Approx(kG0 * kG0 / tc).epsilon(1e-9));

    // Paper's ratio: ~4.98 kHz, a 1.1% correction above delta_omega
    const double sw = schrieffer_wolff_shift(5.5e6, 12.28e9, 1.3038e9);
    CHECK(sw == doctest::Approx(4983.0).epsilon(1e-3));

    CHECK(schrieffer_wolff_shift(1.0, 2.0, 1.0) == doctest::Approx(4.0 / 3.0));
    CHECK_THROWS_AS(schrieffer_wolff_shift(1.0, 1.0, 1.0), ResonanceSingularityError);
    CHECK_THROWS_AS(schrieffer_wolff_shift(1.0, 1.0, 2.0), ValidationError);
}

TEST_CASE("adiabatic consistency identity over a grid") {
    // SW / delta_omega = 1 / (1 - (fr/fq)^2), both sides computed
    // independently, to 1e-12.
    for (double tc : {2e9, 4.65e9, 6.14e9, 9e9}) {
        for (double eps0 : {0.0, 3e9, 20e9, -35e9}) {
            for (double g0 : {2e6, 5.5e6}) {
                const QubitTuning q(eps0, tc);
                const auto c = coupling_set(q, g0, 0.0);
                const double fq = qubit_energy(q);
                for (double fr : {0.5e9, 1.3038e9, 2.5e9}) {
                    const double sw = schrieffer_wolff_shift(c.g_perp_hz, fq, fr);
                    const double r = fr / fq;
                    CHECK(sw / c.delta_omega_hz ==
                          doctest::Approx(1.0 / (1.0 - r * r)).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("steady state amplitude") {
    const auto c0 = coupling_set(QubitTuning(1e12, 6.14e9), 0.0, 0.0); // trivial
    SUBCASE("bare driven cavity") {
        CHECK(std::abs(steady_state_alpha(c0, 397e3, kKappa)) ==
              doctest::Approx(2.0 * 397e3 / kKappa));
    }
    SUBCASE("Table III photon number") {
        const double n = std::norm(steady_state_alpha(c0, 397e3, kKappa));
        CHECK(n == doctest::Approx(40.7).epsilon(2e-3));
    }
    SUBCASE("ground-state peak sits at drive detuning -delta_omega") {
        const auto c = coupling_set(QubitTuning(0.0, 6.14e9), kG0, -137e6);
        const double at_shift =
            std::abs(steady_state_alpha(c, 397e3, kKappa, QubitState::ground,
                                        -c.delta_omega_hz));
        for (double detuning : {-3e3, 0.0, 3e3, -8e3}) {
            CHECK(std::abs(steady_state_alpha(c, 397e3, kKappa, QubitState::ground,
                                              detuning)) <= at_shift * (1.0 + 1e-12));
        }
        // and it is exactly the B2 stationary state at zero detuning
        const auto a = steady_state_alpha(c, 397e3, kKappa);
        const std::complex<double> expected =
            -(397e3 - 0.5 * c.g_dy_hz) /
            std::complex<double>(-c.delta_omega_hz, -0.5 * kKappa);
        CHECK(std::abs(a - expected) < 1e-12 * std::abs(expected));
    }
}

TEST_CASE("iq signal limits and channel signs") {
    const double gain = 1e-3;
    // eps0 -> inf: couplings vanish, IQ -> 2 c eps_r / kappa
    const auto cfar = coupling_set(QubitTuning(1e15, 6.14e9), kG0, -137e6);
    CHECK(iq_signal(gain, cfar, 397e3, kKappa) ==
          doctest::Approx(gain * 2.0 * 397e3 / kKappa).epsilon(1e-6));

    const DeviceParams dev = fig3_device();
    const auto s1 = DriveSettings::s1(27e6, 1.27e-2, 2.89e-3);
    const auto p3 = DriveSettings::p3(137.5e6 / (1.0 - 2.89e-3 / 1.27e-2), 1.27e-2,
                                      2.89e-3);
    const std::vector<double> grid = {0.0, 1e15};
    const auto iq_s1 = iq_linecut(dev, grid, 6.14e9, s1, gain);
    const auto iq_p3 = iq_linecut(dev, grid, 6.14e9, p3, gain);
    CHECK(iq_s1[0] < iq_s1[1]); // S1 drive: suppressed transmission at eps0 = 0
    CHECK(iq_p3[0] > iq_p3[1]); // P3 drive: enhanced transmission at eps0 = 0
}

TEST_CASE("line cut equals composed closed form") {
    const DeviceParams dev = fig3_device();
    const double gain = 1e-3;
    const double tc = 6.14e9;
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back((-400.0 + 8.0 * i) * units::ueV_to_hz);

    for (const auto& settings :
         {DriveSettings::s1(27e6, 1.27e-2, 2.89e-3),
          DriveSettings::p3(178e6, 1.27e-2, 2.89e-3)}) {
        const auto cut = iq_linecut(dev, grid, tc, settings, gain);
        const auto drive = resolve_drive(settings);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto c = coupling_set(QubitTuning(grid[i], tc), dev.g0_hz,
                                        drive.eps_q_hz);
            const double composed = iq_signal(gain, c, drive.eps_r_hz, dev.kappa_hz);
            CHECK(cut[i] == doctest::Approx(composed).epsilon(1e-13));
        }
        // even in eps0
        const auto c1 = iq_linecut(dev, grid, tc, settings, gain);
        std::vector<double> neg(grid.rbegin(), grid.rend());
        for (double& x : neg) x = -x;
        const auto c2 = iq_linecut(dev, neg, tc, settings, gain);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(c1[i] == doctest::Approx(c2[grid.size() - 1 - i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("line cut P3 peak-to-background ratio matches the closed form") {
    const DeviceParams dev = fig3_device();
    // Table I row: c eps3 = 12.93e-5 V GHz, beta3 = 2.89e-3, tc = 6.14 GHz.
    const double c_eps3 = 12.93e-5 * 1e9;
    const double eps3 = 178e6;
    const double gain = c_eps3 / eps3;
    const auto p3 = DriveSettings::p3(eps3, 1.27e-2, 2.89e-3);
    const std::vector<double> grid = {0.0, 1e15};
    const auto iq = iq_linecut(dev, grid, 6.14e9, p3, gain);

    const double curv0 = 2.0 * 6.14e9 * 6.14e9 * kG0 / std::pow(12.28e9, 3);
    const double dw0 = 4.0 * kG0 * curv0;
    const double peak = c_eps3 * (2.89e-3 + (1.0 - 2.89e-3 / 1.27e-2) * curv0) /
                        std::hypot(dw0, 0.5 * kKappa);
    const double background = c_eps3 * 2.89e-3 / (0.5 * kKappa);
    CHECK(iq[0] / iq[1] == doctest::Approx(peak / background).epsilon(1e-10));
}

TEST_CASE("line cut rejects bad sweeps") {
    const DeviceParams dev = fig3_device();
    const auto s1 = DriveSettings::s1(27e6, 1.27e-2, 2.89e-3);
    CHECK_THROWS_AS(iq_linecut(dev, std::vector<double>{}, 6e9, s1, 1.0),
                    ValidationError);
    CHECK_THROWS_AS(iq_linecut(dev, std::vector<double>{0.0, 1.0, 0.5}, 6e9, s1, 1.0),
                    ValidationError);
}

TEST_CASE("tunability ratio") {
    CHECK(tunability_ratio(137e6, 5.5e6) == doctest::Approx(12.45).epsilon(1e-3));
    CHECK(tunability_ratio(152e6, 4.1e6) == doctest::Approx(18.5).epsilon(2e-3));
    CHECK(tunability_ratio(0.0, 5.5e6) == 0.0);
    CHECK_THROWS_AS(tunability_ratio(1.0, 0.0), ValidationError);
}

TEST_CASE("transmission spectrum peak shift") {
    const double eps_r = 397e3;
    SUBCASE("no coupling: peak at fr") {
        const auto c = coupling_set(QubitTuning(1e15, 6.14e9), 0.0, 0.0);
        const auto s = transmission_spectrum(c, eps_r, kKappa, kFr, 40e3, 801);
        CHECK(std::abs(s.peak_freq_hz - kFr) < 40e3 / 800);
    }
    SUBCASE("delta_omega = 3.3 kHz moves the peak down by 3.3 kHz") {
        // Appendix G tuning: adjust tc so that delta_omega = 3.3 kHz
        const double tc = kG0 * kG0 / 3.3e3;
        const auto c = coupling_set(QubitTuning(0.0, tc), kG0, 0.0);
        CHECK(c.delta_omega_hz == doctest::Approx(3.3e3).epsilon(1e-12));
        const auto s = transmission_spectrum(c, eps_r, kKappa, kFr, 40e3, 801);
        CHECK(s.peak_freq_hz - kFr == doctest::Approx(-3.3e3).epsilon(0.02));
    }
    SUBCASE("Fig 3(d) tuning shifts by ~4.9 kHz") {
        const auto c = coupling_set(QubitTuning(0.0, 6.14e9), kG0, -137e6);
        const auto s = transmission_spectrum(c, eps_r, kKappa, kFr, 60e3, 2001);
        CHECK(kFr - s.peak_freq_hz ==
              doctest::Approx(c.delta_omega_hz).epsilon(0.02));
        CHECK(c.delta_omega_hz == doctest::Approx(4.93e3).epsilon(1e-2));
    }
    CHECK_THROWS_AS(transmission_spectrum(coupling_set(QubitTuning(0, 1e9), 0, 0),
                                          1.0, 1e3, 1e9, -1.0, 11),
                    ValidationError);
    CHECK_THROWS_AS(transmission_spectrum(coupling_set(QubitTuning(0, 1e9), 0, 0),
                                          1.0, 1e3, 1e9, 1.0, 2),
                    ValidationError);
}

TEST_CASE("peak amplitude scaling follows 1/tc up to the dispersive correction") {
    const DeviceParams dev = fig3_device();
    const double gain = 1e-3;
    const double eps2 = 27e6;
    const double beta2 = 1.27e-2;
    const auto s1 = DriveSettings::s1(eps2, beta2, 2.89e-3);
    const std::vector<double> probe = {0.0, 1e16};

    // Limit of [IQ(0) - IQ(inf)] tc as tc -> inf: the dip depth is
    // gain eps2 (g0/(4tc)) (2/kappa), so the product tends to
    // -gain eps2 g0 / (2 kappa).
    const double p_inf = -gain * eps2 * dev.g0_hz / (2.0 * dev.kappa_hz);
    for (double tc = 2e9; tc <= 20e9; tc *= 1.3) {
        const auto iq = iq_linecut(dev, probe, tc, s1, gain);
        const double product = (iq[0] - iq[1]) * tc;
        // First-order deviation: |P - P_inf|/|P_inf| = 8 (beta2 - g) tc dw^2 /
        // (g0 kappa^2), bounded with beta2 in place of (beta2 - g).
        const double dw = dev.g0_hz * dev.g0_hz / tc;
        const double corr = (8.0 * beta2 * tc / dev.g0_hz + 8.0) *
                            (dw / dev.kappa_hz) * (dw / dev.kappa_hz);
        CHECK(std::abs(product - p_inf) <= 1.1 * std::abs(p_inf) * corr);
    }
}

TEST_CASE("resonator params validation") {
    CHECK_NOTHROW(ResonatorParams(1.3038e9, 124.5e3, 575.0));
    CHECK_THROWS_AS(ResonatorParams(1e9, 2e8, 575.0), ValidationError); // kappa !<< fr
    CHECK_THROWS_AS(ResonatorParams(-1e9, 1e3, 575.0), ValidationError);
    CHECK_THROWS_AS(ResonatorParams(1e9, 0.0, 575.0), ValidationError);
}
