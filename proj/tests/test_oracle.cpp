#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "dotcav/errors.hpp"
#include "dotcav/model.hpp"
#include "dotcav/oracle.hpp"

using namespace dotcav;
using namespace dotcav::oracle;
using std::complex;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

model::CouplingSet desk_couplings(const LabFrameParams& p) {
    return model::coupling_set(model::QubitTuning(p.eps0, p.tc), p.g0, p.eps_q);
}

} // namespace

TEST_CASE("steady state zeroes the coherent-state flow") {
    // The analytic stationary amplitude is an exact fixed point of the ODE.
    const LabFrameParams p = desk_preset();
    const auto c = desk_couplings(p);
    for (auto state : {model::QubitState::ground, model::QubitState::excited}) {
        const complex<double> a_st =
            model::steady_state_alpha(c, p.eps_r, p.kappa, state);
        const double sign = static_cast<double>(static_cast<int>(state));
        const complex<double> pole(sign * c.delta_omega_hz, -0.5 * p.kappa);
        const double drive = p.eps_r + sign * 0.5 * c.g_dy_hz;
        const complex<double> rhs =
            complex<double>(0.0, -kTwoPi) * (pole * a_st + drive);
        const double scale = kTwoPi * (std::abs(pole * a_st) + std::abs(drive));
        CHECK(std::abs(rhs) < 1e-14 * scale);
    }
}

TEST_CASE("coherent ODE evolution") {
    const LabFrameParams p = desk_preset();
    const auto c = desk_couplings(p);

    SUBCASE("fixed point stays put") {
        const complex<double> a_st = model::steady_state_alpha(c, p.eps_r, p.kappa);
        const auto traj = coherent_ode_evolve(a_st, c, p.eps_r, p.kappa,
                                              model::QubitState::ground, 50.0, 0.5);
        for (const auto& pt : traj) {
            CHECK(std::abs(pt.alpha - a_st) < 1e-12 * std::abs(a_st));
        }
    }
    SUBCASE("bare-cavity ramp-up envelope") {
        const auto c0 = model::coupling_set(model::QubitTuning(0.0, p.tc), 0.0, 0.0);
        const auto traj =
            coherent_ode_evolve(0.0, c0, p.eps_r, p.kappa,
                                model::QubitState::ground, 20.0 / p.kappa, 0.2);
        const double a_final = 2.0 * p.eps_r / p.kappa;
        for (std::size_t i = 0; i < traj.size(); i += 250) {
            const double expected =
                a_final * (1.0 - std::exp(-std::numbers::pi * p.kappa * traj[i].t));
            CHECK(std::abs(traj[i].alpha) == doctest::Approx(expected).epsilon(1e-6));
        }
        CHECK(std::abs(traj.back().alpha) == doctest::Approx(a_final).epsilon(1e-6));
    }
    SUBCASE("random initial amplitudes land on the stationary state") {
        const complex<double> a_st = model::steady_state_alpha(c, p.eps_r, p.kappa);
        std::mt19937_64 rng(21);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        for (int k = 0; k < 10; ++k) {
            const complex<double> a0(u(rng), u(rng));
            const auto traj = coherent_ode_evolve(a0, c, p.eps_r, p.kappa,
                                                  model::QubitState::ground,
                                                  20.0 / p.kappa, 0.1 / p.kappa);
            CHECK(std::abs(traj.back().alpha - a_st) < 1e-6 * std::abs(a_st));
        }
    }
    SUBCASE("unstable step size is detected") {
        CHECK_THROWS_AS(coherent_ode_evolve(1.0, c, p.eps_r, 1.0,
                                            model::QubitState::ground, 1e4, 50.0),
                        IntegratorError);
    }
}

TEST_CASE("lab-frame hamiltonian assembly") {
    LabFrameParams p = desk_preset();
    FockConfig cfg;
    cfg.n_max = 5;

    SUBCASE("decoupled spectrum is {+-tc + fr n}") {
        LabFrameParams bare = p;
        bare.eps0 = 0.0;
        bare.eps_q = 0.0;
        bare.eps_r = 0.0;
        bare.g0 = 0.0;
        const auto h = build_lab_hamiltonian(0.3, bare, cfg);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
        std::vector<double> expected;
        for (int n = 0; n <= cfg.n_max; ++n) {
            expected.push_back(-bare.tc + bare.fr * n);
            expected.push_back(bare.tc + bare.fr * n);
        }
        std::sort(expected.begin(), expected.end());
        for (int i = 0; i < es.eigenvalues().size(); ++i) {
            CHECK(es.eigenvalues()[i] ==
                  doctest::Approx(expected[i]).epsilon(1e-12));
        }
    }
    SUBCASE("half a period flips only the drive terms") {
        const auto h0 = build_lab_hamiltonian(0.0, p, cfg);
        const auto h_half = build_lab_hamiltonian(0.5 / p.fr, p, cfg);
        const Eigen::MatrixXcd diff = 0.5 * (h0 - h_half); // = H1 at cos = 1
        const int nf = cfg.n_max + 1;
        // diagonal carries eps_q/2 sz, off-diagonal 2 eps_r sqrt(n+1)
        CHECK(diff(0, 0).real() == doctest::Approx(0.5 * p.eps_q));
        CHECK(diff(nf, nf).real() == doctest::Approx(-0.5 * p.eps_q));
        CHECK(diff(0, 1).real() == doctest::Approx(2.0 * p.eps_r));
        CHECK(diff(1, 2).real() == doctest::Approx(2.0 * p.eps_r * std::sqrt(2.0)));
        CHECK(diff(0, nf) == complex<double>(0.0, 0.0)); // tc unchanged
        // static parts cancel entirely
        Eigen::MatrixXcd rest = h0 + h_half;
        LabFrameParams statics = p;
        statics.eps_q = 0.0;
        statics.eps_r = 0.0;
        rest -= 2.0 * build_lab_hamiltonian(0.25 / p.fr, statics, cfg);
        CHECK(rest.cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("hermitian for random parameters") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int k = 0; k < 20; ++k) {
            LabFrameParams r;
            r.eps0 = u(rng) - 0.5;
            r.eps_q = u(rng);
            r.tc = 1.0 + u(rng);
            r.g0 = 0.1 * u(rng);
            r.eps_r = 0.1 * u(rng);
            r.fr = 1.0;
            r.kappa = 0.01;
            const auto h = build_lab_hamiltonian(u(rng) * 7.0, r, cfg);
            CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("lindblad evolution basics") {
    SUBCASE("kappa = 0, no drive, eigenstate stays put") {
        LabFrameParams p = desk_preset();
        p.eps_q = 0.0;
        p.eps_r = 0.0;
        p.kappa = 0.0;
        FockConfig cfg;
        cfg.n_max = 4;
        cfg.dt = 1.0 / 350.0;
        cfg.t_final = 20.0;
        const auto h = build_lab_hamiltonian(0.0, p, cfg);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
        const Eigen::VectorXcd psi = es.eigenvectors().col(0);
        const Eigen::MatrixXcd rho0 = psi * psi.adjoint();
        const auto run = lindblad_evolve(rho0, p, cfg);
        CHECK((run.rho_final - rho0).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(run.max_trace_err < 1e-10);
    }
    SUBCASE("driven damped cavity reaches 2 eps_r / kappa") {
        LabFrameParams p = desk_preset();
        p.eps_q = 0.0;
        p.g0 = 0.0;
        p.kappa = 0.05;
        FockConfig cfg = recommended_fock(p, 8);
        const auto run = lindblad_evolve(initial_state(p, cfg), p, cfg);
        const auto demod = demodulate(run.samples, p.fr, cfg.demod_periods);
        CHECK(demod.magnitude ==
              doctest::Approx(2.0 * p.eps_r / p.kappa).epsilon(0.01));
    }
    SUBCASE("trace preserved through a full desk run") {
        LabFrameParams p = desk_preset();
        p.kappa = 0.05; // shorter steady-state horizon keeps the test quick
        FockConfig cfg = recommended_fock(p, 10);
        const auto run = lindblad_evolve(initial_state(p, cfg), p, cfg);
        CHECK(run.max_trace_err <= 1e-8);
        CHECK(run.max_hermiticity_err < 1e-10);
        // transient discretization negativity near the zero eigenvalues of
        // the pure initial state stays at the 1e-7 scale
        CHECK(run.min_eigenvalue > -1e-5);
        for (const auto& s : run.samples) CHECK(s.trace_err <= 1e-8);
    }
    SUBCASE("truncation leak raises") {
        LabFrameParams p = desk_preset();
        p.eps_r = 0.02; // <n> ~ 16 against n_max = 4
        p.kappa = 0.01;
        FockConfig cfg;
        cfg.n_max = 4;
        cfg.dt = 1.0 / 350.0;
        cfg.t_final = 300.0;
        CHECK_THROWS_AS(lindblad_evolve(initial_state(p, cfg), p, cfg),
                        TruncationLeakError);
    }
    SUBCASE("input validation") {
        LabFrameParams p = desk_preset();
        FockConfig cfg;
        cfg.n_max = 4;
        Eigen::MatrixXcd bad = Eigen::MatrixXcd::Zero(10, 10);
        bad(0, 0) = 0.7; // trace != 1
        CHECK_THROWS_AS(lindblad_evolve(bad, p, cfg), ValidationError);
        bad(0, 0) = 1.0;
        bad(0, 1) = complex<double>(0.0, 1e-3); // not hermitian
        CHECK_THROWS_AS(lindblad_evolve(bad, p, cfg), ValidationError);
    }
}

TEST_CASE("homodyne demodulation") {
    const double fr = 1.0;
    SUBCASE("pure tone gives A/2 and the phase") {
        const double amp = 0.8, phase = 0.6;
        std::vector<TrajectoryPoint> series;
        for (int i = 0; i <= 7000; ++i) {
            const double t = i * 0.01;
            TrajectoryPoint pt;
            pt.t = t;
            // x(t) = 2 Re<a> = amp cos(2 pi t + phase)
            pt.a_expect = 0.5 * amp *
                          std::exp(complex<double>(0.0, -(kTwoPi * t + phase)));
            series.push_back(pt);
        }
        const auto d = demodulate(series, fr, 50);
        CHECK(d.magnitude == doctest::Approx(0.5 * amp).epsilon(1e-9));
        CHECK(d.phase == doctest::Approx(phase).epsilon(1e-7));
        CHECK_FALSE(d.window_bias_warning);
    }
    SUBCASE("zero signal demodulates to zero") {
        std::vector<TrajectoryPoint> series;
        for (int i = 0; i <= 2000; ++i) series.push_back({i * 0.01, {0.0, 0.0}, 0, 0});
        const auto d = demodulate(series, fr, 10);
        CHECK(d.i == 0.0);
        CHECK(d.q == 0.0);
        CHECK(d.magnitude == 0.0);
    }
    SUBCASE("misaligned window warns") {
        std::vector<TrajectoryPoint> series;
        for (int i = 0; i <= 143; ++i) {
            series.push_back({i * 0.7, {1.0, 0.0}, 0, 0});
        }
        const auto d = demodulate(series, fr, 5);
        CHECK(d.window_bias_warning);
    }
    SUBCASE("too short a window is rejected") {
        std::vector<TrajectoryPoint> series;
        for (int i = 0; i <= 100; ++i) series.push_back({i * 0.1, {1.0, 0.0}, 0, 0});
        CHECK_THROWS_AS(demodulate(series, fr, 4), ValidationError);
        CHECK_THROWS_AS(demodulate(series, fr, 50), ValidationError);
    }
}

TEST_CASE("oracle against the effective model at shortened desk scale") {
    // kappa = 0.05 shortens the steady-state horizon; the full desk preset
    // runs in the acceptance suite.
    LabFrameParams p = desk_preset();
    p.kappa = 0.05;
    FockConfig cfg = recommended_fock(p, 12);

    SUBCASE("dip, peak and bare limits") {
        const auto dip = oracle_iq_compare(p, cfg);
        CHECK(dip.flags.adiabatic);
        CHECK(dip.flags.weak_drive);
        CHECK(dip.flags.weak_coupling);
        CHECK(dip.relative_error <= 0.05);

        LabFrameParams pk = p;
        pk.eps_q = -p.eps_q;
        const auto peak = oracle_iq_compare(pk, cfg);
        CHECK(peak.relative_error <= 0.05);

        LabFrameParams bare = p;
        bare.eps_q = 0.0;
        const auto flat = oracle_iq_compare(bare, cfg);
        CHECK(flat.relative_error <= 0.01);
        CHECK(flat.oracle_magnitude ==
              doctest::Approx(2.0 * bare.eps_r / bare.kappa).epsilon(0.01));

        // sign flip moves the magnitude to the other side of the bare value
        CHECK(dip.oracle_magnitude < flat.oracle_magnitude);
        CHECK(peak.oracle_magnitude > flat.oracle_magnitude);
        const double shift_dip = flat.oracle_magnitude - dip.oracle_magnitude;
        const double shift_peak = peak.oracle_magnitude - flat.oracle_magnitude;
        CHECK(shift_dip == doctest::Approx(shift_peak).epsilon(0.05));
    }
    SUBCASE("steady-state precondition enforced") {
        FockConfig rushed = cfg;
        rushed.t_final = 5.0 / p.kappa;
        CHECK_THROWS_AS(oracle_iq_compare(p, rushed), ValidationError);
        FockConfig tiny = cfg;
        tiny.n_max = 3;
        CHECK_THROWS_AS(oracle_iq_compare(p, tiny), ValidationError);
    }
}

TEST_CASE("oracle error shrinks as the adiabatic ratio grows" *
          doctest::skip(false)) {
    // fq/fr in {5, 7, 10, 14} at fixed eps_q/tc; the deviation from the
    // closed form decreases monotonically, consistent with a (fr/fq)^2 law.
    double prev = std::numeric_limits<double>::infinity();
    std::vector<double> errs;
    for (double ratio : {5.0, 7.0, 10.0, 14.0}) {
        LabFrameParams p = desk_preset();
        p.kappa = 0.02;
        p.tc = ratio / 2.0;
        p.eps_q = 0.1 * p.tc;
        const FockConfig cfg = recommended_fock(p, 12);
        const auto rep = oracle_iq_compare(p, cfg);
        CHECK(rep.relative_error < prev);
        errs.push_back(rep.relative_error);
        prev = rep.relative_error;
    }
    // quadratic-or-faster falloff across the endpoints, within a factor 2
    const double expected_gain = (14.0 / 5.0) * (14.0 / 5.0);
    CHECK(errs.front() / errs.back() > 0.5 * expected_gain);
}

TEST_CASE("doubling the Fock truncation leaves the magnitude put") {
    LabFrameParams p = desk_preset();
    p.kappa = 0.02;
    const auto r12 = oracle_iq_compare(p, recommended_fock(p, 12));
    const auto r24 = oracle_iq_compare(p, recommended_fock(p, 24));
    CHECK(std::abs(r24.oracle_magnitude - r12.oracle_magnitude) /
              r12.oracle_magnitude <
          1e-3);
}
