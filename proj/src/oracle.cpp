#include "dotcav/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dotcav/errors.hpp"

namespace dotcav::oracle {

namespace {

using Eigen::MatrixXcd;
using std::complex;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void validate(const LabFrameParams& p, const FockConfig& cfg) {
    if (cfg.n_max < 2) throw ValidationError("n_max must be >= 2");
    if (!(cfg.dt > 0.0)) throw ValidationError("dt must be > 0");
    if (!(cfg.t_final > 0.0)) throw ValidationError("t_final must be > 0");
    if (cfg.record_stride < 1) throw ValidationError("record_stride must be >= 1");
    if (!(p.tc > 0.0)) throw ValidationError("tc must be > 0");
    if (!(p.fr > 0.0)) throw ValidationError("fr must be > 0");
    if (p.kappa < 0.0) throw ValidationError("kappa must be >= 0");
}

// H(t) = H0 + cos(2 pi fr t) H1; both parts are real symmetric.
void hamiltonian_parts(const LabFrameParams& p, const FockConfig& cfg,
                       MatrixXcd& h0, MatrixXcd& h1) {
    const int nf = cfg.n_max + 1;
    const int dim = 2 * nf;
    h0 = MatrixXcd::Zero(dim, dim);
    h1 = MatrixXcd::Zero(dim, dim);
    auto idx = [nf](int s, int n) { return s * nf + n; };
    auto sz = [](int s) { return s == 0 ? 1.0 : -1.0; };
    for (int s = 0; s < 2; ++s) {
        for (int n = 0; n < nf; ++n) {
            const int i = idx(s, n);
            h0(i, i) = 0.5 * p.eps0 * sz(s) + p.fr * n;
            h1(i, i) = 0.5 * p.eps_q * sz(s);
            h0(i, idx(1 - s, n)) += p.tc;
            if (n + 1 < nf) {
                const double ladder = std::sqrt(n + 1.0);
                h0(idx(s, n), idx(s, n + 1)) += p.g0 * sz(s) * ladder;
                h0(idx(s, n + 1), idx(s, n)) += p.g0 * sz(s) * ladder;
                h1(idx(s, n), idx(s, n + 1)) += 2.0 * p.eps_r * ladder;
                h1(idx(s, n + 1), idx(s, n)) += 2.0 * p.eps_r * ladder;
            }
        }
    }
}

// Structured evolution engine: applies H(t) rho through the pentadiagonal
// couplings (diagonal, spin flip, n +- 1) instead of a dense product, and
// builds the dissipator by index arithmetic.
struct Engine {
    int nf = 0;
    int dim = 0;
    LabFrameParams p;
    std::vector<double> sqrt_np1; // sqrt(n+1); zero at each block top
    std::vector<double> n_of;     // photon number per basis index
    std::vector<double> diag0;    // static diagonal
    std::vector<double> diag1;    // driven diagonal (cos factor)
    std::vector<double> ladder0;  // g0 sz(s): static (a + a+) coefficient
    double ladder1 = 0.0;         // 2 eps_r: driven (a + a+) coefficient

    Engine(const LabFrameParams& params, const FockConfig& cfg)
        : nf(cfg.n_max + 1), dim(2 * (cfg.n_max + 1)), p(params) {
        sqrt_np1.resize(dim);
        n_of.resize(dim);
        diag0.resize(dim);
        diag1.resize(dim);
        ladder0.resize(dim);
        for (int s = 0; s < 2; ++s) {
            const double z = s == 0 ? 1.0 : -1.0;
            for (int n = 0; n < nf; ++n) {
                const int i = s * nf + n;
                sqrt_np1[i] = n + 1 < nf ? std::sqrt(n + 1.0) : 0.0;
                n_of[i] = n;
                diag0[i] = 0.5 * p.eps0 * z + p.fr * n;
                diag1[i] = 0.5 * p.eps_q * z;
                ladder0[i] = p.g0 * z;
            }
        }
        ladder1 = 2.0 * p.eps_r;
    }

    int flip(int i) const { return i < nf ? i + nf : i - nf; }

    // out = -i 2pi [H(t), rho] + 2pi kappa (a rho a+ - {a+a, rho}/2).
    // m is scratch for H rho; [H, rho] = m - m+ because H and rho are
    // Hermitian.
    void rhs(const MatrixXcd& rho, double t, MatrixXcd& m, MatrixXcd& out) const {
        const double c = std::cos(kTwoPi * p.fr * t);
        for (int j = 0; j < dim; ++j) {
            const complex<double>* v = rho.col(j).data();
            complex<double>* o = m.col(j).data();
            for (int i = 0; i < dim; ++i) {
                const double q = ladder0[i] + ladder1 * c;
                complex<double> acc = (diag0[i] + diag1[i] * c) * v[i];
                acc += p.tc * v[flip(i)];
                if (i > 0) acc += q * sqrt_np1[i - 1] * v[i - 1];
                if (i + 1 < dim) acc += q * sqrt_np1[i] * v[i + 1];
                o[i] = acc;
            }
        }
        const complex<double> minus_i_2pi(0.0, -kTwoPi);
        const double k2pi = kTwoPi * p.kappa;
        for (int j = 0; j < dim; ++j) {
            for (int i = 0; i < dim; ++i) {
                complex<double> val = minus_i_2pi * (m(i, j) - std::conj(m(j, i)));
                const double jump = sqrt_np1[i] * sqrt_np1[j];
                if (jump != 0.0) val += k2pi * jump * rho(i + 1, j + 1);
                val -= k2pi * 0.5 * (n_of[i] + n_of[j]) * rho(i, j);
                out(i, j) = val;
            }
        }
    }

    complex<double> a_expect(const MatrixXcd& rho) const {
        complex<double> acc = 0.0;
        for (int i = 0; i + 1 < dim; ++i) {
            if (sqrt_np1[i] != 0.0) acc += sqrt_np1[i] * rho(i + 1, i);
        }
        return acc;
    }

    double n_expect(const MatrixXcd& rho) const {
        double acc = 0.0;
        for (int i = 0; i < dim; ++i) acc += n_of[i] * rho(i, i).real();
        return acc;
    }

    double top_levels(const MatrixXcd& rho) const {
        double acc = 0.0;
        for (int s = 0; s < 2; ++s) {
            acc += rho(s * nf + nf - 1, s * nf + nf - 1).real();
            acc += rho(s * nf + nf - 2, s * nf + nf - 2).real();
        }
        return acc;
    }
};

} // namespace

std::vector<OdePoint> coherent_ode_evolve(complex<double> alpha0,
                                          const model::CouplingSet& c,
                                          double eps_r_hz, double kappa_hz,
                                          model::QubitState state, double t_final,
                                          double dt) {
    if (!(kappa_hz > 0.0)) throw ValidationError("kappa must be > 0");
    if (!(dt > 0.0) || !(t_final > 0.0)) {
        throw ValidationError("dt and t_final must be > 0");
    }
    const double sign = static_cast<double>(static_cast<int>(state));
    const complex<double> pole(sign * c.delta_omega_hz, -0.5 * kappa_hz);
    const double drive = eps_r_hz + sign * 0.5 * c.g_dy_hz;
    const complex<double> minus_i_2pi(0.0, -kTwoPi);
    auto f = [&](complex<double> a) { return minus_i_2pi * (pole * a + drive); };

    const double alpha_st =
        std::abs(model::steady_state_alpha(c, eps_r_hz, kappa_hz, state));
    const double blowup = 1e9 * (1.0 + std::abs(alpha0) + alpha_st);

    const long n_steps = static_cast<long>(std::ceil(t_final / dt - 1e-12));
    std::vector<OdePoint> traj;
    traj.reserve(n_steps + 1);
    complex<double> a = alpha0;
    traj.push_back({0.0, a});
    for (long k = 0; k < n_steps; ++k) {
        const double h = std::min(dt, t_final - k * dt);
        const complex<double> k1 = f(a);
        const complex<double> k2 = f(a + 0.5 * h * k1);
        const complex<double> k3 = f(a + 0.5 * h * k2);
        const complex<double> k4 = f(a + h * k3);
        a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(std::abs(a)) || std::abs(a) > blowup) {
            throw IntegratorError("coherent-state ODE blew up; reduce dt");
        }
        traj.push_back({std::min((k + 1) * dt, t_final), a});
    }
    return traj;
}

Eigen::MatrixXcd build_lab_hamiltonian(double t, const LabFrameParams& p,
                                       const FockConfig& cfg) {
    validate(p, cfg);
    MatrixXcd h0, h1;
    hamiltonian_parts(p, cfg, h0, h1);
    return h0 + std::cos(kTwoPi * p.fr * t) * h1;
}

LindbladResult lindblad_evolve(const MatrixXcd& rho0, const LabFrameParams& p,
                               const FockConfig& cfg) {
    validate(p, cfg);
    const Engine eng(p, cfg);
    if (rho0.rows() != eng.dim || rho0.cols() != eng.dim) {
        throw ValidationError("rho0 dimension does not match 2 (n_max + 1)");
    }
    if (std::abs(rho0.trace() - complex<double>(1.0, 0.0)) > 1e-8) {
        throw ValidationError("rho0 must have unit trace");
    }
    if ((rho0 - rho0.adjoint()).cwiseAbs().maxCoeff() > 1e-12) {
        throw ValidationError("rho0 must be Hermitian");
    }

    const long n_steps = static_cast<long>(std::llround(cfg.t_final / cfg.dt));
    if (n_steps < 1) throw ValidationError("t_final shorter than one step");

    LindbladResult res;
    res.samples.reserve(static_cast<std::size_t>(n_steps / cfg.record_stride) + 2);

    MatrixXcd rho = rho0;
    MatrixXcd m(eng.dim, eng.dim), k1(eng.dim, eng.dim), k2(eng.dim, eng.dim),
        k3(eng.dim, eng.dim), k4(eng.dim, eng.dim), tmp(eng.dim, eng.dim);

    const long check_stride = std::max<long>(1, n_steps / 64);
    auto record = [&](double t) {
        TrajectoryPoint pt;
        pt.t = t;
        pt.a_expect = eng.a_expect(rho);
        pt.n_expect = eng.n_expect(rho);
        pt.trace_err = std::abs(rho.trace() - complex<double>(1.0, 0.0));
        res.max_trace_err = std::max(res.max_trace_err, pt.trace_err);
        res.samples.push_back(pt);
    };
    record(0.0);

    const double dt = cfg.dt;
    for (long step = 0; step < n_steps; ++step) {
        const double t = step * dt;
        eng.rhs(rho, t, m, k1);
        tmp = rho + (0.5 * dt) * k1;
        eng.rhs(tmp, t + 0.5 * dt, m, k2);
        tmp = rho + (0.5 * dt) * k2;
        eng.rhs(tmp, t + 0.5 * dt, m, k3);
        tmp = rho + dt * k3;
        eng.rhs(tmp, t + dt, m, k4);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        if ((step + 1) % cfg.record_stride == 0 || step + 1 == n_steps) {
            record((step + 1) * dt);
        }
        if ((step + 1) % check_stride == 0 || step + 1 == n_steps) {
            const double trace_err =
                std::abs(rho.trace() - complex<double>(1.0, 0.0));
            if (!std::isfinite(trace_err) || trace_err > 1e-6) {
                throw IntegratorError("Lindblad evolution lost the trace; reduce dt");
            }
            const double leak = eng.top_levels(rho);
            if (leak > 1e-4) {
                throw TruncationLeakError("population " + std::to_string(leak) +
                                          " in the top two Fock levels; increase n_max");
            }
            const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
            res.max_hermiticity_err = std::max(res.max_hermiticity_err, herm);
            Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
            res.min_eigenvalue =
                std::min(res.min_eigenvalue, es.eigenvalues().minCoeff());
        }
    }
    res.rho_final = rho;
    res.top_level_population = eng.top_levels(rho);
    return res;
}

Demodulation demodulate(std::span<const TrajectoryPoint> series, double fr,
                        int window_periods) {
    if (window_periods < 5) {
        throw ValidationError("demodulation window must span at least 5 drive periods");
    }
    if (series.size() < 8) throw ValidationError("trajectory too short to demodulate");
    const double period = 1.0 / fr;
    const double t_end = series.back().t;
    const double t_start = t_end - window_periods * period;
    if (series.front().t > t_start + 1e-12) {
        throw ValidationError("trajectory shorter than the demodulation window");
    }
    std::size_t first = series.size();
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].t >= t_start - 1e-12) {
            first = i;
            break;
        }
    }
    if (series.size() - first < 4) throw ValidationError("too few samples in window");

    // Trapezoid averages of x(t) cos and x(t) sin with x = Re<a + a+>.
    double ci = 0.0, cq = 0.0, span = 0.0;
    auto quad = [&](const TrajectoryPoint& pt, double& xc, double& xs) {
        const double x = 2.0 * pt.a_expect.real();
        xc = x * std::cos(kTwoPi * fr * pt.t);
        xs = x * std::sin(kTwoPi * fr * pt.t);
    };
    for (std::size_t i = first; i + 1 < series.size(); ++i) {
        const double h = series[i + 1].t - series[i].t;
        double c0, s0, c1, s1;
        quad(series[i], c0, s0);
        quad(series[i + 1], c1, s1);
        ci += 0.5 * h * (c0 + c1);
        cq += 0.5 * h * (s0 + s1);
        span += h;
    }
    Demodulation d;
    d.i = ci / span;
    d.q = -cq / span;
    d.magnitude = std::hypot(d.i, d.q);
    d.phase = std::atan2(d.q, d.i);
    const double periods_covered = span / period;
    d.window_bias_warning =
        std::abs(periods_covered - std::round(periods_covered)) > 1e-6;
    return d;
}

Eigen::MatrixXcd initial_state(const LabFrameParams& p, const FockConfig& cfg) {
    validate(p, cfg);
    Eigen::Matrix2cd hq;
    hq << 0.5 * p.eps0, p.tc, p.tc, -0.5 * p.eps0;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(hq);
    const Eigen::Vector2cd ground = es.eigenvectors().col(0); // ascending eigenvalues
    const int nf = cfg.n_max + 1;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(2 * nf);
    psi[0] = ground[0];  // sz = +1 block, vacuum
    psi[nf] = ground[1]; // sz = -1 block, vacuum
    return psi * psi.adjoint();
}

OracleReport oracle_iq_compare(const LabFrameParams& p, const FockConfig& cfg) {
    validate(p, cfg);
    if (!(p.kappa > 0.0)) {
        throw ValidationError("steady-state comparison requires kappa > 0");
    }
    if (cfg.t_final < 10.0 / p.kappa) {
        throw ValidationError("t_final must reach the steady state (>= 10/kappa)");
    }
    const double n_expected = 4.0 * (p.eps_r / p.kappa) * (p.eps_r / p.kappa);
    if (cfg.n_max < std::ceil(4.0 * n_expected + 6.0)) {
        throw ValidationError("n_max below 4<n> + 6 for the requested drive");
    }

    const model::QubitTuning tuning(p.eps0, p.tc);
    const model::CouplingSet c = model::coupling_set(tuning, p.g0, p.eps_q);

    OracleReport rep;
    rep.flags.adiabatic = model::qubit_energy(tuning) / p.fr >= 5.0;
    rep.flags.weak_drive = std::abs(p.eps_q) <= 0.1 * p.tc + 1e-12;
    rep.flags.weak_coupling = p.g0 <= 0.01 * p.tc;

    const LindbladResult run = lindblad_evolve(initial_state(p, cfg), p, cfg);

    const Demodulation last = demodulate(run.samples, p.fr, cfg.demod_periods);
    const double period = 1.0 / p.fr;
    const double cut_t = run.samples.back().t - cfg.demod_periods * period;
    std::size_t cut = run.samples.size();
    for (std::size_t i = 0; i < run.samples.size(); ++i) {
        if (run.samples[i].t > cut_t + 1e-12) {
            cut = i;
            break;
        }
    }
    const Demodulation prev =
        demodulate(std::span<const TrajectoryPoint>(run.samples.data(), cut), p.fr,
                   cfg.demod_periods);
    rep.steady_state_drift = std::abs(last.magnitude - prev.magnitude) /
                             std::max(prev.magnitude, 1e-300);
    if (rep.steady_state_drift >= 0.005) {
        throw NonConvergenceError("demodulated magnitude still drifts by " +
                                  std::to_string(rep.steady_state_drift * 100.0) +
                                  "% per window; increase t_final");
    }

    rep.oracle_magnitude = last.magnitude;
    rep.effective_magnitude = std::abs(model::steady_state_alpha(c, p.eps_r, p.kappa));
    rep.relative_error =
        std::abs(rep.oracle_magnitude - rep.effective_magnitude) /
        rep.effective_magnitude;
    rep.n_expect = run.samples.back().n_expect;
    rep.max_trace_err = run.max_trace_err;
    return rep;
}

LabFrameParams desk_preset() {
    LabFrameParams p;
    p.eps0 = 0.0;
    p.eps_q = 0.35;
    p.tc = 3.5;
    p.g0 = 0.002;
    p.eps_r = 0.003;
    p.fr = 1.0;
    p.kappa = 0.01;
    return p;
}

FockConfig desk_fock() { return FockConfig{}; }

FockConfig recommended_fock(const LabFrameParams& p, int n_max) {
    FockConfig cfg;
    cfg.n_max = n_max;
    const double fq = std::hypot(p.eps0, 2.0 * p.tc);
    const int steps_per_period = static_cast<int>(std::ceil(50.0 * fq / p.fr));
    cfg.dt = 1.0 / (p.fr * steps_per_period);
    cfg.t_final = std::ceil(10.0 / p.kappa + 2.0 * cfg.demod_periods / p.fr);
    return cfg;
}

} // namespace dotcav::oracle
