#include "dotcav/model.hpp"

#include <algorithm>
#include <cmath>

#include "dotcav/errors.hpp"
#include "dotcav/units.hpp"

namespace dotcav::model {

namespace {

void require_finite(double x, const char* name) {
    if (!std::isfinite(x)) {
        throw ValidationError(std::string(name) + " must be finite");
    }
}

} // namespace

QubitTuning::QubitTuning(double eps0_hz, double tc_hz)
    : eps0_hz_(eps0_hz), tc_hz_(tc_hz) {
    require_finite(eps0_hz, "eps0");
    require_finite(tc_hz, "tc");
    if (tc_hz <= 0.0) {
        throw ValidationError("tc must be > 0; the two-level model is invalid at tc = 0");
    }
}

DriveSettings::DriveSettings(DriveChannel channel, double eps2_hz, double eps3_hz,
                             double beta2, double beta3)
    : channel_(channel), eps2_hz_(eps2_hz), eps3_hz_(eps3_hz), beta2_(beta2),
      beta3_(beta3) {
    require_finite(eps2_hz, "eps2");
    require_finite(eps3_hz, "eps3");
    if (eps2_hz < 0.0 || eps3_hz < 0.0) {
        throw InvalidConfigurationError("raw drive amplitudes must be >= 0");
    }
    if (eps2_hz > 0.0 && eps3_hz > 0.0) {
        throw InvalidConfigurationError("only one of eps2, eps3 may be active at a time");
    }
    if (channel == DriveChannel::s1 && eps3_hz > 0.0) {
        throw InvalidConfigurationError("S1 channel cannot carry an eps3 amplitude");
    }
    if (channel == DriveChannel::p3 && eps2_hz > 0.0) {
        throw InvalidConfigurationError("P3 channel cannot carry an eps2 amplitude");
    }
    if (!(beta3 > 0.0 && beta3 < beta2 && beta2 < 1.0)) {
        throw InvalidConfigurationError("cross-couplings must satisfy 0 < beta3 < beta2 < 1");
    }
}

DriveSettings DriveSettings::s1(double eps2_hz, double beta2, double beta3) {
    return DriveSettings(DriveChannel::s1, eps2_hz, 0.0, beta2, beta3);
}

DriveSettings DriveSettings::p3(double eps3_hz, double beta2, double beta3) {
    return DriveSettings(DriveChannel::p3, 0.0, eps3_hz, beta2, beta3);
}

ResonatorParams::ResonatorParams(double fr_hz, double kappa_hz, double z0r_ohm)
    : fr_hz_(fr_hz), kappa_hz_(kappa_hz), z0r_ohm_(z0r_ohm) {
    require_finite(fr_hz, "fr");
    require_finite(kappa_hz, "kappa");
    if (fr_hz <= 0.0) throw ValidationError("fr must be > 0");
    if (kappa_hz <= 0.0) throw ValidationError("kappa must be > 0");
    if (kappa_hz > 0.1 * fr_hz) {
        throw ValidationError("kappa must be small compared to fr");
    }
    if (z0r_ohm <= 0.0) throw ValidationError("z0r must be > 0");
}

double qubit_energy(const QubitTuning& tuning) {
    return std::hypot(tuning.eps0_hz(), 2.0 * tuning.tc_hz());
}

EffectiveDrive resolve_drive(const DriveSettings& s) {
    EffectiveDrive d;
    d.eps_q_hz = s.eps2_hz() - (1.0 - s.beta3() / s.beta2()) * s.eps3_hz();
    d.eps_r_hz = s.beta2() * s.eps2_hz() + s.beta3() * s.eps3_hz();
    return d;
}

CouplingSet coupling_set(const QubitTuning& tuning, double g0_hz, double eps_q_hz) {
    require_finite(g0_hz, "g0");
    require_finite(eps_q_hz, "eps_q");
    const double tc = tuning.tc_hz();
    const double eps0 = tuning.eps0_hz();
    const double e = qubit_energy(tuning);
    const double e3 = e * e * e;
    CouplingSet c;
    c.e_q0_hz = e;
    c.g_st_hz = eps0 * g0_hz / e;
    c.g_dy_hz = 4.0 * tc * tc * g0_hz * eps_q_hz / e3;
    c.delta_omega_hz = 8.0 * tc * tc * g0_hz * g0_hz / e3;
    c.g_perp_hz = 2.0 * tc * g0_hz / e;
    return c;
}

double schrieffer_wolff_shift(double g_perp_hz, double fq_hz, double fr_hz) {
    require_finite(g_perp_hz, "g_perp");
    if (!(fq_hz > fr_hz && fr_hz > 0.0)) {
        if (fq_hz == fr_hz) {
            throw ResonanceSingularityError("Schrieffer-Wolff shift diverges at fq == fr");
        }
        throw ValidationError("require fq > fr > 0");
    }
    return g_perp_hz * g_perp_hz * (1.0 / (fq_hz - fr_hz) + 1.0 / (fq_hz + fr_hz));
}

std::complex<double> steady_state_alpha(const CouplingSet& c, double eps_r_hz,
                                        double kappa_hz, QubitState state,
                                        double drive_detuning_hz) {
    if (kappa_hz <= 0.0) throw ValidationError("kappa must be > 0");
    const double sign = static_cast<double>(static_cast<int>(state));
    const std::complex<double> denom(sign * c.delta_omega_hz - drive_detuning_hz,
                                     -0.5 * kappa_hz);
    return -(eps_r_hz + sign * 0.5 * c.g_dy_hz) / denom;
}

double iq_signal(double gain_v, const CouplingSet& c, double eps_r_hz,
                 double kappa_hz, QubitState state) {
    if (kappa_hz <= 0.0) throw ValidationError("kappa must be > 0");
    const double sign = static_cast<double>(static_cast<int>(state));
    const double denom = std::hypot(c.delta_omega_hz, 0.5 * kappa_hz);
    return gain_v * (eps_r_hz + sign * 0.5 * c.g_dy_hz) / denom;
}

std::vector<double> iq_linecut(const DeviceParams& device,
                               std::span<const double> eps0_hz, double tc_hz,
                               const DriveSettings& settings, double gain_v) {
    if (eps0_hz.empty()) throw ValidationError("detuning sweep must be nonempty");
    for (std::size_t i = 1; i < eps0_hz.size(); ++i) {
        const double step = eps0_hz[i] - eps0_hz[i - 1];
        const double first = eps0_hz[1] - eps0_hz[0];
        if (step == 0.0 || (step > 0.0) != (first > 0.0)) {
            throw ValidationError("detuning sweep must be strictly monotone");
        }
    }
    if (device.g0_hz <= 0.0 || device.kappa_hz <= 0.0) {
        throw ValidationError("device must carry resolved g0 and kappa");
    }
    const double g0 = device.g0_hz;
    const double kappa = device.kappa_hz;
    const double tc2 = tc_hz * tc_hz;

    std::vector<double> iq(eps0_hz.size());
    for (std::size_t i = 0; i < eps0_hz.size(); ++i) {
        const QubitTuning pt(eps0_hz[i], tc_hz);
        const double e = qubit_energy(pt);
        const double e3 = e * e * e;
        const double curv = 2.0 * tc2 * g0 / e3;
        const double dw = 4.0 * g0 * curv; // 8 tc^2 g0^2 / E^3
        const double denom = std::hypot(dw, 0.5 * kappa);
        double num = 0.0;
        if (settings.channel() == DriveChannel::s1) {
            num = settings.eps2_hz() * (settings.beta2() - curv);
        } else {
            num = settings.eps3_hz() *
                  (settings.beta3() + (1.0 - settings.beta3() / settings.beta2()) * curv);
        }
        iq[i] = gain_v * num / denom;
    }
    return iq;
}

double tunability_ratio(double eps_q_hz, double g0_hz) {
    if (g0_hz <= 0.0) throw ValidationError("g0 must be > 0");
    return std::abs(eps_q_hz) / (2.0 * g0_hz);
}

Spectrum transmission_spectrum(const CouplingSet& c, double eps_r_hz,
                               double kappa_hz, double fr_hz, double span_hz,
                               int n_points) {
    if (span_hz <= 0.0) throw ValidationError("span must be > 0");
    if (n_points < 3) throw ValidationError("need at least 3 spectrum points");
    Spectrum s;
    s.freq_hz.resize(n_points);
    s.magnitude.resize(n_points);
    const double step = span_hz / (n_points - 1);
    int imax = 0;
    for (int i = 0; i < n_points; ++i) {
        const double detuning = -0.5 * span_hz + i * step;
        s.freq_hz[i] = fr_hz + detuning;
        s.magnitude[i] = std::abs(
            steady_state_alpha(c, eps_r_hz, kappa_hz, QubitState::ground, detuning));
        if (s.magnitude[i] > s.magnitude[imax]) imax = i;
    }
    // Three-point parabolic refinement of the sampled argmax.
    s.peak_freq_hz = s.freq_hz[imax];
    if (imax > 0 && imax < n_points - 1) {
        const double ym = s.magnitude[imax - 1];
        const double y0 = s.magnitude[imax];
        const double yp = s.magnitude[imax + 1];
        const double curvature = ym - 2.0 * y0 + yp;
        if (curvature < 0.0) {
            s.peak_freq_hz += 0.5 * step * (ym - yp) / curvature;
        }
    }
    return s;
}

} // namespace dotcav::model
