#pragma once

#include <complex>
#include <span>
#include <vector>

#include "dotcav/types.hpp"

// Closed-form effective model of the ac-driven double dot coupled
// longitudinally to the cavity: qubit energy, curvature couplings,
// drive-channel resolution, stationary cavity field and homodyne IQ signal.
namespace dotcav::model {

// Static double-dot tuning point. eps0 is the detuning, tc the tunnel
// coupling, both as E/h in Hz. tc must be strictly positive: the 1/E_q0^3
// coupling denominators are only finite at eps0 = 0 because 2*tc > 0.
class QubitTuning {
public:
    QubitTuning(double eps0_hz, double tc_hz);

    double eps0_hz() const { return eps0_hz_; }
    double tc_hz() const { return tc_hz_; }

private:
    double eps0_hz_;
    double tc_hz_;
};

enum class DriveChannel { s1, p3 };

// Which gate is driven, with the raw detuning-drive amplitudes (eps2 via
// dot 2 / gate S1, eps3 via dot 3 / gate P3) and the gate-to-cavity
// cross-couplings beta2, beta3. Only one raw amplitude may be active.
class DriveSettings {
public:
    DriveSettings(DriveChannel channel, double eps2_hz, double eps3_hz,
                  double beta2, double beta3);

    static DriveSettings s1(double eps2_hz, double beta2, double beta3);
    static DriveSettings p3(double eps3_hz, double beta2, double beta3);

    DriveChannel channel() const { return channel_; }
    double eps2_hz() const { return eps2_hz_; }
    double eps3_hz() const { return eps3_hz_; }
    double beta2() const { return beta2_; }
    double beta3() const { return beta3_; }

private:
    DriveChannel channel_;
    double eps2_hz_;
    double eps3_hz_;
    double beta2_;
    double beta3_;
};

// Resolved signed detuning drive and cavity drive.
struct EffectiveDrive {
    double eps_q_hz = 0.0; // signed; S1 drives positive, P3 negative
    double eps_r_hz = 0.0; // >= 0
};

class ResonatorParams {
public:
    ResonatorParams(double fr_hz, double kappa_hz, double z0r_ohm);

    double fr_hz() const { return fr_hz_; }
    double kappa_hz() const { return kappa_hz_; }
    double z0r_ohm() const { return z0r_ohm_; }

private:
    double fr_hz_;
    double kappa_hz_;
    double z0r_ohm_;
};

// Derived couplings at one tuning point, all in Hz.
struct CouplingSet {
    double e_q0_hz = 0.0;        // static qubit energy sqrt(eps0^2 + 4 tc^2)
    double g_st_hz = 0.0;        // static longitudinal, odd in eps0
    double g_dy_hz = 0.0;        // dynamic longitudinal, proportional to eps_q
    double delta_omega_hz = 0.0; // dispersive shift, even in eps0
    double g_perp_hz = 0.0;      // transverse coupling 2 tc g0 / E_q0
};

// sigma_z eigenvalue of the qubit. All experiments in this model keep the
// qubit in its ground state (minus branch).
enum class QubitState : int { ground = -1, excited = +1 };

struct Spectrum {
    std::vector<double> freq_hz;
    std::vector<double> magnitude;
    double peak_freq_hz = 0.0; // argmax refined by a three-point parabola
};

// E_q0 = sqrt(eps0^2 + 4 tc^2).
double qubit_energy(const QubitTuning& tuning);

// eps_q = eps2 - (1 - beta3/beta2) * eps3,  eps_r = beta2*eps2 + beta3*eps3.
EffectiveDrive resolve_drive(const DriveSettings& settings);

// g_st = eps0 g0 / E,  g_dy = 4 tc^2 g0 eps_q / E^3,
// delta_omega = 8 tc^2 g0^2 / E^3,  g_perp = 2 tc g0 / E.
CouplingSet coupling_set(const QubitTuning& tuning, double g0_hz, double eps_q_hz);

// Two-term second-order shift g_perp^2 (1/(fq-fr) + 1/(fq+fr)).
// Throws ResonanceSingularityError at fq == fr.
double schrieffer_wolff_shift(double g_perp_hz, double fq_hz, double fr_hz);

// Stationary coherent-state amplitude conditioned on the qubit state,
//   alpha_pm = -(eps_r ± g_dy/2) / ((±delta_omega - drive_detuning) - i kappa/2).
// drive_detuning is the drive frequency minus fr; zero recovers the
// on-resonance stationary state.
std::complex<double> steady_state_alpha(const CouplingSet& c, double eps_r_hz,
                                        double kappa_hz,
                                        QubitState state = QubitState::ground,
                                        double drive_detuning_hz = 0.0);

// Homodyne output IQ_pm = gain * (eps_r ± g_dy/2) / sqrt(delta_omega^2 + kappa^2/4).
double iq_signal(double gain_v, const CouplingSet& c, double eps_r_hz,
                 double kappa_hz, QubitState state = QubitState::ground);

// Channel-specific ground-state line cut over a detuning sweep:
//   S1:  IQ = gain * eps2 * (beta2 - 2 tc^2 g0 / E^3) / sqrt(dw^2 + kappa^2/4)
//   P3:  IQ = gain * eps3 * (beta3 + (1 - beta3/beta2) 2 tc^2 g0 / E^3) / sqrt(dw^2 + kappa^2/4)
// Identical pointwise to composing resolve_drive + coupling_set + iq_signal.
std::vector<double> iq_linecut(const DeviceParams& device,
                               std::span<const double> eps0_hz, double tc_hz,
                               const DriveSettings& settings, double gain_v);

// |g_dy / delta_omega| = |eps_q| / (2 g0), independent of tuning.
double tunability_ratio(double eps_q_hz, double g0_hz);

// Ground-state transmission magnitude |alpha_-| sampled over drive detunings
// in [-span/2, +span/2] around fr. The peak sits at fr - delta_omega.
Spectrum transmission_spectrum(const CouplingSet& c, double eps_r_hz,
                               double kappa_hz, double fr_hz, double span_hz,
                               int n_points);

} // namespace dotcav::model
