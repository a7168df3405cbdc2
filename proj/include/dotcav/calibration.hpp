#pragma once

#include <span>
#include <string>
#include <vector>

#include "dotcav/fit.hpp"
#include "dotcav/types.hpp"

// Device-parameter extraction chain: thermal-broadening lever arm, slope-based
// lever arms, bare coupling g0, cavity decay from Q_L, microwave power budget,
// drive amplitude, photon number and the derived coupling table.
namespace dotcav::calib {

// Slopes m_i = (dV_P2/dV_P3) of dot-2 lines, dot-3 lines and polarization
// lines in the stability diagram, plus the S1 sweep ratios.
struct SlopeSet {
    double m2 = 0.0;
    double m3 = 0.0;
    double m_pol = 0.0;
    double dv_p2_s1 = 0.0; // (dV_P2/dV_S1) along dot-2 lines
    double dv_p3_s1 = 0.0; // (dV_P3/dV_S1) along dot-3 lines
};

struct PowerBudget {
    double generator_dbm = 0.0;
    std::vector<double> attenuations_db;
    double z0g_ohm = 1.0;
};

// Thermally broadened transition line shape,
//   |IQ| = -|amp| sech^2(alpha (vp3 - v0) / (2 kB te)) + offset,
// with alpha in eV/V and te in K.
double thermal_model(double vp3_v, double v0_v, double amp_v, double offset_v,
                     double alpha_ev_v, double te_k);

// T_e = sqrt(T_mc^2 + T_e0^2).
double electron_temperature(double t_mc_k, double te0_k);

struct ThermalSeriesFit {
    double alpha_ev_v = 0.0;
    double alpha_sigma = 0.0;
    double te0_k = 0.0;
    double te0_sigma = 0.0;
    std::vector<fit::FitResult> per_scan; // v0, amp, offset, width fits
    bool converged = false;
};

// Two-stage extraction: per-scan sech^2 width fits, then a fit of the widths
// against mixing-chamber temperature to alpha_P3,3 and T_e0. Needs at least
// three distinct temperatures spanning a factor of two.
ThermalSeriesFit fit_thermal_series(std::span<const ThermalScan> scans,
                                    const fit::FitOptions& options = {});

struct DetuningLeverArms {
    double alpha_p3_eps = 0.0;
    double alpha_p2_eps = 0.0;
    double alpha_p2_2 = 0.0;
    double alpha_s1_eps = 0.0;
};

// Slope-based lever arms; throws SingularGeometryError naming the failing
// denominator when the geometry degenerates.
DetuningLeverArms lever_arms(const SlopeSet& slopes, double alpha_p33_ev_v);

// g0/2pi = (alpha_s1_eps * fr / 2) * sqrt(2 z0r / (h/e^2)).
double bare_coupling_g0(double alpha_s1_eps_ev_v, double fr_hz, double z0r_ohm);

// kappa = fr / mean(Q_L).
double kappa_from_q(double fr_hz, std::span<const double> q_loaded);

struct ValueWithSigma {
    double value = 0.0;
    double sigma = 0.0;
};

// Same, with the Q uncertainties propagated in quadrature.
ValueWithSigma kappa_from_q(double fr_hz, std::span<const double> q_loaded,
                            std::span<const double> q_sigma);

// P_in = 10^((generator_dbm - sum(attenuations) - 30)/10) watt.
double power_budget(const PowerBudget& budget);

// eps_q/h = -alpha_eps sqrt(2 z0g P_in) / h; negative per the P3 sign
// convention. Upper bound: the bias-lead attenuation entry is a minimum.
double drive_amplitude(double alpha_eps_ev_v, double z0g_ohm, double p_in_w);

// S1 amplitudes are estimated by rescaling the P3 value with the ratio of
// fitted gain-amplitude products; the sign flips because the two gates act
// on the detuning with opposite signs.
double s1_drive_amplitude(double p3_eps_q_hz, double c_eps2_vhz, double c_eps3_vhz);

// <n> = 4 eps_r^2 / kappa^2.
double photon_number(double eps_r_hz, double kappa_hz);

struct CouplingTableRow {
    std::string label;
    double tc_hz = 0.0;
    double g0_hz = 0.0;
    double eps_q_hz = 0.0;
    double delta_omega_hz = 0.0;
    double g_dy_hz = 0.0;
    double ratio = 0.0;
};

struct CouplingTableInput {
    std::string label;
    double tc_hz = 0.0;
    double g0_hz = 0.0;
    double eps_q_hz = 0.0;
};

// Couplings at the peak (eps0 = 0) for each row, plus the tunability ratio.
std::vector<CouplingTableRow> coupling_table(std::span<const CouplingTableInput> rows);

// Formatted table (kHz / GHz columns) for terminal output.
std::string format_coupling_table(std::span<const CouplingTableRow> rows);

// Fills kappa_hz from q_loaded and g0_hz from (s1_eps, fr, z0r) when absent;
// validates the result.
DeviceParams resolve_device(DeviceParams d);

} // namespace dotcav::calib
