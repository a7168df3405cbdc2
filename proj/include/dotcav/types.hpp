#pragma once

#include <string>
#include <vector>

namespace dotcav {

// Gate-to-detuning (and gate-to-dot) lever arms, eV/V.
struct LeverArms {
    double p2_eps = 0.0;
    double p3_eps = 0.0;
    double s1_eps = 0.0;
    double p3_3 = 0.0; // P3-to-dot-3, from thermal broadening
    double p2_2 = 0.0; // P2-to-dot-2
};

// Static device / calibration record. kappa_hz may be derived from q_loaded
// and g0_hz from (s1_eps, fr_hz, z0r_ohm); see calib::resolve_device.
struct DeviceParams {
    LeverArms lever_arms;
    double fr_hz = 0.0;   // cavity resonance, omega_r/2pi
    double z0r_ohm = 0.0; // resonator characteristic impedance
    double z0g_ohm = 0.0; // gate-line characteristic impedance
    double kappa_hz = 0.0; // cavity decay, kappa/2pi
    double g0_hz = 0.0;    // bare coupling, g0/2pi
    std::vector<double> q_loaded;        // loaded quality factors
    std::vector<double> attenuations_db; // room-T chain, cryostat, bias leads
    double generator_dbm = 0.0;
};

struct LineCutMeta {
    std::string channel;    // "S1" or "P3"
    std::string device_ref; // path or label of the device record
    double gain_v = 0.0;    // homodyne gain c
    unsigned long long seed = 0;
    double dc_offset_v = 0.0;
};

// Ordered samples of (detuning, IQ). The detuning axis is dual-stored:
// ueV matches the figure axes, Hz is what the model computes with.
struct LineCut {
    std::vector<double> eps0_uev;
    std::vector<double> eps0_hz;
    std::vector<double> iq_volts;
    LineCutMeta meta;
};

// Throws ValidationError unless sizes match, size >= 1 and eps0 is strictly
// monotone (either direction).
void validate_linecut(const LineCut& lc);

// One thermal-broadening sweep of a reservoir transition.
struct ThermalScan {
    std::vector<double> vp3_volts;
    std::vector<double> iq_volts;
    double t_mc_k = 0.0; // mixing-chamber temperature
};

} // namespace dotcav
