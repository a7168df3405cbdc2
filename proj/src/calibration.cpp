#include "dotcav/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "dotcav/errors.hpp"
#include "dotcav/model.hpp"
#include "dotcav/units.hpp"

namespace dotcav::calib {

double thermal_model(double vp3_v, double v0_v, double amp_v, double offset_v,
                     double alpha_ev_v, double te_k) {
    if (!(te_k > 0.0)) throw ValidationError("te must be > 0");
    if (!(alpha_ev_v > 0.0)) throw ValidationError("alpha must be > 0");
    const double arg =
        alpha_ev_v * (vp3_v - v0_v) / (2.0 * units::k_boltzmann_ev * te_k);
    const double sech = 1.0 / std::cosh(arg);
    return -std::abs(amp_v) * sech * sech + offset_v;
}

double electron_temperature(double t_mc_k, double te0_k) {
    if (t_mc_k < 0.0 || te0_k < 0.0) {
        throw ValidationError("temperatures must be >= 0");
    }
    return std::hypot(t_mc_k, te0_k);
}

namespace {

// Per-scan line fit over (v0, amp, offset, width), where
// width = 2 kB Te / alpha is the voltage scale of the sech^2 argument.
fit::FitResult fit_single_scan(const ThermalScan& scan, const fit::FitOptions& options) {
    if (scan.vp3_volts.size() != scan.iq_volts.size()) {
        throw ValidationError("thermal scan arrays must have equal length");
    }
    if (scan.vp3_volts.size() < 20) {
        throw ValidationError("thermal scan needs at least 20 samples across the transition");
    }
    if (scan.t_mc_k < 0.0) throw ValidationError("t_mc must be >= 0");

    const auto& x = scan.vp3_volts;
    const auto& y = scan.iq_volts;
    const double offset0 = *std::max_element(y.begin(), y.end());
    std::size_t imin = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < y[imin]) imin = i;
    }
    const double amp0 = std::max(offset0 - y[imin], 1e-12);
    const double v00 = x[imin];
    const double half = offset0 - 0.5 * amp0;
    std::size_t lo = imin, hi = imin;
    while (lo > 0 && y[lo] < half) --lo;
    while (hi + 1 < y.size() && y[hi] < half) ++hi;
    double width0 = std::abs(x[hi] - x[lo]) / (2.0 * std::acosh(std::sqrt(2.0)));
    if (!(width0 > 0.0)) width0 = std::abs(x.back() - x.front()) / 10.0;

    std::vector<fit::ParameterSpec> specs = {
        {"v0", v00},
        {"amp", amp0, 0.0, std::numeric_limits<double>::infinity(),
         fit::ParamRole::free_param, true},
        {"offset", offset0},
        {"width", width0, 0.0, std::numeric_limits<double>::infinity(),
         fit::ParamRole::free_param, true},
    };
    fit::PredictionFn fn = [&x](const Eigen::VectorXd& p) {
        Eigen::VectorXd pred(static_cast<int>(x.size()));
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = 1.0 / std::cosh((x[i] - p[0]) / p[3]);
            pred[static_cast<int>(i)] = p[2] - p[1] * s * s;
        }
        return pred;
    };
    Eigen::VectorXd yv =
        Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<int>(y.size()));
    return fit::least_squares(fn, yv, specs, options);
}

} // namespace

ThermalSeriesFit fit_thermal_series(std::span<const ThermalScan> scans,
                                    const fit::FitOptions& options) {
    std::set<double> distinct;
    for (const auto& s : scans) distinct.insert(s.t_mc_k);
    if (distinct.size() < 3) {
        throw ValidationError("thermal series needs at least 3 distinct temperatures");
    }
    const double tmin = *distinct.begin();
    const double tmax = *distinct.rbegin();
    if (tmin > 0.0 ? (tmax < 2.0 * tmin) : (tmax <= 0.0)) {
        throw ValidationError(
            "insufficient temperature spread: need a factor >= 2 between min and max t_mc");
    }

    ThermalSeriesFit out;
    std::vector<double> tmc(scans.size());
    std::vector<double> widths(scans.size());
    for (std::size_t i = 0; i < scans.size(); ++i) {
        out.per_scan.push_back(fit_single_scan(scans[i], options));
        if (!out.per_scan.back().converged) {
            throw NonConvergenceError("thermal scan " + std::to_string(i) +
                                      " line fit did not converge");
        }
        tmc[i] = scans[i].t_mc_k;
        widths[i] = out.per_scan.back().value("width");
    }

    // Stage 2: width(T_mc) = (2 kB / alpha) sqrt(T_mc^2 + T_e0^2).
    std::vector<fit::ParameterSpec> specs = {
        {"alpha", 0.1, 0.0, std::numeric_limits<double>::infinity(),
         fit::ParamRole::free_param, true},
        {"te0", 0.5 * (tmin + tmax) + 1e-3, 0.0,
         std::numeric_limits<double>::infinity(), fit::ParamRole::free_param, true},
    };
    fit::PredictionFn fn = [&tmc](const Eigen::VectorXd& p) {
        Eigen::VectorXd pred(static_cast<int>(tmc.size()));
        for (std::size_t i = 0; i < tmc.size(); ++i) {
            pred[static_cast<int>(i)] =
                2.0 * units::k_boltzmann_ev / p[0] * std::hypot(tmc[i], p[1]);
        }
        return pred;
    };
    Eigen::VectorXd yv =
        Eigen::Map<const Eigen::VectorXd>(widths.data(), static_cast<int>(widths.size()));
    const fit::FitResult stage2 = fit::least_squares(fn, yv, specs, options);
    if (!stage2.converged) {
        throw NonConvergenceError("thermal series alpha/te0 fit did not converge");
    }
    out.alpha_ev_v = stage2.value("alpha");
    out.alpha_sigma = stage2.sigma_of("alpha");
    out.te0_k = stage2.value("te0");
    out.te0_sigma = stage2.sigma_of("te0");
    out.converged = true;
    return out;
}

DetuningLeverArms lever_arms(const SlopeSet& s, double alpha_p33_ev_v) {
    if (!(alpha_p33_ev_v > 0.0)) throw ValidationError("alpha_P3,3 must be > 0");
    if (s.m3 == s.m2) {
        throw SingularGeometryError("degenerate slopes: m3 - m2 vanishes");
    }
    if (s.m2 + s.m_pol == 0.0) {
        throw SingularGeometryError("degenerate slopes: m2 + m_pol vanishes");
    }
    if (s.m3 == 0.0) {
        throw SingularGeometryError("degenerate slopes: m3 vanishes");
    }
    if (s.m_pol == 0.0) {
        throw SingularGeometryError("degenerate slopes: m_pol vanishes");
    }
    DetuningLeverArms a;
    a.alpha_p3_eps =
        alpha_p33_ev_v * (s.m_pol / s.m3) * ((s.m3 - s.m2) / (s.m2 + s.m_pol));
    a.alpha_p2_eps = a.alpha_p3_eps / s.m_pol;
    a.alpha_p2_2 = (s.m3 * a.alpha_p2_eps + a.alpha_p3_eps) / (s.m3 - s.m2);
    a.alpha_s1_eps = a.alpha_p2_2 * s.dv_p2_s1 - alpha_p33_ev_v * s.dv_p3_s1;
    return a;
}

double bare_coupling_g0(double alpha_s1_eps_ev_v, double fr_hz, double z0r_ohm) {
    if (alpha_s1_eps_ev_v < 0.0 || fr_hz <= 0.0 || z0r_ohm <= 0.0) {
        throw ValidationError("bare coupling inputs must be positive");
    }
    return 0.5 * alpha_s1_eps_ev_v * fr_hz *
           std::sqrt(2.0 * z0r_ohm / units::klitzing_ohm);
}

double kappa_from_q(double fr_hz, std::span<const double> q_loaded) {
    if (q_loaded.empty()) throw ValidationError("need at least one Q value");
    double sum = 0.0;
    for (double q : q_loaded) {
        if (!(q > 0.0)) throw ValidationError("Q values must be > 0");
        sum += q;
    }
    return fr_hz / (sum / static_cast<double>(q_loaded.size()));
}

ValueWithSigma kappa_from_q(double fr_hz, std::span<const double> q_loaded,
                            std::span<const double> q_sigma) {
    ValueWithSigma v;
    v.value = kappa_from_q(fr_hz, q_loaded);
    if (q_sigma.size() != q_loaded.size()) {
        throw ValidationError("Q sigma list must match Q list");
    }
    const double n = static_cast<double>(q_loaded.size());
    double mean = 0.0;
    for (double q : q_loaded) mean += q;
    mean /= n;
    double var = 0.0;
    for (double s : q_sigma) var += s * s;
    const double sigma_mean = std::sqrt(var) / n;
    v.sigma = v.value * sigma_mean / mean;
    return v;
}

double power_budget(const PowerBudget& budget) {
    double total_db = 0.0;
    for (double a : budget.attenuations_db) {
        if (a < 0.0) throw ValidationError("attenuation entries must be >= 0 dB");
        total_db += a;
    }
    if (!(budget.z0g_ohm > 0.0)) throw ValidationError("z0g must be > 0");
    return units::dbm_to_watt(budget.generator_dbm - total_db);
}

double drive_amplitude(double alpha_eps_ev_v, double z0g_ohm, double p_in_w) {
    if (alpha_eps_ev_v < 0.0 || z0g_ohm <= 0.0 || p_in_w < 0.0) {
        throw ValidationError("drive amplitude inputs must be positive");
    }
    // sqrt(2 Z P) converts rms power to the peak voltage amplitude.
    return -alpha_eps_ev_v * std::sqrt(2.0 * z0g_ohm * p_in_w) * units::eV_to_hz;
}

double s1_drive_amplitude(double p3_eps_q_hz, double c_eps2_vhz, double c_eps3_vhz) {
    if (!(c_eps3_vhz > 0.0) || !(c_eps2_vhz > 0.0)) {
        throw ValidationError("gain-amplitude products must be > 0");
    }
    return -p3_eps_q_hz * (c_eps2_vhz / c_eps3_vhz);
}

double photon_number(double eps_r_hz, double kappa_hz) {
    if (!(kappa_hz > 0.0)) throw ValidationError("kappa must be > 0");
    const double r = eps_r_hz / kappa_hz;
    return 4.0 * r * r;
}

std::vector<CouplingTableRow> coupling_table(std::span<const CouplingTableInput> rows) {
    std::vector<CouplingTableRow> out;
    out.reserve(rows.size());
    for (const auto& in : rows) {
        const model::QubitTuning peak(0.0, in.tc_hz);
        const model::CouplingSet c = model::coupling_set(peak, in.g0_hz, in.eps_q_hz);
        CouplingTableRow row;
        row.label = in.label;
        row.tc_hz = in.tc_hz;
        row.g0_hz = in.g0_hz;
        row.eps_q_hz = in.eps_q_hz;
        row.delta_omega_hz = c.delta_omega_hz;
        row.g_dy_hz = c.g_dy_hz;
        row.ratio = in.eps_q_hz == 0.0 ? 0.0 : model::tunability_ratio(in.eps_q_hz, in.g0_hz);
        out.push_back(row);
    }
    return out;
}

std::string format_coupling_table(std::span<const CouplingTableRow> rows) {
    std::ostringstream os;
    os << std::left << std::setw(14) << "row" << std::right << std::setw(10)
       << "tc(GHz)" << std::setw(12) << "eq(MHz)" << std::setw(12) << "dw(kHz)"
       << std::setw(12) << "gdy(kHz)" << std::setw(10) << "|ratio|" << '\n';
    os << std::fixed;
    for (const auto& r : rows) {
        os << std::left << std::setw(14) << r.label << std::right
           << std::setprecision(2) << std::setw(10) << r.tc_hz / 1e9
           << std::setprecision(1) << std::setw(12) << r.eps_q_hz / 1e6
           << std::setprecision(2) << std::setw(12) << r.delta_omega_hz / 1e3
           << std::setw(12) << r.g_dy_hz / 1e3 << std::setprecision(1)
           << std::setw(10) << r.ratio << '\n';
    }
    return os.str();
}

DeviceParams resolve_device(DeviceParams d) {
    if (!(d.fr_hz > 0.0)) throw ValidationError("device fr must be > 0");
    if (d.kappa_hz <= 0.0) {
        if (d.q_loaded.empty()) {
            throw ValidationError("device needs kappa_hz or q_loaded");
        }
        d.kappa_hz = kappa_from_q(d.fr_hz, d.q_loaded);
    }
    if (d.g0_hz <= 0.0) {
        if (!(d.lever_arms.s1_eps > 0.0 && d.z0r_ohm > 0.0)) {
            throw ValidationError("device needs g0_hz or (s1_eps lever arm, z0r_ohm)");
        }
        d.g0_hz = bare_coupling_g0(d.lever_arms.s1_eps, d.fr_hz, d.z0r_ohm);
    }
    if (d.kappa_hz > 0.1 * d.fr_hz) {
        throw ValidationError("device kappa must be small compared to fr");
    }
    return d;
}

} // namespace dotcav::calib
