#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dotcav/fit.hpp"
#include "dotcav/model.hpp"
#include "dotcav/oracle.hpp"
#include "dotcav/types.hpp"

// Synthetic data generation (line cuts, stability diagrams, thermal series),
// the 1/sqrt(<n>) noise model, dc-offset handling, and the file formats:
// versioned CSV for line cuts / diagrams / trajectories, JSON for device and
// fit artifacts. Serialization is lossless at 17 significant digits.
namespace dotcav::io {

struct NoiseModel {
    double sigma0_v = 0.0; // reference noise at <n> = 1
    unsigned long long seed = 0;
};

// Forward model plus additive Gaussian noise of standard deviation
// sigma0 / sqrt(<n>) plus a dc offset. Deterministic under a fixed seed.
LineCut generate_linecut(const DeviceParams& device, double tc_hz,
                         const model::DriveSettings& settings,
                         std::span<const double> eps0_uev, double gain_v,
                         const NoiseModel& noise, double dc_offset_v);

struct Diagram {
    std::vector<double> vp2_volts;
    std::vector<double> vp3_volts;
    std::vector<std::vector<double>> iq_volts; // [vp2 index][vp3 index]
    double anchor_vp2_v = 0.0;
    double anchor_vp3_v = 0.0;
};

// Detuning map eps0(V_P2, V_P3) = a_P2,eps (V_P2 - V_P2^0) - a_P3,eps
// (V_P3 - V_P3^0), evaluated through the line-cut model per pixel; shows a
// single polarization line along eps0 = 0.
Diagram generate_diagram(const DeviceParams& device, double tc_hz,
                         const model::DriveSettings& settings,
                         std::span<const double> vp2_volts,
                         std::span<const double> vp3_volts, double anchor_vp2_v,
                         double anchor_vp3_v, double gain_v, int threads = 1);

enum class OffsetMethod { given, median_of_tails };

// Removes a dc offset and records it in the metadata. The tails method uses
// the median of the outer 10% of samples on each side, i.e. the flat level
// far from the transition.
LineCut subtract_dc_offset(const LineCut& lc, OffsetMethod method,
                           double given_offset_v = 0.0);

// CSV, "# v1" versioned, header eps0_ueV,iq_volts. Metadata rides in
// "# key=value" comment lines.
void write_linecut(const std::filesystem::path& path, const LineCut& lc);
LineCut read_linecut(const std::filesystem::path& path);

// Row-major CSV (one row per V_P2 sample) with a JSON axis sidecar at
// <path>.axes.json.
void write_diagram(const std::filesystem::path& path, const Diagram& d);
Diagram read_diagram(const std::filesystem::path& path);

void write_device(const std::filesystem::path& path, const DeviceParams& d);
DeviceParams read_device(const std::filesystem::path& path);

void write_thermal_scan(const std::filesystem::path& path, const ThermalScan& scan);
ThermalScan read_thermal_scan(const std::filesystem::path& path);

// Fit report with parameter roles, covariance, residual norm and optional
// background levels.
void write_fit_report(const std::filesystem::path& path, const fit::FitResult& fr,
                      const std::vector<std::pair<std::string, double>>& backgrounds = {});

// Oracle trajectory dump: t, re_a, im_a, n_expect, trace_err.
void write_trajectory(const std::filesystem::path& path,
                      std::span<const oracle::TrajectoryPoint> samples);

void write_spectrum(const std::filesystem::path& path, const model::Spectrum& s);

} // namespace dotcav::io
