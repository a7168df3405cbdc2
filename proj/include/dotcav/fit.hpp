#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dotcav/types.hpp"

// Damped nonlinear least squares with free / shared / frozen parameters,
// plus the channel-specific IQ fit models and the composite fitting
// procedures (simultaneous S1+P3 fit, per-peak fits with frozen
// cross-couplings, Lorentzian amplitude extraction, trend regression).
namespace dotcav::fit {

enum class ParamRole { free_param, shared, frozen };

struct ParameterSpec {
    std::string name;
    double initial = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    ParamRole role = ParamRole::free_param;
    // Optimize log(p) instead of p; requires 0 < initial and lower >= 0.
    bool log_scale = false;
};

struct FitResult {
    std::vector<std::string> names;             // all parameters, frozen included
    std::vector<ParamRole> roles;
    Eigen::VectorXd values;                     // best fit (frozen keep their value)
    Eigen::VectorXd sigma;                      // 1-sigma; zero for frozen
    Eigen::MatrixXd covariance;                 // adjustable parameters only
    std::vector<std::string> covariance_names;  // row/col labels of covariance
    double residual_norm = 0.0;                 // sqrt(sum of squared residuals)
    int n_iterations = 0;
    bool converged = false;
    std::string diagnostic;                     // identifiability notes etc.
    std::vector<double> accepted_costs;         // cost after each accepted step

    double value(std::string_view name) const;
    double sigma_of(std::string_view name) const;
};

struct FitOptions {
    int max_iterations = 200;
    double cost_tol = 1e-10;  // relative cost change on an accepted step
    double grad_tol = 1e-12;  // infinity norm of the gradient
    double lambda0 = 1e-3;    // initial damping
    int n_starts = 5;         // first start is the given initial, rest jittered
    unsigned jitter_seed = 20240601u;
};

// Predictions for the (implicit) sample grid, given the full parameter
// vector in declaration order (frozen entries included at their values).
using PredictionFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Minimizes sum((model(p) - y)^2) over the non-frozen parameters with a
// multiplicatively damped Gauss-Newton iteration (x10 on reject, /10 on
// accept), central-difference Jacobians, and log-transformed coordinates
// for positivity-constrained parameters. The covariance is the
// residual-variance-scaled inverse of J^T J at the optimum. A run that
// exhausts max_iterations is returned with converged = false, never
// silently as converged.
FitResult least_squares(const PredictionFn& model, const Eigen::VectorXd& y,
                        std::vector<ParameterSpec> specs,
                        const FitOptions& options = {});

struct IqFixedParams {
    double g0_hz = 0.0;
    double kappa_hz = 0.0;
};

// Ground-state IQ line shapes in frequency units. c_eps2 / c_eps3 are the
// gain-amplitude products in V*Hz; only the products are identifiable.
Eigen::VectorXd model_iq_s1(std::span<const double> eps0_hz, double c_eps2_vhz,
                            double beta2, double tc_hz, const IqFixedParams& fixed);
Eigen::VectorXd model_iq_p3(std::span<const double> eps0_hz, double c_eps3_vhz,
                            double beta3, double tc_hz, double beta2,
                            const IqFixedParams& fixed);

struct Fig3FitResult {
    FitResult fit; // c_eps2, c_eps3, beta2, beta3, tc
    double s1_background_v = 0.0; // asymptotic 2 c eps2 beta2 / kappa
    double p3_background_v = 0.0;
    std::vector<double> s1_subtracted; // data minus fitted background
    std::vector<double> p3_subtracted;
};

// Simultaneous fit of an S1 line cut and a P3 line cut to the two channel
// models, sharing beta2 and tc between the residual blocks. Backgrounds are
// computed and subtracted after the fit; both raw and subtracted series are
// returned. Throws ValidationError if either data set is missing (beta2 is
// not identifiable from P3 data alone).
Fig3FitResult simultaneous_fit_fig3(const LineCut& s1_data, const LineCut& p3_data,
                                    const IqFixedParams& fixed,
                                    const FitOptions& options = {});

struct PerPeakFrozen {
    double beta2 = 1.27e-2; // from the simultaneous Fig. 3 fit
    double beta3 = 0.0;
    double g0_hz = 0.0;
    double kappa_hz = 0.0;
};

// Independent (c_eps3, tc) fits of P3 transmission peaks with beta2 and
// beta3 frozen across all peaks.
std::vector<FitResult> per_peak_fit(std::span<const LineCut> peaks,
                                    const PerPeakFrozen& frozen,
                                    const FitOptions& options = {},
                                    int threads = 1);

struct LorentzianFit {
    double amplitude_v = 0.0; // signed; dips negative
    double center_uev = 0.0;
    double hwhm_uev = 0.0;
    double offset_v = 0.0;
    Eigen::Vector4d sigma = Eigen::Vector4d::Zero();
    bool converged = false;
};

// offset + amplitude / (1 + ((x - center)/hwhm)^2), model-agnostic peak
// height extraction. Requires at least 7 samples.
LorentzianFit lorentzian_peak_fit(const LineCut& data, const FitOptions& options = {});

struct TrendExponent {
    double exponent = 0.0;
    double sigma = 0.0;
};

// Slope of log y against log x by linear regression; inputs must be > 0.
TrendExponent trend_exponent(std::span<const double> x, std::span<const double> y);

} // namespace dotcav::fit
