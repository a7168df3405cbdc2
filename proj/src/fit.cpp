#include "dotcav/fit.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>
#include <sstream>

#include "dotcav/errors.hpp"
#include "dotcav/model.hpp"
#include "dotcav/units.hpp"

namespace dotcav::fit {

namespace {

constexpr double kLambdaMax = 1e12;
constexpr double kDiffStep = 6e-6; // ~cbrt(machine eps), central differences

struct Transform {
    // Maps between external parameter values and internal optimizer
    // coordinates (log for positivity-constrained parameters).
    static double to_internal(const ParameterSpec& s, double p) {
        return s.log_scale ? std::log(p) : p;
    }
    static double to_external(const ParameterSpec& s, double x) {
        return s.log_scale ? std::exp(x) : x;
    }
};

struct Problem {
    const PredictionFn& model;
    const Eigen::VectorXd& y;
    const std::vector<ParameterSpec>& specs;
    std::vector<int> adjustable; // indices into specs

    Eigen::VectorXd full_params(const Eigen::VectorXd& x) const {
        Eigen::VectorXd p(specs.size());
        for (std::size_t i = 0; i < specs.size(); ++i) p[i] = specs[i].initial;
        for (std::size_t k = 0; k < adjustable.size(); ++k) {
            p[adjustable[k]] = Transform::to_external(specs[adjustable[k]], x[k]);
        }
        return p;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& x) const {
        return model(full_params(x)) - y;
    }

    void clamp(Eigen::VectorXd& x) const {
        for (std::size_t k = 0; k < adjustable.size(); ++k) {
            const ParameterSpec& s = specs[adjustable[k]];
            const double lo = s.log_scale
                                  ? (s.lower > 0.0 ? std::log(s.lower)
                                                   : -std::numeric_limits<double>::infinity())
                                  : s.lower;
            const double hi = s.log_scale
                                  ? (std::isfinite(s.upper) ? std::log(s.upper)
                                                            : std::numeric_limits<double>::infinity())
                                  : s.upper;
            x[k] = std::clamp(x[k], lo, hi);
        }
    }
};

Eigen::MatrixXd central_jacobian(const Problem& prob, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& r0) {
    Eigen::MatrixXd jac(r0.size(), x.size());
    Eigen::VectorXd xp = x;
    for (int k = 0; k < x.size(); ++k) {
        const double h = kDiffStep * (1.0 + std::abs(x[k]));
        xp[k] = x[k] + h;
        const Eigen::VectorXd rp = prob.residual(xp);
        xp[k] = x[k] - h;
        const Eigen::VectorXd rm = prob.residual(xp);
        xp[k] = x[k];
        jac.col(k) = (rp - rm) / (2.0 * h);
    }
    return jac;
}

struct RunOutcome {
    Eigen::VectorXd x;
    double cost = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::vector<double> accepted_costs;
    std::string note;
};

RunOutcome run_single(const Problem& prob, Eigen::VectorXd x, const FitOptions& opt) {
    RunOutcome out;
    prob.clamp(x);
    Eigen::VectorXd r = prob.residual(x);
    double cost = r.squaredNorm();
    double lambda = opt.lambda0;
    out.accepted_costs.push_back(cost);

    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        out.iterations = iter + 1;
        const Eigen::MatrixXd jac = central_jacobian(prob, x, r);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r;

        if (grad.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
            out.converged = true;
            break;
        }

        Eigen::VectorXd damping = jtj.diagonal();
        const double dmax = damping.maxCoeff();
        for (int k = 0; k < damping.size(); ++k) {
            damping[k] = std::max(damping[k], std::max(1e-30, 1e-14 * dmax));
        }

        bool accepted = false;
        while (lambda <= kLambdaMax) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * damping;
            Eigen::VectorXd step = a.ldlt().solve(-grad);
            Eigen::VectorXd xc = x + step;
            prob.clamp(xc);
            const Eigen::VectorXd rc = prob.residual(xc);
            const double cc = rc.squaredNorm();
            if (std::isfinite(cc) && cc < cost) {
                const double rel_drop = (cost - cc) / std::max(cost, 1e-300);
                x = xc;
                r = rc;
                cost = cc;
                out.accepted_costs.push_back(cost);
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (rel_drop < opt.cost_tol) out.converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // Damping exhausted without progress: flat or degenerate problem.
            out.note = "no descent direction found (damping exhausted)";
            break;
        }
        if (out.converged) break;
    }
    out.x = x;
    out.cost = cost;
    return out;
}

} // namespace

double FitResult::value(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return values[static_cast<int>(i)];
    }
    throw ValidationError("unknown fit parameter: " + std::string(name));
}

double FitResult::sigma_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return sigma[static_cast<int>(i)];
    }
    throw ValidationError("unknown fit parameter: " + std::string(name));
}

FitResult least_squares(const PredictionFn& model, const Eigen::VectorXd& y,
                        std::vector<ParameterSpec> specs, const FitOptions& options) {
    Problem prob{model, y, specs, {}};
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const ParameterSpec& s = specs[i];
        if (s.log_scale && !(s.initial > 0.0)) {
            throw ValidationError("log-scale parameter '" + s.name +
                                  "' requires a positive initial value");
        }
        if (!(s.initial >= s.lower && s.initial <= s.upper)) {
            throw ValidationError("initial value of '" + s.name + "' is outside its bounds");
        }
        if (s.role != ParamRole::frozen) prob.adjustable.push_back(static_cast<int>(i));
    }
    const int n_adj = static_cast<int>(prob.adjustable.size());
    if (n_adj == 0) throw ValidationError("no adjustable parameters");
    if (y.size() <= n_adj) {
        throw ValidationError("need more data points than free parameters");
    }

    Eigen::VectorXd x0(n_adj);
    for (int k = 0; k < n_adj; ++k) {
        x0[k] = Transform::to_internal(specs[prob.adjustable[k]],
                                       specs[prob.adjustable[k]].initial);
    }

    RunOutcome best = run_single(prob, x0, options);
    std::mt19937_64 rng(options.jitter_seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int start = 1; start < options.n_starts; ++start) {
        Eigen::VectorXd xj = x0;
        for (int k = 0; k < n_adj; ++k) {
            const ParameterSpec& s = specs[prob.adjustable[k]];
            if (s.log_scale) {
                xj[k] += 0.6931 * uni(rng); // factor in [1/2, 2]
            } else {
                xj[k] += 0.3 * uni(rng) * std::max(std::abs(x0[k]), 1e-3);
            }
        }
        RunOutcome cand = run_single(prob, xj, options);
        if (cand.cost < best.cost) best = std::move(cand);
    }

    FitResult res;
    res.names.reserve(specs.size());
    res.roles.reserve(specs.size());
    res.values.resize(static_cast<int>(specs.size()));
    res.sigma = Eigen::VectorXd::Zero(static_cast<int>(specs.size()));
    const Eigen::VectorXd full = prob.full_params(best.x);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        res.names.push_back(specs[i].name);
        res.roles.push_back(specs[i].role);
        res.values[static_cast<int>(i)] = full[static_cast<int>(i)];
    }
    res.residual_norm = std::sqrt(best.cost);
    res.n_iterations = best.iterations;
    res.converged = best.converged;
    res.diagnostic = best.note;
    res.accepted_costs = best.accepted_costs;

    // Covariance w.r.t. the original (untransformed) parameters at the optimum.
    const Eigen::VectorXd r_opt = model(full) - y;
    Eigen::MatrixXd j_orig(y.size(), n_adj);
    Eigen::VectorXd p = full;
    for (int k = 0; k < n_adj; ++k) {
        const int idx = prob.adjustable[k];
        const double h = kDiffStep * (1.0 + std::abs(p[idx]));
        const double saved = p[idx];
        p[idx] = saved + h;
        const Eigen::VectorXd rp = model(p) - y;
        p[idx] = saved - h;
        const Eigen::VectorXd rm = model(p) - y;
        p[idx] = saved;
        j_orig.col(k) = (rp - rm) / (2.0 * h);
    }
    // Identifiability is judged on the column-normalized Jacobian so that
    // parameter scale disparities do not masquerade as rank deficiency.
    Eigen::MatrixXd j_scaled = j_orig;
    bool dead_column = false;
    std::ostringstream dead_names;
    for (int k = 0; k < n_adj; ++k) {
        const double norm = j_scaled.col(k).norm();
        if (norm > 0.0) {
            j_scaled.col(k) /= norm;
        } else {
            dead_column = true;
            dead_names << ' ' << specs[prob.adjustable[k]].name;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_scaled(j_scaled, Eigen::ComputeThinV);
    const Eigen::VectorXd sv_scaled = svd_scaled.singularValues();
    if (dead_column ||
        sv_scaled[sv_scaled.size() - 1] < 1e-10 * sv_scaled[0]) {
        std::ostringstream msg;
        msg << "near-singular jacobian; unconstrained direction:";
        if (dead_column) {
            msg << dead_names.str() << " (no residual sensitivity)";
        } else {
            const Eigen::VectorXd null_dir =
                svd_scaled.matrixV().col(sv_scaled.size() - 1);
            for (int k = 0; k < n_adj; ++k) {
                if (std::abs(null_dir[k]) > 0.3) {
                    msg << ' ' << specs[prob.adjustable[k]].name << '=' << null_dir[k];
                }
            }
        }
        if (!res.diagnostic.empty()) res.diagnostic += "; ";
        res.diagnostic += msg.str();
        res.converged = false;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(j_orig,
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    const int dof = static_cast<int>(y.size()) - n_adj;
    const double s2 = dof > 0 ? best.cost / dof : 0.0;
    Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
    for (int k = 0; k < sv.size(); ++k) {
        if (sv[k] > 1e-15 * smax && sv[k] > 0.0) inv_sv[k] = 1.0 / (sv[k] * sv[k]);
    }
    res.covariance = s2 * svd.matrixV() * inv_sv.asDiagonal() * svd.matrixV().transpose();
    for (int k = 0; k < n_adj; ++k) {
        res.covariance_names.push_back(specs[prob.adjustable[k]].name);
        res.sigma[prob.adjustable[k]] = std::sqrt(std::max(res.covariance(k, k), 0.0));
    }
    return res;
}

namespace {

// Shared helper for the two channel line shapes.
inline double curvature_term(double eps0, double tc, double g0) {
    const double e = std::hypot(eps0, 2.0 * tc);
    return 2.0 * tc * tc * g0 / (e * e * e);
}

} // namespace

Eigen::VectorXd model_iq_s1(std::span<const double> eps0_hz, double c_eps2_vhz,
                            double beta2, double tc_hz, const IqFixedParams& fixed) {
    if (tc_hz <= 0.0) throw ValidationError("tc must be > 0");
    Eigen::VectorXd iq(static_cast<int>(eps0_hz.size()));
    for (std::size_t i = 0; i < eps0_hz.size(); ++i) {
        const double curv = curvature_term(eps0_hz[i], tc_hz, fixed.g0_hz);
        const double dw = 4.0 * fixed.g0_hz * curv;
        iq[static_cast<int>(i)] =
            c_eps2_vhz * (beta2 - curv) / std::hypot(dw, 0.5 * fixed.kappa_hz);
    }
    return iq;
}

Eigen::VectorXd model_iq_p3(std::span<const double> eps0_hz, double c_eps3_vhz,
                            double beta3, double tc_hz, double beta2,
                            const IqFixedParams& fixed) {
    if (tc_hz <= 0.0) throw ValidationError("tc must be > 0");
    Eigen::VectorXd iq(static_cast<int>(eps0_hz.size()));
    for (std::size_t i = 0; i < eps0_hz.size(); ++i) {
        const double curv = curvature_term(eps0_hz[i], tc_hz, fixed.g0_hz);
        const double dw = 4.0 * fixed.g0_hz * curv;
        iq[static_cast<int>(i)] = c_eps3_vhz * (beta3 + (1.0 - beta3 / beta2) * curv) /
                                  std::hypot(dw, 0.5 * fixed.kappa_hz);
    }
    return iq;
}

namespace {

double tail_level(const std::vector<double>& v) {
    // Mean of the outer 10% of samples on each side (at least one each).
    const std::size_t n = v.size();
    const std::size_t k = std::max<std::size_t>(1, n / 10);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += v[i] + v[n - 1 - i];
    return sum / (2.0 * k);
}

// Full width (Hz) of |iq - background| at half of its extremum, used as the
// tc initializer: width-at-half-contrast ~ 2 sqrt(3) tc for the 1/E^3 shape.
double half_contrast_width_hz(const LineCut& lc, double background) {
    const std::size_t n = lc.iq_volts.size();
    std::size_t ipk = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(lc.iq_volts[i] - background);
        if (d > best) {
            best = d;
            ipk = i;
        }
    }
    const double half = 0.5 * best;
    std::size_t lo = ipk, hi = ipk;
    while (lo > 0 && std::abs(lc.iq_volts[lo] - background) > half) --lo;
    while (hi + 1 < n && std::abs(lc.iq_volts[hi] - background) > half) ++hi;
    double w = std::abs(lc.eps0_hz[hi] - lc.eps0_hz[lo]);
    if (w <= 0.0) w = 0.25 * std::abs(lc.eps0_hz.back() - lc.eps0_hz.front());
    return w;
}

} // namespace

Fig3FitResult simultaneous_fit_fig3(const LineCut& s1_data, const LineCut& p3_data,
                                    const IqFixedParams& fixed,
                                    const FitOptions& options) {
    if (s1_data.iq_volts.empty() || p3_data.iq_volts.empty()) {
        throw ValidationError(
            "simultaneous fit requires both the S1 and the P3 data set; "
            "beta2 is not identifiable otherwise");
    }
    validate_linecut(s1_data);
    validate_linecut(p3_data);
    if (fixed.g0_hz <= 0.0 || fixed.kappa_hz <= 0.0) {
        throw ValidationError("fixed g0 and kappa must be positive");
    }

    const double bg_s1 = tail_level(s1_data.iq_volts);
    const double bg_p3 = tail_level(p3_data.iq_volts);
    const double tc0 = half_contrast_width_hz(p3_data, bg_p3) / (2.0 * std::sqrt(3.0));
    const double kappa = fixed.kappa_hz;
    double dip_s1 = bg_s1 - *std::min_element(s1_data.iq_volts.begin(), s1_data.iq_volts.end());
    double peak_p3 = *std::max_element(p3_data.iq_volts.begin(), p3_data.iq_volts.end()) - bg_p3;
    dip_s1 = std::max(dip_s1, 1e-12);
    peak_p3 = std::max(peak_p3, 1e-12);

    const double c_eps2_0 = dip_s1 * kappa * tc0 / fixed.g0_hz;
    const double beta2_0 = std::clamp(bg_s1 * kappa / (2.0 * c_eps2_0), 1e-6, 0.5);
    const double c_eps3_0 = peak_p3 * kappa * tc0 / (0.8 * fixed.g0_hz);
    const double beta3_0 = std::clamp(bg_p3 * kappa / (2.0 * c_eps3_0), 1e-7, 0.5 * beta2_0);

    std::vector<ParameterSpec> specs = {
        {"c_eps2", c_eps2_0, 0.0, std::numeric_limits<double>::infinity(),
         ParamRole::free_param, true},
        {"c_eps3", c_eps3_0, 0.0, std::numeric_limits<double>::infinity(),
         ParamRole::free_param, true},
        {"beta2", beta2_0, 0.0, 1.0, ParamRole::shared, true},
        {"beta3", beta3_0, 0.0, 1.0, ParamRole::free_param, true},
        {"tc", tc0, 0.0, std::numeric_limits<double>::infinity(), ParamRole::shared, true},
    };

    const int n1 = static_cast<int>(s1_data.iq_volts.size());
    const int n2 = static_cast<int>(p3_data.iq_volts.size());
    Eigen::VectorXd y(n1 + n2);
    for (int i = 0; i < n1; ++i) y[i] = s1_data.iq_volts[i];
    for (int i = 0; i < n2; ++i) y[n1 + i] = p3_data.iq_volts[i];

    const auto& s1x = s1_data.eps0_hz;
    const auto& p3x = p3_data.eps0_hz;
    PredictionFn joint = [&s1x, &p3x, fixed, n1, n2](const Eigen::VectorXd& p) {
        Eigen::VectorXd pred(n1 + n2);
        pred.head(n1) = model_iq_s1(s1x, p[0], p[2], p[4], fixed);
        pred.tail(n2) = model_iq_p3(p3x, p[1], p[3], p[4], p[2], fixed);
        return pred;
    };

    Fig3FitResult out;
    out.fit = least_squares(joint, y, specs, options);

    // Asymptotic background IQ(eps0 -> inf) = 2 c eps beta / kappa, computed
    // from the fitted parameters and subtracted after the fit.
    out.s1_background_v = 2.0 * out.fit.value("c_eps2") * out.fit.value("beta2") / kappa;
    out.p3_background_v = 2.0 * out.fit.value("c_eps3") * out.fit.value("beta3") / kappa;
    out.s1_subtracted.resize(s1_data.iq_volts.size());
    out.p3_subtracted.resize(p3_data.iq_volts.size());
    for (std::size_t i = 0; i < s1_data.iq_volts.size(); ++i) {
        out.s1_subtracted[i] = s1_data.iq_volts[i] - out.s1_background_v;
    }
    for (std::size_t i = 0; i < p3_data.iq_volts.size(); ++i) {
        out.p3_subtracted[i] = p3_data.iq_volts[i] - out.p3_background_v;
    }
    return out;
}

std::vector<FitResult> per_peak_fit(std::span<const LineCut> peaks,
                                    const PerPeakFrozen& frozen,
                                    const FitOptions& options, int threads) {
    if (peaks.empty()) throw ValidationError("no peaks supplied");
    if (!(frozen.beta3 > 0.0 && frozen.beta3 < frozen.beta2 && frozen.beta2 < 1.0)) {
        throw ValidationError("frozen cross-couplings must satisfy 0 < beta3 < beta2 < 1");
    }
    if (frozen.g0_hz <= 0.0 || frozen.kappa_hz <= 0.0) {
        throw ValidationError("frozen g0 and kappa must be positive");
    }

    const IqFixedParams fixed{frozen.g0_hz, frozen.kappa_hz};
    auto fit_one = [&](const LineCut& lc) {
        validate_linecut(lc);
        const double bg = tail_level(lc.iq_volts);
        const double tc0 = half_contrast_width_hz(lc, bg) / (2.0 * std::sqrt(3.0));
        double peak = *std::max_element(lc.iq_volts.begin(), lc.iq_volts.end()) - bg;
        peak = std::max(peak, 1e-12);
        const double xtalk = 1.0 - frozen.beta3 / frozen.beta2;
        const double c_eps3_0 = peak * frozen.kappa_hz * tc0 / (xtalk * frozen.g0_hz);

        std::vector<ParameterSpec> specs = {
            {"c_eps3", c_eps3_0, 0.0, std::numeric_limits<double>::infinity(),
             ParamRole::free_param, true},
            {"tc", tc0, 0.0, std::numeric_limits<double>::infinity(),
             ParamRole::free_param, true},
            {"beta2", frozen.beta2, 0.0, 1.0, ParamRole::frozen, false},
            {"beta3", frozen.beta3, 0.0, 1.0, ParamRole::frozen, false},
        };
        const auto& x = lc.eps0_hz;
        PredictionFn fn = [&x, fixed](const Eigen::VectorXd& p) {
            return model_iq_p3(x, p[0], p[3], p[1], p[2], fixed);
        };
        Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
            lc.iq_volts.data(), static_cast<int>(lc.iq_volts.size()));
        return least_squares(fn, y, specs, options);
    };

    std::vector<FitResult> results(peaks.size());
    if (threads <= 1 || peaks.size() == 1) {
        for (std::size_t i = 0; i < peaks.size(); ++i) results[i] = fit_one(peaks[i]);
    } else {
        std::vector<std::future<FitResult>> futs;
        futs.reserve(peaks.size());
        for (std::size_t i = 0; i < peaks.size(); ++i) {
            futs.push_back(std::async(std::launch::async, fit_one, std::cref(peaks[i])));
        }
        for (std::size_t i = 0; i < peaks.size(); ++i) results[i] = futs[i].get();
    }
    return results;
}

LorentzianFit lorentzian_peak_fit(const LineCut& data, const FitOptions& options) {
    validate_linecut(data);
    const std::size_t n = data.iq_volts.size();
    if (n < 7) throw ValidationError("lorentzian fit needs at least 7 points");

    const double offset0 = tail_level(data.iq_volts);
    std::size_t ipk = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(data.iq_volts[i] - offset0);
        if (d > best) {
            best = d;
            ipk = i;
        }
    }
    const double amp0 = data.iq_volts[ipk] - offset0; // signed, dips negative
    const double center0 = data.eps0_uev[ipk];
    const double half = 0.5 * std::abs(amp0);
    std::size_t lo = ipk, hi = ipk;
    while (lo > 0 && std::abs(data.iq_volts[lo] - offset0) > half) --lo;
    while (hi + 1 < n && std::abs(data.iq_volts[hi] - offset0) > half) ++hi;
    double hwhm0 = 0.5 * std::abs(data.eps0_uev[hi] - data.eps0_uev[lo]);
    const double span = std::abs(data.eps0_uev.back() - data.eps0_uev.front());
    if (!(hwhm0 > 0.0)) hwhm0 = span / 6.0;

    // The peak must sit inside the scanned window, be wider than the sample
    // spacing, and narrower than the window: anything else is degenerate with
    // the offset or invisible between samples.
    const double xmin = std::min(data.eps0_uev.front(), data.eps0_uev.back());
    const double xmax = std::max(data.eps0_uev.front(), data.eps0_uev.back());
    const double spacing = span / static_cast<double>(n - 1);
    std::vector<ParameterSpec> specs = {
        {"amplitude", amp0},
        {"center", std::clamp(center0, xmin, xmax), xmin, xmax},
        {"hwhm", std::clamp(hwhm0, spacing, span), spacing, span,
         ParamRole::free_param, true},
        {"offset", offset0},
    };
    const auto& x = data.eps0_uev;
    PredictionFn fn = [&x](const Eigen::VectorXd& p) {
        Eigen::VectorXd pred(static_cast<int>(x.size()));
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double u = (x[i] - p[1]) / p[2];
            pred[static_cast<int>(i)] = p[3] + p[0] / (1.0 + u * u);
        }
        return pred;
    };
    Eigen::VectorXd y =
        Eigen::Map<const Eigen::VectorXd>(data.iq_volts.data(), static_cast<int>(n));
    const FitResult res = least_squares(fn, y, specs, options);

    LorentzianFit out;
    out.amplitude_v = res.value("amplitude");
    out.center_uev = res.value("center");
    out.hwhm_uev = res.value("hwhm");
    out.offset_v = res.value("offset");
    out.sigma = Eigen::Vector4d(res.sigma_of("amplitude"), res.sigma_of("center"),
                                res.sigma_of("hwhm"), res.sigma_of("offset"));
    out.converged = res.converged;
    return out;
}

TrendExponent trend_exponent(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("trend inputs must match in length");
    if (x.size() < 3) throw ValidationError("trend regression needs at least 3 points");
    const int n = static_cast<int>(x.size());
    double sx = 0.0, sy = 0.0;
    std::vector<double> lx(x.size()), ly(y.size());
    for (int i = 0; i < n; ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) {
            throw ValidationError("trend regression requires positive values");
        }
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx <= 0.0) throw ValidationError("trend regression needs distinct x values");
    TrendExponent t;
    t.exponent = sxy / sxx;
    double ssr = 0.0;
    for (int i = 0; i < n; ++i) {
        const double fit = my + t.exponent * (lx[i] - mx);
        ssr += (ly[i] - fit) * (ly[i] - fit);
    }
    t.sigma = n > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
    return t;
}

} // namespace dotcav::fit
