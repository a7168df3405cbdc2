#include "dotcav/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dotcav/calibration.hpp"
#include "dotcav/errors.hpp"
#include "dotcav/units.hpp"

namespace dotcav::io {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::string fmt17(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x,
                                   std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view tok, const std::string& context) {
    double x = 0.0;
    const char* begin = tok.data();
    const char* end = tok.data() + tok.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    const auto res = std::from_chars(begin, end, x);
    if (res.ec != std::errc{}) {
        throw ParseError("cannot parse number '" + std::string(tok) + "' in " + context);
    }
    return x;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary); // LF line endings everywhere
    if (!os) throw ValidationError("cannot open for writing: " + path.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open for reading: " + path.string());
    return is;
}

struct CsvHeader {
    std::vector<std::pair<std::string, std::string>> meta;
    std::string header_line;
};

// Reads "# v1" plus "# key=value" comment lines, then the column header.
CsvHeader read_csv_preamble(std::istream& is, const std::string& context) {
    CsvHeader h;
    std::string line;
    bool version_seen = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            const std::size_t start = body.find_first_not_of(' ');
            body = start == std::string::npos ? "" : body.substr(start);
            if (!version_seen) {
                if (body != "v1") {
                    throw SchemaVersionError("expected '# v1' as the first line of " +
                                             context + ", got '" + line + "'");
                }
                version_seen = true;
                continue;
            }
            const std::size_t eq = body.find('=');
            if (eq != std::string::npos) {
                h.meta.emplace_back(body.substr(0, eq), body.substr(eq + 1));
            }
            continue;
        }
        if (!version_seen) {
            throw SchemaVersionError("missing '# v1' version line in " + context);
        }
        h.header_line = line;
        return h;
    }
    throw ParseError("missing column header in " + context);
}

double photon_count_for_noise(const DeviceParams& device,
                              const model::DriveSettings& settings) {
    const model::EffectiveDrive d = model::resolve_drive(settings);
    if (d.eps_r_hz <= 0.0) return 1.0; // undriven cavity: reference noise level
    return calib::photon_number(d.eps_r_hz, device.kappa_hz);
}

} // namespace

LineCut generate_linecut(const DeviceParams& device, double tc_hz,
                         const model::DriveSettings& settings,
                         std::span<const double> eps0_uev, double gain_v,
                         const NoiseModel& noise, double dc_offset_v) {
    if (noise.sigma0_v < 0.0) throw ValidationError("sigma0 must be >= 0");
    LineCut lc;
    lc.eps0_uev.assign(eps0_uev.begin(), eps0_uev.end());
    lc.eps0_hz.resize(eps0_uev.size());
    for (std::size_t i = 0; i < eps0_uev.size(); ++i) {
        lc.eps0_hz[i] = eps0_uev[i] * units::ueV_to_hz;
    }
    lc.iq_volts = model::iq_linecut(device, lc.eps0_hz, tc_hz, settings, gain_v);

    if (noise.sigma0_v > 0.0) {
        const double n_avg = photon_count_for_noise(device, settings);
        const double sigma = noise.sigma0_v / std::sqrt(std::max(n_avg, 1e-300));
        std::mt19937_64 rng(noise.seed);
        std::normal_distribution<double> gauss(0.0, sigma);
        for (double& v : lc.iq_volts) v += gauss(rng);
    }
    for (double& v : lc.iq_volts) v += dc_offset_v;

    lc.meta.channel = settings.channel() == model::DriveChannel::s1 ? "S1" : "P3";
    lc.meta.gain_v = gain_v;
    lc.meta.seed = noise.seed;
    lc.meta.dc_offset_v = dc_offset_v;
    validate_linecut(lc);
    return lc;
}

Diagram generate_diagram(const DeviceParams& device, double tc_hz,
                         const model::DriveSettings& settings,
                         std::span<const double> vp2_volts,
                         std::span<const double> vp3_volts, double anchor_vp2_v,
                         double anchor_vp3_v, double gain_v, int threads) {
    if (vp2_volts.empty() || vp3_volts.empty()) {
        throw ValidationError("diagram grids must be nonempty");
    }
    const double a2 = device.lever_arms.p2_eps * units::eV_to_hz; // Hz per volt
    const double a3 = device.lever_arms.p3_eps * units::eV_to_hz;

    Diagram d;
    d.vp2_volts.assign(vp2_volts.begin(), vp2_volts.end());
    d.vp3_volts.assign(vp3_volts.begin(), vp3_volts.end());
    d.anchor_vp2_v = anchor_vp2_v;
    d.anchor_vp3_v = anchor_vp3_v;
    d.iq_volts.assign(vp2_volts.size(), std::vector<double>(vp3_volts.size()));

    auto fill_row = [&](std::size_t i) {
        std::vector<double> eps0_hz(vp3_volts.size());
        for (std::size_t j = 0; j < vp3_volts.size(); ++j) {
            eps0_hz[j] = a2 * (vp2_volts[i] - anchor_vp2_v) -
                         a3 * (vp3_volts[j] - anchor_vp3_v);
        }
        if (a2 == 0.0 && a3 == 0.0) {
            // Degenerate lever arms: eps0 = 0 everywhere, uniform background.
            const double iq = model::iq_linecut(device, std::vector<double>{0.0},
                                                tc_hz, settings, gain_v)[0];
            std::fill(d.iq_volts[i].begin(), d.iq_volts[i].end(), iq);
            return;
        }
        // The detuning row may be non-monotone in general; evaluate pointwise.
        for (std::size_t j = 0; j < vp3_volts.size(); ++j) {
            d.iq_volts[i][j] = model::iq_linecut(
                device, std::span<const double>(&eps0_hz[j], 1), tc_hz, settings,
                gain_v)[0];
        }
    };

    if (threads <= 1) {
        for (std::size_t i = 0; i < vp2_volts.size(); ++i) fill_row(i);
    } else {
        std::vector<std::future<void>> futs;
        std::atomic<std::size_t> next{0};
        const int n_workers = std::min<int>(threads, static_cast<int>(vp2_volts.size()));
        for (int w = 0; w < n_workers; ++w) {
            futs.push_back(std::async(std::launch::async, [&] {
                for (std::size_t i = next.fetch_add(1); i < vp2_volts.size();
                     i = next.fetch_add(1)) {
                    fill_row(i);
                }
            }));
        }
        for (auto& f : futs) f.get();
    }
    return d;
}

LineCut subtract_dc_offset(const LineCut& lc, OffsetMethod method,
                           double given_offset_v) {
    validate_linecut(lc);
    double offset = given_offset_v;
    if (method == OffsetMethod::median_of_tails) {
        const std::size_t n = lc.iq_volts.size();
        const std::size_t k = std::max<std::size_t>(1, n / 10);
        std::vector<double> tails;
        tails.reserve(2 * k);
        for (std::size_t i = 0; i < k; ++i) {
            tails.push_back(lc.iq_volts[i]);
            tails.push_back(lc.iq_volts[n - 1 - i]);
        }
        std::nth_element(tails.begin(), tails.begin() + tails.size() / 2, tails.end());
        offset = tails[tails.size() / 2];
    }
    LineCut out = lc;
    for (double& v : out.iq_volts) v -= offset;
    out.meta.dc_offset_v = lc.meta.dc_offset_v - offset;
    return out;
}

void write_linecut(const std::filesystem::path& path, const LineCut& lc) {
    validate_linecut(lc);
    std::ofstream os = open_out(path);
    os << "# v1\n";
    os << "# channel=" << lc.meta.channel << '\n';
    os << "# device=" << lc.meta.device_ref << '\n';
    os << "# gain_v=" << fmt17(lc.meta.gain_v) << '\n';
    os << "# seed=" << lc.meta.seed << '\n';
    os << "# dc_offset_v=" << fmt17(lc.meta.dc_offset_v) << '\n';
    os << "eps0_ueV,iq_volts\n";
    for (std::size_t i = 0; i < lc.eps0_uev.size(); ++i) {
        os << fmt17(lc.eps0_uev[i]) << ',' << fmt17(lc.iq_volts[i]) << '\n';
    }
}

LineCut read_linecut(const std::filesystem::path& path) {
    std::ifstream is = open_in(path);
    const CsvHeader h = read_csv_preamble(is, path.string());
    if (h.header_line != "eps0_ueV,iq_volts") {
        const std::size_t comma = h.header_line.find(',');
        const std::string first = h.header_line.substr(0, comma);
        const std::string second =
            comma == std::string::npos ? "" : h.header_line.substr(comma + 1);
        if (first != "eps0_ueV") {
            throw ParseError("bad line-cut header: expected column 'eps0_ueV', got '" +
                             first + "'");
        }
        throw ParseError("bad line-cut header: expected column 'iq_volts', got '" +
                         second + "'");
    }
    LineCut lc;
    for (const auto& [key, value] : h.meta) {
        if (key == "channel") lc.meta.channel = value;
        else if (key == "device") lc.meta.device_ref = value;
        else if (key == "gain_v") lc.meta.gain_v = parse_double(value, "gain_v");
        else if (key == "seed") lc.meta.seed = std::stoull(value);
        else if (key == "dc_offset_v") lc.meta.dc_offset_v = parse_double(value, "dc_offset_v");
    }
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError("malformed row '" + line + "' in " + path.string());
        }
        lc.eps0_uev.push_back(parse_double(line.substr(0, comma), "eps0_ueV"));
        lc.iq_volts.push_back(parse_double(line.substr(comma + 1), "iq_volts"));
    }
    lc.eps0_hz.resize(lc.eps0_uev.size());
    for (std::size_t i = 0; i < lc.eps0_uev.size(); ++i) {
        lc.eps0_hz[i] = lc.eps0_uev[i] * units::ueV_to_hz;
    }
    validate_linecut(lc);
    return lc;
}

void write_diagram(const std::filesystem::path& path, const Diagram& d) {
    std::ofstream os = open_out(path);
    os << "# v1\n";
    for (const auto& row : d.iq_volts) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) os << ',';
            os << fmt17(row[j]);
        }
        os << '\n';
    }
    json axes;
    axes["format_version"] = kFormatVersion;
    axes["vp2_volts"] = d.vp2_volts;
    axes["vp3_volts"] = d.vp3_volts;
    axes["anchor_vp2_v"] = d.anchor_vp2_v;
    axes["anchor_vp3_v"] = d.anchor_vp3_v;
    std::filesystem::path sidecar = path;
    sidecar += ".axes.json";
    open_out(sidecar) << axes.dump(2) << '\n';
}

Diagram read_diagram(const std::filesystem::path& path) {
    std::ifstream is = open_in(path);
    std::string line;
    if (!std::getline(is, line) || (line != "# v1" && line != "# v1\r")) {
        throw SchemaVersionError("expected '# v1' in " + path.string());
    }
    Diagram d;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t comma = line.find(',', pos);
            const std::string tok =
                line.substr(pos, comma == std::string::npos ? std::string::npos
                                                            : comma - pos);
            row.push_back(parse_double(tok, "diagram cell"));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        d.iq_volts.push_back(std::move(row));
    }
    std::filesystem::path sidecar = path;
    sidecar += ".axes.json";
    json axes = json::parse(open_in(sidecar));
    if (axes.value("format_version", 0) != kFormatVersion) {
        throw SchemaVersionError("unsupported axes format_version in " + sidecar.string());
    }
    d.vp2_volts = axes.at("vp2_volts").get<std::vector<double>>();
    d.vp3_volts = axes.at("vp3_volts").get<std::vector<double>>();
    d.anchor_vp2_v = axes.value("anchor_vp2_v", 0.0);
    d.anchor_vp3_v = axes.value("anchor_vp3_v", 0.0);
    if (d.iq_volts.size() != d.vp2_volts.size()) {
        throw ParseError("diagram rows do not match the vp2 axis in " + path.string());
    }
    for (const auto& row : d.iq_volts) {
        if (row.size() != d.vp3_volts.size()) {
            throw ParseError("diagram columns do not match the vp3 axis in " +
                             path.string());
        }
    }
    return d;
}

void write_device(const std::filesystem::path& path, const DeviceParams& d) {
    json j;
    j["format_version"] = kFormatVersion;
    j["lever_arms_eV_per_V"] = {
        {"p2_eps", d.lever_arms.p2_eps}, {"p3_eps", d.lever_arms.p3_eps},
        {"s1_eps", d.lever_arms.s1_eps}, {"p3_3", d.lever_arms.p3_3},
        {"p2_2", d.lever_arms.p2_2},
    };
    j["fr_hz"] = d.fr_hz;
    j["z0r_ohm"] = d.z0r_ohm;
    j["z0g_ohm"] = d.z0g_ohm;
    if (d.kappa_hz > 0.0) j["kappa_hz"] = d.kappa_hz;
    if (!d.q_loaded.empty()) j["q_loaded"] = d.q_loaded;
    if (d.g0_hz > 0.0) j["g0_hz"] = d.g0_hz;
    j["attenuations_db"] = d.attenuations_db;
    j["generator_dbm"] = d.generator_dbm;
    open_out(path) << j.dump(2) << '\n';
}

DeviceParams read_device(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(open_in(path));
    } catch (const json::exception& e) {
        throw ParseError("cannot parse device file " + path.string() + ": " + e.what());
    }
    if (j.value("format_version", 0) != kFormatVersion) {
        throw SchemaVersionError("unsupported device format_version in " + path.string());
    }
    DeviceParams d;
    if (j.contains("lever_arms_eV_per_V")) {
        const json& la = j["lever_arms_eV_per_V"];
        d.lever_arms.p2_eps = la.value("p2_eps", 0.0);
        d.lever_arms.p3_eps = la.value("p3_eps", 0.0);
        d.lever_arms.s1_eps = la.value("s1_eps", 0.0);
        d.lever_arms.p3_3 = la.value("p3_3", 0.0);
        d.lever_arms.p2_2 = la.value("p2_2", 0.0);
    }
    d.fr_hz = j.value("fr_hz", 0.0);
    d.z0r_ohm = j.value("z0r_ohm", 0.0);
    d.z0g_ohm = j.value("z0g_ohm", 0.0);
    d.kappa_hz = j.value("kappa_hz", 0.0);
    if (j.contains("q_loaded")) d.q_loaded = j["q_loaded"].get<std::vector<double>>();
    d.g0_hz = j.value("g0_hz", 0.0);
    if (j.contains("attenuations_db")) {
        d.attenuations_db = j["attenuations_db"].get<std::vector<double>>();
    }
    d.generator_dbm = j.value("generator_dbm", 0.0);
    return d;
}

void write_thermal_scan(const std::filesystem::path& path, const ThermalScan& scan) {
    if (scan.vp3_volts.size() != scan.iq_volts.size()) {
        throw ValidationError("thermal scan arrays must have equal length");
    }
    std::ofstream os = open_out(path);
    os << "# v1\n";
    os << "# t_mc_k=" << fmt17(scan.t_mc_k) << '\n';
    os << "vp3_volts,iq_volts\n";
    for (std::size_t i = 0; i < scan.vp3_volts.size(); ++i) {
        os << fmt17(scan.vp3_volts[i]) << ',' << fmt17(scan.iq_volts[i]) << '\n';
    }
}

ThermalScan read_thermal_scan(const std::filesystem::path& path) {
    std::ifstream is = open_in(path);
    const CsvHeader h = read_csv_preamble(is, path.string());
    if (h.header_line != "vp3_volts,iq_volts") {
        throw ParseError("bad thermal-scan header in " + path.string() +
                         ": expected 'vp3_volts,iq_volts'");
    }
    ThermalScan scan;
    for (const auto& [key, value] : h.meta) {
        if (key == "t_mc_k") scan.t_mc_k = parse_double(value, "t_mc_k");
    }
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError("malformed row '" + line + "' in " + path.string());
        }
        scan.vp3_volts.push_back(parse_double(line.substr(0, comma), "vp3_volts"));
        scan.iq_volts.push_back(parse_double(line.substr(comma + 1), "iq_volts"));
    }
    return scan;
}

void write_fit_report(const std::filesystem::path& path, const fit::FitResult& fr,
                      const std::vector<std::pair<std::string, double>>& backgrounds) {
    json j;
    j["format_version"] = kFormatVersion;
    json params = json::array();
    for (std::size_t i = 0; i < fr.names.size(); ++i) {
        const char* role = fr.roles[i] == fit::ParamRole::frozen   ? "frozen"
                           : fr.roles[i] == fit::ParamRole::shared ? "shared"
                                                                   : "free";
        params.push_back({{"name", fr.names[i]},
                          {"value", fr.values[static_cast<int>(i)]},
                          {"sigma", fr.sigma[static_cast<int>(i)]},
                          {"role", role}});
    }
    j["parameters"] = params;
    json cov = json::array();
    for (int r = 0; r < fr.covariance.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < fr.covariance.cols(); ++c) row.push_back(fr.covariance(r, c));
        cov.push_back(row);
    }
    j["covariance"] = cov;
    j["covariance_names"] = fr.covariance_names;
    j["residual_norm"] = fr.residual_norm;
    j["n_iterations"] = fr.n_iterations;
    j["converged"] = fr.converged;
    if (!fr.diagnostic.empty()) j["diagnostic"] = fr.diagnostic;
    if (!backgrounds.empty()) {
        json bg;
        for (const auto& [name, value] : backgrounds) bg[name] = value;
        j["backgrounds_v"] = bg;
    }
    open_out(path) << j.dump(2) << '\n';
}

void write_trajectory(const std::filesystem::path& path,
                      std::span<const oracle::TrajectoryPoint> samples) {
    std::ofstream os = open_out(path);
    os << "# v1\n";
    os << "t,re_a,im_a,n_expect,trace_err\n";
    for (const auto& s : samples) {
        os << fmt17(s.t) << ',' << fmt17(s.a_expect.real()) << ','
           << fmt17(s.a_expect.imag()) << ',' << fmt17(s.n_expect) << ','
           << fmt17(s.trace_err) << '\n';
    }
}

void write_spectrum(const std::filesystem::path& path, const model::Spectrum& s) {
    std::ofstream os = open_out(path);
    os << "# v1\n";
    os << "# peak_freq_hz=" << fmt17(s.peak_freq_hz) << '\n';
    os << "freq_hz,magnitude\n";
    for (std::size_t i = 0; i < s.freq_hz.size(); ++i) {
        os << fmt17(s.freq_hz[i]) << ',' << fmt17(s.magnitude[i]) << '\n';
    }
}

} // namespace dotcav::io
