#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "ebip/contraction.hpp"
#include "ebip/empirical_bayes.hpp"

namespace ebip {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double x) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return {buf.data(), res.ptr};
}

inline double parse_double(const std::string& s) {
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("not a number: '" + s + "'");
    }
    return x;
}

/// RFC 4180 field quoting: only fields containing a comma, quote or line break are quoted.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << content;
    out.close();
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string() + " for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline constexpr const char* kRecordsHeader = "n,replicate,alpha_hat,err_u,err_m,posterior_trace,tail_mass,wall_time_ms";

inline std::string records_to_csv(const std::vector<ContractionRecord>& records) {
    std::string out = kRecordsHeader;
    out += "\r\n";
    for (const auto& r : records) {
        out += format_double(r.n) + ',' + std::to_string(r.replicate) + ',' + format_double(r.alpha_hat) + ',' +
               format_double(r.err_u) + ',' + format_double(r.err_m) + ',' + format_double(r.posterior_trace) + ',' +
               format_double(r.tail_mass) + ',' + format_double(r.wall_time_ms) + "\r\n";
    }
    return out;
}

inline std::vector<ContractionRecord> records_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto strip = [](std::string& s) {
        if (!s.empty() && s.back() == '\r') {
            s.pop_back();
        }
    };
    if (!std::getline(in, line)) {
        throw std::invalid_argument("records CSV: missing header");
    }
    strip(line);
    if (line != kRecordsHeader) {
        throw std::invalid_argument("records CSV: unexpected header '" + line + "'");
    }
    std::vector<ContractionRecord> out;
    while (std::getline(in, line)) {
        strip(line);
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != 8) {
            throw std::invalid_argument("records CSV: expected 8 fields, got " + std::to_string(cells.size()));
        }
        ContractionRecord r;
        r.n = parse_double(cells[0]);
        r.replicate = std::stoi(cells[1]);
        r.alpha_hat = parse_double(cells[2]);
        r.err_u = parse_double(cells[3]);
        r.err_m = parse_double(cells[4]);
        r.posterior_trace = parse_double(cells[5]);
        r.tail_mass = parse_double(cells[6]);
        r.wall_time_ms = parse_double(cells[7]);
        out.push_back(r);
    }
    return out;
}

inline void export_results(const std::vector<ContractionRecord>& records, const std::filesystem::path& path) {
    write_text_file(path, records_to_csv(records));
}

inline std::string curve_to_csv(const LikelihoodCurve& curve) {
    std::string out = "alpha_tilde,log_likelihood\r\n";
    for (std::size_t k = 0; k < curve.alpha_tilde.size(); ++k) {
        out += format_double(curve.alpha_tilde[k]) + ',' + format_double(curve.log_likelihood[k]) + "\r\n";
    }
    return out;
}

inline nlohmann::ordered_json to_json(const RateFit& f) {
    return {{"field", f.field},
            {"slope", f.slope},
            {"intercept", f.intercept},
            {"r_squared", f.r_squared},
            {"target_exponent", f.target_exponent},
            {"tolerance", f.tolerance},
            {"verdict", f.verdict}};
}

/// Log-log plot of mean error against n with fitted lines, a target-slope
/// guide through the first point and the M_n eps_n envelope with unit constants.
inline std::string render_svg(const std::vector<ContractionRecord>& records, const std::vector<RateFit>& fits,
                              const std::vector<ContractionDiagnostics>& diagnostics) {
    const double width = 640.0;
    const double height = 420.0;
    const double left = 70.0;
    const double right = 180.0;
    const double top = 30.0;
    const double bottom = 50.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const auto err_u = summarize(records, ErrorField::ErrU);
    const auto err_m = summarize(records, ErrorField::ErrM);
    if (err_u.empty()) {
        svg << "<text x=\"20\" y=\"30\">no records</text>\n</svg>\n";
        return svg.str();
    }
    std::map<double, double> env_by_n;
    for (std::size_t k = 0; k < records.size() && k < diagnostics.size(); ++k) {
        env_by_n[records[k].n] = diagnostics[k].m_n * diagnostics[k].eps_n;
    }
    double xmin = std::log10(err_u.front().n);
    double xmax = std::log10(err_u.back().n);
    if (xmax <= xmin) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    double ymin = 1e300;
    double ymax = -1e300;
    auto extend = [&](double v) {
        if (v > 0.0 && std::isfinite(v)) {
            ymin = std::min(ymin, std::log10(v));
            ymax = std::max(ymax, std::log10(v));
        }
    };
    for (std::size_t k = 0; k < err_u.size(); ++k) {
        extend(err_u[k].mean);
        extend(err_m[k].mean);
    }
    for (const auto& [n, v] : env_by_n) {
        extend(v);
    }
    if (ymax <= ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto px = [&](double lx) { return left + (lx - xmin) / (xmax - xmin) * (width - left - right); };
    auto py = [&](double ly) { return height - bottom - (ly - ymin) / (ymax - ymin) * (height - top - bottom); };

    svg << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
        << height - bottom << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
        << "\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(std::ceil(xmin)); e <= static_cast<int>(std::floor(xmax)); ++e) {
        svg << "<text x=\"" << px(e) << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"middle\">1e" << e
            << "</text>\n";
    }
    for (int e = static_cast<int>(std::ceil(ymin)); e <= static_cast<int>(std::floor(ymax)); ++e) {
        svg << "<text x=\"" << left - 6 << "\" y=\"" << py(e) + 4 << "\" text-anchor=\"end\">1e" << e << "</text>\n";
    }
    svg << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\">n</text>\n";
    svg << "<text x=\"16\" y=\"" << (top + height - bottom) / 2 << "\" transform=\"rotate(-90 16 "
        << (top + height - bottom) / 2 << ")\" text-anchor=\"middle\">mean error</text>\n";

    auto polyline = [&](const std::vector<std::pair<double, double>>& pts, const char* colour, const char* dash) {
        svg << "<polyline fill=\"none\" stroke=\"" << colour << "\"" << dash << " points=\"";
        for (const auto& [x, y] : pts) {
            svg << px(x) << ',' << py(y) << ' ';
        }
        svg << "\"/>\n";
    };
    struct Series {
        const std::vector<ErrorSummary>* data;
        const char* name;
        const char* colour;
    };
    int legend = 0;
    auto legend_entry = [&](const std::string& text, const char* colour, const char* dash) {
        const double y = top + 14.0 * legend++;
        svg << "<line x1=\"" << width - right + 10 << "\" y1=\"" << y << "\" x2=\"" << width - right + 30 << "\" y2=\""
            << y << "\" stroke=\"" << colour << "\"" << dash << "/>\n";
        svg << "<text x=\"" << width - right + 34 << "\" y=\"" << y + 4 << "\">" << text << "</text>\n";
    };
    for (const Series& s : {Series{&err_u, "err_u", "#1f77b4"}, Series{&err_m, "err_m", "#d62728"}}) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& g : *s.data) {
            if (g.mean > 0.0) {
                pts.emplace_back(std::log10(g.n), std::log10(g.mean));
                svg << "<circle cx=\"" << px(pts.back().first) << "\" cy=\"" << py(pts.back().second)
                    << "\" r=\"3\" fill=\"" << s.colour << "\"/>\n";
            }
        }
        polyline(pts, s.colour, "");
        legend_entry(std::string("mean ") + s.name, s.colour, "");
        for (const auto& f : fits) {
            if (f.field == s.name && !pts.empty()) {
                const auto [x0, y0] = pts.front();
                polyline({{x0, y0}, {xmax, y0 + f.target_exponent * (xmax - x0)}}, s.colour,
                         " stroke-dasharray=\"6 4\"");
                std::ostringstream label;
                label << s.name << " target slope " << format_double(f.target_exponent);
                legend_entry(label.str(), s.colour, " stroke-dasharray=\"6 4\"");
            }
        }
    }
    if (!env_by_n.empty()) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& [n, v] : env_by_n) {
            pts.emplace_back(std::log10(n), std::log10(v));
        }
        polyline(pts, "#555555", " stroke-dasharray=\"2 3\"");
        legend_entry("M_n eps_n (illustrative constants)", "#555555", " stroke-dasharray=\"2 3\"");
    }
    svg << "</svg>\n";
    return svg.str();
}

inline void render_report(const std::vector<ContractionRecord>& records, const std::vector<RateFit>& fits,
                          const std::vector<ContractionDiagnostics>& diagnostics, const std::filesystem::path& path) {
    write_text_file(path, render_svg(records, fits, diagnostics));
}

} // namespace ebip
