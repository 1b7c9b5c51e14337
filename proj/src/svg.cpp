#include "tectum/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tectum::svg {

namespace {

constexpr double kPanelW = 420.0;
constexpr double kPanelH = 320.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 16.0;
constexpr double kTop = 36.0;
constexpr double kBottom = 96.0;

const char *const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void header(std::ostringstream &os, double w, double h)
{
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
       << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

// Five evenly spaced ticks and a frame for one panel.
void axes(std::ostringstream &os, double x0, double lo, double hi, const std::string &title, const std::string &y_label)
{
    const double plot_h = kPanelH - kTop - kBottom;
    const double plot_w = kPanelW - kLeft - kRight;
    os << "<text x=\"" << num(x0 + kPanelW / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
       << "</text>\n";
    os << "<rect x=\"" << num(x0 + kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(plot_w) << "\" height=\""
       << num(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0;
        const double y = kTop + plot_h * (1.0 - k / 4.0);
        os << "<line x1=\"" << num(x0 + kLeft - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x0 + kLeft) << "\" y2=\""
           << num(y) << "\" stroke=\"#444\"/>\n";
        os << "<text x=\"" << num(x0 + kLeft - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick(v)
           << "</text>\n";
    }
    os << "<text transform=\"translate(" << num(x0 + 14) << ',' << num(kTop + plot_h / 2)
       << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
}

std::pair<double, double> padded_range(double lo, double hi)
{
    if (lo == hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

} // namespace

std::string escape(const std::string &s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string bar_chart(const std::vector<BarPanel> &panels)
{
    std::ostringstream os;
    header(os, kPanelW * static_cast<double>(std::max<std::size_t>(panels.size(), 1)), kPanelH);
    const double plot_h = kPanelH - kTop - kBottom;
    const double plot_w = kPanelW - kLeft - kRight;
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto &panel = panels[p];
        const double x0 = kPanelW * static_cast<double>(p);
        double lo = 0.0, hi = 0.0;
        for (double v : panel.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        std::tie(lo, hi) = padded_range(lo, hi);
        if (lo > 0.0) lo = 0.0;
        if (hi < 0.0) hi = 0.0;
        axes(os, x0, lo, hi, panel.title, panel.y_label);
        auto ypos = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };
        const double y_zero = ypos(0.0);
        os << "<line x1=\"" << num(x0 + kLeft) << "\" y1=\"" << num(y_zero) << "\" x2=\"" << num(x0 + kLeft + plot_w)
           << "\" y2=\"" << num(y_zero) << "\" stroke=\"#888\"/>\n";
        const double slot = panel.values.empty() ? plot_w : plot_w / static_cast<double>(panel.values.size());
        for (std::size_t k = 0; k < panel.values.size(); ++k) {
            const double v = panel.values[k];
            const double x = x0 + kLeft + slot * (static_cast<double>(k) + 0.15);
            const double y = std::min(ypos(v), y_zero);
            const double h = std::abs(ypos(v) - y_zero);
            os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(slot * 0.7) << "\" height=\""
               << num(h) << "\" fill=\"" << kPalette[p % 6] << "\"><title>" << escape(panel.labels[k]) << ": "
               << tick(v) << "</title></rect>\n";
            const double lx = x + slot * 0.35;
            const double ly = kTop + plot_h + 8;
            os << "<text transform=\"translate(" << num(lx) << ',' << num(ly)
               << ") rotate(45)\" text-anchor=\"start\">" << escape(panel.labels[k]) << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string line_chart(const std::vector<LinePanel> &panels)
{
    std::ostringstream os;
    header(os, kPanelW * static_cast<double>(std::max<std::size_t>(panels.size(), 1)), kPanelH);
    const double plot_h = kPanelH - kTop - kBottom;
    const double plot_w = kPanelW - kLeft - kRight;
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto &panel = panels[p];
        const double x0 = kPanelW * static_cast<double>(p);
        double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
        for (const auto &s : panel.series) {
            for (double v : s.x) {
                xlo = std::min(xlo, v);
                xhi = std::max(xhi, v);
            }
            for (double v : s.y) {
                ylo = std::min(ylo, v);
                yhi = std::max(yhi, v);
            }
        }
        if (!std::isfinite(xlo)) xlo = 0.0, xhi = 1.0, ylo = 0.0, yhi = 1.0;
        if (xlo == xhi) xhi = xlo + 1.0;
        std::tie(ylo, yhi) = padded_range(ylo, yhi);
        axes(os, x0, ylo, yhi, panel.title, panel.y_label);
        os << "<text x=\"" << num(x0 + kLeft + plot_w / 2) << "\" y=\"" << num(kTop + plot_h + 30)
           << "\" text-anchor=\"middle\">" << escape(panel.x_label) << "</text>\n";
        os << "<text x=\"" << num(x0 + kLeft) << "\" y=\"" << num(kTop + plot_h + 16) << "\" text-anchor=\"middle\">"
           << tick(xlo) << "</text>\n";
        os << "<text x=\"" << num(x0 + kLeft + plot_w) << "\" y=\"" << num(kTop + plot_h + 16)
           << "\" text-anchor=\"middle\">" << tick(xhi) << "</text>\n";
        for (std::size_t s = 0; s < panel.series.size(); ++s) {
            const auto &series = panel.series[s];
            os << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 6] << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t k = 0; k < std::min(series.x.size(), series.y.size()); ++k) {
                const double x = x0 + kLeft + plot_w * (series.x[k] - xlo) / (xhi - xlo);
                const double y = kTop + plot_h * (yhi - series.y[k]) / (yhi - ylo);
                os << num(x) << ',' << num(y) << ' ';
            }
            os << "\"/>\n";
            const double ly = kTop + plot_h + 48 + 14.0 * static_cast<double>(s);
            os << "<line x1=\"" << num(x0 + kLeft) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(x0 + kLeft + 18)
               << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << kPalette[s % 6] << "\" stroke-width=\"2\"/>\n";
            os << "<text x=\"" << num(x0 + kLeft + 24) << "\" y=\"" << num(ly) << "\">" << escape(series.name)
               << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace tectum::svg
