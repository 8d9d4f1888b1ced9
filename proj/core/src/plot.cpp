#include "dbench/plot.hpp"

#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include "dbench/error.hpp"

namespace dbench {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 60, kRight = 170, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

double px(double x) { return kLeft + (x + 1.0) / 2.0 * (kWidth - kLeft - kRight); }
double py(double y) { return kHeight - kBottom - y * (kHeight - kTop - kBottom); }

std::string escape(std::string_view s) {
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

std::string num(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::fixed << v;
  return os.str();
}

}  // namespace

std::string render_plot_svg(std::span<const CurvePoint> curve, RateKind rate, const std::string& title) {
  if (curve.empty()) throw UsageError("cannot plot an empty curve");

  std::vector<std::string> order;
  std::map<std::string, std::vector<const CurvePoint*>> series;
  for (const auto& p : curve) {
    const auto name = p.subgroup.name();
    if (!series.contains(name)) order.push_back(name);
    series[name].push_back(&p);
  }

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << escape(title) << "</text>\n";

  // Axes and ticks.
  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << num(px(-1)) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(px(1)) << "\" y2=\""
     << num(py(0)) << "\"/>\n";
  os << "<line x1=\"" << num(px(-1)) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(px(-1)) << "\" y2=\""
     << num(py(1)) << "\"/>\n";
  os << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = -1.0 + 0.5 * i;
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << num(py(0) + 16) << "\" text-anchor=\"middle\">" << num(x)
       << "</text>\n";
    const double y = 0.25 * i;
    os << "<text x=\"" << num(px(-1) - 6) << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">" << num(y)
       << "</text>\n";
  }
  os << "<text x=\"" << num(px(0)) << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\">normalized level</text>\n";
  os << "<text x=\"16\" y=\"" << num(py(0.5)) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num(py(0.5)) << ")\">" << (rate == RateKind::Fpr ? "FPR" : "FNR") << "</text>\n</g>\n";

  os << "<line class=\"baseline\" x1=\"" << num(px(0)) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(px(0))
     << "\" y2=\"" << num(py(1)) << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";

  for (std::size_t s = 0; s < order.size(); ++s) {
    const auto& name = order[s];
    const char* color = kPalette[s % kPalette.size()];
    std::size_t omitted = 0;
    std::ostringstream line, marks;
    for (const auto* p : series[name]) {
      const auto v = p->rate(rate);
      if (!v) {
        ++omitted;
        continue;
      }
      const double x = px(p->normalized_level), y = py(*v);
      line << (line.tellp() > 0 ? " " : "") << num(x) << ',' << num(y);
      const auto lo = rate == RateKind::Fpr ? p->fpr_lo : p->fnr_lo;
      const auto hi = rate == RateKind::Fpr ? p->fpr_hi : p->fnr_hi;
      if (lo && hi) {
        marks << "<line class=\"ci\" x1=\"" << num(x) << "\" y1=\"" << num(py(*lo)) << "\" x2=\"" << num(x)
              << "\" y2=\"" << num(py(*hi)) << "\" stroke=\"" << color << "\"/>\n";
      }
      marks << "<circle class=\"point\" cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"3.5\" fill=\"" << color
            << "\"/>\n";
    }
    os << "<g class=\"series\" data-subgroup=\"" << escape(name) << "\">\n";
    if (line.tellp() > 0) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << line.str()
         << "\"/>\n";
    }
    os << marks.str();
    const double ly = kTop + 18.0 * static_cast<double>(s);
    const double lx = kWidth - kRight + 14;
    os << "<rect x=\"" << lx << "\" y=\"" << num(ly) << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    os << "<text class=\"legend\" x=\"" << lx + 16 << "\" y=\"" << num(ly + 9)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(name);
    if (omitted > 0) os << " (" << omitted << " undefined omitted)";
    os << "</text>\n</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_plot(std::span<const CurvePoint> curve, RateKind rate, const std::filesystem::path& path,
               const std::string& title) {
  const auto svg = render_plot_svg(curve, rate, title);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << svg;
  out.close();
  if (!out) throw IoError("cannot write plot " + path.string());
}

std::vector<std::filesystem::path> emit_all_plots(std::span<const CurvePoint> curves, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  for (auto kind : kAllFactorKinds) {
    std::vector<CurvePoint> sub;
    for (const auto& p : curves) {
      if (p.kind == kind) sub.push_back(p);
    }
    if (sub.empty()) continue;
    for (auto rate : {RateKind::Fpr, RateKind::Fnr}) {
      const std::string tag = rate == RateKind::Fpr ? "fpr" : "fnr";
      const auto path = dir / (std::string(factor_name(kind)) + "_" + tag + ".svg");
      emit_plot(sub, rate, path, std::string(factor_name(kind)) + " " + (rate == RateKind::Fpr ? "FPR" : "FNR"));
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace dbench
