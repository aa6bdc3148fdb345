#include "traffic/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace traffic {

namespace {

std::string num(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  return out;
}

}  // namespace

void pr_csv(const std::vector<PRPoint>& curve, std::ostream& out) {
  out << "threshold,precision,recall,tp,fp,fn\n";
  for (const auto& p : curve)
    out << num(p.threshold) << ',' << num(p.precision) << ',' << num(p.recall) << ','
        << p.tp << ',' << p.fp << ',' << p.fn << '\n';
}

void confusion_csv(const ConfusionMatrix& m, std::ostream& out) {
  auto header = [&] {
    out << "predicted\\true";
    for (const auto& c : m.col_labels) out << ',' << csv_quote(c);
    out << '\n';
  };
  out << "# normalized\n";
  header();
  for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
    out << csv_quote(m.row_labels[r]);
    for (std::size_t c = 0; c < m.col_labels.size(); ++c) out << ',' << num(m.normalized[r][c]);
    out << '\n';
  }
  out << "# raw\n";
  header();
  for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
    out << csv_quote(m.row_labels[r]);
    for (std::size_t c = 0; c < m.col_labels.size(); ++c) out << ',' << m.raw[r][c];
    out << '\n';
  }
}

std::string pr_svg(const std::vector<PRPoint>& curve, const std::string& title) {
  constexpr int kW = 480, kH = 360;
  constexpr double kLeft = 56, kRight = 16, kTop = 32, kBottom = 44;
  const double plot_w = kW - kLeft - kRight;
  const double plot_h = kH - kTop - kBottom;
  auto px = [&](double recall) { return kLeft + recall * plot_w; };
  auto py = [&](double precision) { return kTop + (1.0 - precision) * plot_h; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH
    << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << title << "</text>\n";

  for (int i = 0; i <= 4; ++i) {
    double f = i / 4.0;
    s << "<line x1=\"" << num(px(f), 2) << "\" y1=\"" << num(kTop, 2) << "\" x2=\""
      << num(px(f), 2) << "\" y2=\"" << num(kTop + plot_h, 2)
      << "\" stroke=\"#dddddd\"/>\n";
    s << "<line x1=\"" << num(kLeft, 2) << "\" y1=\"" << num(py(f), 2) << "\" x2=\""
      << num(kLeft + plot_w, 2) << "\" y2=\"" << num(py(f), 2)
      << "\" stroke=\"#dddddd\"/>\n";
    s << "<text x=\"" << num(px(f), 2) << "\" y=\"" << num(kTop + plot_h + 18, 2)
      << "\" text-anchor=\"middle\" font-size=\"11\">" << num(f, 2) << "</text>\n";
    s << "<text x=\"" << num(kLeft - 8, 2) << "\" y=\"" << num(py(f) + 4, 2)
      << "\" text-anchor=\"end\" font-size=\"11\">" << num(f, 2) << "</text>\n";
  }
  s << "<line x1=\"" << num(kLeft, 2) << "\" y1=\"" << num(kTop, 2) << "\" x2=\""
    << num(kLeft, 2) << "\" y2=\"" << num(kTop + plot_h, 2) << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << num(kLeft, 2) << "\" y1=\"" << num(kTop + plot_h, 2) << "\" x2=\""
    << num(kLeft + plot_w, 2) << "\" y2=\"" << num(kTop + plot_h, 2)
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8
    << "\" text-anchor=\"middle\" font-size=\"12\">recall</text>\n";
  s << "<text x=\"14\" y=\"" << kH / 2
    << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
    << kH / 2 << ")\">precision</text>\n";

  if (curve.size() > 1) {
    s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < curve.size(); ++i) {
      if (i) s << ' ';
      s << num(px(curve[i].recall), 2) << ',' << num(py(curve[i].precision), 2);
    }
    s << "\"/>\n";
  }
  for (const auto& p : curve)
    s << "<circle cx=\"" << num(px(p.recall), 2) << "\" cy=\"" << num(py(p.precision), 2)
      << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  s << "</svg>\n";
  return s.str();
}

std::vector<std::string> write_eval_report(const std::string& dir, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;

  for (const auto& [cls, curve] : report.curves) {
    std::string csv_path = dir + "/pr_" + cls + ".csv";
    {
      auto out = open_out(csv_path);
      pr_csv(curve, out);
    }
    paths.push_back(csv_path);
    std::string svg_path = dir + "/pr_" + cls + ".svg";
    open_out(svg_path) << pr_svg(curve, "precision-recall: " + cls);
    paths.push_back(svg_path);
  }

  for (const auto& [key, matrix] : report.matrices) {
    std::string path = dir + "/confusion_o" + num(key.first, 2) + "_l" + num(key.second, 2) + ".csv";
    auto out = open_out(path);
    confusion_csv(matrix, out);
    paths.push_back(path);
  }

  {
    std::string path = dir + "/summary.txt";
    auto out = open_out(path);
    out << "curves: " << report.curves.size() << '\n'
        << "confusion matrices: " << report.matrices.size() << '\n'
        << "angle error mean_deg: " << num(report.angle.mean_deg) << '\n'
        << "angle error evaluated pairs: " << report.angle.evaluated << '\n'
        << "angle error skipped pairs: " << report.angle.skipped << '\n';
    paths.push_back(path);
  }

  std::sort(paths.begin(), paths.end());
  return paths;
}

}  // namespace traffic
