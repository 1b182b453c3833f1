#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hetal/common.hpp"
#include "hetal/data.hpp"

namespace hetal {

// Shortest round-trip-exact decimal form of a double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Pool text format: header "n d n_classes", then one line per example with
// d feature values, the label, the noise flag and the partition tag (L/U).
inline void save_pool(const DataPool& pool, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_pool: cannot open " + path);
  out << pool.size() << " " << pool.dim() << " " << pool.n_classes << "\n";
  std::vector<char> tag(pool.size(), 'U');
  for (int i : pool.labeled_idx) tag[i] = 'L';
  for (int i = 0; i < pool.size(); ++i) {
    for (int j = 0; j < pool.dim(); ++j) out << format_double(pool.features(i, j)) << " ";
    out << pool.labels[i] << " " << static_cast<int>(pool.is_noisy[i]) << " " << tag[i] << "\n";
  }
  if (!out) throw IoError("save_pool: write failed for " + path);
}

inline DataPool load_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_pool: cannot open " + path);
  int n = 0, d = 0, n_classes = 0;
  if (!(in >> n >> d >> n_classes) || n < 0 || d < 1 || n_classes < 1)
    throw IoError("load_pool: bad header in " + path);

  DataPool pool;
  pool.n_classes = n_classes;
  pool.features.resize(n, d);
  pool.labels.resize(n);
  pool.is_noisy.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j)
      if (!(in >> pool.features(i, j))) throw IoError("load_pool: truncated features");
    int label = 0, noisy = 0;
    char tag = 0;
    if (!(in >> label >> noisy >> tag)) throw IoError("load_pool: truncated example row");
    if (tag != 'L' && tag != 'U') throw IoError("load_pool: bad partition tag");
    pool.labels[i] = label;
    pool.is_noisy[i] = static_cast<std::uint8_t>(noisy != 0);
    (tag == 'L' ? pool.labeled_idx : pool.unlabeled_idx).push_back(i);
  }
  pool.validate();
  return pool;
}

namespace svg {

inline const char* class_color(int c) {
  static const char* palette[] = {"#4477aa", "#66ccee", "#228833", "#ccbb44",
                                  "#ee6677", "#aa3377", "#bbbbbb", "#000000",
                                  "#e07020", "#709020"};
  return palette[c % 10];
}

struct Writer {
  std::ostringstream body;
  double width, height;

  Writer(double w, double h) : width(w), height(h) {}

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double stroke_width = 1.0) {
    body << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
         << "\" stroke=\"" << stroke << "\" stroke-width=\"" << stroke_width << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill,
            double opacity = 1.0) {
    body << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
         << "\" fill=\"" << fill << "\" fill-opacity=\"" << opacity << "\"/>\n";
  }
  void circle(double cx, double cy, double r, const std::string& fill,
              const std::string& stroke = "none") {
    body << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << r << "\" fill=\"" << fill
         << "\" stroke=\"" << stroke << "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    body << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) body << x << "," << y << " ";
    body << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, int size = 12) {
    body << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\""
         << size << "\">" << s << "</text>\n";
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("svg: cannot open " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << body.str() << "</svg>\n";
    if (!out) throw IoError("svg: write failed for " + path);
  }
};

}  // namespace svg

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

}  // namespace hetal
