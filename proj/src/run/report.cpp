#include "tem/run/report.hpp"

#include "tem/run/config.hpp"
#include "tem/run/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace tem::run {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

RunSeries parse_metrics(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("report: cannot open '" + csv_path.string() + "'");
  std::string header;
  if (!std::getline(in, header) || header != kMetricsHeader)
    throw std::runtime_error("report: malformed metrics header in '" + csv_path.string() + "'");
  RunSeries s;
  s.path = csv_path.string();
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 13)
      throw std::runtime_error("report: bad row " + std::to_string(lineno) + " in '" +
                               csv_path.string() + "'");
    try {
      s.env_steps.push_back(std::stod(cols[1]));
      s.reward.push_back(std::stod(cols[2]));
      s.captures.push_back(std::stod(cols[3]));
      s.collisions.push_back(std::stod(cols[4]));
      s.occupied.push_back(std::stod(cols[5]));
      s.comm_rate.push_back(std::stod(cols[6]));
    } catch (const std::exception&) {
      throw std::runtime_error("report: unparsable row " + std::to_string(lineno) + " in '" +
                               csv_path.string() + "'");
    }
  }
  if (s.env_steps.empty())
    throw std::runtime_error("report: no data rows in '" + csv_path.string() + "'");
  // algo/seed from the config echo beside the CSV, directory name otherwise
  const fs::path cfg_path = csv_path.parent_path() / "config.txt";
  if (fs::exists(cfg_path)) {
    RunConfig cfg = RunConfig::load_file(cfg_path.string());
    s.algo = algo_name(cfg.algo);
    s.seed = cfg.seed;
  } else {
    s.algo = csv_path.parent_path().filename().string();
  }
  return s;
}

struct Band {
  std::vector<double> x, mean, lo, hi;
};

Band band_of(const std::vector<const RunSeries*>& runs,
             std::vector<double> RunSeries::*field) {
  std::size_t len = SIZE_MAX;
  for (const RunSeries* r : runs) len = std::min(len, (r->*field).size());
  Band b;
  for (std::size_t i = 0; i < len; ++i) {
    double sum = 0, lo = 1e300, hi = -1e300;
    for (const RunSeries* r : runs) {
      const double v = (r->*field)[i];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    b.x.push_back(runs[0]->env_steps[i]);
    b.mean.push_back(sum / runs.size());
    b.lo.push_back(lo);
    b.hi.push_back(hi);
  }
  return b;
}

const char* algo_color(const std::string& algo) {
  if (algo == "tem") return "#1f77b4";
  if (algo == "mappo") return "#ff7f0e";
  if (algo == "fc") return "#2ca02c";
  if (algo == "rc") return "#d62728";
  return "#7f7f7f";
}

void write_svg_chart(const fs::path& path, const std::string& title,
                     const std::map<std::string, Band>& bands) {
  const double W = 800, H = 500, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& [algo, b] : bands) {
    for (double v : b.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      ymin = std::min(ymin, b.lo[i]);
      ymax = std::max(ymax, b.hi[i]);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double yspan = ymax - ymin;
  ymin -= 0.05 * yspan;
  ymax += 0.05 * yspan;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  std::ofstream os(path, std::ios::trunc);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
     << "' viewBox='0 0 " << W << ' ' << H << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='18'>" << title
     << "</text>\n";
  os << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    os << "<text x='" << px(xv) << "' y='" << H - mb + 20
       << "' text-anchor='middle' font-size='11'>" << static_cast<long long>(xv) << "</text>\n";
    std::ostringstream yl;
    yl.precision(3);
    yl << yv;
    os << "<text x='" << ml - 8 << "' y='" << py(yv) + 4
       << "' text-anchor='end' font-size='11'>" << yl.str() << "</text>\n";
    os << "<line x1='" << ml << "' y1='" << py(yv) << "' x2='" << W - mr << "' y2='" << py(yv)
       << "' stroke='#dddddd'/>\n";
  }
  os << "<text x='" << W / 2 << "' y='" << H - 12
     << "' text-anchor='middle' font-size='13'>env_steps</text>\n";

  int legend_i = 0;
  for (const auto& [algo, b] : bands) {
    const char* color = algo_color(algo);
    if (b.x.size() > 1) {
      os << "<polygon fill='" << color << "' fill-opacity='0.15' stroke='none' points='";
      for (std::size_t i = 0; i < b.x.size(); ++i) os << px(b.x[i]) << ',' << py(b.hi[i]) << ' ';
      for (std::size_t i = b.x.size(); i-- > 0;) os << px(b.x[i]) << ',' << py(b.lo[i]) << ' ';
      os << "'/>\n";
      os << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
      for (std::size_t i = 0; i < b.x.size(); ++i) os << px(b.x[i]) << ',' << py(b.mean[i]) << ' ';
      os << "'/>\n";
    } else if (b.x.size() == 1) {
      os << "<circle cx='" << px(b.x[0]) << "' cy='" << py(b.mean[0]) << "' r='4' fill='"
         << color << "'/>\n";
    }
    const double ly = mt + 18 * legend_i++;
    os << "<line x1='" << W - mr - 120 << "' y1='" << ly << "' x2='" << W - mr - 96 << "' y2='"
       << ly << "' stroke='" << color << "' stroke-width='3'/>\n";
    os << "<text x='" << W - mr - 90 << "' y='" << ly + 4 << "' font-size='13'>" << algo
       << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace

std::vector<RunSeries> scan_runs(const std::string& dir) {
  if (!fs::exists(dir)) throw std::runtime_error("report: no runs found in '" + dir + "'");
  std::vector<fs::path> candidates;
  if (fs::exists(fs::path(dir) / "metrics.csv")) candidates.push_back(fs::path(dir) / "metrics.csv");
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv"))
      subdirs.push_back(entry.path() / "metrics.csv");
  std::sort(subdirs.begin(), subdirs.end());
  candidates.insert(candidates.end(), subdirs.begin(), subdirs.end());
  if (candidates.empty()) throw std::runtime_error("report: no runs found in '" + dir + "'");
  std::vector<RunSeries> out;
  for (const auto& p : candidates) out.push_back(parse_metrics(p));
  return out;
}

void write_report(const std::string& dir) {
  const std::vector<RunSeries> runs = scan_runs(dir);
  std::map<std::string, std::vector<const RunSeries*>> by_algo;
  for (const RunSeries& r : runs) by_algo[r.algo].push_back(&r);

  std::map<std::string, Band> reward_bands, comm_bands;
  for (const auto& [algo, group] : by_algo) {
    reward_bands[algo] = band_of(group, &RunSeries::reward);
    comm_bands[algo] = band_of(group, &RunSeries::comm_rate);
  }
  write_svg_chart(fs::path(dir) / "reward_curve.svg", "mean episode reward", reward_bands);
  write_svg_chart(fs::path(dir) / "comm_rate_curve.svg", "communication rate", comm_bands);

  std::ofstream sum(fs::path(dir) / "summary.txt", std::ios::trunc);
  sum << "final-iteration summary (mean +- spread across seeds)\n\n";
  auto emit = [&](const char* label, std::vector<double> RunSeries::*field) {
    sum << label << ":";
    for (const auto& [algo, group] : by_algo) {
      double mean = 0, lo = 1e300, hi = -1e300;
      for (const RunSeries* r : group) {
        const double v = (r->*field).back();
        mean += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      mean /= group.size();
      std::ostringstream cell;
      cell.precision(4);
      cell << mean;
      if (group.size() > 1) cell << " [" << lo << ", " << hi << "]";
      sum << "  " << algo << "=" << cell.str();
    }
    sum << "\n";
  };
  sum << "algos:";
  for (const auto& [algo, group] : by_algo)
    sum << ' ' << algo << "(x" << group.size() << ")";
  sum << "\n";
  emit("R (mean episode reward)", &RunSeries::reward);
  emit("S (captures/episode)", &RunSeries::captures);
  emit("C (collisions/episode)", &RunSeries::collisions);
  emit("occupied/episode", &RunSeries::occupied);
  emit("comm_rate", &RunSeries::comm_rate);
}

}  // namespace tem::run
