#include "psfed/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace psfed {

double quantize(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

ReportRow make_report_row(std::string experiment, int site, std::string organ,
                          double dc, std::optional<double> hd95,
                          double wall_time_s) {
  ReportRow row;
  row.experiment = std::move(experiment);
  row.site = site;
  row.organ = std::move(organ);
  row.dc = quantize(dc, 3);
  if (hd95.has_value()) row.hd95 = quantize(*hd95, 2);
  row.wall_time_s = quantize(wall_time_s, 3);
  return row;
}

namespace {

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_report_csv(const std::filesystem::path& path,
                      const std::vector<ReportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  out << "experiment,site,organ,DC,HD95,wall_time_s\n";
  for (const ReportRow& r : rows) {
    out << r.experiment << ',' << r.site << ',' << r.organ << ','
        << fmt(r.dc, 3) << ','
        << (r.hd95.has_value() ? fmt(*r.hd95, 2) : std::string("undef")) << ','
        << fmt(r.wall_time_s, 3) << '\n';
  }
  if (!out) throw std::runtime_error("short write on report: " + path.string());
}

std::vector<ReportRow> read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read report: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "experiment,site,organ,DC,HD95,wall_time_s")
    throw std::runtime_error("bad report header: " + path.string());
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 6)
      throw std::runtime_error("bad report row: " + line);
    ReportRow r;
    r.experiment = cells[0];
    r.site = std::stoi(cells[1]);
    r.organ = cells[2];
    r.dc = std::stod(cells[3]);
    if (cells[4] != "undef") r.hd95 = std::stod(cells[4]);
    r.wall_time_s = std::stod(cells[5]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void print_report_table(std::ostream& os, const std::vector<ReportRow>& rows) {
  std::size_t exp_w = 10, organ_w = 5;
  for (const ReportRow& r : rows) {
    exp_w = std::max(exp_w, r.experiment.size());
    organ_w = std::max(organ_w, r.organ.size());
  }
  os << std::left << std::setw(static_cast<int>(exp_w) + 2) << "experiment"
     << std::setw(6) << "site" << std::setw(static_cast<int>(organ_w) + 2)
     << "organ" << std::right << std::setw(7) << "DC" << std::setw(9) << "HD95"
     << std::setw(12) << "wall(s)" << "\n";
  for (const ReportRow& r : rows) {
    os << std::left << std::setw(static_cast<int>(exp_w) + 2) << r.experiment
       << std::setw(6) << r.site << std::setw(static_cast<int>(organ_w) + 2)
       << r.organ << std::right << std::setw(7) << fmt(r.dc, 3) << std::setw(9)
       << (r.hd95.has_value() ? fmt(*r.hd95, 2) : std::string("undef"))
       << std::setw(12) << fmt(r.wall_time_s, 3) << "\n";
  }
}

}  // namespace psfed
