#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace psfed {

// One metric row. Values are stored already quantized to their printed
// precision (DC 3 decimals, HD95 and wall time 2/3), so CSV round-trips
// reproduce rows exactly.
struct ReportRow {
  std::string experiment;
  int site = 0;
  std::string organ;
  double dc = 0.0;
  std::optional<double> hd95;  // nullopt prints as "undef"
  double wall_time_s = 0.0;

  bool operator==(const ReportRow&) const = default;
};

double quantize(double v, int decimals);

ReportRow make_report_row(std::string experiment, int site, std::string organ,
                          double dc, std::optional<double> hd95,
                          double wall_time_s);

void write_report_csv(const std::filesystem::path& path,
                      const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);

// Aligned stdout table: DC with 3 decimals, HD95 with 2.
void print_report_table(std::ostream& os, const std::vector<ReportRow>& rows);

}  // namespace psfed
