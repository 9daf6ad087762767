#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sgdlim {

// One measured claim: value with confidence halfwidth, checked against a
// target within a tolerance that always comes from config, never from code.
struct ClaimResult {
  std::string name;
  double measured = 0.0;
  double ci = 0.0;  // confidence halfwidth (4 SE unless noted)
  double expected = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool informational = false;  // reported but not gating
  std::string note;
};

struct ExperimentReport {
  std::string name;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<ClaimResult> claims;
  double wall_seconds = 0.0;

  bool pass() const;
  void param(const std::string& key, const std::string& value);
  void param(const std::string& key, double value);

  std::string human_text() const;
  std::string machine_json() const;
};

// writes report.txt and report.json under dir (created if needed)
void write_report_files(const std::string& dir, const ExperimentReport& report);

}  // namespace sgdlim
