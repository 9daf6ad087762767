#include "sgdlim/report.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace sgdlim {

bool ExperimentReport::pass() const {
  for (const auto& c : claims)
    if (!c.informational && !c.pass) return false;
  return true;
}

void ExperimentReport::param(const std::string& key, const std::string& value) {
  parameters.emplace_back(key, value);
}

void ExperimentReport::param(const std::string& key, double value) {
  std::ostringstream os;
  os << std::setprecision(17) << value;
  parameters.emplace_back(key, os.str());
}

std::string ExperimentReport::human_text() const {
  std::ostringstream os;
  os << "experiment: " << name << "\n";
  for (const auto& [k, v] : parameters) os << "  " << k << " = " << v << "\n";
  os << std::setprecision(10);
  for (const auto& c : claims) {
    os << (c.informational ? "  [info] " : (c.pass ? "  [pass] " : "  [FAIL] "));
    os << c.name << ": measured " << c.measured;
    if (c.ci > 0.0) os << " +- " << c.ci;
    if (c.tolerance > 0.0) os << " vs " << c.expected << " (tol " << c.tolerance << ")";
    if (!c.note.empty()) os << "  -- " << c.note;
    os << "\n";
  }
  os << "  overall: " << (pass() ? "PASS" : "FAIL") << "  (" << std::setprecision(4)
     << wall_seconds << " s)\n";
  return os.str();
}

std::string ExperimentReport::machine_json() const {
  nlohmann::json j;
  j["experiment"] = name;
  j["wall_seconds"] = wall_seconds;
  j["pass"] = pass();
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : parameters) params[k] = v;
  j["parameters"] = params;
  j["claims"] = nlohmann::json::array();
  for (const auto& c : claims) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["measured"] = c.measured;
    cj["ci"] = c.ci;
    cj["expected"] = c.expected;
    cj["tolerance"] = c.tolerance;
    cj["pass"] = c.pass;
    cj["informational"] = c.informational;
    if (!c.note.empty()) cj["note"] = c.note;
    j["claims"].push_back(cj);
  }
  return j.dump(2);
}

void write_report_files(const std::string& dir, const ExperimentReport& report) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream txt(std::filesystem::path(dir) / "report.txt");
    txt << report.human_text();
  }
  {
    std::ofstream js(std::filesystem::path(dir) / "report.json");
    js << report.machine_json() << "\n";
  }
}

}  // namespace sgdlim
