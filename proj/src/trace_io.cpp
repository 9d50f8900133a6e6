#include "safectrl/trace_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "safectrl/errors.hpp"

namespace safectrl {

void write_trace_csv(const SimTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("trace", "cannot write " + path);
  for (std::size_t i = 0; i < trace.columns.size(); ++i) {
    if (i > 0) out << ',';
    out << trace.columns[i];
  }
  out << "\n";
  char buf[32];
  for (const Eigen::VectorXd& row : trace.rows) {
    for (int i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << buf;
    }
    out << "\n";
  }
}

SimTrace read_trace_csv(const std::string& path,
                        const std::vector<std::string>& required) {
  std::ifstream in(path);
  if (!in) throw ConfigError("trace", "cannot open " + path);
  SimTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trace", "empty file " + path);
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) trace.columns.push_back(cell);
  }
  for (const std::string& name : required) {
    bool found = false;
    for (const auto& c : trace.columns)
      if (c == name) {
        found = true;
        break;
      }
    if (!found) throw ConfigError(name, "column missing from " + path);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    Eigen::VectorXd row(trace.columns.size());
    int c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c >= row.size()) throw ConfigError("trace", "ragged row in " + path);
      row[c++] = std::stod(cell);
    }
    if (c != row.size()) throw ConfigError("trace", "ragged row in " + path);
    trace.rows.push_back(std::move(row));
  }
  // Recover the layout hints used by downstream consumers.
  for (const auto& cname : trace.columns) {
    if (cname.rfind("q_", 0) == 0)
      trace.dof = std::max(trace.dof, std::stoi(cname.substr(2)));
    if (cname.rfind("dist_", 0) == 0)
      trace.n_obstacles = std::max(trace.n_obstacles, std::stoi(cname.substr(5)));
    if (cname == "xd_z") trace.task_dim = 3;
  }
  if (trace.task_dim == 0) trace.task_dim = 2;
  if (trace.size() > 1) trace.dt_control = trace.rows[1][0] - trace.rows[0][0];
  return trace;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("hash", "cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace safectrl
