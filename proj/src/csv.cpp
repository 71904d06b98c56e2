#include "boem/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace boem {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + file);
  return out;
}

}  // namespace

void write_path_csv(const std::string& file, const SimulatedPath& path,
                    bool finite_model) {
  auto out = open_out(file);
  out << "t,x,y\n";
  for (std::size_t t = 0; t < path.observations.size(); ++t) {
    out << t << ',';
    if (finite_model) {
      out << path.state_indices[t];
    } else {
      out << format_double(path.states[t]);
    }
    out << ',' << format_double(path.observations[t]) << '\n';
  }
}

std::vector<double> read_path_observations(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + file);
  std::string line;
  if (!std::getline(in, line) || line != "t,x,y") {
    throw Error(ErrorCode::IoError, "bad path CSV header in " + file);
  }
  std::vector<double> obs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto last_comma = line.rfind(',');
    if (last_comma == std::string::npos) {
      throw Error(ErrorCode::IoError, "malformed row in " + file);
    }
    obs.push_back(std::stod(line.substr(last_comma + 1)));
  }
  return obs;
}

void write_trajectory_csv(const std::string& file,
                          const std::vector<RunOutcome>& runs) {
  auto out = open_out(file);
  out << "run_id,n_obs,param,estimate,algorithm\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (!runs[r].ok) continue;
    for (const auto& [algo, traj] : runs[r].trajectories) {
      for (const auto& cp : traj.checkpoints) {
        for (std::size_t pi = 0; pi < traj.param_names.size(); ++pi) {
          out << r << ',' << cp.n_obs << ',' << traj.param_names[pi] << ','
              << format_double(cp.values[pi]) << ',' << algo_name(algo)
              << '\n';
        }
      }
    }
  }
}

void write_summary_csv(const std::string& file, const SummaryTable& table) {
  auto out = open_out(file);
  out << "algorithm,n_obs,param,median,q1,q3,variance\n";
  for (const auto& row : table.rows) {
    out << row.algorithm << ',' << row.n_obs << ',' << row.param << ','
        << format_double(row.median) << ',' << format_double(row.q1) << ','
        << format_double(row.q3) << ',' << format_double(row.variance)
        << '\n';
  }
}

void write_variance_csv(const std::string& file,
                        const std::map<double, SummaryTable>& by_exponent) {
  auto out = open_out(file);
  out << "algorithm,exponent,n_obs,param,variance\n";
  for (const auto& [exponent, table] : by_exponent) {
    for (const auto& row : table.rows) {
      out << row.algorithm << ',' << format_double(exponent) << ','
          << row.n_obs << ',' << row.param << ','
          << format_double(row.variance) << '\n';
    }
  }
}

void write_rates_csv(
    const std::string& file,
    const std::vector<std::pair<std::string, SlopeEstimate>>& slopes_by_algo,
    const std::string& param) {
  auto out = open_out(file);
  out << "algorithm,param,slope,std_error\n";
  for (const auto& [algo, est] : slopes_by_algo) {
    out << algo << ',' << param << ',' << format_double(est.slope) << ','
        << format_double(est.std_error) << '\n';
  }
}

void write_metadata(
    const std::string& file,
    const std::vector<std::pair<std::string, std::string>>& entries) {
  auto out = open_out(file);
  for (const auto& [key, value] : entries) out << key << '=' << value << '\n';
}

}  // namespace boem
