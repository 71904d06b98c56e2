#ifndef BOEM_CSV_HPP
#define BOEM_CSV_HPP

#include <map>
#include <string>
#include <vector>

#include "boem/harness.hpp"
#include "boem/models.hpp"

namespace boem {

// Full-precision number formatting (17 significant digits) so that every
// emitted CSV re-parses to exactly the values written.
std::string format_double(double v);

void write_path_csv(const std::string& file, const SimulatedPath& path,
                    bool finite_model);
std::vector<double> read_path_observations(const std::string& file);

// Schema: run_id,n_obs,param,estimate,algorithm
void write_trajectory_csv(const std::string& file,
                          const std::vector<RunOutcome>& runs);

// Schema: algorithm,n_obs,param,median,q1,q3,variance
void write_summary_csv(const std::string& file, const SummaryTable& table);

// Schema: algorithm,exponent,n_obs,param,variance
void write_variance_csv(const std::string& file,
                        const std::map<double, SummaryTable>& by_exponent);

// Schema: algorithm,param,slope,std_error
void write_rates_csv(const std::string& file,
                     const std::vector<std::pair<std::string, SlopeEstimate>>&
                         slopes_by_algo,
                     const std::string& param);

void write_metadata(const std::string& file,
                    const std::vector<std::pair<std::string, std::string>>&
                        entries);

}  // namespace boem

#endif  // BOEM_CSV_HPP
