#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("BOEM_CLI");
  REQUIRE(p != nullptr);
  return p;
}

struct CommandResult {
  int exit_code;
  std::string stderr_text;
};

CommandResult run_cli(const std::string& args) {
  const fs::path err_file =
      fs::temp_directory_path() / "boem_cli_stderr.txt";
  const std::string cmd =
      cli_path() + " " + args + " 2>" + err_file.string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(err_file);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("valid fit invocation succeeds") {
  const auto dir = fresh_dir("boem_fit_ok");
  const auto res = run_cli(
      "fit --model lgssm --algo boem-avg --a 1.1 --c 1 --n 5000 --seed 7 "
      "--out " +
      dir.string());
  CHECK(res.exit_code == 0);
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(fs::exists(dir / "metadata.txt"));
}

TEST_CASE("oem without gamma-exp fails naming the flag") {
  const auto res = run_cli("fit --model hmm --algo oem --n 1000");
  CHECK(res.exit_code == 2);
  CHECK(res.stderr_text.find("ERROR UsageError") != std::string::npos);
  CHECK(res.stderr_text.find("gamma-exp") != std::string::npos);
}

TEST_CASE("schedule exponent at the boundary is rejected") {
  const auto res =
      run_cli("fit --model lgssm --algo boem --a 1.0 --n 1000");
  CHECK(res.exit_code == 2);
  CHECK(res.stderr_text.find("ERROR UsageError") != std::string::npos);
  CHECK(res.stderr_text.find("--a") != std::string::npos);
}

TEST_CASE("unknown flags are rejected") {
  const auto res = run_cli("fit --model lgssm --algo boem --a 1.1 --n 100 "
                           "--no-such-flag 3");
  CHECK(res.exit_code == 2);
  CHECK(res.stderr_text.find("ERROR UsageError") != std::string::npos);
}

TEST_CASE("simulate writes the documented path schema") {
  const auto dir = fresh_dir("boem_sim");
  const auto res = run_cli("simulate --model hmm --n 50 --seed 3 --out " +
                           dir.string());
  CHECK(res.exit_code == 0);
  const auto text = slurp(dir / "path.csv");
  CHECK(text.rfind("t,x,y\n", 0) == 0);
  // 50 rows plus header.
  CHECK(std::count(text.begin(), text.end(), '\n') == 51);
}

TEST_CASE("simulate then fit equals fit with inline simulation") {
  const auto sim_dir = fresh_dir("boem_pipe_sim");
  const auto fit_dir1 = fresh_dir("boem_pipe_fit1");
  const auto fit_dir2 = fresh_dir("boem_pipe_fit2");
  CHECK(run_cli("simulate --model lgssm --n 3000 --seed 9 --out " +
                sim_dir.string())
            .exit_code == 0);
  CHECK(run_cli("fit --model lgssm --algo boem-avg --a 1.1 --c 1 --n 3000 "
                "--seed 9 --data " +
                (sim_dir / "path.csv").string() + " --out " +
                fit_dir1.string())
            .exit_code == 0);
  CHECK(run_cli("fit --model lgssm --algo boem-avg --a 1.1 --c 1 --n 3000 "
                "--seed 9 --out " +
                fit_dir2.string())
            .exit_code == 0);
  CHECK(slurp(fit_dir1 / "trajectory.csv") ==
        slurp(fit_dir2 / "trajectory.csv"));
}

TEST_CASE("config file values are overridden by flags") {
  const auto dir = fresh_dir("boem_cfgfile");
  fs::create_directories(dir);
  const fs::path cfg = dir / "run.cfg";
  {
    std::ofstream out(cfg);
    out << "model=lgssm\nalgo=boem\na=1.5\nn=2000\nseed=4\n";
  }
  const auto res = run_cli("fit --config " + cfg.string() + " --a 1.2 --out " +
                           (dir / "out").string());
  CHECK(res.exit_code == 0);
  const auto meta = slurp(dir / "out" / "metadata.txt");
  CHECK(meta.find("a=1.2") != std::string::npos);
  CHECK(meta.find("n=2000") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected") {
  const auto dir = fresh_dir("boem_cfgbad");
  fs::create_directories(dir);
  const fs::path cfg = dir / "run.cfg";
  {
    std::ofstream out(cfg);
    out << "model=lgssm\nalgo=boem\na=1.5\nn=500\nbogus_key=1\n";
  }
  const auto res = run_cli("fit --config " + cfg.string());
  CHECK(res.exit_code == 2);
}

TEST_CASE("metadata makes a run reproducible") {
  const auto dir1 = fresh_dir("boem_meta1");
  const auto dir2 = fresh_dir("boem_meta2");
  const std::string args =
      "fit --model hmm --algo boem --a 1.1 --c 1 --n 2000 --seed 12 --out ";
  CHECK(run_cli(args + dir1.string()).exit_code == 0);
  CHECK(run_cli(args + dir2.string()).exit_code == 0);
  CHECK(slurp(dir1 / "trajectory.csv") == slurp(dir2 / "trajectory.csv"));
  CHECK(slurp(dir1 / "metadata.txt") == slurp(dir2 / "metadata.txt"));
}

TEST_CASE("small compare run emits medians for v") {
  const auto dir = fresh_dir("boem_compare");
  const auto res = run_cli("compare --runs 2 --n 2000 --seed 5 --out " +
                           dir.string());
  CHECK(res.exit_code == 0);
  const auto text = slurp(dir / "compare.csv");
  CHECK(text.find("boem-avg") != std::string::npos);
  CHECK(text.find("oem-avg") != std::string::npos);
  CHECK(text.find(",v,") != std::string::npos);
}

TEST_CASE("trajectory csv re-parses to the written values") {
  const auto dir = fresh_dir("boem_roundtrip");
  CHECK(run_cli("fit --model lgssm --algo boem --a 1.1 --n 2000 --seed 2 "
                "--out " +
                dir.string())
            .exit_code == 0);
  std::ifstream in(dir / "trajectory.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "run_id,n_obs,param,estimate,algorithm");
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string run_id, n_obs, param, estimate, algo;
    std::getline(ss, run_id, ',');
    std::getline(ss, n_obs, ',');
    std::getline(ss, param, ',');
    std::getline(ss, estimate, ',');
    std::getline(ss, algo, ',');
    const double v = std::stod(estimate);
    // Full-precision round trip: re-formatting reproduces the field.
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    CHECK(estimate == buf);
    ++rows;
  }
  CHECK(rows > 0);
}
