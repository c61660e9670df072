#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <sstream>

#include "msrom/artifacts.hpp"
#include "msrom/field.hpp"
#include "msrom/pipeline.hpp"

using namespace msrom;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("msrom_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MSROM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_config(const fs::path& p, const std::string& body) {
  std::ofstream out(p);
  out << body;
}

}  // namespace

TEST_CASE("run fine emits zero-error rows and a config echo") {
  TempDir dir;
  const auto cfg = dir.path / "run.ini";
  write_config(cfg,
               "[mesh]\nnx = 16\nny = 16\nNX = 4\nNY = 4\n"
               "[field]\nsource = constant\n"
               "[time]\ndt = 0.1\nT = 0.5\n");
  const auto out = dir.path / "out";
  const int rc = run_cli("run fine --config " + cfg.string() + " --out " + out.string());
  CHECK(rc == 0);
  const auto curves = read_errors_csv((out / "errors.csv").string());
  REQUIRE(curves.size() == 1);
  CHECK(curves[0].step == "fine");
  for (double e : curves[0].e_a) CHECK(e == 0.0);
  CHECK(fs::exists(out / "run.json"));
  CHECK(fs::exists(out / "stats.csv"));
  const auto run_json = slurp(out / "run.json");
  CHECK(run_json.find("\"schema_version\": \"msrom-run v1\"") != std::string::npos);
  CHECK(run_json.find("\"mesh.nx\": \"16\"") != std::string::npos);
}

TEST_CASE("config failures exit with code 2") {
  TempDir dir;
  const auto cfg = dir.path / "bad.ini";
  write_config(cfg, "[mesh]\nnx = 100\nny = 100\nNX = 7\nNY = 10\n");
  CHECK(run_cli("run fine --config " + cfg.string()) == 2);
  const auto cfg2 = dir.path / "unknown.ini";
  write_config(cfg2, "[mesh]\nnx = 8\nny = 8\nNX = 2\nNY = 2\nbogus = 1\n");
  CHECK(run_cli("run fine --config " + cfg2.string()) == 2);
  CHECK(run_cli("run fine --config /does/not/exist.ini") == 2);
}

TEST_CASE("--set overrides and --l sugar are resolved into run.json") {
  TempDir dir;
  const auto cfg = dir.path / "run.ini";
  write_config(cfg,
               "[mesh]\nnx = 16\nny = 16\nNX = 4\nNY = 4\n"
               "[field]\nsource = constant\n"
               "[time]\ndt = 0.1\nT = 0.2\n"
               "[pod]\nl = 20\n");
  const auto out = dir.path / "out";
  const int rc = run_cli("run fine --config " + cfg.string() + " --out " + out.string() +
                         " --l 10 --set time.T=0.3");
  CHECK(rc == 0);
  const auto run_json = slurp(out / "run.json");
  CHECK(run_json.find("\"pod.l\": \"10\"") != std::string::npos);
  CHECK(run_json.find("\"time.T\": \"0.3") != std::string::npos);
}

TEST_CASE("field synth / ingest round trip through the CLI") {
  TempDir dir;
  const auto cfg = dir.path / "field.ini";
  write_config(cfg,
               "[mesh]\nnx = 20\nny = 20\nNX = 4\nNY = 4\n"
               "[field]\nsource = synthetic\ncontrast = 1e4\npattern_seed = 5\n");
  const auto f1 = dir.path / "a.field";
  const auto f2 = dir.path / "b.field";
  CHECK(run_cli("field synth --config " + cfg.string() + " --file " + f1.string()) == 0);
  CHECK(run_cli("field ingest --config " + cfg.string() + " --in " + f1.string() +
                " --file " + f2.string()) == 0);
  CHECK(slurp(f1) == slurp(f2));  // canonical container round-trips bit-exactly
}

TEST_CASE("deterministic reruns produce byte-identical errors.csv") {
  TempDir dir;
  const auto cfg = dir.path / "m1.ini";
  write_config(cfg,
               "[mesh]\nnx = 16\nny = 16\nNX = 4\nNY = 4\n"
               "[field]\nsource = kle\nmean_source = constant\n"
               "[kle]\nsigma2 = 0.5\neta1 = 0.3\neta2 = 0.3\n"
               "[time]\ndt = 0.1\nT = 0.5\n"
               "[basis]\ncounts = 2+1\n"
               "[pod]\nl = 8\n"
               "[samples]\nn_train = 2\nn_eval = 3\n");
  const auto out1 = dir.path / "out1";
  const auto out2 = dir.path / "out2";
  CHECK(run_cli("run method1 --config " + cfg.string() + " --out " + out1.string()) == 0);
  CHECK(run_cli("run method1 --config " + cfg.string() + " --out " + out2.string()) == 0);
  CHECK(slurp(out1 / "errors.csv") == slurp(out2 / "errors.csv"));
  CHECK(!slurp(out1 / "errors.csv").empty());

  // method runs export the POD basis with its sidecar; the container
  // re-ingests as interior-node records
  REQUIRE(fs::exists(out1 / "pod_basis.field"));
  REQUIRE(fs::exists(out1 / "pod_basis.json"));
  const auto records = read_raster_records((out1 / "pod_basis.field").string());
  CHECK(records.size() == 8);  // pod.l
  CHECK(records[0].width == 15);
  CHECK(records[0].height == 15);
  CHECK(slurp(out1 / "pod_basis.json").find("msrom-pod v1") != std::string::npos);
}

TEST_CASE("report recomputes stats from an errors.csv") {
  TempDir dir;
  // hand-written errors.csv with two samples at one time
  const auto errors = dir.path / "errors.csv";
  {
    std::ofstream out(errors);
    out << "# msrom-errors v1\n";
    out << "step,sample_id,t,e_a,e_l2\n";
    out << "step3,eval0,1,0.2,0.1\n";
    out << "step3,eval1,1,0.4,0.3\n";
  }
  const auto stats = dir.path / "stats.csv";
  CHECK(run_cli("report --errors " + errors.string() + " --out " + stats.string()) == 0);
  std::ifstream in(stats);
  std::string line;
  std::getline(in, line);  // schema
  CHECK(line == "# msrom-stats v1");
  std::getline(in, line);  // header
  REQUIRE(static_cast<bool>(std::getline(in, line)));
  std::replace(line.begin(), line.end(), ',', ' ');
  std::istringstream row(line);
  double t, mean_ea, var_ea, mean_el2, var_el2;
  std::string step;
  row >> t >> step >> mean_ea >> var_ea >> mean_el2 >> var_el2;
  // hand computation: mean_ea = 0.3, var_ea = 0.02, mean_el2 = 0.2, var_el2 = 0.02
  CHECK(step == "step3");
  CHECK(mean_ea == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(var_ea == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(mean_el2 == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(var_el2 == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("kle build and sample write model artifacts") {
  TempDir dir;
  const auto cfg = dir.path / "kle.ini";
  write_config(cfg,
               "[mesh]\nnx = 10\nny = 10\nNX = 2\nNY = 2\n"
               "[field]\nsource = kle\nmean_source = constant\n"
               "[kle]\nsigma2 = 1.0\neta1 = 0.4\neta2 = 0.4\n");
  const auto out = dir.path / "model";
  CHECK(run_cli("kle build --config " + cfg.string() + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "kle.json"));
  CHECK(fs::exists(out / "kle_mean.field"));
  CHECK(fs::exists(out / "kle_modes.field"));
  const auto samples = dir.path / "samples";
  CHECK(run_cli("kle sample --config " + cfg.string() + " --count 3 --out " +
                samples.string()) == 0);
  CHECK(fs::exists(samples / "sample_0.field"));
  CHECK(fs::exists(samples / "sample_2.field"));
}
