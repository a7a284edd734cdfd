#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "models.hpp"

using namespace hhsmm;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("HHSMM_CLI");
  return p ? p : "";
}

int run(const std::string& args) {
  std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("hhsmm_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("cli pipeline: simulate, init, fit, predict, score") {
  REQUIRE_FALSE(cli_path().empty());
  TempDir tmp;
  store_model(testmodels::three_state_separated(84), tmp / "truth.json");

  REQUIRE(run("simulate --model " + (tmp / "truth.json") + " --nsim 50,40,30,70 --seed 1234 --out " +
              (tmp / "train.csv")) == 0);
  REQUIRE(run("simulate --model " + (tmp / "truth.json") + " --nsim 80,45,20,35 --seed 4321 --out " +
              (tmp / "test.csv")) == 0);
  REQUIRE(run("init --data " + (tmp / "train.csv") +
              " --nstate 3 --nmix 1,1,1 --sojourn gamma --semi F,T,F --seed 7 --out " +
              (tmp / "model0.json")) == 0);
  REQUIRE(run("fit --data " + (tmp / "train.csv") + " --model " + (tmp / "model0.json") +
              " --maxit 60 --tol 1e-4 --out " + (tmp / "fit.json") + " --trace " +
              (tmp / "trace.csv") + " --plot " + (tmp / "trace.svg")) == 0);
  REQUIRE(run("predict --fit " + (tmp / "fit.json") + " --data " + (tmp / "test.csv") +
              " --method viterbi --out " + (tmp / "states.csv")) == 0);
  REQUIRE(run("score --fit " + (tmp / "fit.json") + " --data " + (tmp / "test.csv") + " --out " +
              (tmp / "scores.csv")) == 0);

  // decoded states against the simulated truth
  auto test = load_sequences(tmp / "test.csv");
  std::ifstream in(tmp / "states.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "seq_id,t,state");
  IntVector yhat;
  while (std::getline(in, line)) {
    auto pos = line.rfind(',');
    yhat.push_back(std::stoi(line.substr(pos + 1)));
  }
  REQUIRE(yhat.size() == static_cast<std::size_t>(test.total_rows()));
  Vector h = homogeneity(yhat, test.s);
  CHECK(h.minCoeff() >= 0.7);

  // trace.csv is iter,loglik with a nondecreasing iteration column
  std::ifstream tr(tmp / "trace.csv");
  std::getline(tr, line);
  CHECK(line == "iter,loglik");
  CHECK(slurp(tmp / "trace.svg").find("<svg") == 0);
}

TEST_CASE("cli fit --lock-init keeps init bit-exact") {
  REQUIRE_FALSE(cli_path().empty());
  TempDir tmp;
  auto truth = testmodels::three_state_example(60);
  truth.init = (Vector(3) << 0.25, 0.35, 0.4).finished();
  store_model(truth, tmp / "m.json");
  REQUIRE(run("simulate --model " + (tmp / "m.json") + " --nsim 50,50 --seed 5 --out " +
              (tmp / "d.csv")) == 0);
  REQUIRE(run("fit --data " + (tmp / "d.csv") + " --model " + (tmp / "m.json") +
              " --maxit 5 --lock-init --out " + (tmp / "fit.json")) == 0);
  std::ifstream in(tmp / "fit.json");
  json j;
  in >> j;
  ModelSpec fitted = model_from_json(j.at("model"));
  CHECK((fitted.init - truth.init).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cli predict --future 0 equals the plain decode output") {
  REQUIRE_FALSE(cli_path().empty());
  TempDir tmp;
  store_model(testmodels::three_state_example(60), tmp / "m.json");
  REQUIRE(run("simulate --model " + (tmp / "m.json") + " --nsim 40,30 --seed 9 --out " +
              (tmp / "d.csv")) == 0);
  REQUIRE(run("predict --fit " + (tmp / "m.json") + " --data " + (tmp / "d.csv") +
              " --method smoothing --future 0 --out " + (tmp / "a.csv")) == 0);
  REQUIRE(run("predict --fit " + (tmp / "m.json") + " --data " + (tmp / "d.csv") +
              " --method smoothing --out " + (tmp / "b.csv")) == 0);
  CHECK(slurp(tmp / "a.csv") == slurp(tmp / "b.csv"));
}

TEST_CASE("cli is deterministic under a fixed seed") {
  REQUIRE_FALSE(cli_path().empty());
  TempDir tmp;
  store_model(testmodels::three_state_example(60), tmp / "m.json");
  REQUIRE(run("simulate --model " + (tmp / "m.json") + " --nsim 30,30 --seed 42 --out " +
              (tmp / "s1.csv")) == 0);
  REQUIRE(run("simulate --model " + (tmp / "m.json") + " --nsim 30,30 --seed 42 --out " +
              (tmp / "s2.csv")) == 0);
  CHECK(slurp(tmp / "s1.csv") == slurp(tmp / "s2.csv"));
}

TEST_CASE("cli exit codes") {
  REQUIRE_FALSE(cli_path().empty());
  TempDir tmp;
  // invalid model json -> validation error (2)
  {
    std::ofstream bad(tmp / "bad.json");
    bad << "{\"J\": 2, \"init\": [0.5, 0.6], \"transition\": [[1,0],[0,1]], \"semi\": "
           "[false,false], \"M\": [5,5], \"sojourn\": {\"type\": \"none\"}, \"emission\": null}";
  }
  CHECK(run("simulate --model " + (tmp / "bad.json") + " --nsim 5 --out " + (tmp / "x.csv")) == 2);
  // unknown flag -> usage error (2)
  CHECK(run("simulate --bogus 1") == 2);
  // missing file -> 2
  CHECK(run("score --fit " + (tmp / "nope.json") + " --data " + (tmp / "nope.csv") + " --out " +
            (tmp / "o.csv")) == 2);
  // rul on a non-left-to-right model -> 2
  store_model(testmodels::three_state_example(60), tmp / "m.json");
  REQUIRE(run("simulate --model " + (tmp / "m.json") + " --nsim 20 --seed 1 --out " +
              (tmp / "d.csv")) == 0);
  CHECK(run("rul --fit " + (tmp / "m.json") + " --data " + (tmp / "d.csv") + " --out " +
            (tmp / "r.csv")) == 2);
}

TEST_CASE("cli rul runs on a left-to-right model") {
  REQUIRE_FALSE(cli_path().empty());
  TempDir tmp;
  store_model(testmodels::ltr_degradation_model(80), tmp / "ltr.json");
  REQUIRE(run("simulate --model " + (tmp / "ltr.json") + " --nsim 30,35 --seed 3 --out " +
              (tmp / "d.csv")) == 0);
  REQUIRE(run("rul --fit " + (tmp / "ltr.json") + " --data " + (tmp / "d.csv") +
              " --method smoothing --confidence mean --level 0.9 --out " + (tmp / "r.csv")) == 0);
  std::ifstream in(tmp / "r.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "seq_id,t,state,rul,rul_low,rul_up");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);
}
