#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string output;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "paic_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Run run(const std::string& args, const fs::path& dir) {
  const auto log = dir / "stdout.txt";
  const std::string cmd = std::string(PAIC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

fs::path normal_data(const fs::path& dir, std::size_t n) {
  const auto y = oracle::normal_sample(n, 0.3, 1.0, 77);
  std::ostringstream os;
  os.precision(17);
  os << "y\n";
  for (double v : y) os << v << '\n';
  const auto path = dir / "y.csv";
  write_text(path, os.str());
  return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("compute with supplied draws") {
  const auto dir = scratch("supplied");
  const auto data = normal_data(dir, 40);
  const auto y = oracle::normal_sample(40, 0.3, 1.0, 77);
  const auto post = oracle::normal_posterior(y, 1.0, 0.0, 1e4, false);
  const auto mu = oracle::normal_sample(3000, post.mean, std::sqrt(post.var), 5);
  std::ostringstream os;
  os.precision(17);
  os << "theta_1,chain\n";
  for (double m : mu) os << m << ",1\n";
  write_text(dir / "draws.csv", os.str());

  const auto out = dir / "report.json";
  const auto r = run("compute --model normal --data " + data.string() + " --draws " +
                         (dir / "draws.csv").string() + " --out " + out.string(),
                     dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto j = nlohmann::json::parse(slurp(out));
  REQUIRE(j.at("reports").size() == 5);
  for (const auto& rep : j.at("reports")) {
    CHECK(rep.at("error").is_null());
    CHECK(rep.at("S") == 3000);
    CHECK(rep.at("n") == 40);
  }
  CHECK(j.at("tool_version").is_string());
  CHECK(j.at("config_hash").get<std::string>().size() == 16);
  CHECK(j.contains("seed"));
}

TEST_CASE("csv output is chosen from the extension") {
  const auto dir = scratch("csv");
  const auto data = normal_data(dir, 30);
  const auto out = dir / "report.csv";
  const auto r = run("compute --model normal --criteria paic,popt --data " + data.string() +
                         " --out " + out.string(),
                     dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto text = slurp(out);
  CHECK(text.rfind("criterion,value,fit,penalty,n,S,seed,warnings,error,tool_version,config_hash\n", 0) == 0);
  CHECK(text.find("\npaic,") != std::string::npos);
  CHECK(text.find("\npopt,") != std::string::npos);
}

TEST_CASE("flat prior refuses BPIC but still succeeds") {
  const auto dir = scratch("flat");
  const auto data = normal_data(dir, 30);
  const auto out = dir / "report.json";
  const auto r = run("compute --model normal-flat --criteria paic,bpic --data " + data.string() +
                         " --out " + out.string(),
                     dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto j = nlohmann::json::parse(slurp(out));
  REQUIRE(j.at("reports").size() == 2);
  CHECK(j["reports"][0]["criterion"] == "paic");
  CHECK(j["reports"][0]["error"].is_null());
  CHECK(j["reports"][1]["criterion"] == "bpic");
  CHECK(j["reports"][1]["error"].get<std::string>().find("ImproperPrior") != std::string::npos);
  CHECK(j["reports"][1]["value"].is_null());
}

TEST_CASE("malformed data exits with a validation code") {
  const auto dir = scratch("malformed");
  write_text(dir / "bad.csv", "y\n1.0\n2.0\noops\n");
  const auto r = run("compute --data " + (dir / "bad.csv").string() + " --out " +
                         (dir / "r.json").string(),
                     dir);
  CHECK(r.code == 2);
  CHECK(r.output.find("bad.csv:4") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "r.json"));
}

TEST_CASE("argument errors exit with a validation code") {
  const auto dir = scratch("args");
  CHECK(run("compute --bogus-flag", dir).code == 2);
  CHECK(run("compute --data x.csv", dir).code == 2);
  const auto data = normal_data(dir, 10);
  CHECK(run("compute --criteria aic --data " + data.string() + " --out " + (dir / "r.json").string(), dir)
            .code == 2);
  CHECK(run("compute --model probit --data " + data.string() + " --out " + (dir / "r.json").string(), dir)
            .code == 2);
  const auto v = run("--version", dir);
  CHECK(v.code == 0);
  CHECK(v.output.find("0.1.0") != std::string::npos);
}

TEST_CASE("normal experiment writes one cell per sample size") {
  const auto dir = scratch("normal_exp");
  const auto r = run("experiment normal --reps 100 --n 25,50,100 --seed 7 --out " + dir.string() + "/out",
                     dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "aggregates.json"));
  CHECK(j.at("cells").size() == 3);
  CHECK(j.at("seed") == 7);
  CHECK(fs::exists(dir / "out" / "records.csv"));
}

TEST_CASE("logit experiment is byte-for-byte reproducible") {
  const auto dir = scratch("logit_exp");
  const std::string common =
      "experiment logit --reps 3 --seed 7 --no-cv --chains 2 --draws-per-chain 2500 --warmup 1000 ";
  const auto a = run(common + "--threads 1 --out " + dir.string() + "/a", dir);
  REQUIRE_MESSAGE(a.code == 0, a.output);
  const auto b = run(common + "--threads 2 --out " + dir.string() + "/b", dir);
  REQUIRE_MESSAGE(b.code == 0, b.output);
  CHECK(slurp(dir / "a" / "records.csv") == slurp(dir / "b" / "records.csv"));
  CHECK(slurp(dir / "a" / "aggregates.json") == slurp(dir / "b" / "aggregates.json"));
}

}  // TEST_SUITE
