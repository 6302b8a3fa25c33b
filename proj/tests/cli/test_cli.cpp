#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run piw(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " PIW_CLI_PATH " " + args + " 2>/dev/null";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    std::random_device rd;
    dir = fs::temp_directory_path() / ("piw-cli-" + std::to_string(rd()));
    fs::create_directories(dir);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(piw("").code == 1);
  CHECK(piw("frobnicate").code == 1);
  CHECK(piw("compute --thr abc x.csv").code == 1);
  CHECK(piw("--help").code == 0);
}

TEST_CASE("compute on a constant trace") {
  Workspace ws;
  std::ofstream(ws / "flat.csv") << "t,lon,lat\n0,0.2,0\n0.5,0.2,0\n1.0,0.2,0\n";
  const auto r = piw("compute --condition low " + ws / "flat.csv");
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string header, lon;
  std::getline(lines, header);
  std::getline(lines, lon);
  CHECK(header.rfind("source,subject,trial,condition,axis,duty_cycle", 0) == 0);
  CHECK(lon.find(",lon,0,0,0,0,") != std::string::npos);
}

TEST_CASE("data errors exit 2, --keep-going skips them") {
  Workspace ws;
  std::ofstream(ws / "good.csv") << "t,lon,lat\n0,0,0\n0.5,0.1,0\n1.0,0.2,0.1\n";
  std::ofstream(ws / "bad.csv") << "t,lon,lat\n0,0,0\n0,0.1,0\n";
  CHECK(piw("compute " + ws / "good.csv " + ws / "bad.csv").code == 2);
  const auto r = piw("--keep-going compute --normalization none " + ws / "good.csv " + ws / "bad.csv");
  CHECK(r.code == 0);
  CHECK(r.out.find("good.csv") != std::string::npos);
  CHECK(r.out.find("bad.csv") == std::string::npos);
  std::ofstream(ws / "broken.json") << "{\"kind\": \"piw.metrics\", \"rows\": [";
  CHECK(piw("compare " + ws / "broken.json").code == 2);
  CHECK(piw("compare " + ws / "missing.csv").code == 1);  // nonexistent path is rejected while parsing arguments
}

TEST_CASE("full pipeline through files") {
  Workspace ws;
  REQUIRE(piw("--seed 3 simulate --replicates 8 --duration 60 --out-dir " + ws / "sim").code == 0);
  const auto manifest = json::parse(slurp(ws / "sim/manifest.json"));
  CHECK(manifest["trials"].size() == 16);

  REQUIRE(piw("compute --manifest " + ws / "sim/manifest.json" + " -o " + ws / "m.csv --fit-out " + ws / "fit.json")
              .code == 0);
  REQUIRE(piw("--format json compute --manifest " + ws / "sim/manifest.json" + " -o " + ws / "m.json").code == 0);
  // frozen fit reproduces the same table
  REQUIRE(piw("compute --manifest " + ws / "sim/manifest.json" + " --norm-fit " + ws / "fit.json" + " -o " +
              ws / "m2.csv")
              .code == 0);
  CHECK(slurp(ws / "m.csv") == slurp(ws / "m2.csv"));
  std::size_t rows = 0;
  std::istringstream lines(slurp(ws / "m.csv"));
  for (std::string l; std::getline(lines, l);) ++rows;
  CHECK(rows == 33);

  const auto cmp_csv = piw("compare " + ws / "m.csv");
  const auto cmp_json = piw("--format json compare " + ws / "m.json");
  REQUIRE(cmp_csv.code == 0);
  REQUIRE(cmp_json.code == 0);
  const auto doc = json::parse(cmp_json.out);
  CHECK(doc["variables"].size() == 6);
  CHECK(cmp_csv.out.find(doc["variables"][2]["variable"].get<std::string>()) != std::string::npos);

  const auto tr = piw("--format json train " + ws / "m.csv --no-profile --model-out " + ws / "model.json --report " +
                      ws / "report.json");
  REQUIRE(tr.code == 0);
  CHECK(tr.out.find("Tjur") != std::string::npos);
  const auto report = json::parse(slurp(ws / "report.json"));
  const auto pred = piw("predict " + ws / "m.csv --model " + ws / "model.json");
  REQUIRE(pred.code == 0);
  std::istringstream pl(pred.out);
  std::string header, first;
  std::getline(pl, header);
  std::getline(pl, first);
  CHECK(header.find(",p_high") != std::string::npos);
  const double p = std::stod(first.substr(first.rfind(',') + 1));
  CHECK(p == doctest::Approx(report["fitted"][0].get<double>()).epsilon(1e-12));

  const auto plot = piw("plotdata --format json " + ws / "m.csv");
  REQUIRE(plot.code == 0);
  CHECK(json::parse(plot.out)["scatter"].size() == 32);
}

TEST_CASE("predict with a mismatched model is a data error") {
  Workspace ws;
  REQUIRE(piw("--seed 1 simulate --replicates 4 --duration 30 --out-dir " + ws / "sim").code == 0);
  REQUIRE(piw("compute --manifest " + ws / "sim/manifest.json -o " + ws / "m.csv").code == 0);
  REQUIRE(piw("train " + ws / "m.csv --no-profile --predictors lon_piw1 --model-out " + ws / "model.json").code == 0);
  auto doc = json::parse(slurp(ws / "model.json"));
  doc["predictor_names"][0] = "yaw_piw1";
  std::ofstream(ws / "bad_model.json") << doc.dump();
  CHECK(piw("predict " + ws / "m.csv --model " + ws / "bad_model.json").code == 2);
}

TEST_CASE("separation exits 3") {
  Workspace ws;
  std::ofstream out(ws / "sep.csv");
  out << "source,subject,trial,condition,axis,duty_cycle,aggressiveness,agg_normalized,piw1\n";
  for (int i = 1; i <= 6; ++i) {
    for (const char* cond : {"low", "high"}) {
      const double base = std::string(cond) == "low" ? 0.1 : 0.5;
      out << cond << i << ",s," << i << "," << cond << ",lon,0.5,1,0.5," << base + 0.01 * i << "\n";
      out << cond << i << ",s," << i << "," << cond << ",lat,0.5,1,0.5," << 0.3 + 0.013 * i * (i % 3) << "\n";
    }
  }
  out.close();
  CHECK(piw("train " + ws / "sep.csv --no-profile --model-out " + ws / "model.json").code == 3);
}

TEST_CASE("determinism of stochastic commands") {
  Workspace ws;
  CHECK(piw("--seed 9 randomize --nback-stimuli 50").out == piw("--seed 9 randomize --nback-stimuli 50").out);
  CHECK(piw("--seed 9 randomize").out != piw("--seed 10 randomize").out);
  REQUIRE(piw("--seed 5 simulate --replicates 2 --duration 20 --out-dir " + ws / "a").code == 0);
  REQUIRE(piw("--seed 5 simulate --replicates 2 --duration 20 --out-dir " + ws / "b").code == 0);
  for (const auto& e : fs::directory_iterator(ws.dir / "a")) {
    CHECK(slurp(e.path()) == slurp(ws.dir / "b" / e.path().filename()));
  }
  REQUIRE(piw("--seed 5 simulate --subjects 2 --duration 20 --out-dir " + ws / "p").code == 0);
  const auto manifest = json::parse(slurp(ws / "p/manifest.json"));
  CHECK(manifest["trials"].size() == 24);
}

TEST_CASE("config file and environment layering") {
  Workspace ws;
  std::ofstream(ws / "piw.ini") << "[output]\nformat = json\n";
  std::ofstream(ws / "t.csv") << "t,lon,lat\n0,0,0\n0.5,0.1,0\n1.0,0.2,0.1\n";
  const auto from_file = piw("--config " + ws / "piw.ini" + " compute --normalization none " + ws / "t.csv");
  REQUIRE(from_file.code == 0);
  CHECK(from_file.out.front() == '{');
  const auto env_wins = piw("--config " + ws / "piw.ini" + " compute --normalization none " + ws / "t.csv",
                            "PIW_OUTPUT_FORMAT=csv");
  CHECK(env_wins.out.rfind("source,", 0) == 0);
  const auto flag_wins = piw("--format json --config " + ws / "piw.ini" + " compute --normalization none " +
                                 ws / "t.csv",
                             "PIW_OUTPUT_FORMAT=csv");
  CHECK(flag_wins.out.front() == '{');
}

TEST_CASE("stream over stdin") {
  Workspace ws;
  std::ofstream f(ws / "feed.ndjson");
  for (int i = 0; i <= 300; ++i) f << "{\"t\":" << i * 0.01 << ",\"lon\":0.1,\"lat\":0.0}\n";
  f.close();
  const auto r = piw("stream --stdin --window 1 --hop 1 < " + ws / "feed.ndjson");
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::vector<json> out;
  for (std::string l; std::getline(lines, l);) out.push_back(json::parse(l));
  REQUIRE(out.size() == 4);
  CHECK(out[0]["t_end"] == 1.0);
  CHECK(out.back()["type"] == "summary");
  CHECK(out.back()["records"] == 301);
}
