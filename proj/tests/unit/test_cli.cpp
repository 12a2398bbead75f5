#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(WAMS_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path temp_dir(const std::string& tag) {
  auto d = fs::temp_directory_path() / ("wams_cli_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("samplesize prints the minimum counts") {
  const auto r = run("samplesize --s 0.908 --s 0.186 --e 0.02 --population 86400");
  CHECK(r.status == 0);
  CHECK(r.out.find("n_min=7246.63") != std::string::npos);
  CHECK(r.out.find("n_min=330.65") != std::string::npos);
  CHECK(r.out.find("combined n_min=7246.63 n_ceil=7247") != std::string::npos);
}

TEST_CASE("samplesize reads a presample file") {
  const auto dir = temp_dir("pre");
  {
    std::ofstream f(dir / "v.txt");
    f << "1\n3\n";
  }
  const auto r = run("samplesize --presample " + (dir / "v.txt").string() + " --e 0.1");
  CHECK(r.status == 0);
  CHECK(r.out.find("S=1") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(run("samplesize --s 0.9").status == 2);           // --e missing
  CHECK(run("samplesize --s 0.9 --e 0").status == 2);     // e must be positive
  CHECK(run("frobnicate").status == 2);
  const auto dir = temp_dir("bad");
  {
    std::ofstream f(dir / "bad.scenario");
    f << "devices = 2\nnonsense = 1\n";
  }
  CHECK(run("simulate " + (dir / "bad.scenario").string() + " -o " + (dir / "o").string()).status == 2);
  fs::remove_all(dir);
}

TEST_CASE("simulate, analyze and report round trip") {
  const auto dir = temp_dir("sim");
  {
    std::ofstream f(dir / "s.scenario");
    f << "duration_s = 5\ndrain_s = 2\ndevices = 2\n[channel]\nt_p_ms = 100\n";
  }
  const auto sim = run("simulate " + (dir / "s.scenario").string() + " -o " + (dir / "sim").string());
  CHECK(sim.status == 0);
  CHECK(fs::exists(dir / "sim" / "capture.jsonl"));
  CHECK(fs::exists(dir / "sim" / "summary.csv"));

  const auto cap = (dir / "sim" / "capture.jsonl").string();
  const auto an = run("analyze " + cap + " -o " + (dir / "an").string());
  CHECK(an.status == 0);
  CHECK(an.out.rfind("device,avg_throughput_kbps", 0) == 0);

  const auto rep = run("report " + cap + " --csv");
  CHECK(rep.status == 0);
  CHECK(rep.out == an.out);

  // 5 s of capture: drawing 6 slots is impossible
  CHECK(run("analyze " + cap + " --sample-size 6 -o " + (dir / "x").string()).status == 2);
  CHECK(run("analyze " + cap + " --sample-size 5 -o " + (dir / "y").string()).status == 0);

  // a malformed line is skipped, not fatal
  {
    std::ifstream in(cap);
    std::ofstream out(dir / "mangled.jsonl");
    std::string line;
    int i = 0;
    while (std::getline(in, line)) {
      out << line << '\n';
      if (++i == 3) out << "{not json\n";
    }
  }
  const auto mangled = run("report " + (dir / "mangled.jsonl").string() + " --csv");
  CHECK(mangled.status == 0);
  CHECK(mangled.out == an.out);

  CHECK(run("report " + (dir / "missing.jsonl").string()).status != 0);
  fs::remove_all(dir);
}

TEST_CASE("emulate against a closed port exits nonzero") {
  const auto r = run("emulate --port 1 -n 1 --duration 2 --connect-attempts 1 --retry-ms 10");
  CHECK(r.status != 0);
}
