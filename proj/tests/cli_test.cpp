// Black-box tests of the command-line tool: every bundled fixture analyzed
// through a real subprocess, report fields checked against frozen values,
// determinism verified byte-for-byte, and the error/exit-code contract
// exercised with malformed inputs.  The binary location and the fixtures
// directory arrive as compile definitions from the build.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Cmd {
  int code = -1;
  std::string out;
};

// Runs the tool through the shell and captures one stream; `redirect`
// defaults to discarding stderr so `out` is stdout alone.
Cmd run_cli(const std::string& args,
            const std::string& redirect = "2>/dev/null") {
  std::string full =
      std::string("\"") + VARMIN_CLI_PATH + "\" " + args + " " + redirect;
  FILE* pipe = popen(full.c_str(), "r");
  REQUIRE(pipe != nullptr);
  Cmd r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fixture(const std::string& name) {
  return std::string("\"") + VARMIN_FIXTURES_DIR + "/" + name + ".prob\"";
}

ordered_json analyze(const std::string& name, int expect_code,
                     const std::string& extra = "") {
  Cmd r = run_cli("analyze " + fixture(name) + " " + extra);
  REQUIRE(r.code == expect_code);
  return ordered_json::parse(r.out);
}

std::vector<std::pair<double, double>> parse_csv(const std::string& text) {
  std::vector<std::pair<double, double>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    std::size_t comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    rows.emplace_back(std::strtod(line.c_str(), nullptr),
                      std::strtod(line.c_str() + comma + 1, nullptr));
  }
  return rows;
}

// Temp problem file helper for the malformed-input cases.
fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path dir = fs::temp_directory_path() / "varmin_cli_test";
  fs::create_directories(dir);
  fs::path file = dir / name;
  std::ofstream out(file);
  out << content;
  return file;
}

std::string strip_timings(ordered_json j) {
  j.erase("timings_ms");
  return j.dump(2);
}

}  // namespace

TEST_CASE("fixtures list prints the bundled names in order") {
  Cmd r = run_cli(std::string("fixtures list --dir \"") +
                  VARMIN_FIXTURES_DIR + "\"");
  CHECK(r.code == 0);
  CHECK(r.out ==
        "damped_oscillator\n"
        "entropy\n"
        "lane_emden_n0\n"
        "lane_emden_n1\n"
        "lane_emden_n5\n"
        "quantum_gravity_1d\n"
        "quartic_kink\n"
        "sqrt_hamiltonian\n");
}

TEST_CASE("damped oscillator report: conjugate point, brackets, directions") {
  ordered_json j = analyze("damped_oscillator", 0);

  CHECK(j["tool"]["name"] == "varmin");
  CHECK(j["problem"]["lagrangian"] ==
        "0.5*exp(beta*x)*(yp^2 - omega0^2*y^2)");
  CHECK(j["problem"]["variable"] == "t");
  CHECK(j["problem"]["parameters"]["beta"] == 0.5);
  CHECK(j["problem"]["path"]["mode"] == "solve_ivp");

  double expect = 2.0 * kPi / std::sqrt(3.75);
  CHECK(j["classification"]["verdict"] == "MINIMALITY_FAILS_BEYOND");
  double c = j["classification"]["conjugate_point"].get<double>();
  CHECK(std::abs(c - expect) <= 1e-6);
  CHECK(j["conjugate"]["certificate"] == "direct integration");
  CHECK(j["conjugate"]["zeros"].size() == 1);
  CHECK(j["conjugate"]["simple"][0] == true);
  CHECK(j["conjugate"]["search_exhausted"] == true);

  auto& cb = j["sturm"]["comparison"];
  REQUIRE(cb["applicable"] == true);
  CHECK(cb["gap_lower_bound"].get<double>() - 1e-6 <= c);
  CHECK(c <= cb["gap_upper_bound"].get<double>() + 1e-6);

  auto& sv = j["second_variation"]["values"];
  REQUIRE(sv.size() == 4);
  CHECK(sv[0].get<double>() < 0.0);  // b exceeds the conjugate point
  CHECK(sv[3].get<double>() > 0.0);
  CHECK(j["second_variation"]["all_positive"] == false);

  CHECK(j["riccati"]["max_abs_residual"].get<double>() <= 1e-6);
}

TEST_CASE("polytrope reports: global minimum, ladder, degenerate endpoint") {
  {
    ordered_json j = analyze("lane_emden_n0", 0);
    CHECK(j["classification"]["verdict"] == "GLOBAL_MINIMUM_BY_CONVEXITY");
    CHECK(j["classification"]["convexity"] == "CONVEX");
    CHECK(std::abs(j["problem"]["path"]["y_at_b"].get<double>() -
                   1.0 / 3.0) <= 1e-6);
  }
  {
    ordered_json j = analyze("lane_emden_n1", 0);
    CHECK(j["classification"]["verdict"] == "MINIMALITY_FAILS_BEYOND");
    CHECK(std::abs(j["classification"]["conjugate_point"].get<double>() -
                   kPi) <= 1e-5);
    CHECK(j["conjugate"]["certificate"] ==
          "normal form (degenerate endpoint)");
  }
  {
    ordered_json j = analyze("lane_emden_n5", 0);
    CHECK(j["classification"]["verdict"] == "LOCAL_MINIMUM");
    CHECK(j["conjugate"]["first"].is_null());
    CHECK(j["conjugate"]["search_exhausted"] == true);
    CHECK(j["legendre"]["sign"] == 1);
    CHECK(j["legendre"]["degenerate_left_endpoint"] == true);
    CHECK(j["riccati"]["max_abs_residual"].get<double>() <= 1e-6);
  }
}

TEST_CASE("no-conjugate-point fixtures certify local minima") {
  for (const char* name :
       {"quantum_gravity_1d", "sqrt_hamiltonian", "quartic_kink"}) {
    ordered_json j = analyze(name, 0);
    CHECK(j["classification"]["verdict"] == "LOCAL_MINIMUM");
    CHECK(j["conjugate"]["first"].is_null());
    CHECK(j["sturm"]["no_zeros_certificate"] ==
          "certified: no conjugate points");
    CHECK(j["classification"]["coercivity_bound"].get<double>() > 0.0);
  }
}

TEST_CASE("entropy report matches the Gaussian closed forms") {
  ordered_json j = analyze("entropy", 0);
  auto& m = j["multipliers"];
  CHECK(std::abs(m["lambda1"].get<double>() -
                 (1.0 - 0.5 * std::log(2.0 * kPi))) <= 1e-8);
  CHECK(std::abs(m["lambda2"].get<double>() - (-0.5)) <= 1e-10);
  CHECK(std::abs(m["residual_mass"].get<double>()) <= 1e-12);
  CHECK(std::abs(j["density"]["at_zero"].get<double>() -
                 1.0 / std::sqrt(2.0 * kPi)) <= 1e-8);
  CHECK(std::abs(j["density"]["entropy"].get<double>() -
                 0.5 * std::log(2.0 * kPi * std::exp(1.0))) <= 1e-8);
  CHECK(std::abs(j["determinant"]["value"].get<double>() - 4.0 * kPi) <=
        1e-8);
  CHECK(j["determinant"]["nonzero"] == true);
  CHECK(j["classification"]["verdict"] == "GLOBAL_MAXIMUM_BY_CONVEXITY");
}

TEST_CASE("reports are deterministic, also under --jobs") {
  ordered_json a = analyze("damped_oscillator", 0);
  ordered_json b = analyze("damped_oscillator", 0);
  ordered_json c = analyze("damped_oscillator", 0, "--jobs 3");
  CHECK(strip_timings(a) == strip_timings(b));
  CHECK(strip_timings(a) == strip_timings(c));
  CHECK(a.contains("timings_ms"));
}

TEST_CASE("profile emits CSV samples of the derived quantities") {
  {
    Cmd r = run_cli("profile " + fixture("lane_emden_n5") +
                    " --what r --samples 5");
    REQUIRE(r.code == 0);
    auto rows = parse_csv(r.out);
    REQUIRE(rows.size() == 5);
    // The first sample sits just inside the degenerate endpoint, where the
    // normal-form coefficient approaches 45/9 = 5.
    CHECK(std::abs(rows.front().second - 5.0) <= 1e-3);
    CHECK(std::abs(rows.back().first - 1.7) <= 1e-12);
    double r_end = 45.0 / std::pow(3.0 + 1.7 * 1.7, 2.0);
    CHECK(std::abs(rows.back().second - r_end) <= 1e-6);
  }
  {
    Cmd r = run_cli("profile " + fixture("damped_oscillator") +
                    " --what P --samples 6");
    REQUIRE(r.code == 0);
    auto rows = parse_csv(r.out);
    REQUIRE(rows.size() == 6);
    CHECK(rows[1].first == 1.0);
    CHECK(std::abs(rows[1].second - std::exp(0.5)) <= 1e-12);
  }
  {
    Cmd r = run_cli("profile " + fixture("quantum_gravity_1d") +
                    " --what field --samples 9");
    REQUIRE(r.code == 0);
    auto rows = parse_csv(r.out);
    REQUIRE(rows.size() == 9);
    CHECK(std::abs(rows.front().second) <= 1e-12);
    CHECK(rows.back().second > 1e4);  // sinh growth of the closed form
  }
  {
    Cmd r = run_cli("profile " + fixture("damped_oscillator") +
                    " --what bogus --samples 5");
    CHECK(r.code != 0);
    CHECK(r.out.empty());
  }
}

TEST_CASE("malformed problem files fail with line numbers and no report") {
  {
    fs::path f = write_temp("reversed_domain.prob",
                            "[problem]\n"
                            "lagrangian = \"yp^2\"\n"
                            "a = 1\n"
                            "b = 0\n");
    Cmd out = run_cli("analyze \"" + f.string() + "\"");
    CHECK(out.code == 1);
    CHECK(out.out.empty());
    Cmd err = run_cli("analyze \"" + f.string() + "\"", "2>&1 1>/dev/null");
    CHECK(err.out.find(":4:") != std::string::npos);
    CHECK(err.out.find("a < b") != std::string::npos);
  }
  {
    fs::path f = write_temp("unknown_key.prob",
                            "[problem]\n"
                            "lagrangian = \"yp^2\"\n"
                            "a = 0\n"
                            "b = 1\n"
                            "typo_key = 3\n");
    Cmd err = run_cli("analyze \"" + f.string() + "\"", "2>&1 1>/dev/null");
    CHECK(run_cli("analyze \"" + f.string() + "\"").code == 1);
    CHECK(err.out.find(":5:") != std::string::npos);
    CHECK(err.out.find("typo_key") != std::string::npos);
  }
  {
    fs::path f = write_temp("two_modes.prob",
                            "[problem]\n"
                            "lagrangian = \"yp^2\"\n"
                            "a = 0\n"
                            "b = 1\n"
                            "[path]\n"
                            "mode = solve_ivp\n"
                            "y_a = 0\n"
                            "yp_a = 1\n"
                            "expression = \"x\"\n");
    Cmd r = run_cli("analyze \"" + f.string() + "\"");
    CHECK(r.code == 1);
    CHECK(r.out.empty());
    Cmd err = run_cli("analyze \"" + f.string() + "\"", "2>&1 1>/dev/null");
    CHECK(err.out.find("exactly one path mode") != std::string::npos);
  }
  {
    Cmd r = run_cli("analyze /nonexistent/missing.prob");
    CHECK(r.code == 1);
    CHECK(r.out.empty());
  }
}

TEST_CASE("boundary conjugate point reports INDETERMINATE with exit 2") {
  fs::path f = write_temp("boundary.prob",
                          "[problem]\n"
                          "lagrangian = \"0.5*(yp^2 - y^2)\"\n"
                          "a = 0\n"
                          "b = 3.141592653589793\n"
                          "[path]\n"
                          "mode = solve_ivp\n"
                          "y_a = 0\n"
                          "yp_a = 1\n");
  Cmd r = run_cli("analyze \"" + f.string() + "\"");
  REQUIRE(r.code == 2);
  ordered_json j = ordered_json::parse(r.out);
  CHECK(j["classification"]["verdict"] == "INDETERMINATE");
}

TEST_CASE("non-stationary paths embed the error and exit 1") {
  fs::path f = write_temp("nonstationary.prob",
                          "[problem]\n"
                          "lagrangian = \"0.5*yp^2 - y\"\n"
                          "a = 0\n"
                          "b = 1\n"
                          "[path]\n"
                          "mode = analytic\n"
                          "expression = \"x^3\"\n");
  Cmd r = run_cli("analyze \"" + f.string() + "\"");
  REQUIRE(r.code == 1);
  ordered_json j = ordered_json::parse(r.out);  // report still emitted
  CHECK(j.contains("error"));
  CHECK(j["error"].get<std::string>().find("stationary") !=
        std::string::npos);
}

TEST_CASE("--out writes the report to a file instead of stdout") {
  fs::path target = fs::temp_directory_path() / "varmin_cli_test" /
                    "damped_report.json";
  fs::create_directories(target.parent_path());
  Cmd r = run_cli("analyze " + fixture("damped_oscillator") + " --out \"" +
                  target.string() + "\"");
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream in(target);
  REQUIRE(in.good());
  ordered_json j = ordered_json::parse(in);
  CHECK(j["classification"]["verdict"] == "MINIMALITY_FAILS_BEYOND");
}

TEST_CASE("fixtures run-all analyzes every bundled problem") {
  Cmd r = run_cli(std::string("fixtures run-all --jobs 4 --dir \"") +
                  VARMIN_FIXTURES_DIR + "\"");
  CHECK(r.code == 0);
  for (const char* name :
       {"damped_oscillator", "entropy", "lane_emden_n0", "lane_emden_n1",
        "lane_emden_n5", "quantum_gravity_1d", "quartic_kink",
        "sqrt_hamiltonian"})
    CHECK(r.out.find(name) != std::string::npos);
  CHECK(r.out.find("0 failures") != std::string::npos);
}
