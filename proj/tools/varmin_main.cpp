#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "varmin/problem_file.hpp"
#include "varmin/report.hpp"

namespace fs = std::filesystem;

namespace {

int do_analyze(const std::string& file, const std::string& out_path,
               int jobs) {
  varmin::cli::ProblemFile pf = varmin::cli::load_problem_file(file);
  varmin::cli::RunResult res = varmin::cli::run_analysis(pf, jobs);
  std::string text = res.report.dump(2);
  text.push_back('\n');
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return 1;
    }
    out << text;
  } else {
    std::cout << text;
  }
  return res.exit_code;
}

int do_profile(const std::string& file, const std::string& what,
               int samples) {
  varmin::cli::ProblemFile pf = varmin::cli::load_problem_file(file);
  varmin::cli::emit_profile(pf, varmin::cli::parse_profile_kind(what),
                            samples, std::cout);
  return 0;
}

fs::path default_fixtures_dir(const char* argv0) {
  std::error_code ec;
  fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  if (ec && argv0) exe = fs::absolute(fs::path(argv0), ec);
  std::vector<fs::path> candidates;
  if (!exe.empty()) {
    fs::path d = exe.parent_path();
    candidates.push_back(d / "fixtures");
    candidates.push_back(d.parent_path() / "fixtures");
  }
  candidates.push_back(fs::current_path() / "fixtures");
  for (const fs::path& c : candidates)
    if (fs::is_directory(c, ec)) return c;
  return candidates.back();
}

std::vector<fs::path> fixture_files(const fs::path& dir) {
  std::error_code ec;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec))
    if (entry.path().extension() == ".prob") files.push_back(entry.path());
  if (ec)
    throw varmin::Error("cannot read fixtures directory " + dir.string());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw varmin::Error("no .prob files in " + dir.string());
  return files;
}

int do_fixtures_list(const fs::path& dir) {
  for (const fs::path& f : fixture_files(dir))
    std::cout << f.stem().string() << "\n";
  return 0;
}

int do_fixtures_run_all(const fs::path& dir, int jobs) {
  std::vector<fs::path> files = fixture_files(dir);
  struct Outcome {
    std::string name;
    int code = 1;
    std::string verdict = "?";
  };
  std::vector<Outcome> outcomes(files.size());

  auto run_one = [&](std::size_t i) {
    Outcome o;
    o.name = files[i].stem().string();
    try {
      varmin::cli::ProblemFile pf =
          varmin::cli::load_problem_file(files[i].string());
      varmin::cli::RunResult res = varmin::cli::run_analysis(pf);
      o.code = res.exit_code;
      if (res.report.contains("classification"))
        o.verdict =
            res.report["classification"]["verdict"].get<std::string>();
      if (res.report.contains("error"))
        o.verdict = "ERROR: " + res.report["error"].get<std::string>();
    } catch (const varmin::Error& e) {
      o.code = 1;
      o.verdict = std::string("ERROR: ") + e.what();
    }
    outcomes[i] = std::move(o);
  };

  if (jobs > 1) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < files.size(); i = next++) run_one(i);
    };
    std::vector<std::thread> pool;
    int nthreads = std::min<int>(jobs, static_cast<int>(files.size()));
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  } else {
    for (std::size_t i = 0; i < files.size(); ++i) run_one(i);
  }

  int failures = 0;
  for (const Outcome& o : outcomes) {
    std::printf("%-24s exit %d  %s\n", o.name.c_str(), o.code,
                o.verdict.c_str());
    if (o.code != 0) ++failures;
  }
  std::printf("%zu fixtures, %d failure%s\n", files.size(), failures,
              failures == 1 ? "" : "s");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "stationary-path analysis for one-dimensional variational problems"};
  app.set_version_flag("--version", std::string(varmin::cli::tool_name()) +
                                        " " + varmin::cli::tool_version());
  app.require_subcommand(1);

  std::string file, out_path, what, dir;
  int jobs = 1, samples = 101;

  CLI::App* analyze = app.add_subcommand(
      "analyze", "Analyze a problem file and print the JSON report");
  analyze->add_option("file", file, "problem file (INI-style)")->required();
  analyze->add_option("--out", out_path,
                      "write the report to this file instead of stdout");
  analyze
      ->add_option("--jobs", jobs,
                   "evaluate independent checks on this many threads")
      ->check(CLI::PositiveNumber);

  CLI::App* profile = app.add_subcommand(
      "profile", "Sample a derived quantity as CSV rows on stdout");
  profile->add_option("file", file, "problem file (INI-style)")->required();
  profile->add_option("--what", what, "one of P, Q, r, field")->required();
  profile->add_option("--samples", samples, "number of rows")
      ->check(CLI::Range(2, 1000000));

  CLI::App* fixtures =
      app.add_subcommand("fixtures", "Bundled regression problems");
  fixtures->require_subcommand(1);
  CLI::App* flist =
      fixtures->add_subcommand("list", "print fixture names, one per line");
  CLI::App* frun =
      fixtures->add_subcommand("run-all", "analyze every bundled fixture");
  for (CLI::App* sub : {flist, frun})
    sub->add_option(
        "--dir", dir,
        "fixtures directory (default: next to the executable or ./fixtures)");
  frun->add_option("--jobs", jobs, "run this many fixtures concurrently")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) return do_analyze(file, out_path, jobs);
    if (profile->parsed()) return do_profile(file, what, samples);
    fs::path d = dir.empty() ? default_fixtures_dir(argv[0]) : fs::path(dir);
    if (flist->parsed()) return do_fixtures_list(d);
    return do_fixtures_run_all(d, jobs);
  } catch (const varmin::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
