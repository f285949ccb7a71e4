#include "varmin/problem_file.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>

namespace varmin::cli {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

using Section = std::map<std::string, Entry>;

[[noreturn]] void fail(const std::string& name, int line,
                       const std::string& msg) {
  throw ProblemFileError(name + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Cut the line at the first '#' or ';' that is not inside double quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"') quoted = !quoted;
    if (!quoted && (c == '#' || c == ';')) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& v, const std::string& name, int line) {
  if (v.size() >= 1 && v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      fail(name, line, "unterminated quoted value");
    return v.substr(1, v.size() - 2);
  }
  if (!v.empty() && v.back() == '"')
    fail(name, line, "unterminated quoted value");
  return v;
}

double number_of(const Entry& e, const std::string& name,
                 const std::string& key) {
  const char* s = e.value.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    fail(name, e.line, "value of '" + key + "' is not a number: '" + e.value +
                           "'");
  return v;
}

int integer_of(const Entry& e, const std::string& name,
               const std::string& key) {
  double v = number_of(e, name, key);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    fail(name, e.line, "value of '" + key + "' is not an integer: '" +
                           e.value + "'");
  return i;
}

bool bool_of(const Entry& e, const std::string& name, const std::string& key) {
  static const std::map<std::string, bool> words = {
      {"on", true},   {"off", false},  {"true", true}, {"false", false},
      {"yes", true},  {"no", false},   {"1", true},    {"0", false}};
  auto it = words.find(e.value);
  if (it == words.end())
    fail(name, e.line, "value of '" + key + "' is not a boolean: '" + e.value +
                           "' (use on/off)");
  return it->second;
}

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_')
    return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

/// Pull a key out of a section, or nothing when absent.
std::optional<Entry> take(Section& sec, const std::string& key) {
  auto it = sec.find(key);
  if (it == sec.end()) return std::nullopt;
  Entry e = it->second;
  sec.erase(it);
  return e;
}

void reject_leftovers(const Section& sec, const std::string& name,
                      const std::string& section_name) {
  if (sec.empty()) return;
  const auto& [key, entry] = *sec.begin();
  fail(name, entry.line,
       "unknown key '" + key + "' in [" + section_name + "]");
}

/// True when the expression mentions the dependent variable or its
/// derivative anywhere in the tree.
bool mentions_path_variables(const exprkit::Expr& e) {
  if (e.kind() == exprkit::Expr::Kind::Variable)
    return e.var() != exprkit::Var::X;
  for (std::size_t i = 0; i < e.child_count(); ++i)
    if (mentions_path_variables(e.child(i))) return true;
  return false;
}

exprkit::Expr parse_checked(const std::string& text,
                            const std::set<std::string>& param_names,
                            const std::string& name, int line,
                            const std::string& what) {
  try {
    return exprkit::parse(text, param_names);
  } catch (const exprkit::ParseError& pe) {
    fail(name, line,
         what + ": " + pe.what() + " (column " +
             std::to_string(pe.offset() + 1) + ")");
  }
}

}  // namespace

ProblemFile parse_problem_text(const std::string& text,
                               const std::string& display_name) {
  const std::string& name = display_name;

  std::map<std::string, Section> sections;
  std::map<std::string, int> header_lines;
  static const std::set<std::string> known_sections = {
      "problem", "params", "path", "analysis", "constraints"};

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  std::string current;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(name, lineno, "unterminated section header");
      std::string title = trim(s.substr(1, s.size() - 2));
      if (!known_sections.count(title))
        fail(name, lineno, "unknown section [" + title + "]");
      if (sections.count(title))
        fail(name, lineno, "duplicate section [" + title + "]");
      sections[title];
      header_lines[title] = lineno;
      current = title;
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      fail(name, lineno, "expected 'key = value' or '[section]'");
    if (current.empty())
      fail(name, lineno, "key outside of any section");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(name, lineno, "missing key before '='");
    if (value.empty()) fail(name, lineno, "empty value for '" + key + "'");
    Section& sec = sections[current];
    if (sec.count(key))
      fail(name, lineno, "duplicate key '" + key + "'");
    sec[key] = Entry{unquote(value, name, lineno), lineno};
  }

  ProblemFile pf;
  pf.name = display_name;
  pf.source = display_name;

  // --- [problem] ---------------------------------------------------------
  if (!sections.count("problem"))
    throw ProblemFileError(name + ": missing [problem] section");
  {
    Section& sec = sections["problem"];
    int hline = header_lines["problem"];
    auto lag = take(sec, "lagrangian");
    if (!lag) fail(name, hline, "missing key 'lagrangian' in [problem]");
    pf.lagrangian = lag->value;
    auto ea = take(sec, "a");
    auto eb = take(sec, "b");
    if (!ea) fail(name, hline, "missing key 'a' in [problem]");
    if (!eb) fail(name, hline, "missing key 'b' in [problem]");
    pf.a = number_of(*ea, name, "a");
    pf.b = number_of(*eb, name, "b");
    if (!(pf.a < pf.b))
      fail(name, eb->line, "domain must satisfy a < b (got a = " + ea->value +
                               ", b = " + eb->value + ")");
    if (auto v = take(sec, "variable")) {
      if (!is_identifier(v->value))
        fail(name, v->line,
             "'variable' must be an identifier: '" + v->value + "'");
      pf.variable = v->value;
    }
    reject_leftovers(sec, name, "problem");

    // --- [params] --------------------------------------------------------
    std::set<std::string> param_names;
    if (sections.count("params")) {
      for (const auto& [key, entry] : sections["params"]) {
        if (!is_identifier(key) || key == "x" || key == "y" || key == "yp" ||
            exprkit::is_known_function(key))
          fail(name, entry.line, "invalid parameter name '" + key + "'");
        pf.params[key] = number_of(entry, name, key);
        param_names.insert(key);
      }
    }
    parse_checked(pf.lagrangian, param_names, name, lag->line,
                  "in lagrangian");

    // --- [path] ----------------------------------------------------------
    pf.constrained = sections.count("constraints") != 0;
    if (pf.constrained && sections.count("path"))
      fail(name, header_lines["path"],
           "constrained problems determine their own stationary density; "
           "remove [path]");
    if (!pf.constrained) {
      if (!sections.count("path"))
        throw ProblemFileError(name + ": missing [path] section");
      Section& ps = sections["path"];
      int pline = header_lines["path"];
      auto mode = take(ps, "mode");
      if (!mode) fail(name, pline, "missing key 'mode' in [path]");
      if (mode->value == "solve_ivp") {
        pf.mode = PathMode::SolveIvp;
        auto ya = take(ps, "y_a");
        auto ypa = take(ps, "yp_a");
        if (!ya) fail(name, pline, "mode solve_ivp requires 'y_a'");
        if (!ypa) fail(name, pline, "mode solve_ivp requires 'yp_a'");
        pf.y_a = number_of(*ya, name, "y_a");
        pf.yp_a = number_of(*ypa, name, "yp_a");
        if (auto ex = take(ps, "expression"))
          fail(name, ex->line,
               "mode solve_ivp does not take 'expression' (exactly one path "
               "mode)");
      } else if (mode->value == "analytic") {
        pf.mode = PathMode::Analytic;
        auto ex = take(ps, "expression");
        if (!ex) fail(name, pline, "mode analytic requires 'expression'");
        pf.path_expression = ex->value;
        for (const char* k : {"y_a", "yp_a"})
          if (auto e = take(ps, k))
            fail(name, e->line,
                 std::string("mode analytic does not take '") + k +
                     "' (exactly one path mode)");
        exprkit::Expr pe = parse_checked(pf.path_expression, param_names,
                                         name, ex->line, "in path expression");
        if (mentions_path_variables(pe))
          fail(name, ex->line,
               "path expression must depend on " + pf.variable +
                   " and parameters only (found y or yp)");
      } else {
        fail(name, mode->line,
             "unknown path mode '" + mode->value +
                 "' (expected solve_ivp or analytic)");
      }
      reject_leftovers(ps, name, "path");
    }

    // --- [constraints] ---------------------------------------------------
    if (pf.constrained) {
      Section& cs = sections["constraints"];
      int cline = header_lines["constraints"];
      auto sig = take(cs, "sigma");
      if (!sig) fail(name, cline, "missing key 'sigma' in [constraints]");
      pf.sigma = number_of(*sig, name, "sigma");
      if (!(pf.sigma > 0.0))
        fail(name, sig->line, "'sigma' must be positive");
      reject_leftovers(cs, name, "constraints");
    }

    // --- [analysis] ------------------------------------------------------
    if (sections.count("analysis")) {
      Section& as = sections["analysis"];
      AnalysisToggles& t = pf.analysis;
      if (auto e = take(as, "legendre")) t.legendre = bool_of(*e, name, "legendre");
      if (auto e = take(as, "conjugate")) t.conjugate = bool_of(*e, name, "conjugate");
      if (auto e = take(as, "sturm")) t.sturm = bool_of(*e, name, "sturm");
      if (auto e = take(as, "convexity")) t.convexity = bool_of(*e, name, "convexity");
      if (auto e = take(as, "riccati")) t.riccati = bool_of(*e, name, "riccati");
      if (auto e = take(as, "second_variation_directions")) {
        t.second_variation_directions =
            integer_of(*e, name, "second_variation_directions");
        if (t.second_variation_directions < 0 ||
            t.second_variation_directions > 64)
          fail(name, e->line,
               "'second_variation_directions' must lie in [0, 64]");
      }
      if (auto e = take(as, "singular_epsilon")) {
        t.singular_epsilon = number_of(*e, name, "singular_epsilon");
        if (!(t.singular_epsilon > 0.0))
          fail(name, e->line, "'singular_epsilon' must be positive");
      }
      if (auto e = take(as, "conjugate_tolerance")) {
        t.conjugate_tolerance = number_of(*e, name, "conjugate_tolerance");
        if (!(t.conjugate_tolerance > 0.0))
          fail(name, e->line, "'conjugate_tolerance' must be positive");
      }
      reject_leftovers(as, name, "analysis");
    }
  }

  return pf;
}

ProblemFile load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ProblemFileError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  ProblemFile pf = parse_problem_text(buf.str(), path);
  pf.source = path;
  pf.name = std::filesystem::path(path).stem().string();
  return pf;
}

}  // namespace varmin::cli
