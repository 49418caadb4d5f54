#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flatlab/config.hpp"
#include "flatlab/csv.hpp"
#include "flatlab/experiment.hpp"

using namespace flatlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "flatlab_test_config_csv";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("config parser") {
    Config c = Config::parse(R"toml(
kind = ["rs-sweep", "bayes"]   # trailing comment
seed = 7

[model]
alpha = 0.7
rho = 5e-1
flag = true

[rs]
lambda = "logspace(-2, 2, 5)"
b = [
  -0.5, 0.0,
  0.25,
]
[compare.tol]
gen_err = 0.01
)toml");
    CHECK(c.strings("kind") == std::vector<std::string>{"rs-sweep", "bayes"});
    CHECK(c.number("seed") == 7.0);
    CHECK(c.number("model.alpha") == 0.7);
    CHECK(c.number("model.rho") == 0.5);
    CHECK(c.boolean_or("model.flag", false));
    CHECK(c.number_or("model.delta", 1.0) == 1.0);
    CHECK(c.numbers("rs.b") == std::vector<double>{-0.5, 0.0, 0.25});
    auto lam = c.numbers("rs.lambda");
    REQUIRE(lam.size() == 5);
    CHECK(lam[0] == doctest::Approx(0.01));
    CHECK(lam[4] == doctest::Approx(100.0));
    CHECK(c.numbers("model.alpha") == std::vector<double>{0.7});
    CHECK(c.number("compare.tol.gen_err") == 0.01);
    CHECK(c.to_json()["model.alpha"] == 0.7);
    CHECK_THROWS_AS(c.number("missing"), ConfigError);
    CHECK_THROWS_AS(c.number("kind"), ConfigError);
}

TEST_CASE("config parser rejects malformed input") {
    CHECK_THROWS_AS(Config::parse("alpha 0.7"), ConfigError);
    CHECK_THROWS_AS(Config::parse("[model\nalpha = 1"), ConfigError);
    CHECK_THROWS_AS(Config::parse("a = [1, 2"), ConfigError);
    CHECK_THROWS_AS(Config::parse("a = \"unterminated"), ConfigError);
    Config bad = Config::parse("g = \"linspace(1, 2)\"");
    CHECK_THROWS_AS(bad.numbers("g"), ConfigError);
}

TEST_CASE("grid helpers") {
    auto l = linspace(0.4, 1.0, 7);
    REQUIRE(l.size() == 7);
    CHECK(l.front() == 0.4);
    CHECK(l.back() == 1.0);
    CHECK(l[3] == doctest::Approx(0.7));
    CHECK(linspace(2.0, 3.0, 1) == std::vector<double>{2.0});
    auto g = logspace(-3, 0, 4);
    CHECK(g[1] == doctest::Approx(0.01));
    CHECK(g.back() == doctest::Approx(1.0));
    CHECK_THROWS_AS(linspace(0.0, 1.0, 0), ConfigError);
}

TEST_CASE("number formatting round-trips") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.0, 0.0}) CHECK(std::stod(format_number(x)) == x);
    CHECK(format_number(NAN) == "nan");
    CHECK(format_number(INFINITY) == "inf");
    CHECK(format_number(-INFINITY) == "-inf");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_bool(true) == "true");
}

TEST_CASE("csv write and read") {
    CsvTable t;
    t.header = {"x", "y", "note"};
    t.add_row({"1", "0.5", "a"});
    t.add_row({"2", "nan", ""});
    CHECK_THROWS_AS(t.add_row({"1"}), std::invalid_argument);
    auto p = scratch("rt.csv");
    t.write(p.string());
    CsvTable r = CsvTable::read(p.string());
    CHECK(r.header == t.header);
    CHECK(r.rows == t.rows);
    CHECK(r.column("y") == 1);
    CHECK(r.column("z") == -1);
    write_text(p, "a,b\n1,2\n3\n");
    CHECK_THROWS(CsvTable::read(p.string()));
    CHECK_THROWS(CsvTable::read(scratch("absent.csv").string()));
}

TEST_CASE("tolerance specification") {
    auto t = parse_tolerances("gen_err=0.01,M=1e-3");
    CHECK(t.size() == 2);
    CHECK(t["M"] == 1e-3);
    CHECK_THROWS_AS(parse_tolerances(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_tolerances("gen_err"), std::invalid_argument);
    CHECK_THROWS_AS(parse_tolerances("gen_err=abc"), std::invalid_argument);
    CHECK_THROWS_AS(parse_tolerances("gen_err=-1"), std::invalid_argument);
}

TEST_CASE("table comparison") {
    CsvTable a;
    a.header = {"k", "v", "w"};
    a.add_row({"1", "0.5", "1"});
    a.add_row({"2", "0.6", "inf"});
    CsvTable b = a;

    auto rep = compare_tables(a, b, {{"v", 0.0}, {"w", 0.0}}, {});
    CHECK(rep.passed());
    CHECK(rep.lines.size() == 4);

    std::swap(b.rows[0], b.rows[1]);
    CHECK(compare_tables(a, b, {{"v", 0.0}}, {"k"}).passed());
    CHECK_FALSE(compare_tables(a, b, {{"v", 0.05}}, {}).passed());

    b = a;
    b.rows[1][1] = "0.62";
    auto r2 = compare_tables(a, b, {{"v", 0.01}}, {"k"});
    CHECK(r2.failures == 1);
    CHECK(r2.max_deviation["v"] == doctest::Approx(0.02));
    CHECK(r2.summary().find("FAIL k=2 v") != std::string::npos);
    CHECK(compare_tables(a, b, {{"v", 0.03}}, {"k"}).passed());

    b.rows[1][1] = "nan";
    CHECK_FALSE(compare_tables(a, b, {{"v", 1e9}}, {"k"}).passed());

    b = a;
    b.rows[1][0] = "3";
    CHECK_THROWS_AS(compare_tables(a, b, {{"v", 0.1}}, {"k"}), KeyMismatch);
    CHECK_THROWS_AS(compare_tables(a, a, {{"missing", 0.1}}, {}), KeyMismatch);
    CHECK_THROWS_AS(compare_tables(a, a, {{"v", 0.1}}, {"nokey"}), KeyMismatch);
    b = a;
    b.rows.pop_back();
    CHECK_THROWS_AS(compare_tables(a, b, {{"v", 0.1}}, {}), KeyMismatch);
    // a denser first input is fine with keys, the reverse is not
    auto sparse = compare_tables(a, b, {{"v", 0.0}}, {"k"});
    CHECK(sparse.passed());
    CHECK(sparse.lines.size() == 1);
    CHECK_THROWS_AS(compare_tables(b, a, {{"v", 0.1}}, {"k"}), KeyMismatch);
    b.add_row(b.rows[0]);
    CHECK_THROWS_AS(compare_tables(a, b, {{"v", 0.1}}, {"k"}), KeyMismatch);
}

TEST_CASE("compare_files exit codes and report") {
    auto a = scratch("a.csv"), b = scratch("b.csv"), c = scratch("c.csv"), rep = scratch("report.csv");
    write_text(a, "k,v\n1,0.5\n2,0.7\n");
    write_text(b, "k,v\n2,0.7\n1,0.5\n");
    write_text(c, "k,v\n1,0.5\n2,0.9\n");
    std::ostringstream sink;
    CHECK(compare_files(a.string(), a.string(), "v=0", {}, sink) == 0);
    CHECK(compare_files(a.string(), b.string(), "v=0", {"k"}, sink) == 0);
    CHECK(compare_files(a.string(), c.string(), "v=0.1", {"k"}, sink, rep.string()) == 3);
    CsvTable r = CsvTable::read(rep.string());
    CHECK(r.rows.size() == 2);
    CHECK(r.rows[1][r.column("pass")] == "false");
    CHECK(compare_files(a.string(), c.string(), "x=0.1", {"k"}, sink) == 3);
    CHECK(compare_files(a.string(), scratch("absent.csv").string(), "v=0.1", {}, sink) == 1);
    CHECK(compare_files(a.string(), b.string(), "v", {}, sink) == 1);
}

TEST_CASE("config validation reports every violation") {
    Config c = Config::parse(R"toml(
kind = ["rs-sweep", "nonsense"]
[model]
alpha = -1
rho = 1.5
colour = 3
[rs]
lambda = []
[extra]
x = 1
)toml");
    auto v = validate_config(c);
    auto mentions = [&](const std::string& s) {
        for (const auto& m : v)
            if (m.find(s) != std::string::npos) return true;
        return false;
    };
    CHECK(v.size() >= 5);
    CHECK(mentions("nonsense"));
    CHECK(mentions("alpha"));
    CHECK(mentions("rho"));
    CHECK(mentions("colour"));
    CHECK(mentions("extra"));
    CHECK(mentions("lambda"));

    Config ok = Config::parse("kind = \"bayes\"\n[model]\nalpha = 0.7\ndelta = 1\nrho = 0.5\n");
    CHECK(validate_config(ok).empty());
}
