#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "flatlab/csv.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string output;
};

Result run(const std::string& args) {
    std::string cmd = std::string(FLATLAB_BINARY) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path workdir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / "flatlab_test_cli" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSmallRun = R"toml(
kind = ["rs-sweep", "replicated-sweep", "simulate-gd", "simulate-rsgd", "bayes"]
seed = 4

[model]
alpha = 0.7
delta = 1.0
rho = 0.5
n_dim = 60

[rs]
lambda = [0.1, 1.0, 10.0]
b = [0.0, -0.2]

[replicated]
y = [3]
cos_theta = [0.5]
norm = [0.3, 0.4]
b = 0.0

[gd]
lambda = [0.5, 2.0]
seeds = 3
epochs = 50
lr = 0.01

[rsgd]
y = [1, 3]
seeds = 2
cos_theta = [0.5]
norm = [0.3, 0.4]
b = 0.0
epochs = 40
lr = 0.01
optimizer = "adam"
lambda0 = 1e-2
lambda1 = 1e-2
lambda_max = 1e4

[output]
svg = false
)toml";

}  // namespace

TEST_CASE("version and usage") {
    CHECK(run("--version").code == 0);
    CHECK(run("").code == 1);
    CHECK(run("frobnicate").code == 1);
    CHECK(run("run /nonexistent/config.toml").code == 1);
}

TEST_CASE("bayes subcommand prints the baseline") {
    Result r = run("bayes --alpha 0.7 --delta 1 --rho 0.5");
    REQUIRE(r.code == 0);
    CHECK(r.output.rfind("m_opt,q_opt,b_opt,gen_err\n", 0) == 0);
    auto comma = r.output.rfind(',');
    CHECK(std::stod(r.output.substr(comma + 1)) == doctest::Approx(0.2605376).epsilon(1e-6));
    CHECK(run("bayes --rho 1.0").code == 1);
    CHECK(run("bayes --alpha -1").code == 1);
}

TEST_CASE("invalid configs exit with 1, list every violation and write nothing") {
    fs::path d = workdir("invalid");
    write_text(d / "bad.toml", R"toml(
kind = "rs-sweep"
[model]
alpha = 0.7
delta = 1.0
rho = 2.0
[rs]
lambda = []
b = [0.0]
lamda = 3
)toml");
    Result r = run("run " + (d / "bad.toml").string() + " --out-dir " + (d / "out").string());
    CHECK(r.code == 1);
    CHECK(r.output.find("rho") != std::string::npos);
    CHECK(r.output.find("rs.lambda") != std::string::npos);
    CHECK(r.output.find("rs.lamda") != std::string::npos);
    CHECK_FALSE(fs::exists(d / "out"));
}

TEST_CASE("runs are deterministic across thread counts") {
    fs::path d = workdir("determinism");
    write_text(d / "small.toml", kSmallRun);
    Result one = run("run " + (d / "small.toml").string() + " --threads 1 --out-dir " + (d / "t1").string());
    Result three = run("run " + (d / "small.toml").string() + " --threads 3 --out-dir " + (d / "t3").string());
    REQUIRE(one.code == 0);
    REQUIRE(three.code == 0);
    long files = 0;
    for (const auto& e : fs::directory_iterator(d / "t1")) {
        if (e.path().extension() != ".csv") continue;
        ++files;
        const fs::path other = d / "t3" / e.path().filename();
        REQUIRE(fs::exists(other));
        CHECK_MESSAGE(slurp(e.path()) == slurp(other), e.path().filename().string());
    }
    CHECK(files >= 6);
    CHECK(fs::exists(d / "t1" / "manifest.json"));
    CHECK(slurp(d / "t1" / "manifest.json").find("\"exit_code\": 0") != std::string::npos);

    // a different seed changes the simulations but not the theory
    Result other = run("run " + (d / "small.toml").string() + " --seed 5 --out-dir " + (d / "s5").string());
    REQUIRE(other.code == 0);
    REQUIRE(fs::exists(d / "t1" / "rs_sweep.csv"));
    CHECK(slurp(d / "t1" / "rs_sweep.csv") == slurp(d / "s5" / "rs_sweep.csv"));
    CHECK(slurp(d / "t1" / "gd_final.csv") != slurp(d / "s5" / "gd_final.csv"));
}

TEST_CASE("compare subcommand exit codes") {
    fs::path d = workdir("compare");
    write_text(d / "a.csv", "k,v\n1,0.5\n2,0.7\n");
    write_text(d / "b.csv", "k,v\n2,0.71\n1,0.5\n");
    write_text(d / "c.csv", "j,v\n1,0.5\n2,0.7\n");
    const std::string a = (d / "a.csv").string(), b = (d / "b.csv").string(), c = (d / "c.csv").string();
    CHECK(run("compare " + a + " " + a + " --tol v=0").code == 0);
    CHECK(run("compare " + a + " " + b + " --tol v=0.02 --keys k").code == 0);
    Result fail = run("compare " + a + " " + b + " --tol v=0.001 --keys k --report " + (d / "r.csv").string());
    CHECK(fail.code == 3);
    CHECK(fail.output.find("FAIL") != std::string::npos);
    CHECK(flatlab::CsvTable::read((d / "r.csv").string()).rows.size() == 2);
    CHECK(run("compare " + a + " " + c + " --tol v=0.1 --keys k").code == 3);
    CHECK(run("compare " + a + " " + (d / "none.csv").string() + " --tol v=0.1").code == 1);
    CHECK(run("compare " + a + " " + b).code == 1);
}

TEST_CASE("a failing comparison inside a run exits with 3") {
    fs::path d = workdir("run-compare");
    write_text(d / "cmp.toml", R"toml(
kind = ["rs-sweep", "compare"]
[model]
alpha = 0.7
delta = 1.0
rho = 0.5
[rs]
lambda = [1.0]
b = [0.0]
[compare]
theory = "rs_sweep.csv"
sim = "ref.csv"
keys = ["lambda"]
tol = "gen_err=1e-6"
)toml");
    fs::create_directories(d / "out");
    write_text(d / "out" / "ref.csv", "lambda,gen_err\n1,0.1\n");
    Result r = run("run " + (d / "cmp.toml").string() + " --out-dir " + (d / "out").string());
    CHECK(r.code == 3);
    CHECK(fs::exists(d / "out" / "compare_report.csv"));
}
