// Drives the bigap executable end to end.

#include "json.hpp"

#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result bigap(const std::string &args, const std::string &env = "") {
    const std::string cmd = env + " " + BIGAP_CLI_PATH + " " + args + " 2>/dev/null";
    Result r;
    FILE *pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0)
        r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path tmp(const std::string &name) {
    fs::create_directories(BIGAP_TEST_TMPDIR);
    return fs::path(BIGAP_TEST_TMPDIR) / name;
}

std::vector<std::string> lines(const std::string &s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

/// The trace with the time_s column blanked.
std::string without_time(const std::string &csv) {
    std::string out;
    for (const auto &l : lines(csv)) {
        const auto a = l.find(','), b = l.find(',', a + 1);
        out += l.substr(0, a + 1) + l.substr(b) + '\n';
    }
    return out;
}

constexpr const char *kHeader = "k,time_s,c_k,F,gap_proxy,res_proxy,gap_exact,res_exact,merit_V,ref_rel_err,status";

} // namespace

TEST_CASE("missing required flag is a configuration error") {
    CHECK(bigap("run").code == 1);
    CHECK(bigap("run --problem nope").code == 1);
    CHECK(bigap("run --problem synthetic --rho 0.6").code == 1);
    CHECK(bigap("--help").code == 0);
}

TEST_CASE("zero iterations give the initial row only") {
    const Result r = bigap("run --problem synthetic --n 10 --max-iters 0");
    CHECK(r.code == 0);
    const auto l = lines(r.out);
    REQUIRE(l.size() == 2);
    CHECK(l[0] == kHeader);
    CHECK(l[1].rfind("0,", 0) == 0);
}

TEST_CASE("benchmark configuration on a small synthetic instance") {
    const fs::path out = tmp("synthetic.csv");
    const Result r = bigap("run --problem synthetic --n 100 --q 1 --gamma1 1 --gamma2 0.1 --alpha 0.001 --eta 0.01 "
                           "--rho 0.3 --diag-every 1000 --out " + out.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("status=reference-met") != std::string::npos);
    const auto l = lines(slurp(out));
    REQUIRE(l.size() > 2);
    CHECK(l[0] == kHeader);
    CHECK(l.back().substr(l.back().rfind(',') + 1) == "reference-met");
}

TEST_CASE("runs are deterministic apart from wall time") {
    const fs::path a = tmp("det_a.csv"), b = tmp("det_b.csv");
    const std::string args = "run --problem sgl --max-iters 200 --diag-every 50 --seed 3 --out ";
    REQUIRE(bigap(args + a.string()).code == 0);
    REQUIRE(bigap(args + b.string()).code == 0);
    CHECK(without_time(slurp(a)) == without_time(slurp(b)));
}

TEST_CASE("json lines output") {
    const Result r = bigap("run --problem minimax-toy --max-iters 3 --diag-every 1 --format json-lines");
    CHECK(r.code == 0);
    const auto l = lines(r.out);
    REQUIRE(l.size() == 4);
    const auto last = nlohmann::json::parse(l.back());
    CHECK(last["k"] == 3);
    CHECK(last["status"] == "max-iters");
    CHECK(last["gap_exact"].is_number());
    CHECK(bigap("run --problem minimax-toy --format xml").code == 1);
}

TEST_CASE("diverging run reports an oracle failure") {
    CHECK(bigap("run --problem synthetic --n 20 --alpha 10 --max-iters 1000").code == 2);
}

TEST_CASE("config file with command-line override") {
    const fs::path cfg = tmp("run.ini");
    {
        std::ofstream f(cfg);
        f << "problem = synthetic\nn = 10\nmax-iters = 5\ndiag-every = 0\n";
    }
    Result r = bigap("run --config " + cfg.string());
    CHECK(r.code == 0);
    CHECK(lines(r.out).size() == 7);
    r = bigap("run --config " + cfg.string() + " --max-iters 2");
    CHECK(r.code == 0);
    CHECK(lines(r.out).size() == 4);
    const fs::path bad = tmp("bad.ini");
    {
        std::ofstream f(bad);
        f << "problem = synthetic\nno-such-key = 1\n";
    }
    CHECK(bigap("run --config " + bad.string()).code == 1);
}

TEST_CASE("sweep table") {
    const Result r = bigap("sweep --problem synthetic --n 20 --gamma2 0.1 --max-iters 60000 --diag-every 0 "
                           "--sweep-gamma1 1,3 --sweep-alpha 0.001,-1",
                           "BIGAP_THREADS=2");
    CHECK(r.code == 0);
    const auto l = lines(r.out);
    REQUIRE(l.size() == 5);
    CHECK(l[0] == "gamma1,gamma2,alpha,eta,rho,time_s,iters,status");
    CHECK(l[1].substr(l[1].rfind(',') + 1) == "ok");
    CHECK(l[2] == "1,0.10000000000000001,-1,0.01,0.29999999999999999,,,failed");
}

TEST_CASE("invalid BIGAP_THREADS") {
    CHECK(bigap("sweep --problem synthetic --n 5 --sweep-gamma1 1", "BIGAP_THREADS=abc").code == 1);
}

TEST_CASE("gradcheck exit codes") {
    CHECK(bigap("gradcheck --problem synthetic --n 5 --q 3").code == 0);
    const Result bad = bigap("gradcheck --problem quadratic-sabotaged");
    CHECK(bad.code == 3);
    CHECK(bad.out.find("FAIL") != std::string::npos);
    const Result none = bigap("gradcheck --problem quadratic-unconstrained");
    CHECK(none.code == 0);
    CHECK(none.out.find("n/a") != std::string::npos);
    CHECK(bigap("gradcheck --problem minimax-toy").code == 0);
}

TEST_CASE("sgl data dump") {
    const fs::path data = tmp("sgl.csv");
    CHECK(bigap("run --problem sgl --max-iters 0 --dump-data " + data.string()).code == 0);
    const auto l = lines(slurp(data));
    CHECK(l.size() == 501);
    CHECK(l[0].rfind("f0,f1,", 0) == 0);
    CHECK(bigap("run --problem synthetic --n 3 --max-iters 0 --dump-data " + data.string()).code == 1);
}
