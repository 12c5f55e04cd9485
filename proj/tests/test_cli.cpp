#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path work_dir() {
    static fs::path p = [] {
        fs::path d = fs::temp_directory_path() / ("recur_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Run cli(const std::string& args) {
    fs::path out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
    std::string cmd = std::string("\"") + RECUR_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                      err.string() + "\"";
    int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path write_file(const std::string& name, const std::string& body) {
    fs::path p = work_dir() / name;
    std::ofstream(p, std::ios::binary) << body;
    return p;
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("list-scenarios prints the library") {
    auto r = cli("list-scenarios");
    CHECK(r.code == 0);
    CHECK(count_lines(r.out) == 13);
    CHECK(r.out.find("S1/PPMS/effect/hetero2") != std::string::npos);
    CHECK(r.out.find("S2/PPMS/noeffect/homo") != std::string::npos);
}

TEST_CASE("samplesize schoenfeld") {
    auto r = cli("samplesize schoenfeld --alpha 0.05 --power 0.8 --hr 0.7");
    CHECK(r.code == 0);
    CHECK(r.out.find("246.79") != std::string::npos);
    CHECK(r.out.find("events = 247") != std::string::npos);
    auto one = cli("samplesize schoenfeld --hr 1");
    CHECK(one.code == 3);
    CHECK(one.err.find("HR_ONE") != std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
    CHECK(cli("fit --model cox --data x.csv --bogus").code == 1);
    CHECK(cli("simulate --scenario S1/PPMS/effect/homo").code == 1);
    CHECK(cli("nonsense").code == 1);
}

TEST_CASE("invalid data exits with 2 and a report") {
    auto bad = write_file("bad.csv",
                          "USUBJID,ARMCD,TSTART,TSTOP,TGAP,EVENT,SEVENT,NEVENTS\n"
                          "A,0,0,5,5,1,1,1\n"
                          "A,0,4,20,16,0,2,1\n");
    auto r = cli("fit --model cox --data \"" + bad.string() + "\"");
    CHECK(r.code == 2);
    CHECK(r.err.find("tstart of row 2 != tstop of row 1") != std::string::npos);
    CHECK(cli("validate --data \"" + bad.string() + "\"").code == 2);
    CHECK(cli("fit --model cox --data \"" + (work_dir() / "missing.csv").string() + "\"").code == 2);
}

TEST_CASE("simulate, validate, fit and mcf") {
    auto data = work_dir() / "sim.csv";
    auto a = cli("simulate --scenario S1/PPMS/effect/homo --seed 11 --n 200 --set n_first_events=50 --set end_recruit=30 --out \"" +
                 data.string() + "\"");
    REQUIRE(a.code == 0);
    std::string first = slurp(data);
    auto b = cli("simulate --scenario S1/PPMS/effect/homo --seed 11 --n 200 --set n_first_events=50 --set end_recruit=30");
    CHECK(b.code == 0);
    CHECK(b.out == first);

    CHECK(cli("validate --data \"" + data.string() + "\"").code == 0);

    auto f = cli("fit --model lwyy --data \"" + data.string() + "\"");
    CHECK(f.code == 0);
    CHECK(f.out.rfind("model,term,beta,se_naive,se_robust", 0) == 0);
    CHECK(count_lines(f.out) == 2);
    auto g = cli("fit --model pwp-cp --k 2 --data \"" + data.string() + "\"");
    CHECK(g.code == 0);
    CHECK(count_lines(g.out) == 3);
    CHECK(g.out.find("arm:2+") != std::string::npos);

    auto m = cli("mcf --data \"" + data.string() + "\" --test-tau 500");
    CHECK(m.code == 0);
    CHECK(m.out.rfind("ARMCD,time,cmf,variance,lower,upper", 0) == 0);
}

TEST_CASE("simulate S2 panels and derive") {
    auto panels = work_dir() / "panels.csv";
    auto r = cli("simulate --setup s2 --hr 0.7 --phi 0 --n 100 --set n_first_events=20 --set end_recruit=30 --seed 3 --emit-edss \"" +
                 panels.string() + "\"");
    REQUIRE(r.code == 0);
    CHECK(cli("validate --format edss --data \"" + panels.string() + "\"").code == 0);
    auto d = cli("derive --data \"" + panels.string() + "\" --timing confirmation");
    CHECK(d.code == 0);
    CHECK(d.out.rfind("USUBJID,ARMCD,TSTART,TSTOP,TGAP,EVENT,SEVENT,NEVENTS", 0) == 0);
}

TEST_CASE("simulate-study writes the run directory") {
    auto dir = work_dir() / "study";
    fs::remove_all(dir);
    auto r = cli("simulate-study --scenario S1/PPMS/noeffect/homo --set n=200 --set n_first_events=50 --set end_recruit=30 "
                 "--replicates 6 --threads 2 --seed 8 --quiet --out \"" + dir.string() + "\"");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "replicates.csv"));
    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(fs::exists(dir / "config.echo"));
    CHECK(count_lines(slurp(dir / "replicates.csv")) == 1 + 24);
    CHECK(r.out == slurp(dir / "summary.csv"));
}

TEST_CASE("samplesize nb and lwyy") {
    auto nb = cli("samplesize nb --rr 0.8 --rate 0.0054794520547945 --phi 0.5 --tau 365");
    CHECK(nb.code == 0);
    CHECK(nb.out.find("total") != std::string::npos);
    auto lw = cli("samplesize lwyy --rr 0.7 --phi 0.5 --rate 0.003 --tau 730");
    CHECK(lw.code == 0);
    CHECK(lw.out.find("n = ") != std::string::npos);
}
