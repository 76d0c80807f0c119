#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qla/cli.hpp"

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = qla::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string write_config(const std::string &name, const std::string &text) {
    auto dir = std::filesystem::temp_directory_path() / "qla_cli_tests";
    std::filesystem::create_directories(dir);
    auto path = dir / name;
    std::ofstream f(path);
    f << text;
    return path.string();
}

int count_lines(const std::string &s) {
    int n = 0;
    for (char c : s)
        if (c == '\n') ++n;
    return n;
}

std::vector<std::string> split_csv_row(const std::string &text, int row) {
    std::istringstream ss(text);
    std::string line;
    for (int i = 0; i <= row; ++i) std::getline(ss, line);
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    return cells;
}

const char *kVacation = R"({
  "arrival_rate": 1,
  "queue_kind": "mg1n_vacation",
  "service": {"family": "exponential", "rate": 2},
  "vacation": {"family": "erlang", "shape": 2, "rate": 0.5}
})";

}  // namespace

TEST_CASE("exact subcommand emits the expected csv") {
    auto path = write_config("vac.json", kVacation);
    auto r = run({"exact", "--model", path, "--sweep", "5:15:5", "--emit", "csv"});
    CHECK(r.code == 0);
    CHECK(split_csv_row(r.out, 0) == std::vector<std::string>{"N", "pi0N", "ploss_exact"});
    CHECK(count_lines(r.out) == 4);
    CHECK(split_csv_row(r.out, 1)[0] == "5");
    CHECK(split_csv_row(r.out, 3)[0] == "15");
}

TEST_CASE("csv output is byte-identical across runs") {
    auto path = write_config("vac.json", kVacation);
    std::vector<std::string> args = {"compare", "--model", path, "--sweep", "5:25:5",
                                     "--precision", "50"};
    auto a = run(args);
    auto b = run(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
}

TEST_CASE("gth and recursion solvers agree through the cli") {
    auto path = write_config("vac.json", kVacation);
    auto g = run({"exact", "--model", path, "--capacity", "12", "--solver", "gth",
                  "--precision", "50"});
    auto r = run({"exact", "--model", path, "--capacity", "12", "--solver", "recursion",
                  "--precision", "50"});
    CHECK(g.code == 0);
    CHECK(r.code == 0);
    double lg = std::stod(split_csv_row(g.out, 1)[2]);
    double lr = std::stod(split_csv_row(r.out, 1)[2]);
    CHECK(lg == doctest::Approx(lr).epsilon(1e-10));
}

TEST_CASE("compare reports the convergence ratio approaching one") {
    auto path = write_config("vac.json", kVacation);
    auto r = run({"compare", "--model", path, "--sweep", "5:60:5", "--precision", "50"});
    CHECK(r.code == 0);
    auto cells = split_csv_row(r.out, 12);  // N = 60
    CHECK(cells[0] == "60");
    CHECK(cells[1] == "SUBCRIT_NONGEOM");
    // the exact sequence sits at 1 + 3/N of the limit here, so the final-row
    // ratio is 1.05 to ten digits
    double ratio = std::stod(cells[4]);
    CHECK(ratio == doctest::Approx(1.05).epsilon(1e-8));
}

TEST_CASE("compare rows keep the loss in range and above the offset") {
    auto path = write_config("sup_cmp.json", R"({
      "arrival_rate": 2,
      "service": {"family": "exponential", "rate": 1},
      "vacation": {"family": "exponential", "rate": 1}
    })");
    auto r = run({"compare", "--model", path, "--sweep", "5:20:5", "--precision", "50"});
    CHECK(r.code == 0);
    for (int row = 1; row <= 4; ++row) {
        auto cells = split_csv_row(r.out, row);
        CHECK(cells[1] == "SUPERCRIT");
        double exact = std::stod(cells[2]);
        CHECK(exact >= 0.0);
        CHECK(exact <= 1.0);
        CHECK(exact >= 0.5 - 1e-12);
    }
}

TEST_CASE("asymptotic subcommand with exact columns") {
    auto path = write_config("vac.json", kVacation);
    auto r = run({"asymptotic", "--model", path, "--capacity", "30", "--with-exact",
                  "--precision", "50"});
    CHECK(r.code == 0);
    auto cells = split_csv_row(r.out, 1);
    CHECK(cells.size() == 9);
    CHECK(cells[1] == "SUBCRIT_NONGEOM");
    CHECK(std::stod(cells[3]) == doctest::Approx(1.5));
    CHECK(std::stod(cells[5]) == doctest::Approx(1.0 / 6).epsilon(1e-10));
}

TEST_CASE("simulate subcommand emits a row with the seed") {
    auto path = write_config("vac_sim.json", R"({
      "arrival_rate": 1,
      "service": {"family": "exponential", "rate": 2},
      "vacation": {"family": "exponential", "rate": 4}
    })");
    auto r = run({"simulate", "--model", path, "--capacity", "8", "--arrivals", "50000",
                  "--warmup", "5000", "--seed", "9"});
    CHECK(r.code == 0);
    auto cells = split_csv_row(r.out, 1);
    CHECK(cells[0] == "8");
    CHECK(cells[5] == "9");
    double point = std::stod(cells[1]);
    CHECK(point >= 0.0);
    CHECK(point <= 1.0);
}

TEST_CASE("kernel-dump lists the three sequences") {
    auto path = write_config("vac.json", kVacation);
    auto r = run({"kernel-dump", "--model", path, "--nmax", "6"});
    CHECK(r.code == 0);
    CHECK(split_csv_row(r.out, 0) == std::vector<std::string>{"j", "a_j", "nu_j", "b_j"});
    CHECK(count_lines(r.out) == 8);
    CHECK(std::stod(split_csv_row(r.out, 1)[1]) == doctest::Approx(2.0 / 3));
}

TEST_CASE("tv distance column appears on request") {
    auto path = write_config("vac.json", kVacation);
    auto r = run({"exact", "--model", path, "--sweep", "4:12:4", "--tv-tail", "40",
                  "--precision", "50"});
    CHECK(r.code == 0);
    CHECK(split_csv_row(r.out, 0).size() == 4);
    double tv1 = std::stod(split_csv_row(r.out, 1)[3]);
    double tv3 = std::stod(split_csv_row(r.out, 3)[3]);
    CHECK(tv1 > tv3);
    CHECK(tv3 > 0.0);
}

TEST_CASE("config errors exit 2") {
    auto bad = write_config("bad.json", R"({
      "arrival_rate": -1,
      "service": {"family": "exponential", "rate": 1},
      "vacation": {"family": "zero"}
    })");
    auto r = run({"exact", "--model", bad, "--capacity", "5"});
    CHECK(r.code == 2);
    CHECK(r.err.find("InvalidConfig") != std::string::npos);
    CHECK(run({"exact", "--model", "/missing.json", "--capacity", "5"}).code == 2);
    auto ok = write_config("vac.json", kVacation);
    CHECK(run({"exact", "--model", ok}).code == 2);             // no capacity
    CHECK(run({"exact", "--model", ok, "--capacity", "5", "--emit", "xml"}).code == 2);
    CHECK(run({"nonsense"}).code == 2);
}

TEST_CASE("numeric errors exit 3 with the error name on the diagnostic stream") {
    // rho < 1 with r = R_V* but the transform already above the identity:
    // no covered regime
    auto path = write_config("uncls.json", R"({
      "arrival_rate": 1,
      "service": {"family": "exponential", "rate": 2},
      "vacation": {"family": "exponential", "rate": 1.5}
    })");
    auto r = run({"asymptotic", "--model", path, "--capacity", "10"});
    CHECK(r.code == 3);
    CHECK(r.err.find("UnclassifiableError") != std::string::npos);

    // tv distance demands a stable queue
    auto sup = write_config("sup.json", R"({
      "arrival_rate": 2,
      "service": {"family": "exponential", "rate": 1},
      "vacation": {"family": "exponential", "rate": 1}
    })");
    auto r2 = run({"exact", "--model", sup, "--capacity", "10", "--tv-tail", "20"});
    CHECK(r2.code == 3);
    CHECK(r2.err.find("DomainError") != std::string::npos);
}

TEST_CASE("deep recursion auto-selects the high-precision tier") {
    auto path = write_config("vac.json", kVacation);
    // the tv column forces the recursion route past n = 30; without a pinned
    // precision the run must not die with PrecisionLoss
    auto r = run({"exact", "--model", path, "--capacity", "40", "--tv-tail", "30"});
    CHECK(r.code == 0);
    CHECK(r.err.find("50-digit") != std::string::npos);
    // pinning the precision keeps the hardware tier and hits the noise floor
    auto geo = write_config("vac_geo.json", R"({
      "arrival_rate": 1,
      "service": {"family": "exponential", "rate": 2},
      "vacation": {"family": "exponential", "rate": 4}
    })");
    auto pinned = run({"exact", "--model", geo, "--capacity", "60", "--tv-tail", "60",
                       "--precision", "16"});
    CHECK(pinned.code == 3);
    CHECK(pinned.err.find("PrecisionLoss") != std::string::npos);
}

TEST_CASE("QLA_PRECISION overrides the flag") {
    auto path = write_config("vac.json", kVacation);
    setenv("QLA_PRECISION", "50", 1);
    auto hi = run({"exact", "--model", path, "--capacity", "10", "--precision", "16"});
    unsetenv("QLA_PRECISION");
    auto lo = run({"exact", "--model", path, "--capacity", "10", "--precision", "16"});
    CHECK(hi.code == 0);
    CHECK(lo.code == 0);
    // the high-precision run prints far more digits
    CHECK(split_csv_row(hi.out, 1)[1].size() > split_csv_row(lo.out, 1)[1].size() + 10);
}

TEST_CASE("table emission and file output") {
    auto path = write_config("vac.json", kVacation);
    auto dir = std::filesystem::temp_directory_path() / "qla_cli_tests";
    auto outfile = (dir / "rows.csv").string();
    auto r = run({"exact", "--model", path, "--capacity", "6", "--out", outfile});
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    std::ifstream f(outfile);
    std::string first;
    std::getline(f, first);
    CHECK(first == "N,pi0N,ploss_exact");

    auto t = run({"exact", "--model", path, "--capacity", "6", "--emit", "table"});
    CHECK(t.code == 0);
    CHECK(t.out.find("ploss_exact") != std::string::npos);
}

TEST_CASE("gim1n configs route through the duality") {
    auto path = write_config("gim1.json", R"({
      "arrival_rate": 1,
      "queue_kind": "gim1n",
      "service": {"family": "exponential", "rate": 0.5}
    })");
    auto r = run({"exact", "--model", path, "--capacity", "10"});
    CHECK(r.code == 0);
    double loss = std::stod(split_csv_row(r.out, 1)[2]);
    double bd = 0.5 * std::pow(0.5, 10) / (1 - std::pow(0.5, 11));
    CHECK(loss == doctest::Approx(bd).epsilon(1e-9));

    auto a = run({"asymptotic", "--model", path, "--capacity", "10"});
    CHECK(a.code == 0);
    CHECK(split_csv_row(a.out, 1)[1] == "SUBCRIT_GEOM");
    CHECK(run({"exact", "--model", path, "--capacity", "5", "--tv-tail", "10"}).code == 2);
    CHECK(run({"simulate", "--model", path, "--capacity", "5"}).code == 2);
}
