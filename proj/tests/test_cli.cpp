#include "hetmeg/config.hpp"
#include "hetmeg/io.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const std::string& env = "")
{
    const std::string cmd = env + " " HETMEG_CLI " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Workspace {
    fs::path root = fs::temp_directory_path() / "hetmeg_cli_test";
    Workspace()
    {
        fs::remove_all(root);
        fs::create_directories(root);
        hetmeg::harness::ExperimentConfig c;
        c.subdivisions = 2;
        c.n_sensors = 32;
        c.max_evals = 200;
        c.n_lambdas = 3;
        c.imaging_max_iter = 200;
        std::ofstream out(root / "config.ini");
        hetmeg::harness::write_config(out, c);
    }
    ~Workspace() { fs::remove_all(root); }
    std::string path(const std::string& name) const { return (root / name).string(); }
};

} // namespace

TEST_CASE("usage errors exit with 2")
{
    Workspace w;
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("simulate --out " + w.path("d")) == 2);
    CHECK(run("sweep --config " + w.path("config.ini") + " --sweep truth.r0=0.1 --seeds many --out x") == 2);
    CHECK(run("--help") == 0);

    REQUIRE(run("simulate --config " + w.path("config.ini") + " --out " + w.path("data")) == 0);
    CHECK(run("solve --method lasso --data " + w.path("data") + " --out " + w.path("r")) == 2);
    CHECK(run("solve --method hetero --data " + w.path("data") + " --out " + w.path("r") + " --set truth.r0=1") == 2);
    CHECK(run("solve --method hetero --data " + w.path("data") + " --out " + w.path("r") + " --set nonsense") == 2);
    CHECK(run("simulate --config " + w.path("missing.ini") + " --out " + w.path("d2")) == 2);
    CHECK(run("sweep --config " + w.path("config.ini") + " --sweep truth.bogus=1 --seeds 1 --out " + w.path("s")) == 2);
    CHECK(run("simulate --config " + w.path("config.ini") + " --out " + w.path("d3"), "HETMEG_THREADS=zero") == 2);
    CHECK(run("simulate --config " + w.path("config.ini") + " --out " + w.path("d3"), "HETMEG_THREADS=0") == 2);
}

TEST_CASE("data errors exit with 3")
{
    Workspace w;
    CHECK(run("solve --method hetero --data " + w.path("absent") + " --out " + w.path("r")) == 3);
    REQUIRE(run("simulate --config " + w.path("config.ini") + " --out " + w.path("data")) == 0);
    std::string bytes = hetmeg::io::read_text(w.root / "data" / "leadfield.hmeg");
    bytes[100] ^= 0x01;
    hetmeg::io::write_text(w.root / "data" / "leadfield.hmeg", bytes);
    CHECK(run("solve --method patch --data " + w.path("data") + " --out " + w.path("r")) == 3);
    CHECK(run("evaluate --data " + w.path("data") + " --result " + w.path("nothing")) == 3);
}

TEST_CASE("numerical failures exit with 4")
{
    Workspace w;
    REQUIRE(run("simulate --config " + w.path("config.ini") + " --out " + w.path("data")) == 0);
    CHECK(run("solve --method hetero --data " + w.path("data") + " --out " + w.path("r") +
              " --set solver.sigma_b=0 --set solver.sigma_n=0") == 4);
}

TEST_CASE("full command sequence")
{
    Workspace w;
    const std::string data = w.path("data");
    REQUIRE(run("simulate --config " + w.path("config.ini") + " --out " + data, "HETMEG_THREADS=1") == 0);
    for (const char* m : {"imaging", "patch", "hetero"}) {
        const std::string out = w.path(std::string("res_") + m);
        CHECK(run("solve --method " + std::string(m) + " --data " + data + " --out " + out) == 0);
        CHECK(run("evaluate --data " + data + " --result " + out + " --csv " + w.path("metrics.csv")) == 0);
    }
    std::ifstream in(w.root / "metrics.csv");
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 4);

    CHECK(run("sweep --config " + w.path("config.ini") + " --sweep noise.noise_ratio=0.05,0.1 --seeds 2 --out " +
              w.path("sweep"), "HETMEG_THREADS=2") == 0);
    CHECK(fs::exists(w.root / "sweep" / "sweep.csv"));
    CHECK(fs::exists(w.root / "sweep" / "summary.csv"));
}
