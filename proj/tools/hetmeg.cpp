// hetmeg command line: simulate, solve, evaluate, sweep.
#include "hetmeg/error.hpp"
#include "hetmeg/harness.hpp"
#include "hetmeg/io.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <iostream>
#include <sstream>

namespace {

using namespace hetmeg;

std::pair<std::string, std::string> split_assignment(const std::string& s)
{
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("expected key=value, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

void apply_thread_cap()
{
    const char* env = std::getenv("HETMEG_THREADS");
    if (!env || !*env) return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw UsageError("HETMEG_THREADS must be a positive integer");
    omp_set_num_threads(static_cast<int>(n));
}

void print_metrics(const harness::Metrics& m)
{
    const auto header = harness::metrics_header();
    const auto row = harness::metrics_row(m);
    for (std::size_t k = 0; k < header.size(); ++k) std::cout << header[k] << " = " << row[k] << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Patch plus background source estimation for synthetic MEG"};
    app.require_subcommand(1);

    std::string config, out, data, result, method_name, csv, sweep_spec;
    std::vector<std::string> sets;
    int seeds = 1;

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset directory");
    sim->add_option("--config", config, "Experiment INI file")->required();
    sim->add_option("--out", out, "Dataset directory")->required();

    auto* sol = app.add_subcommand("solve", "Run one method on a dataset");
    sol->add_option("--method", method_name, "imaging, patch or hetero")->required();
    sol->add_option("--data", data, "Dataset directory")->required();
    sol->add_option("--out", out, "Result directory")->required();
    sol->add_option("--set", sets, "Override a solver.* or imaging.* key (key=value)");

    auto* ev = app.add_subcommand("evaluate", "Score a result against its dataset");
    ev->add_option("--data", data, "Dataset directory")->required();
    ev->add_option("--result", result, "Result directory")->required();
    ev->add_option("--csv", csv, "Append a metrics row to this CSV");

    auto* sw = app.add_subcommand("sweep", "Factorial sweep over one config key");
    sw->add_option("--config", config, "Base experiment INI file")->required();
    sw->add_option("--sweep", sweep_spec, "key=v1,v2,...")->required();
    sw->add_option("--seeds", seeds, "Seeds per value")->required();
    sw->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        apply_thread_cap();
        if (*sim) {
            harness::run_simulate(config, out);
        } else if (*sol) {
            const auto method = harness::parse_method(method_name);
            std::vector<std::pair<std::string, std::string>> overrides;
            for (const auto& s : sets) overrides.push_back(split_assignment(s));
            harness::run_solve(data, method, overrides, out);
        } else if (*ev) {
            std::optional<std::filesystem::path> csv_path;
            if (!csv.empty()) csv_path = csv;
            print_metrics(harness::run_evaluate(data, result, csv_path));
        } else if (*sw) {
            const auto [key, list] = split_assignment(sweep_spec);
            std::vector<std::string> values;
            std::istringstream ss(list);
            for (std::string v; std::getline(ss, v, ',');)
                if (!v.empty()) values.push_back(v);
            const auto base = harness::load_config(config);
            harness::write_sweep(harness::run_sweep(base, key, values, seeds), out);
        }
    } catch (const Error& e) {
        std::cerr << "hetmeg: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "hetmeg: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "hetmeg: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
