#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hetmeg::harness {

enum class Method { imaging, patch, hetero };

std::string to_string(Method m);
/// Throws UsageError on anything but imaging|patch|hetero.
Method parse_method(const std::string& s);

/// Flat INI experiment description. Every field has a concrete value after
/// resolution; `eps <= 0` and `sigma_b/sigma_n < 0` mean "derive from the dataset"
/// before resolution and never appear in saved metadata.
struct ExperimentConfig {
    // [geometry]
    int subdivisions = 4;
    double base_radius = 0.08;  // m
    double wrinkle_amp = 0.008;  // m
    int wrinkle_freq = 6;
    std::uint64_t geometry_seed = 7;

    // [sensors]
    int n_sensors = 128;
    double helmet_radius = 0.12;  // m
    double cap_angle = 1.6;       // rad

    // [truth]
    double theta0 = 0.4;
    double phi0 = -0.58;
    double r0 = 0.1;
    double j0_density = 0.6;  // nAm/mm^2

    // [noise]
    double background_ratio = 0.17;  // sigma_b / (j0 * mean node area)
    double noise_ratio = 0.1;        // sigma_n / ||L (Jp + Jb)||
    std::uint64_t background_seed = 1;
    std::uint64_t noise_seed = 2;

    // [solver]
    double eps = -1.0;  // rad; <= 0 -> mean edge arc of the sphere mesh
    double r_max = 0.3;
    int max_evals = 2000;
    double min_diag = 1e-3;
    double balance_eps = 1e-4;
    double polish_tol = 1e-6;
    double sigma_b = -1.0;  // < 0 -> dataset value
    double sigma_n = -1.0;  // < 0 -> dataset value
    // When > 0, sigma_n := value * sigma_b * ||L||_F / sqrt(N).
    double noise_ratio_normalized = 0.0;

    // [imaging]
    double alpha = 0.67;
    int n_lambdas = 25;
    double lambda_lo = 1e-4;
    double lambda_hi = 1e1;
    double imaging_tol = 1e-4;
    int imaging_max_iter = 3000;
    std::string tv_weights = "uniform";

    // [experiment]
    std::vector<Method> methods{Method::imaging, Method::patch, Method::hetero};

    /// Applies `section.key = value`; throws UsageError for unknown keys or bad values.
    void set(const std::string& dotted_key, const std::string& value);
    /// Current value of `section.key` as text.
    std::string get(const std::string& dotted_key) const;
    static const std::vector<std::string>& keys();

    void validate() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
void write_config(std::ostream& out, const ExperimentConfig& cfg);

} // namespace hetmeg::harness
