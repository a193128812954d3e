#pragma once

#include "hetmeg/baselines.hpp"
#include "hetmeg/config.hpp"
#include "hetmeg/forward.hpp"
#include "hetmeg/geometry.hpp"
#include "hetmeg/optimizer.hpp"
#include "hetmeg/source_model.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hetmeg::harness {

inline constexpr const char* kCodeVersion = "hetmeg 0.1.0";

/// Mesh, sensors and leadfield; depends only on the [geometry] and [sensors] sections.
struct Geometry {
    geometry::CorticalMesh mesh;
    forward::SensorArray sensors;
    forward::LeadField leadfield;
};

Geometry build_geometry(const ExperimentConfig& cfg);
/// Identifies configurations sharing a Geometry.
std::string geometry_key(const ExperimentConfig& cfg);

struct Dataset {
    ExperimentConfig config;  // resolved: eps, sigma_b, sigma_n concrete
    Geometry geometry;
    source::PatchParams truth;  // j0 in SI
    Eigen::VectorXd jp_true;
    Eigen::VectorXd jb_true;
    Eigen::VectorXd data;
    Eigen::VectorXd noiseless;
    double sigma_b = 0.0;
    double sigma_n = 0.0;
    double eps = 0.0;
    std::string id;  // checksum over the numeric artifacts
};

Dataset simulate(const ExperimentConfig& cfg);
Dataset simulate(const ExperimentConfig& cfg, const Geometry& geometry);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
/// Verifies every file against the checksums in meta.ini; throws DataError.
Dataset load_dataset(const std::filesystem::path& dir);

struct MethodResult {
    Method method = Method::hetero;
    std::string dataset_id;
    ExperimentConfig config;  // solver settings actually used
    std::optional<source::PatchParams> patch;
    Eigen::VectorXd jp_hat;   // patch methods
    Eigen::VectorXd jb_hat;   // hetero
    Eigen::VectorXd j_hat;    // total estimated source, every method
    double sigma_b = 0.0;     // covariance used by the patch methods
    double sigma_n = 0.0;
    double phi = std::numeric_limits<double>::quiet_NaN();
    double psi = std::numeric_limits<double>::quiet_NaN();
    double residual_norm = 0.0;
    std::optional<optim::OptResult> search;
    std::optional<baselines::RegPath> path;
    double wall_seconds = 0.0;
};

/// Solver settings from `overrides` layered on the dataset's resolved config.
MethodResult solve(const Dataset& ds, Method method, const ExperimentConfig& settings);

void save_result(const MethodResult& res, const std::filesystem::path& dir);
MethodResult load_result(const std::filesystem::path& dir);

struct Metrics {
    double center_error = 0.0;  // rad on S
    double radius_error = 0.0;  // rad
    double amplitude_rel_error = 0.0;
    double dice = 0.0;
    double background_corr = std::numeric_limits<double>::quiet_NaN();
    double residual_rel = 0.0;
};

/// Relative threshold of the imaging patch-set rule: |J| > 0.5 * P95(|J|).
inline constexpr double kImagingSetFraction = 0.5;
inline constexpr double kImagingSetPercentile = 0.95;

double dice(const std::vector<bool>& a, const std::vector<bool>& b);
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
/// Nodes whose smeared indicator exceeds 0.5.
std::vector<bool> patch_set(const geometry::CorticalMesh& mesh, const source::PatchParams& p, double eps);
/// Nodes with |J| above kImagingSetFraction of the kImagingSetPercentile magnitude.
std::vector<bool> imaging_set(const Eigen::VectorXd& j);

Metrics evaluate(const Dataset& ds, const MethodResult& res);

std::vector<std::string> metrics_header();
std::vector<std::string> metrics_row(const Metrics& m);

// CLI-level operations.
void run_simulate(const std::filesystem::path& config_path, const std::filesystem::path& out_dir);
void run_solve(const std::filesystem::path& data_dir, Method method,
               const std::vector<std::pair<std::string, std::string>>& overrides,
               const std::filesystem::path& out_dir);
Metrics run_evaluate(const std::filesystem::path& data_dir, const std::filesystem::path& result_dir,
                     const std::optional<std::filesystem::path>& csv_path);

struct SweepCell {
    std::string value;
    int seed_index = 0;
    Method method = Method::hetero;
    Metrics metrics;
};

struct SweepResult {
    std::string key;
    std::vector<SweepCell> cells;
};

/// Full factorial over values x seeds x cfg.methods; seed index s offsets both
/// noise seeds. Cells run on an OpenMP worker pool.
SweepResult run_sweep(const ExperimentConfig& base, const std::string& key,
                      const std::vector<std::string>& values, int n_seeds);
void write_sweep(const SweepResult& sweep, const std::filesystem::path& out_dir);

double median(std::vector<double> v);
/// Interquartile range with linear interpolation between order statistics.
double iqr(std::vector<double> v);

} // namespace hetmeg::harness
