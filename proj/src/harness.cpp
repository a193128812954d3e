#include "hetmeg/harness.hpp"

#include "hetmeg/error.hpp"
#include "hetmeg/io.hpp"
#include "hetmeg/solver.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace hetmeg::harness {

namespace fs = std::filesystem;
using boost::property_tree::ptree;

namespace {

std::string hmeg_bytes(const Eigen::MatrixXd& m)
{
    std::ostringstream out(std::ios::binary);
    io::write_hmeg(out, m);
    return out.str();
}

std::string config_text(const ExperimentConfig& cfg)
{
    std::ostringstream out;
    write_config(out, cfg);
    return out.str();
}

std::string mesh_text(const geometry::CorticalMesh& mesh)
{
    std::ostringstream out;
    geometry::write_mesh(out, mesh);
    return out.str();
}

std::string sensors_text(const forward::SensorArray& s)
{
    io::CsvTable t;
    t.header = {"x", "y", "z", "ox", "oy", "oz"};
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::vector<std::string> row;
        for (int k = 0; k < 3; ++k) row.push_back(io::format_number(s.positions[i][k]));
        for (int k = 0; k < 3; ++k) row.push_back(io::format_number(s.orientations[i][k]));
        t.rows.push_back(std::move(row));
    }
    std::ostringstream out;
    io::write_csv(out, t);
    return out.str();
}

forward::SensorArray parse_sensors(const std::string& text)
{
    std::istringstream in(text);
    const io::CsvTable t = io::read_csv(in);
    if (t.header != std::vector<std::string>{"x", "y", "z", "ox", "oy", "oz"})
        throw DataError("sensors.csv has an unexpected header");
    forward::SensorArray s;
    for (const auto& row : t.rows) {
        Eigen::Vector3d p, o;
        for (int k = 0; k < 3; ++k) {
            p[k] = io::parse_number(row[k]);
            o[k] = io::parse_number(row[3 + k]);
        }
        s.positions.push_back(p);
        s.orientations.push_back(o);
    }
    return s;
}

ptree read_ini_file(const fs::path& path)
{
    ptree tree;
    std::istringstream in(io::read_text(path));
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return tree;
}

std::string ini_get(const ptree& tree, const std::string& key, const fs::path& where)
{
    const auto v = tree.get_optional<std::string>(key);
    if (!v) throw DataError(where.string() + " lacks " + key);
    return *v;
}

double ini_number(const ptree& tree, const std::string& key, const fs::path& where)
{
    return io::parse_number(ini_get(tree, key, where));
}

/// Writes `[section]` blocks in the order given.
std::string ini_text(const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>>& s)
{
    std::ostringstream out;
    for (std::size_t k = 0; k < s.size(); ++k) {
        out << (k ? "\n" : "") << '[' << s[k].first << "]\n";
        for (const auto& [key, value] : s[k].second) out << key << " = " << value << '\n';
    }
    return out.str();
}

// Files of a dataset directory and their checksum keys in meta.ini.
const std::vector<std::pair<std::string, std::string>> kDatasetFiles = {
    {"config", "config.ini"},         {"mesh", "mesh.txt"},
    {"sensors", "sensors.csv"},       {"leadfield", "leadfield.hmeg"},
    {"jp_true", "jp_true.hmeg"},      {"jb_true", "jb_true.hmeg"},
    {"data", "data.hmeg"},            {"noiseless", "field_noiseless.hmeg"},
};

std::string dataset_id(const Dataset& ds)
{
    return io::checksum(hmeg_bytes(ds.geometry.leadfield.matrix) + hmeg_bytes(ds.jp_true) +
                        hmeg_bytes(ds.jb_true) + hmeg_bytes(ds.data));
}

std::string to_string(optim::StopReason r) { return r == optim::StopReason::min_diag ? "min_diag" : "max_evals"; }

/// Solver-side sigmas: explicit settings win over the dataset values.
std::pair<double, double> resolve_sigmas(const Dataset& ds, const ExperimentConfig& s)
{
    const double sigma_b = s.sigma_b >= 0.0 ? s.sigma_b : ds.sigma_b;
    double sigma_n = s.sigma_n >= 0.0 ? s.sigma_n : ds.sigma_n;
    if (s.noise_ratio_normalized > 0.0) {
        const auto& L = ds.geometry.leadfield.matrix;
        sigma_n = s.noise_ratio_normalized * sigma_b * L.norm() / std::sqrt(static_cast<double>(L.rows()));
    }
    return {sigma_b, sigma_n};
}

double quantile(std::vector<double> v, double q)
{
    std::erase_if(v, [](double x) { return std::isnan(x); });
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace

Geometry build_geometry(const ExperimentConfig& cfg)
{
    Geometry g;
    g.mesh = geometry::make_wrinkled_cortex(cfg.subdivisions, cfg.base_radius, cfg.wrinkle_amp,
                                            cfg.wrinkle_freq, cfg.geometry_seed);
    g.sensors = forward::make_helmet_array(cfg.n_sensors, cfg.helmet_radius, cfg.cap_angle, g.mesh.center);
    g.leadfield = forward::build_leadfield(g.mesh, g.sensors);
    return g;
}

std::string geometry_key(const ExperimentConfig& cfg)
{
    std::string key;
    for (const auto& k : ExperimentConfig::keys())
        if (k.starts_with("geometry.") || k.starts_with("sensors.")) key += k + "=" + cfg.get(k) + ";";
    return key;
}

Dataset simulate(const ExperimentConfig& cfg) { return simulate(cfg, build_geometry(cfg)); }

Dataset simulate(const ExperimentConfig& cfg, const Geometry& geometry)
{
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    ds.geometry = geometry;
    const auto& mesh = ds.geometry.mesh;
    const auto m = static_cast<Eigen::Index>(mesh.size());

    ds.eps = cfg.eps > 0.0 ? cfg.eps : mesh.sphere.mean_edge_arc;
    ds.truth = {cfg.theta0, cfg.phi0, cfg.r0, cfg.j0_density * source::kNanoAmMeterPerMm2};
    ds.jp_true = source::make_patch_source(mesh, ds.truth, ds.eps);
    ds.sigma_b = source::background_sigma_from_ratio(mesh, ds.truth.j0, cfg.background_ratio);
    ds.jb_true = source::sample_background(m, ds.sigma_b, cfg.background_seed);
    const Eigen::VectorXd field = ds.geometry.leadfield.matrix * (ds.jp_true + ds.jb_true);
    ds.sigma_n = source::calibrate_sigma_n(field, cfg.noise_ratio);
    auto synth = source::synthesize_data(ds.geometry.leadfield, ds.jp_true, ds.jb_true, ds.sigma_n, cfg.noise_seed);
    ds.data = std::move(synth.data);
    ds.noiseless = std::move(synth.noiseless);

    ds.config.eps = ds.eps;
    if (ds.config.sigma_b < 0.0) ds.config.sigma_b = ds.sigma_b;
    if (ds.config.sigma_n < 0.0) ds.config.sigma_n = ds.sigma_n;
    ds.id = dataset_id(ds);
    return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir)
{
    fs::create_directories(dir);
    const std::map<std::string, std::string> contents = {
        {"config", config_text(ds.config)},
        {"mesh", mesh_text(ds.geometry.mesh)},
        {"sensors", sensors_text(ds.geometry.sensors)},
        {"leadfield", hmeg_bytes(ds.geometry.leadfield.matrix)},
        {"jp_true", hmeg_bytes(ds.jp_true)},
        {"jb_true", hmeg_bytes(ds.jb_true)},
        {"data", hmeg_bytes(ds.data)},
        {"noiseless", hmeg_bytes(ds.noiseless)},
    };
    std::vector<std::pair<std::string, std::string>> sums;
    for (const auto& [key, file] : kDatasetFiles) {
        const std::string& bytes = contents.at(key);
        io::write_text(dir / file, bytes);
        sums.emplace_back(key, io::checksum(bytes));
    }
    const auto& c = ds.geometry.mesh.center;
    const std::string meta = ini_text({
        {"dataset",
         {{"id", ds.id},
          {"code_version", kCodeVersion},
          {"n_nodes", std::to_string(ds.geometry.mesh.size())},
          {"n_sensors", std::to_string(ds.geometry.sensors.size())},
          {"center_x", io::format_number(c.x())},
          {"center_y", io::format_number(c.y())},
          {"center_z", io::format_number(c.z())}}},
        {"noise",
         {{"sigma_b", io::format_number(ds.sigma_b)},
          {"sigma_b_rule", "background_ratio * j0 * mean_node_area"},
          {"j0", io::format_number(ds.truth.j0)},
          {"mean_node_area", io::format_number(ds.geometry.mesh.mean_node_area())},
          {"sigma_n", io::format_number(ds.sigma_n)},
          {"sigma_n_rule", "noise_ratio * norm(L (jp + jb))"},
          {"eps", io::format_number(ds.eps)}}},
        {"checksums", sums},
    });
    io::write_text(dir / "meta.ini", meta);
}

Dataset load_dataset(const fs::path& dir)
{
    const fs::path meta_path = dir / "meta.ini";
    if (!fs::exists(meta_path)) throw DataError("no dataset at " + dir.string() + " (meta.ini missing)");
    const ptree meta = read_ini_file(meta_path);

    std::map<std::string, std::string> contents;
    for (const auto& [key, file] : kDatasetFiles) {
        if (!fs::exists(dir / file)) throw DataError("dataset file missing: " + (dir / file).string());
        std::string bytes = io::read_text(dir / file);
        const std::string expected = ini_get(meta, "checksums." + key, meta_path);
        if (io::checksum(bytes) != expected)
            throw DataError("checksum mismatch for " + (dir / file).string());
        contents[key] = std::move(bytes);
    }
    auto hmeg = [&contents](const std::string& key) {
        std::istringstream in(contents.at(key), std::ios::binary);
        return io::read_hmeg(in);
    };
    auto hmeg_vec = [&](const std::string& key) -> Eigen::VectorXd {
        const Eigen::MatrixXd m = hmeg(key);
        if (m.cols() != 1) throw DataError(key + " is not a column vector");
        return m.col(0);
    };

    Dataset ds;
    {
        std::istringstream in(contents.at("config"));
        try {
            ds.config = parse_config(in);
        } catch (const UsageError& e) {
            throw DataError(std::string("dataset config.ini: ") + e.what());
        }
    }
    const Eigen::Vector3d center(ini_number(meta, "dataset.center_x", meta_path),
                                 ini_number(meta, "dataset.center_y", meta_path),
                                 ini_number(meta, "dataset.center_z", meta_path));
    {
        std::istringstream in(contents.at("mesh"));
        ds.geometry.mesh = geometry::read_mesh(in, center);
    }
    ds.geometry.sensors = parse_sensors(contents.at("sensors"));
    ds.geometry.leadfield.matrix = hmeg("leadfield");
    ds.jp_true = hmeg_vec("jp_true");
    ds.jb_true = hmeg_vec("jb_true");
    ds.data = hmeg_vec("data");
    ds.noiseless = hmeg_vec("noiseless");

    const auto m = static_cast<Eigen::Index>(ds.geometry.mesh.size());
    const auto n = static_cast<Eigen::Index>(ds.geometry.sensors.size());
    if (ds.geometry.leadfield.matrix.rows() != n || ds.geometry.leadfield.matrix.cols() != m ||
        ds.jp_true.size() != m || ds.jb_true.size() != m || ds.data.size() != n || ds.noiseless.size() != n)
        throw DataError("dataset arrays have inconsistent dimensions");

    ds.sigma_b = ini_number(meta, "noise.sigma_b", meta_path);
    ds.sigma_n = ini_number(meta, "noise.sigma_n", meta_path);
    ds.eps = ini_number(meta, "noise.eps", meta_path);
    ds.truth = {ds.config.theta0, ds.config.phi0, ds.config.r0,
                ds.config.j0_density * source::kNanoAmMeterPerMm2};
    ds.id = ini_get(meta, "dataset.id", meta_path);
    if (dataset_id(ds) != ds.id) throw DataError("dataset id does not match its arrays");
    return ds;
}

MethodResult solve(const Dataset& ds, Method method, const ExperimentConfig& settings)
{
    settings.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto& mesh = ds.geometry.mesh;
    const auto& L = ds.geometry.leadfield.matrix;
    const double eps = settings.eps > 0.0 ? settings.eps : ds.eps;

    MethodResult res;
    res.method = method;
    res.dataset_id = ds.id;
    res.config = settings;
    res.config.eps = eps;

    solver::PatchSolveOptions opts;
    opts.optimizer.max_evals = settings.max_evals;
    opts.optimizer.min_diag = settings.min_diag;
    opts.optimizer.balance_eps = settings.balance_eps;
    opts.polish_tol = settings.polish_tol;
    const optim::Box box = solver::patch_box(settings.r_max);

    switch (method) {
    case Method::hetero: {
        const auto [sigma_b, sigma_n] = resolve_sigmas(ds, settings);
        res.sigma_b = sigma_b;
        res.sigma_n = sigma_n;
        const solver::CovarianceContext ctx(L, sigma_b, sigma_n);
        auto dec = solver::solve_heterogeneous(ctx, mesh, ds.data, box, opts, eps);
        res.patch = dec.patch;
        res.jp_hat = std::move(dec.jp_hat);
        res.jb_hat = std::move(dec.jb_hat);
        res.j_hat = res.jp_hat + res.jb_hat;
        res.phi = dec.phi_value;
        res.psi = dec.psi_value;
        res.residual_norm = dec.residual_norm;
        res.search = std::move(dec.search);
        break;
    }
    case Method::patch: {
        const double sigma_n = resolve_sigmas(ds, settings).second;
        res.sigma_b = 0.0;
        res.sigma_n = sigma_n;
        auto fit = baselines::solve_patch_only(mesh, L, ds.data, sigma_n, box, opts, eps);
        res.patch = fit.params;
        res.jp_hat = source::make_patch_source(mesh, fit.params, eps);
        res.j_hat = res.jp_hat;
        res.phi = fit.phi;
        res.residual_norm = (ds.data - L * res.j_hat).norm();
        res.search = std::move(fit.search);
        break;
    }
    case Method::imaging: {
        const auto weighting = settings.tv_weights == "inverse_length" ? baselines::EdgeWeighting::inverse_length
                                                                       : baselines::EdgeWeighting::uniform;
        const auto V = baselines::make_tv_operator(mesh, weighting);
        const auto grid = baselines::default_lambda_grid(L, ds.data, settings.n_lambdas, settings.lambda_lo,
                                                         settings.lambda_hi);
        auto path = baselines::select_lambda_gcv(L, ds.data, V, settings.alpha, grid, settings.imaging_tol,
                                                 settings.imaging_max_iter);
        res.j_hat = path.chosen_solution;
        res.residual_norm = (ds.data - L * res.j_hat).norm();
        res.path = std::move(path);
        break;
    }
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

void save_result(const MethodResult& res, const fs::path& dir)
{
    fs::create_directories(dir);
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections;
    sections.push_back({"result",
                        {{"method", to_string(res.method)},
                         {"dataset_id", res.dataset_id},
                         {"code_version", kCodeVersion},
                         {"settings_checksum", io::checksum(config_text(res.config))}}});
    std::vector<std::pair<std::string, std::string>> diag = {
        {"sigma_b", io::format_number(res.sigma_b)},
        {"sigma_n", io::format_number(res.sigma_n)},
        {"phi", io::format_number(res.phi)},
        {"psi", io::format_number(res.psi)},
        {"residual_norm", io::format_number(res.residual_norm)},
    };
    if (res.search) {
        diag.emplace_back("evals", std::to_string(res.search->evals));
        diag.emplace_back("stop", to_string(res.search->stop));
    }
    sections.push_back({"diagnostics", diag});
    if (res.patch) {
        sections.push_back({"patch",
                            {{"theta0", io::format_number(res.patch->theta0)},
                             {"phi0", io::format_number(res.patch->phi0)},
                             {"r0", io::format_number(res.patch->r0)},
                             {"j0", io::format_number(res.patch->j0)},
                             {"j0_density", io::format_number(res.patch->j0 / source::kNanoAmMeterPerMm2)}}});
    }
    if (res.path) {
        const auto k = static_cast<std::size_t>(res.path->chosen_index);
        sections.push_back({"imaging",
                            {{"chosen_index", std::to_string(res.path->chosen_index)},
                             {"chosen_lambda", io::format_number(res.path->lambdas.at(k))},
                             {"gcv_rule", "n * residual^2 / (n - support)^2"},
                             {"set_rule", "abs(J) > 0.5 * quantile95(abs(J))"}}});
    }
    io::write_text(dir / "result.ini", ini_text(sections));
    io::write_text(dir / "settings.ini", config_text(res.config));
    io::write_hmeg(dir / "j_hat.hmeg", res.j_hat);
    if (res.jp_hat.size()) io::write_hmeg(dir / "jp_hat.hmeg", res.jp_hat);
    if (res.jb_hat.size()) io::write_hmeg(dir / "jb_hat.hmeg", res.jb_hat);
    if (res.search) {
        std::ofstream out(dir / "trace.csv");
        optim::write_trace_csv(out, *res.search);
    }
    if (res.path) {
        std::ofstream out(dir / "regpath.csv");
        baselines::write_regpath_csv(out, *res.path);
    }
    // Kept apart from result.ini so the numeric artifacts stay reproducible byte for byte.
    io::write_text(dir / "timing.ini", ini_text({{"timing", {{"wall_seconds", io::format_number(res.wall_seconds)}}}}));
}

MethodResult load_result(const fs::path& dir)
{
    const fs::path path = dir / "result.ini";
    if (!fs::exists(path)) throw DataError("no result at " + dir.string() + " (result.ini missing)");
    const ptree tree = read_ini_file(path);
    MethodResult res;
    try {
        res.method = parse_method(ini_get(tree, "result.method", path));
        std::istringstream in(io::read_text(dir / "settings.ini"));
        res.config = parse_config(in);
    } catch (const UsageError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    res.dataset_id = ini_get(tree, "result.dataset_id", path);
    res.sigma_b = ini_number(tree, "diagnostics.sigma_b", path);
    res.sigma_n = ini_number(tree, "diagnostics.sigma_n", path);
    res.phi = ini_number(tree, "diagnostics.phi", path);
    res.psi = ini_number(tree, "diagnostics.psi", path);
    res.residual_norm = ini_number(tree, "diagnostics.residual_norm", path);
    if (tree.get_child_optional("patch")) {
        res.patch = source::PatchParams{ini_number(tree, "patch.theta0", path), ini_number(tree, "patch.phi0", path),
                                        ini_number(tree, "patch.r0", path), ini_number(tree, "patch.j0", path)};
    }
    res.j_hat = io::read_hmeg_vector(dir / "j_hat.hmeg");
    if (fs::exists(dir / "jp_hat.hmeg")) res.jp_hat = io::read_hmeg_vector(dir / "jp_hat.hmeg");
    if (fs::exists(dir / "jb_hat.hmeg")) res.jb_hat = io::read_hmeg_vector(dir / "jb_hat.hmeg");
    if (fs::exists(dir / "timing.ini"))
        res.wall_seconds = ini_number(read_ini_file(dir / "timing.ini"), "timing.wall_seconds", dir / "timing.ini");
    return res;
}

double dice(const std::vector<bool>& a, const std::vector<bool>& b)
{
    if (a.size() != b.size()) throw UsageError("dice: set sizes differ");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i];
        nb += b[i];
        both += a[i] && b[i];
    }
    if (na + nb == 0) return 0.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    if (a.size() != b.size() || a.size() < 2) return std::nan("");
    const Eigen::ArrayXd x = a.array() - a.mean();
    const Eigen::ArrayXd y = b.array() - b.mean();
    const double den = std::sqrt((x * x).sum() * (y * y).sum());
    if (!(den > 0.0)) return std::nan("");
    return (x * y).sum() / den;
}

std::vector<bool> patch_set(const geometry::CorticalMesh& mesh, const source::PatchParams& p, double eps)
{
    const Eigen::VectorXd h = source::patch_indicator(mesh, p.center(), p.r0, eps);
    std::vector<bool> out(h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) out[i] = h[i] > 0.5;
    return out;
}

std::vector<bool> imaging_set(const Eigen::VectorXd& j)
{
    std::vector<double> mag(j.data(), j.data() + j.size());
    for (auto& v : mag) v = std::abs(v);
    const double threshold = kImagingSetFraction * quantile(mag, kImagingSetPercentile);
    std::vector<bool> out(j.size());
    for (Eigen::Index i = 0; i < j.size(); ++i) out[i] = std::abs(j[i]) > threshold;
    return out;
}

Metrics evaluate(const Dataset& ds, const MethodResult& res)
{
    const auto& mesh = ds.geometry.mesh;
    const auto m = static_cast<Eigen::Index>(mesh.size());
    if (res.j_hat.size() != m) throw DataError("result does not match the dataset mesh");
    const std::vector<bool> truth_set = patch_set(mesh, ds.truth, ds.eps);
    const Eigen::Vector3d s_true = ds.truth.center();

    Metrics out;
    std::vector<bool> est_set;
    if (res.patch) {
        est_set = patch_set(mesh, *res.patch, ds.eps);
        out.center_error = geometry::geodesic_dist_on_sphere(s_true, res.patch->center());
        out.radius_error = std::abs(res.patch->r0 - ds.truth.r0);
        out.amplitude_rel_error = std::abs(res.patch->j0 - ds.truth.j0) / std::abs(ds.truth.j0);
    } else {
        est_set = imaging_set(res.j_hat);
        Eigen::Vector3d c = Eigen::Vector3d::Zero();
        double amp = 0.0, area = 0.0;
        std::size_t count = 0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!est_set[i]) continue;
            c += std::abs(res.j_hat[i]) * mesh.sphere.vertices[i];
            amp += res.j_hat[i];
            area += mesh.node_areas[i];
            ++count;
        }
        if (count == 0 || c.norm() == 0.0) {
            out.center_error = std::numbers::pi;
            out.radius_error = ds.truth.r0;
            out.amplitude_rel_error = 1.0;
        } else {
            out.center_error = geometry::geodesic_dist_on_sphere(s_true, c.normalized());
            // Radius of the spherical cap covering the same fraction of the sphere.
            const double r_hat = std::acos(std::clamp(1.0 - 2.0 * count / static_cast<double>(m), -1.0, 1.0));
            out.radius_error = std::abs(r_hat - ds.truth.r0);
            out.amplitude_rel_error = std::abs(amp / area - ds.truth.j0) / std::abs(ds.truth.j0);
        }
    }
    out.dice = dice(truth_set, est_set);
    if (res.jb_hat.size() == m) out.background_corr = pearson(res.jb_hat, ds.jb_true);
    const double d_norm = ds.data.norm();
    out.residual_rel = d_norm > 0.0 ? (ds.data - ds.geometry.leadfield.matrix * res.j_hat).norm() / d_norm : 0.0;
    return out;
}

std::vector<std::string> metrics_header()
{
    return {"center_error", "radius_error", "amplitude_rel_error", "dice", "background_corr", "residual_rel"};
}

std::vector<std::string> metrics_row(const Metrics& m)
{
    return {io::format_number(m.center_error), io::format_number(m.radius_error),
            io::format_number(m.amplitude_rel_error), io::format_number(m.dice),
            io::format_number(m.background_corr), io::format_number(m.residual_rel)};
}

void run_simulate(const fs::path& config_path, const fs::path& out_dir)
{
    save_dataset(simulate(load_config(config_path.string())), out_dir);
}

void run_solve(const fs::path& data_dir, Method method,
               const std::vector<std::pair<std::string, std::string>>& overrides, const fs::path& out_dir)
{
    const Dataset ds = load_dataset(data_dir);
    ExperimentConfig settings = ds.config;
    for (const auto& [key, value] : overrides) {
        if (!key.starts_with("solver.") && !key.starts_with("imaging."))
            throw UsageError("--set only accepts solver.* and imaging.* keys, got '" + key + "'");
        settings.set(key, value);
    }
    save_result(solve(ds, method, settings), out_dir);
}

Metrics run_evaluate(const fs::path& data_dir, const fs::path& result_dir, const std::optional<fs::path>& csv_path)
{
    const Dataset ds = load_dataset(data_dir);
    const MethodResult res = load_result(result_dir);
    if (res.dataset_id != ds.id)
        throw DataError("result " + result_dir.string() + " was computed on dataset " + res.dataset_id +
                        ", not " + ds.id);
    const Metrics m = evaluate(ds, res);
    if (csv_path) {
        const bool fresh = !fs::exists(*csv_path) || fs::file_size(*csv_path) == 0;
        std::ofstream out(*csv_path, std::ios::app);
        if (!out) throw DataError("cannot open " + csv_path->string());
        io::CsvTable row;
        row.header = {"dataset_id", "method"};
        for (auto& h : metrics_header()) row.header.push_back(h);
        std::vector<std::string> cells = {ds.id, to_string(res.method)};
        for (auto& v : metrics_row(m)) cells.push_back(v);
        if (fresh) {
            row.rows.push_back(cells);
            io::write_csv(out, row);
        } else {
            for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
            out << '\n';
        }
    }
    return m;
}

SweepResult run_sweep(const ExperimentConfig& base, const std::string& key, const std::vector<std::string>& values,
                      int n_seeds)
{
    if (n_seeds < 1) throw UsageError("--seeds must be >= 1");
    if (values.empty()) throw UsageError("sweep needs at least one value");
    (void)base.get(key);  // rejects unknown keys

    struct Job {
        ExperimentConfig cfg;
        std::string value;
        int seed = 0;
        std::string geometry;
    };
    std::vector<Job> jobs;
    std::map<std::string, Geometry> geometries;
    for (const auto& v : values) {
        ExperimentConfig cfg = base;
        cfg.set(key, v);
        cfg.validate();
        for (int s = 0; s < n_seeds; ++s) {
            Job job{cfg, v, s, geometry_key(cfg)};
            job.cfg.background_seed = cfg.background_seed + static_cast<std::uint64_t>(s);
            job.cfg.noise_seed = cfg.noise_seed + static_cast<std::uint64_t>(s);
            if (!geometries.count(job.geometry)) geometries.emplace(job.geometry, build_geometry(cfg));
            jobs.push_back(std::move(job));
        }
    }

    const std::size_t n_methods = base.methods.size();
    std::vector<SweepCell> cells(jobs.size() * n_methods);
    std::vector<std::exception_ptr> errors(jobs.size());

#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        try {
            const Job& job = jobs[j];
            const Dataset ds = simulate(job.cfg, geometries.at(job.geometry));
            for (std::size_t k = 0; k < n_methods; ++k) {
                const MethodResult res = solve(ds, job.cfg.methods[k], ds.config);
                cells[j * n_methods + k] = {job.value, job.seed, job.cfg.methods[k], evaluate(ds, res)};
            }
        } catch (...) {
            errors[j] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return {key, std::move(cells)};
}

void write_sweep(const SweepResult& sweep, const fs::path& out_dir)
{
    fs::create_directories(out_dir);
    io::CsvTable raw;
    raw.header = {"parameter", "value", "seed", "method"};
    for (auto& h : metrics_header()) raw.header.push_back(h);
    for (const auto& c : sweep.cells) {
        std::vector<std::string> row = {sweep.key, c.value, std::to_string(c.seed_index), to_string(c.method)};
        for (auto& v : metrics_row(c.metrics)) row.push_back(v);
        raw.rows.push_back(std::move(row));
    }

    io::CsvTable summary;
    summary.header = {"parameter", "value", "method", "n"};
    for (const auto& h : metrics_header()) {
        summary.header.push_back("median_" + h);
        summary.header.push_back("iqr_" + h);
    }
    // Groups in first-appearance order.
    std::vector<std::pair<std::string, Method>> groups;
    for (const auto& c : sweep.cells)
        if (std::find(groups.begin(), groups.end(), std::make_pair(c.value, c.method)) == groups.end())
            groups.emplace_back(c.value, c.method);
    for (const auto& [value, method] : groups) {
        std::vector<std::vector<double>> cols(6);
        for (const auto& c : sweep.cells) {
            if (c.value != value || c.method != method) continue;
            const auto& m = c.metrics;
            const double v[6] = {m.center_error, m.radius_error, m.amplitude_rel_error,
                                 m.dice,         m.background_corr, m.residual_rel};
            for (int k = 0; k < 6; ++k) cols[k].push_back(v[k]);
        }
        std::vector<std::string> row = {sweep.key, value, to_string(method), std::to_string(cols[0].size())};
        for (const auto& col : cols) {
            row.push_back(io::format_number(median(col)));
            row.push_back(io::format_number(iqr(col)));
        }
        summary.rows.push_back(std::move(row));
    }

    std::ofstream raw_out(out_dir / "sweep.csv");
    io::write_csv(raw_out, raw);
    std::ofstream sum_out(out_dir / "summary.csv");
    io::write_csv(sum_out, summary);
}

// NaN entries (metrics undefined for a method) are skipped.
double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double iqr(std::vector<double> v) { return quantile(v, 0.75) - quantile(v, 0.25); }

} // namespace hetmeg::harness
