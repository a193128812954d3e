#include "hetmeg/config.hpp"

#include "hetmeg/error.hpp"
#include "hetmeg/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

namespace hetmeg::harness {

std::string to_string(Method m)
{
    switch (m) {
    case Method::imaging: return "imaging";
    case Method::patch: return "patch";
    case Method::hetero: return "hetero";
    }
    return "?";
}

Method parse_method(const std::string& s)
{
    if (s == "imaging") return Method::imaging;
    if (s == "patch") return Method::patch;
    if (s == "hetero") return Method::hetero;
    throw UsageError("unknown method '" + s + "' (expected imaging, patch or hetero)");
}

namespace {

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

double to_double(const std::string& key, const std::string& v)
{
    try {
        return io::parse_number(v);
    } catch (const DataError&) {
        throw UsageError("bad numeric value '" + v + "' for " + key);
    }
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v)
{
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw UsageError("bad integer value '" + v + "' for " + key);
    return out;
}

template <typename T>
Field number(std::string key, T ExperimentConfig::*member)
{
    return {key,
            [key, member](ExperimentConfig& c, const std::string& v) {
                if constexpr (std::is_floating_point_v<T>)
                    c.*member = to_double(key, v);
                else
                    c.*member = to_int<T>(key, v);
            },
            [member](const ExperimentConfig& c) {
                if constexpr (std::is_floating_point_v<T>)
                    return io::format_number(c.*member);
                else
                    return std::to_string(c.*member);
            }};
}

const std::vector<Field>& fields()
{
    using C = ExperimentConfig;
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(number("geometry.subdivisions", &C::subdivisions));
        f.push_back(number("geometry.base_radius", &C::base_radius));
        f.push_back(number("geometry.wrinkle_amp", &C::wrinkle_amp));
        f.push_back(number("geometry.wrinkle_freq", &C::wrinkle_freq));
        f.push_back(number("geometry.seed", &C::geometry_seed));
        f.push_back(number("sensors.n_sensors", &C::n_sensors));
        f.push_back(number("sensors.helmet_radius", &C::helmet_radius));
        f.push_back(number("sensors.cap_angle", &C::cap_angle));
        f.push_back(number("truth.theta0", &C::theta0));
        f.push_back(number("truth.phi0", &C::phi0));
        f.push_back(number("truth.r0", &C::r0));
        f.push_back(number("truth.j0_density", &C::j0_density));
        f.push_back(number("noise.background_ratio", &C::background_ratio));
        f.push_back(number("noise.noise_ratio", &C::noise_ratio));
        f.push_back(number("noise.background_seed", &C::background_seed));
        f.push_back(number("noise.noise_seed", &C::noise_seed));
        f.push_back(number("solver.eps", &C::eps));
        f.push_back(number("solver.r_max", &C::r_max));
        f.push_back(number("solver.max_evals", &C::max_evals));
        f.push_back(number("solver.min_diag", &C::min_diag));
        f.push_back(number("solver.balance_eps", &C::balance_eps));
        f.push_back(number("solver.polish_tol", &C::polish_tol));
        f.push_back(number("solver.sigma_b", &C::sigma_b));
        f.push_back(number("solver.sigma_n", &C::sigma_n));
        f.push_back(number("solver.noise_ratio_normalized", &C::noise_ratio_normalized));
        f.push_back(number("imaging.alpha", &C::alpha));
        f.push_back(number("imaging.n_lambdas", &C::n_lambdas));
        f.push_back(number("imaging.lambda_lo", &C::lambda_lo));
        f.push_back(number("imaging.lambda_hi", &C::lambda_hi));
        f.push_back(number("imaging.tol", &C::imaging_tol));
        f.push_back(number("imaging.max_iter", &C::imaging_max_iter));
        f.push_back({"imaging.tv_weights",
                     [](C& c, const std::string& v) {
                         if (v != "uniform" && v != "inverse_length")
                             throw UsageError("imaging.tv_weights must be uniform or inverse_length");
                         c.tv_weights = v;
                     },
                     [](const C& c) { return c.tv_weights; }});
        f.push_back({"experiment.methods",
                     [](C& c, const std::string& v) {
                         std::vector<Method> methods;
                         std::istringstream ss(v);
                         std::string item;
                         while (std::getline(ss, item, ',')) methods.push_back(parse_method(item));
                         if (methods.empty()) throw UsageError("experiment.methods is empty");
                         c.methods = methods;
                     },
                     [](const C& c) {
                         std::string out;
                         for (std::size_t k = 0; k < c.methods.size(); ++k)
                             out += (k ? "," : "") + to_string(c.methods[k]);
                         return out;
                     }});
        return f;
    }();
    return table;
}

const Field& find_field(const std::string& key)
{
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw UsageError("unknown config key '" + key + "'");
}

} // namespace

void ExperimentConfig::set(const std::string& dotted_key, const std::string& value)
{
    find_field(dotted_key).set(*this, value);
}

std::string ExperimentConfig::get(const std::string& dotted_key) const
{
    return find_field(dotted_key).get(*this);
}

const std::vector<std::string>& ExperimentConfig::keys()
{
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& f : fields()) out.push_back(f.key);
        return out;
    }();
    return k;
}

void ExperimentConfig::validate() const
{
    if (subdivisions < 2) throw UsageError("geometry.subdivisions must be >= 2");
    if (!(base_radius > 0.0)) throw UsageError("geometry.base_radius must be positive");
    if (wrinkle_amp < 0.0 || wrinkle_amp >= 0.3 * base_radius)
        throw UsageError("geometry.wrinkle_amp must lie in [0, 0.3 * base_radius)");
    if (wrinkle_freq < 1) throw UsageError("geometry.wrinkle_freq must be >= 1");
    if (n_sensors < 1) throw UsageError("sensors.n_sensors must be >= 1");
    if (!(helmet_radius > base_radius + wrinkle_amp))
        throw UsageError("sensors.helmet_radius must exceed the outermost cortex radius");
    if (!(cap_angle > 0.0) || cap_angle > std::numbers::pi)
        throw UsageError("sensors.cap_angle must lie in (0, pi]");
    if (r0 < 0.0) throw UsageError("truth.r0 must be non-negative");
    if (background_ratio < 0.0 || noise_ratio < 0.0) throw UsageError("noise ratios must be non-negative");
    if (!(r_max > 0.0)) throw UsageError("solver.r_max must be positive");
    if (max_evals < 3) throw UsageError("solver.max_evals must be >= 3");
    if (!(min_diag > 0.0)) throw UsageError("solver.min_diag must be positive");
    if (!(polish_tol > 0.0)) throw UsageError("solver.polish_tol must be positive");
    if (alpha < 0.01 || alpha > 1.0) throw UsageError("imaging.alpha must lie in [0.01, 1]");
    if (n_lambdas < 1) throw UsageError("imaging.n_lambdas must be >= 1");
    if (!(lambda_lo > 0.0) || !(lambda_hi >= lambda_lo)) throw UsageError("bad imaging lambda range");
    if (!(imaging_tol > 0.0) || imaging_max_iter < 1) throw UsageError("bad imaging tolerances");
}

ExperimentConfig parse_config(std::istream& in)
{
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw UsageError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw UsageError("config key '" + section + "' outside a [section]");
        for (const auto& [key, value] : body) cfg.set(section + "." + key, value.data());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path);
    return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& cfg)
{
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const std::string sec = f.key.substr(0, dot);
        if (sec != section) {
            out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        out << f.key.substr(dot + 1) << " = " << f.get(cfg) << '\n';
    }
}

} // namespace hetmeg::harness
