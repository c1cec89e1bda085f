#pragma once

// Command implementations behind the `confbb` executable: JSON config
// parsing, CSV/JSON writers and run manifests.

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "confbb/baselines.hpp"
#include "confbb/benchmarks.hpp"
#include "confbb/calibration.hpp"
#include "confbb/oracle.hpp"
#include "confbb/predictive.hpp"

namespace confbb::cli {

inline constexpr const char* kToolVersion = "0.1.0";

using json = nlohmann::json;

/// Malformed or incomplete configuration; maps to exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

enum ExitCode : int { kSuccess = 0, kConfigError = 1, kPartialFailure = 2 };

// ---------------------------------------------------------------- hashing

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

/// Digest of a resolved config: sha256 of its compact dump (object keys sorted).
inline std::string config_digest(const json& resolved) { return sha256_hex(resolved.dump()); }

// ---------------------------------------------------------------- config

/// Every accepted key with its default; null marks a required key.
inline const json& config_schema() {
    static const json schema = {
        {"function", nullptr},
        {"n_train", nullptr},
        {"n_val", nullptr},
        {"n_test", nullptr},
        {"nominal_level", nullptr},
        {"criterion", nullptr},
        {"seed", nullptr},
        {"model", nullptr},
        {"noise_sd", "auto"},
        {"noise_fraction", 0.05},
        {"ridge_lambda", 0.0},
        {"hidden_width", 32},
        {"activation", "tanh"},
        {"fit_intercept", true},
        {"weight_decay", 1e-3},
        {"hessian_mode", "default"},
        {"max_iterations", 5000},
        {"grid", "default"},
        {"B_cal", 500},
        {"B_test", 2000},
        {"include_noise", true},
        {"record_runtime", true},
        // oracle-compare
        {"draws", 100},
        {"alpha", 1.0},
        {"directions", 50},
        {"t_small", 0.02},
        // consistency
        {"val_sizes", json::array({25, 100, 400})},
        {"replications", 20},
        // compare-dropout
        {"dropout_p", 0.1},
        {"dropout_T", 1000},
    };
    return schema;
}

/// Fills defaults, rejects unknown keys and missing required keys.
inline json resolve_config(const json& raw) {
    if (!raw.is_object()) throw ConfigError("config: top level must be a JSON object");
    const json& schema = config_schema();
    for (auto it = raw.begin(); it != raw.end(); ++it)
        if (!schema.contains(it.key())) throw ConfigError("config: unknown key '" + it.key() + "'");
    json out = json::object();
    for (auto it = schema.begin(); it != schema.end(); ++it) {
        if (raw.contains(it.key())) {
            out[it.key()] = raw.at(it.key());
        } else if (it.value().is_null()) {
            throw ConfigError("config: missing required key '" + it.key() + "'");
        } else {
            out[it.key()] = it.value();
        }
    }
    return out;
}

inline json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
}

namespace detail {

template <typename T>
T get_as(const json& cfg, const std::string& key) {
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: key '" + key + "' has the wrong type");
    }
}

inline Eigen::Index get_count(const json& cfg, const std::string& key) {
    const json& v = cfg.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError("config: key '" + key + "' must be an integer >= 1");
    return static_cast<Eigen::Index>(v.get<long long>());
}

inline double get_real(const json& cfg, const std::string& key) {
    const json& v = cfg.at(key);
    if (!v.is_number()) throw ConfigError("config: key '" + key + "' must be a number");
    return v.get<double>();
}

}  // namespace detail

/// Function names selected by the config: a name, a list of names, or "all".
inline std::vector<std::string> config_functions(const json& cfg) {
    const json& f = cfg.at("function");
    std::vector<std::string> names;
    if (f.is_string()) {
        if (f.get<std::string>() == "all") {
            for (const auto& bf : benchmark_suite()) names.push_back(bf.name);
        } else {
            names.push_back(f.get<std::string>());
        }
    } else if (f.is_array() && !f.empty()) {
        for (const auto& e : f) {
            if (!e.is_string()) throw ConfigError("config: key 'function' must list names");
            names.push_back(e.get<std::string>());
        }
    } else {
        throw ConfigError("config: key 'function' must be a name, a list of names, or \"all\"");
    }
    for (const auto& n : names) {
        try {
            (void)find_function(n);
        } catch (const InvalidParameter&) {
            throw ConfigError("config: key 'function' names unknown function '" + n + "'");
        }
    }
    return names;
}

/// ExperimentConfig for one function from a resolved config.
inline ExperimentConfig experiment_config(const json& cfg, const std::string& function) {
    using detail::get_as;
    using detail::get_count;
    using detail::get_real;
    ExperimentConfig e;
    e.function = function;
    e.n_train = get_count(cfg, "n_train");
    e.n_val = get_count(cfg, "n_val");
    e.n_test = get_count(cfg, "n_test");
    e.nominal_level = get_real(cfg, "nominal_level");
    if (!(e.nominal_level > 0.0 && e.nominal_level < 1.0)) throw ConfigError("config: key 'nominal_level' must be in (0, 1)");
    try {
        e.criterion = parse_criterion(get_as<std::string>(cfg, "criterion"));
    } catch (const InvalidParameter&) {
        throw ConfigError("config: key 'criterion' must be \"log_score\" or \"coverage\"");
    }
    const json& seed = cfg.at("seed");
    if (!seed.is_number_integer() || seed.get<long long>() < 0) throw ConfigError("config: key 'seed' must be a nonnegative integer");
    e.seed = seed.get<std::uint64_t>();

    const json& noise = cfg.at("noise_sd");
    if (noise.is_string() && noise.get<std::string>() == "auto") {
        e.noise_sd.reset();
    } else if (noise.is_number() && noise.get<double>() >= 0.0) {
        e.noise_sd = noise.get<double>();
    } else {
        throw ConfigError("config: key 'noise_sd' must be \"auto\" or a nonnegative number");
    }
    e.noise_fraction = get_real(cfg, "noise_fraction");
    if (e.noise_fraction < 0.0) throw ConfigError("config: key 'noise_fraction' must be nonnegative");

    ModelSpec m;
    try {
        m.kind = parse_model_kind(get_as<std::string>(cfg, "model"));
    } catch (const InvalidParameter&) {
        throw ConfigError("config: key 'model' must be \"linear\", \"ridge\" or \"mlp\"");
    }
    m.ridge_lambda = get_real(cfg, "ridge_lambda");
    m.hidden_width = static_cast<int>(get_count(cfg, "hidden_width"));
    if (get_as<std::string>(cfg, "activation") != "tanh") throw ConfigError("config: key 'activation' must be \"tanh\"");
    m.fit_intercept = get_as<bool>(cfg, "fit_intercept");
    m.weight_decay = get_real(cfg, "weight_decay");
    const std::string hm = get_as<std::string>(cfg, "hessian_mode");
    if (hm != "default") {
        try {
            m.hessian_mode = parse_hessian_mode(hm);
        } catch (const InvalidParameter&) {
            throw ConfigError("config: key 'hessian_mode' has unknown value '" + hm + "'");
        }
    }
    m.max_iterations = static_cast<int>(get_count(cfg, "max_iterations"));
    try {
        m.validate();
    } catch (const InvalidParameter& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    }
    e.model = m;

    const json& grid = cfg.at("grid");
    if (grid.is_string() && grid.get<std::string>() == "default") {
        e.grid = AlphaGrid::default_grid();
    } else {
        try {
            e.grid = AlphaGrid(grid.get<std::vector<double>>());
        } catch (const std::exception&) {
            throw ConfigError("config: key 'grid' must be \"default\" or a strictly increasing list of positive numbers");
        }
    }
    e.B_cal = get_count(cfg, "B_cal");
    e.B_test = get_count(cfg, "B_test");
    if (e.B_cal < 2 || e.B_test < 2) throw ConfigError("config: keys 'B_cal' and 'B_test' must be >= 2");
    e.include_noise = get_as<bool>(cfg, "include_noise");
    e.record_runtime = get_as<bool>(cfg, "record_runtime");
    return e;
}

// ---------------------------------------------------------------- output

/// 6 significant digits, '.' decimal separator.
inline std::string fmt_metric(double v) {
    if (!std::isfinite(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// Round-trip precision.
inline std::string fmt_full(double v) {
    if (!std::isfinite(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Writes manifest.json for a resolved config.
inline json write_manifest(const std::filesystem::path& out_dir, const std::string& command, const json& resolved) {
    json m;
    m["command"] = command;
    m["config"] = resolved;
    m["config_digest"] = config_digest(resolved);
    m["seed"] = resolved.at("seed");
    m["timestamp"] = utc_timestamp();
    m["tool_version"] = kToolVersion;
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");
    return m;
}

/// True when the stored digest matches the stored config.
inline bool verify_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) return false;
    const json m = json::parse(in);
    return m.contains("config") && m.contains("config_digest") &&
           config_digest(m.at("config")) == m.at("config_digest").get<std::string>();
}

inline const char* kResultsHeader = "function,dim,method,alpha_hat,coverage,log_score,runtime_s,seed";
inline const char* kCurveHeader = "alpha,score,selected";
inline const char* kOracleHeader = "draw,alpha,param_err,pred_err";
inline const char* kConsistencyHeader = "m,mean_gap,sd_gap";
inline const char* kComparisonHeader = "method,coverage,log_score,runtime_s,split_hash";

inline std::string results_csv_row(const BenchmarkResult& r, bool average) {
    std::ostringstream os;
    os << r.function << ',' << (average ? std::string() : std::to_string(r.dim)) << ",ifbb,";
    if (r.ok)
        os << fmt_full(r.alpha_hat) << ',' << fmt_metric(r.coverage) << ',' << fmt_metric(r.log_score) << ','
           << fmt_metric(r.runtime_s);
    else
        os << "NA,NA,NA,NA";
    os << ',' << r.seed << '\n';
    return os.str();
}

inline json result_json(const BenchmarkResult& r, bool average) {
    json j;
    j["function"] = r.function;
    j["dim"] = average ? json(nullptr) : json(r.dim);
    j["method"] = "ifbb";
    j["seed"] = r.seed;
    j["ok"] = r.ok;
    if (r.ok) {
        j["alpha_hat"] = r.alpha_hat;
        j["coverage"] = r.coverage;
        j["log_score"] = r.log_score;
        j["runtime_s"] = r.runtime_s;
    } else {
        j["error"] = r.error;
    }
    return j;
}

// ---------------------------------------------------------------- commands

struct CommandOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

/// Loads, applies the --seed override and resolves.
inline json prepare(const CommandOptions& opt) {
    json raw = load_config_file(opt.config_path);
    if (opt.seed) {
        if (!raw.is_object()) throw ConfigError("config: top level must be a JSON object");
        raw["seed"] = *opt.seed;
    }
    json resolved = resolve_config(raw);
    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    if (!std::filesystem::is_directory(opt.out_dir)) throw ConfigError("cannot create output directory '" + opt.out_dir + "'");
    return resolved;
}

inline int cmd_bench(const CommandOptions& opt) {
    const json cfg = prepare(opt);
    std::vector<ExperimentConfig> cfgs;
    for (const auto& name : config_functions(cfg)) cfgs.push_back(experiment_config(cfg, name));
    const std::filesystem::path out(opt.out_dir);
    write_manifest(out, "bench", cfg);

    const SuiteResult suite = run_suite(cfgs);
    std::string csv = std::string(kResultsHeader) + "\n";
    json rows = json::array();
    for (const auto& r : suite.rows) {
        csv += results_csv_row(r, false);
        rows.push_back(result_json(r, false));
    }
    csv += results_csv_row(suite.average, true);
    write_text(out / "results.csv", csv);
    write_text(out / "results.json", json{{"rows", rows}, {"average", result_json(suite.average, true)}}.dump(2) + "\n");
    for (const auto& r : suite.rows)
        if (!r.ok) std::fprintf(stderr, "confbb bench: %s failed: %s\n", r.function.c_str(), r.error.c_str());
    return suite.all_ok() ? kSuccess : kPartialFailure;
}

inline int cmd_calibrate(const CommandOptions& opt) {
    const json cfg = prepare(opt);
    const std::string name = config_functions(cfg).front();
    const ExperimentConfig e = experiment_config(cfg, name);
    const std::filesystem::path out(opt.out_dir);
    write_manifest(out, "calibrate", cfg);

    const BenchmarkFunction f = find_function(name);
    const ExperimentSplits s = make_splits(e, f);
    const FittedModel model = fit_erm(e.model, s.train, model_seed(e));
    const InfluencePack pack = InfluencePack::from(model);
    TuneOptions t;
    t.criterion = e.criterion;
    t.nominal_level = e.nominal_level;
    t.B = e.B_cal;
    t.seed = calibration_seed(e);
    t.include_noise = e.include_noise;
    const CalibrationResult cal = tune_alpha(model, pack, s.val, e.grid, t);

    std::string csv = std::string(kCurveHeader) + "\n";
    for (std::size_t k = 0; k < cal.grid.size(); ++k)
        csv += fmt_full(cal.grid[k]) + "," + fmt_full(cal.scores[k]) + "," + (k == cal.selected ? "true" : "false") + "\n";
    write_text(out / "calibration_curve.csv", csv);
    json j;
    j["function"] = name;
    j["alpha_hat"] = cal.alpha_hat;
    j["selected_index"] = cal.selected;
    j["criterion"] = to_string(cal.criterion);
    j["nominal_level"] = cal.nominal_level;
    j["grid"] = cal.grid.values();
    j["scores"] = cal.scores;
    write_text(out / "calibration.json", j.dump(2) + "\n");
    return kSuccess;
}

inline int cmd_oracle_compare(const CommandOptions& opt) {
    const json cfg = prepare(opt);
    const std::string name = config_functions(cfg).front();
    const ExperimentConfig e = experiment_config(cfg, name);
    const int K = static_cast<int>(detail::get_count(cfg, "draws"));
    const int directions = static_cast<int>(detail::get_count(cfg, "directions"));
    const double alpha = detail::get_real(cfg, "alpha");
    const double t_small = detail::get_real(cfg, "t_small");
    if (!(alpha > 0.0)) throw ConfigError("config: key 'alpha' must be positive");
    if (!(t_small > 0.0 && t_small < 0.25)) throw ConfigError("config: key 't_small' must be in (0, 0.25)");
    const std::filesystem::path out(opt.out_dir);
    write_manifest(out, "oracle-compare", cfg);

    const BenchmarkFunction f = find_function(name);
    const ExperimentSplits s = make_splits(e, f);
    const FittedModel model = fit_erm(e.model, s.train, model_seed(e));
    const std::uint64_t seed = rng::derive_seed(e.seed, "oracle");
    const auto draws = compare_with_retraining(model, s.train, s.test.X, alpha, K, seed);
    const double ratio = quadratic_error_ratio(model, s.train, t_small, directions, rng::derive_seed(seed, "directions"));

    // spread of the influence predictive at the same queries, same draws
    const InfluencePack pack = InfluencePack::from(model);
    const auto ens = build_ensembles(model, pack, s.test.X, alpha, std::max(K, 2), seed);
    double pred_sd = 0.0;
    for (const auto& en : ens) pred_sd += ::confbb::detail::sample_sd(en.samples);
    pred_sd /= static_cast<double>(ens.size());

    std::string csv = std::string(kOracleHeader) + "\n";
    double max_p = 0.0, mean_p = 0.0, max_y = 0.0, mean_y = 0.0;
    for (std::size_t k = 0; k < draws.size(); ++k) {
        csv += std::to_string(k) + "," + fmt_full(alpha) + "," + fmt_full(draws[k].param_err) + "," +
               fmt_full(draws[k].pred_err) + "\n";
        max_p = std::max(max_p, draws[k].param_err);
        max_y = std::max(max_y, draws[k].pred_err);
        mean_p += draws[k].param_err;
        mean_y += draws[k].pred_err;
    }
    mean_p /= static_cast<double>(draws.size());
    mean_y /= static_cast<double>(draws.size());
    write_text(out / "oracle_draws.csv", csv);
    json j;
    j["function"] = name;
    j["model"] = to_string(e.model.kind);
    j["alpha"] = alpha;
    j["draws"] = K;
    j["max_param_err"] = max_p;
    j["mean_param_err"] = mean_p;
    j["max_pred_err"] = max_y;
    j["mean_pred_err"] = mean_y;
    j["predictive_sd"] = pred_sd;
    j["quadratic_ratio"] = ratio;
    j["t_small"] = t_small;
    j["directions"] = directions;
    write_text(out / "oracle_summary.json", j.dump(2) + "\n");
    return kSuccess;
}

inline int cmd_consistency(const CommandOptions& opt) {
    const json cfg = prepare(opt);
    const std::string name = config_functions(cfg).front();
    const ExperimentConfig e = experiment_config(cfg, name);
    const int reps = static_cast<int>(detail::get_count(cfg, "replications"));
    std::vector<Eigen::Index> sizes;
    const json& vs = cfg.at("val_sizes");
    if (!vs.is_array() || vs.empty()) throw ConfigError("config: key 'val_sizes' must be a nonempty list");
    for (const auto& v : vs) {
        if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError("config: key 'val_sizes' must list positive integers");
        if (!sizes.empty() && v.get<long long>() <= sizes.back()) throw ConfigError("config: key 'val_sizes' must be increasing");
        sizes.push_back(static_cast<Eigen::Index>(v.get<long long>()));
    }
    const std::filesystem::path out(opt.out_dir);
    write_manifest(out, "consistency", cfg);

    const BenchmarkFunction f = find_function(name);
    const ExperimentSplits s = make_splits(e, f);
    const FittedModel model = fit_erm(e.model, s.train, model_seed(e));
    const InfluencePack pack = InfluencePack::from(model);
    const double noise = s.noise_sd;
    const DataSource source = [&f, noise](Eigen::Index m, Rng& g) { return generate_dataset(f, m, noise, g, Role::validation); };
    const auto rows = consistency_diagnostic(model, pack, e.grid, sizes, s.test, reps, source,
                                             rng::derive_seed(e.seed, "consistency"), e.B_cal);

    std::string csv = std::string(kConsistencyHeader) + "\n";
    json jr = json::array();
    for (const auto& r : rows) {
        csv += std::to_string(r.m) + "," + fmt_full(r.mean_gap) + "," + fmt_full(r.sd_gap) + "\n";
        jr.push_back({{"m", r.m}, {"mean_gap", r.mean_gap}, {"sd_gap", r.sd_gap}});
    }
    write_text(out / "consistency.csv", csv);
    write_text(out / "consistency.json", json{{"function", name}, {"replications", reps}, {"rows", jr}}.dump(2) + "\n");
    return kSuccess;
}

/// sha256 over the test inputs and targets, truncated to 16 hex digits.
inline std::string split_hash(const Dataset& d) {
    std::string bytes(reinterpret_cast<const char*>(d.X.data()), static_cast<std::size_t>(d.X.size()) * sizeof(double));
    bytes.append(reinterpret_cast<const char*>(d.y.data()), static_cast<std::size_t>(d.y.size()) * sizeof(double));
    return sha256_hex(bytes).substr(0, 16);
}

inline int cmd_compare_dropout(const CommandOptions& opt) {
    const json cfg = prepare(opt);
    const std::string name = config_functions(cfg).front();
    const ExperimentConfig e = experiment_config(cfg, name);
    if (e.model.kind != ModelKind::mlp) throw ConfigError("config: compare-dropout needs \"model\": \"mlp\"");
    DropoutConfig dc;
    dc.p = detail::get_real(cfg, "dropout_p");
    dc.T = detail::get_count(cfg, "dropout_T");
    if (!(dc.p >= 0.0 && dc.p < 1.0)) throw ConfigError("config: key 'dropout_p' must be in [0, 1)");
    if (dc.T < 2) throw ConfigError("config: key 'dropout_T' must be >= 2");
    const std::filesystem::path out(opt.out_dir);
    write_manifest(out, "compare-dropout", cfg);

    using clock = std::chrono::steady_clock;
    const BenchmarkFunction f = find_function(name);
    const ExperimentSplits s = make_splits(e, f);
    const auto t_fit = clock::now();
    const FittedModel model = fit_erm(e.model, s.train, model_seed(e));
    const double fit_s = std::chrono::duration<double>(clock::now() - t_fit).count();
    const InfluencePack pack = InfluencePack::from(model);

    const auto t0 = clock::now();
    TuneOptions t;
    t.criterion = e.criterion;
    t.nominal_level = e.nominal_level;
    t.B = e.B_cal;
    t.seed = calibration_seed(e);
    t.include_noise = e.include_noise;
    const CalibrationResult cal = tune_alpha(model, pack, s.val, e.grid, t);
    const TestMetrics ifbb = evaluate_on_test(model, pack, s.test, cal.alpha_hat, e.B_test, e.nominal_level,
                                              e.include_noise, evaluation_seed(e));
    const double ifbb_s = std::chrono::duration<double>(clock::now() - t0).count();

    const auto t1 = clock::now();
    std::vector<PredictiveEnsemble> ens;
    const std::uint64_t dseed = rng::derive_seed(e.seed, "dropout");
    for (Eigen::Index i = 0; i < s.test.size(); ++i) {
        DropoutConfig c = dc;
        c.seed = rng::derive_seed(dseed, static_cast<std::uint64_t>(i));
        ens.push_back(dropout_ensemble(model, s.test.X.row(i).transpose(), c));
    }
    const auto iv = intervals_for(ens, e.nominal_level, e.include_noise, rng::derive_seed(dseed, "noise"));
    const TestMetrics drop{empirical_coverage(iv, as_span(s.test.y)), average_log_score(ens, as_span(s.test.y))};
    const double drop_s = std::chrono::duration<double>(clock::now() - t1).count();

    const std::string hash = split_hash(s.test);
    const double rt_ifbb = e.record_runtime ? ifbb_s : 0.0, rt_drop = e.record_runtime ? drop_s : 0.0;
    std::string csv = std::string(kComparisonHeader) + "\n";
    csv += "ifbb," + fmt_metric(ifbb.coverage) + "," + fmt_metric(ifbb.log_score) + "," + fmt_metric(rt_ifbb) + "," + hash + "\n";
    csv += "mc_dropout," + fmt_metric(drop.coverage) + "," + fmt_metric(drop.log_score) + "," + fmt_metric(rt_drop) + "," + hash + "\n";
    write_text(out / "comparison.csv", csv);
    json j;
    j["function"] = name;
    j["split_hash"] = hash;
    j["fit_runtime_s"] = e.record_runtime ? fit_s : 0.0;
    j["rows"] = json::array({
        {{"method", "ifbb"}, {"coverage", ifbb.coverage}, {"log_score", ifbb.log_score}, {"runtime_s", rt_ifbb},
         {"alpha_hat", cal.alpha_hat}, {"split_hash", hash}},
        {{"method", "mc_dropout"}, {"coverage", drop.coverage}, {"log_score", drop.log_score}, {"runtime_s", rt_drop},
         {"dropout_p", dc.p}, {"dropout_T", dc.T}, {"split_hash", hash}},
    });
    write_text(out / "comparison.json", j.dump(2) + "\n");
    return kSuccess;
}

/// Runs a command, mapping config errors to 1 and compute failures to 2.
template <typename Command>
int run_command(Command&& cmd, const CommandOptions& opt, const char* label) {
    try {
        return cmd(opt);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "confbb %s: %s\n", label, e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "confbb %s: %s\n", label, e.what());
        return kPartialFailure;
    }
}

}  // namespace confbb::cli
