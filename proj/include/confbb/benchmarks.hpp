#pragma once

// Emulation test functions and the end-to-end experiment runner.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "confbb/bootstrap.hpp"
#include "confbb/calibration.hpp"
#include "confbb/dataset.hpp"
#include "confbb/errors.hpp"
#include "confbb/models.hpp"
#include "confbb/predictive.hpp"
#include "confbb/rng.hpp"

namespace confbb {

struct BenchmarkFunction {
    std::string name;
    int dim = 0;
    std::vector<double> lo, hi;
    bool lower_open = false;  // domain is (lo, hi] rather than [lo, hi]
    std::function<double(const Eigen::VectorXd&)> eval;
};

inline double evaluate_function(const BenchmarkFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != f.dim)
        throw ShapeError(f.name + ": expected " + std::to_string(f.dim) + " inputs, got " + std::to_string(x.size()));
    for (int k = 0; k < f.dim; ++k) {
        const bool below = f.lower_open ? !(x(k) > f.lo[k]) : !(x(k) >= f.lo[k]);
        if (below || !(x(k) <= f.hi[k]))
            throw DomainError(f.name + ": coordinate " + std::to_string(k) + " outside the domain");
    }
    return f.eval(x);
}

namespace functions {

inline BenchmarkFunction borehole() {
    return {"Borehole", 8,
            {0.05, 100.0, 63070.0, 990.0, 63.1, 700.0, 1120.0, 9855.0},
            {0.15, 50000.0, 115600.0, 1110.0, 116.0, 820.0, 1680.0, 12045.0},
            false,
            [](const Eigen::VectorXd& x) {
                const double rw = x(0), r = x(1), Tu = x(2), Hu = x(3), Tl = x(4), Hl = x(5), L = x(6), Kw = x(7);
                const double lr = std::log(r / rw);
                return 2.0 * std::numbers::pi * Tu * (Hu - Hl) /
                       (lr * (1.0 + 2.0 * L * Tu / (lr * rw * rw * Kw) + Tu / Tl));
            }};
}

inline BenchmarkFunction ishigami(double a = 7.0, double b = 0.1) {
    const double pi = std::numbers::pi;
    return {"Ishigami", 3, {-pi, -pi, -pi}, {pi, pi, pi}, false, [a, b](const Eigen::VectorXd& x) {
                const double s2 = std::sin(x(1));
                return std::sin(x(0)) + a * s2 * s2 + b * std::pow(x(2), 4) * std::sin(x(0));
            }};
}

inline BenchmarkFunction branin() {
    return {"Branin", 2, {-5.0, 0.0}, {10.0, 15.0}, false, [](const Eigen::VectorXd& x) {
                const double pi = std::numbers::pi;
                const double b = 5.1 / (4.0 * pi * pi), c = 5.0 / pi, r = 6.0, s = 10.0, t = 1.0 / (8.0 * pi);
                const double q = x(1) - b * x(0) * x(0) + c * x(0) - r;
                return q * q + s * (1.0 - t) * std::cos(x(0)) + s;
            }};
}

inline BenchmarkFunction hartmann3() {
    return {"Hartmann3", 3, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, false, [](const Eigen::VectorXd& x) {
                static const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
                static const double A[4][3] = {{3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}, {3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}};
                static const double P[4][3] = {{0.3689, 0.1170, 0.2673},
                                               {0.4699, 0.4387, 0.7470},
                                               {0.1091, 0.8732, 0.5547},
                                               {0.0381, 0.5743, 0.8828}};
                double out = 0.0;
                for (int i = 0; i < 4; ++i) {
                    double inner = 0.0;
                    for (int j = 0; j < 3; ++j) inner += A[i][j] * (x(j) - P[i][j]) * (x(j) - P[i][j]);
                    out -= alpha[i] * std::exp(-inner);
                }
                return out;
            }};
}

inline BenchmarkFunction friedman1() {
    return {"Friedman1", 5, std::vector<double>(5, 0.0), std::vector<double>(5, 1.0), false,
            [](const Eigen::VectorXd& x) {
                return 10.0 * std::sin(std::numbers::pi * x(0) * x(1)) + 20.0 * (x(2) - 0.5) * (x(2) - 0.5) +
                       10.0 * x(3) + 5.0 * x(4);
            }};
}

inline BenchmarkFunction friedman2() {
    const double pi = std::numbers::pi;
    return {"Friedman2", 4, {0.0, 40.0 * pi, 0.0, 1.0}, {100.0, 560.0 * pi, 1.0, 11.0}, false,
            [](const Eigen::VectorXd& x) {
                const double t = x(1) * x(2) - 1.0 / (x(1) * x(3));
                return std::sqrt(x(0) * x(0) + t * t);
            }};
}

inline BenchmarkFunction friedman3() {
    const double pi = std::numbers::pi;
    return {"Friedman3", 4, {0.0, 40.0 * pi, 0.0, 1.0}, {100.0, 560.0 * pi, 1.0, 11.0}, false,
            [](const Eigen::VectorXd& x) {
                return std::atan((x(1) * x(2) - 1.0 / (x(1) * x(3))) / x(0));
            }};
}

inline BenchmarkFunction forrester() {
    return {"Forrester", 1, {0.0}, {1.0}, false, [](const Eigen::VectorXd& x) {
                const double a = 6.0 * x(0) - 2.0;
                return a * a * std::sin(12.0 * x(0) - 4.0);
            }};
}

inline BenchmarkFunction currin_exp() {
    return {"CurrinExp", 2, {0.0, 0.0}, {1.0, 1.0}, false, [](const Eigen::VectorXd& x) {
                const double x1 = x(0), x2 = x(1);
                const double lead = 1.0 - std::exp(-1.0 / (2.0 * x2));
                return lead * (2300.0 * x1 * x1 * x1 + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0) /
                       (100.0 * x1 * x1 * x1 + 500.0 * x1 * x1 + 4.0 * x1 + 20.0);
            }};
}

inline BenchmarkFunction park() {
    return {"Park", 4, std::vector<double>(4, 0.0), std::vector<double>(4, 1.0), true, [](const Eigen::VectorXd& x) {
                const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3);
                return 0.5 * x1 * (std::sqrt(1.0 + (x2 + x3 * x3) * x4 / (x1 * x1)) - 1.0) +
                       (x1 + 3.0 * x4) * std::exp(1.0 + std::sin(x3));
            }};
}

/// Intercept-only task: zero inputs, constant zero signal.
inline BenchmarkFunction scalar_mean() {
    return {"ScalarMean", 0, {}, {}, false, [](const Eigen::VectorXd&) { return 0.0; }};
}

/// Linear task in three covariates.
inline BenchmarkFunction linear3() {
    return {"Linear3", 3, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, false,
            [](const Eigen::VectorXd& x) { return 1.0 + 2.0 * x(0) - 1.0 * x(1) + 0.5 * x(2); }};
}

}  // namespace functions

/// The ten emulation functions in table order.
inline std::vector<BenchmarkFunction> benchmark_suite() {
    using namespace functions;
    return {borehole(), ishigami(), branin(),   hartmann3(),  friedman1(),
            friedman2(), friedman3(), forrester(), currin_exp(), park()};
}

/// Any suite function, plus the auxiliary tasks ScalarMean and Linear3.
inline BenchmarkFunction find_function(const std::string& name) {
    for (auto& f : benchmark_suite())
        if (f.name == name) return f;
    if (name == "ScalarMean") return functions::scalar_mean();
    if (name == "Linear3") return functions::linear3();
    throw InvalidParameter("unknown benchmark function '" + name + "'");
}

inline Eigen::VectorXd sample_domain(const BenchmarkFunction& f, Rng& g) {
    Eigen::VectorXd x(f.dim);
    // hi - (hi - lo) U with U in [0, 1) lies in (lo, hi]
    for (int k = 0; k < f.dim; ++k) x(k) = f.hi[k] - (f.hi[k] - f.lo[k]) * rng::uniform01(g);
    return x;
}

/// Uniform inputs on the domain box, targets f(x) + N(0, noise_sd^2).
inline Dataset generate_dataset(const BenchmarkFunction& f, Eigen::Index n, double noise_sd, Rng& g,
                                Role role = Role::unspecified) {
    detail::require(n >= 1, "generate_dataset: n must be positive");
    detail::require(noise_sd >= 0.0, "generate_dataset: noise_sd must be nonnegative");
    Eigen::MatrixXd X(n, f.dim);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = sample_domain(f, g);
        X.row(i) = x.transpose();
        y(i) = evaluate_function(f, x);
        if (noise_sd > 0.0) y(i) += noise_sd * rng::standard_normal(g);
    }
    return Dataset(std::move(X), std::move(y), role);
}

/// Sample sd of f over 10^4 uniform domain points (fixed stream per function).
inline double output_sd(const BenchmarkFunction& f) {
    Rng g(rng::derive_seed(0x5EEDULL, f.name));
    const Dataset d = generate_dataset(f, 10000, 0.0, g);
    return detail::sample_sd(d.y);
}

struct ExperimentConfig {
    std::string function = "Forrester";
    Eigen::Index n_train = 100;
    Eigen::Index n_val = 50;
    Eigen::Index n_test = 40;
    std::optional<double> noise_sd;  // unset: noise_fraction * output_sd(f)
    double noise_fraction = 0.05;
    ModelSpec model = ModelSpec::mlp(32);
    AlphaGrid grid = AlphaGrid::default_grid();
    Eigen::Index B_cal = 500;
    Eigen::Index B_test = 2000;
    double nominal_level = 0.9;
    Criterion criterion = Criterion::log_score;
    std::uint64_t seed = 0;
    bool include_noise = true;
    bool record_runtime = true;

    void validate() const {
        detail::require(n_train >= 1 && n_val >= 1 && n_test >= 1, "sample counts must be >= 1");
        detail::require(nominal_level > 0.0 && nominal_level < 1.0, "nominal_level must be in (0, 1)");
        detail::require(B_cal >= 2 && B_test >= 2, "resample counts must be >= 2");
        detail::require(!noise_sd || *noise_sd >= 0.0, "noise_sd must be nonnegative");
        detail::require(noise_fraction >= 0.0, "noise_fraction must be nonnegative");
        model.validate();
    }
};

struct BenchmarkResult {
    std::string function;
    int dim = 0;
    double coverage = 0.0;
    double log_score = 0.0;
    double runtime_s = 0.0;
    double alpha_hat = 1.0;
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;
};

/// Train/validation/test partitions for one experiment.
struct ExperimentSplits {
    Dataset train, val, test;
    double noise_sd = 0.0;
};

inline ExperimentSplits make_splits(const ExperimentConfig& cfg, const BenchmarkFunction& f) {
    ExperimentSplits s;
    s.noise_sd = cfg.noise_sd ? *cfg.noise_sd : cfg.noise_fraction * output_sd(f);
    Rng gt(rng::derive_seed(cfg.seed, "train-data"));
    Rng gv(rng::derive_seed(cfg.seed, "validation-data"));
    Rng ge(rng::derive_seed(cfg.seed, "test-data"));
    s.train = generate_dataset(f, cfg.n_train, s.noise_sd, gt, Role::train);
    s.val = generate_dataset(f, cfg.n_val, s.noise_sd, gv, Role::validation);
    s.test = generate_dataset(f, cfg.n_test, s.noise_sd, ge, Role::test);
    return s;
}

struct TestMetrics {
    double coverage = 0.0;
    double log_score = 0.0;
};

/// Coverage and average log-score on the test partition at a fixed alpha.
inline TestMetrics evaluate_on_test(const FittedModel& model, const InfluencePack& pack, const Dataset& test,
                                    double alpha, Eigen::Index B, double level, bool include_noise,
                                    std::uint64_t seed) {
    require_role(test, Role::test, "evaluate_on_test");
    const auto ens = build_ensembles(model, pack, test.X, alpha, B, rng::derive_seed(seed, "test-draws"));
    const auto iv = intervals_for(ens, level, include_noise, rng::derive_seed(seed, "test-noise"));
    return {empirical_coverage(iv, as_span(test.y)), average_log_score(ens, as_span(test.y))};
}

/// Everything produced by one experiment, for callers that need more than the summary row.
struct ExperimentRun {
    BenchmarkResult result;
    ExperimentSplits splits;
    FittedModel model;
    CalibrationResult calibration;
};

inline std::uint64_t model_seed(const ExperimentConfig& cfg) { return rng::derive_seed(cfg.seed, "model-init"); }
inline std::uint64_t calibration_seed(const ExperimentConfig& cfg) { return rng::derive_seed(cfg.seed, "calibration"); }
inline std::uint64_t evaluation_seed(const ExperimentConfig& cfg) { return rng::derive_seed(cfg.seed, "evaluation"); }

inline ExperimentRun run_experiment(const ExperimentConfig& cfg, const BenchmarkFunction& f) {
    cfg.validate();
    ExperimentRun run;
    run.splits = make_splits(cfg, f);

    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    try {
        run.model = fit_erm(cfg.model, run.splits.train, model_seed(cfg));
        const InfluencePack pack = InfluencePack::from(run.model);
        TuneOptions opt;
        opt.criterion = cfg.criterion;
        opt.nominal_level = cfg.nominal_level;
        opt.B = cfg.B_cal;
        opt.seed = calibration_seed(cfg);
        opt.include_noise = cfg.include_noise;
        require_role(run.splits.val, Role::validation, "run_benchmark");
        run.calibration = tune_alpha(run.model, pack, run.splits.val, cfg.grid, opt);
        const TestMetrics tm = evaluate_on_test(run.model, pack, run.splits.test, run.calibration.alpha_hat, cfg.B_test,
                                                cfg.nominal_level, cfg.include_noise, evaluation_seed(cfg));
        run.result.coverage = tm.coverage;
        run.result.log_score = tm.log_score;
    } catch (const Error& e) {
        throw Error(f.name + ": " + e.what());
    }
    const double elapsed = std::chrono::duration<double>(clock::now() - start).count();

    run.result.function = f.name;
    run.result.dim = f.dim;
    run.result.alpha_hat = run.calibration.alpha_hat;
    run.result.seed = cfg.seed;
    run.result.runtime_s = cfg.record_runtime ? std::max(elapsed, 1e-9) : 0.0;
    return run;
}

inline BenchmarkResult run_benchmark(const ExperimentConfig& cfg, const BenchmarkFunction& f) {
    return run_experiment(cfg, f).result;
}

inline BenchmarkResult run_benchmark(const ExperimentConfig& cfg) { return run_benchmark(cfg, find_function(cfg.function)); }

struct SuiteResult {
    std::vector<BenchmarkResult> rows;
    BenchmarkResult average;  // arithmetic means over successful rows

    bool all_ok() const {
        for (const auto& r : rows)
            if (!r.ok) return false;
        return true;
    }
};

inline BenchmarkResult average_row(const std::vector<BenchmarkResult>& rows) {
    BenchmarkResult avg;
    avg.function = "Average";
    std::size_t count = 0;
    for (const auto& r : rows) {
        if (!r.ok) continue;
        avg.coverage += r.coverage;
        avg.log_score += r.log_score;
        avg.runtime_s += r.runtime_s;
        avg.alpha_hat += r.alpha_hat;
        avg.seed = r.seed;
        ++count;
    }
    if (count == 0) {
        avg.ok = false;
        avg.error = "no successful rows";
        return avg;
    }
    const double c = static_cast<double>(count);
    avg.coverage /= c;
    avg.log_score /= c;
    avg.runtime_s /= c;
    avg.alpha_hat /= c;
    return avg;
}

/// Runs every config; a failing row is recorded and the rest continue.
inline SuiteResult run_suite(const std::vector<ExperimentConfig>& cfgs) {
    detail::require(!cfgs.empty(), "run_suite: no configs");
    SuiteResult out;
    for (const auto& cfg : cfgs) {
        try {
            out.rows.push_back(run_benchmark(cfg));
        } catch (const std::exception& e) {
            BenchmarkResult r;
            r.function = cfg.function;
            try {
                r.dim = find_function(cfg.function).dim;
            } catch (const Error&) {
            }
            r.seed = cfg.seed;
            r.ok = false;
            r.error = e.what();
            out.rows.push_back(r);
        }
    }
    out.average = average_row(out.rows);
    return out;
}

}  // namespace confbb
