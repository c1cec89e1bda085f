#pragma once

// Predictive ensembles, intervals, coverage and the log-score.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "confbb/bootstrap.hpp"
#include "confbb/errors.hpp"
#include "confbb/models.hpp"
#include "confbb/parallel.hpp"
#include "confbb/rng.hpp"

namespace confbb {

/// Samples of the predictive at one query point plus the observation-noise scale.
struct PredictiveEnsemble {
    Eigen::VectorXd samples;
    double sigma_hat = 0.0;
    double bandwidth_floor = 0.0;
    double alpha = 1.0;
    Eigen::VectorXd x_query;

    Eigen::Index size() const { return samples.size(); }

    /// Kernel scale of the mixture density: max(sigma_hat, floor).
    double scale() const { return std::max(sigma_hat, bandwidth_floor); }
};

struct PredictionInterval {
    double lo = 0.0;
    double hi = 0.0;
    double level = 0.9;

    bool contains(double y) const { return lo <= y && y <= hi; }
    double width() const { return hi - lo; }
};

/// Floor for the predictive kernel scale.
inline double bandwidth_floor(const FittedModel& model) {
    return std::max(1e-3 * model.target_sd, 1e-12);
}

/// B influence parameter shifts theta_w - theta_hat, one row per draw. Draw b
/// uses the generator derived from (seed, b), so rows do not depend on thread count.
struct ShiftDraws {
    Eigen::MatrixXd shifts;  // B x d
    double alpha = 1.0;
};

inline ShiftDraws draw_shifts(const InfluencePack& pack, double alpha, Eigen::Index B, std::uint64_t seed) {
    detail::require(B >= 1, "draw count must be positive");
    ShiftDraws out;
    out.alpha = alpha;
    out.shifts.resize(B, pack.d());
    parallel::for_each_index(static_cast<std::size_t>(B), [&](std::size_t b) {
        Rng g = rng::make(seed, b);
        const WeightVector w = sample_dirichlet(alpha, pack.n(), g);
        out.shifts.row(static_cast<Eigen::Index>(b)) = influence_shift(pack, w.values()).transpose();
    });
    return out;
}

/// Linearized predictions at x for a precomputed set of shifts.
inline PredictiveEnsemble ensemble_from_shifts(const FittedModel& model, const ShiftDraws& draws,
                                               const Eigen::Ref<const Eigen::VectorXd>& x) {
    PredictiveEnsemble e;
    e.samples = (draws.shifts * prediction_gradient(model, x)).array() + predict(model, x);
    e.sigma_hat = model.sigma_hat;
    e.bandwidth_floor = bandwidth_floor(model);
    e.alpha = draws.alpha;
    e.x_query = x;
    return e;
}

/// Influence-function BB predictive samples at x. Deterministic in `seed`.
inline PredictiveEnsemble build_ensemble(const FittedModel& model, const InfluencePack& pack,
                                         const Eigen::Ref<const Eigen::VectorXd>& x, double alpha, Eigen::Index B,
                                         std::uint64_t seed) {
    detail::require(B >= 2, "build_ensemble: B must be at least 2");
    model.arch.check_input(x);
    return ensemble_from_shifts(model, draw_shifts(pack, alpha, B, seed), x);
}

/// Ensembles at every row of X sharing one set of B draws (one reweighted
/// predictor per draw, evaluated at all queries).
inline std::vector<PredictiveEnsemble> build_ensembles(const FittedModel& model, const InfluencePack& pack,
                                                       const Eigen::MatrixXd& X, double alpha, Eigen::Index B,
                                                       std::uint64_t seed) {
    detail::require(B >= 2, "build_ensembles: B must be at least 2");
    const ShiftDraws draws = draw_shifts(pack, alpha, B, seed);
    std::vector<PredictiveEnsemble> out;
    out.reserve(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) out.push_back(ensemble_from_shifts(model, draws, X.row(i).transpose()));
    return out;
}

/// Linear-interpolation quantile of sorted data at 1-based position (B-1)q + 1.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    detail::require(!sorted.empty(), "quantile of empty sample");
    const double pos = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Samples, optionally with one N(0, scale^2) draw added per sample from the
/// noise stream `noise_seed`.
inline Eigen::VectorXd augmented_samples(const PredictiveEnsemble& ens, bool include_noise, std::uint64_t noise_seed) {
    Eigen::VectorXd s = ens.samples;
    if (include_noise) {
        Rng g(rng::derive_seed(noise_seed, "observation-noise"));
        const double scale = ens.scale();
        for (Eigen::Index b = 0; b < s.size(); ++b) s(b) += scale * rng::standard_normal(g);
    }
    return s;
}

/// Equal-tailed interval at `level` from the empirical quantiles of the
/// (optionally noise-augmented) samples.
inline PredictionInterval interval(const PredictiveEnsemble& ens, double level, bool include_noise,
                                   std::uint64_t noise_seed) {
    detail::require(level > 0.0 && level < 1.0, "interval: level must be in (0, 1)");
    detail::require(ens.size() >= 1, "interval: empty ensemble");
    Eigen::VectorXd s = augmented_samples(ens, include_noise, noise_seed);
    std::vector<double> sorted(s.data(), s.data() + s.size());
    std::sort(sorted.begin(), sorted.end());
    const double tail = 0.5 * (1.0 - level);
    return PredictionInterval{quantile_sorted(sorted, tail), quantile_sorted(sorted, 1.0 - tail), level};
}

inline double empirical_coverage(std::span<const PredictionInterval> intervals, std::span<const double> targets) {
    detail::require_shape(intervals.size() == targets.size(), "empirical_coverage: length mismatch");
    detail::require(!intervals.empty(), "empirical_coverage: no intervals");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < intervals.size(); ++i) hits += intervals[i].contains(targets[i]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(intervals.size());
}

/// log of the B-component normal mixture density with common scale ens.scale(), at y.
inline double log_score(const PredictiveEnsemble& ens, double y) {
    detail::require(ens.size() >= 1, "log_score: empty ensemble");
    const double s = ens.scale();
    const Eigen::ArrayXd z = (y - ens.samples.array()) / s;
    const Eigen::ArrayXd logk = -0.5 * z.square();
    const double m = logk.maxCoeff();
    const double lse = m + std::log((logk - m).exp().sum());
    return lse - std::log(static_cast<double>(ens.size())) - std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double average_log_score(std::span<const PredictiveEnsemble> ensembles, std::span<const double> targets) {
    detail::require_shape(ensembles.size() == targets.size(), "average_log_score: length mismatch");
    detail::require(!ensembles.empty(), "average_log_score: no ensembles");
    double acc = 0.0;
    for (std::size_t i = 0; i < ensembles.size(); ++i) acc += log_score(ensembles[i], targets[i]);
    return acc / static_cast<double>(ensembles.size());
}

/// Intervals for a batch of ensembles; point i uses noise stream (noise_seed, i).
inline std::vector<PredictionInterval> intervals_for(std::span<const PredictiveEnsemble> ensembles, double level,
                                                     bool include_noise, std::uint64_t noise_seed) {
    std::vector<PredictionInterval> out;
    out.reserve(ensembles.size());
    for (std::size_t i = 0; i < ensembles.size(); ++i)
        out.push_back(interval(ensembles[i], level, include_noise, rng::derive_seed(noise_seed, i)));
    return out;
}

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace confbb
