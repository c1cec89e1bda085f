#pragma once

// Selection of the Dirichlet concentration on held-out data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "confbb/bootstrap.hpp"
#include "confbb/dataset.hpp"
#include "confbb/errors.hpp"
#include "confbb/models.hpp"
#include "confbb/predictive.hpp"
#include "confbb/rng.hpp"

namespace confbb {

enum class Criterion { log_score, coverage };

inline const char* to_string(Criterion c) { return c == Criterion::log_score ? "log_score" : "coverage"; }

inline Criterion parse_criterion(const std::string& s) {
    if (s == "log_score") return Criterion::log_score;
    if (s == "coverage") return Criterion::coverage;
    throw InvalidParameter("unknown criterion '" + s + "'");
}

/// Strictly increasing positive concentration values.
class AlphaGrid {
public:
    AlphaGrid() = default;
    explicit AlphaGrid(std::vector<double> values) : values_(std::move(values)) {
        detail::require(!values_.empty(), "alpha grid must be nonempty");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            detail::require(values_[i] > 0.0 && std::isfinite(values_[i]), "alpha grid values must be positive");
            if (i > 0) detail::require(values_[i] > values_[i - 1], "alpha grid must be strictly increasing");
        }
    }

    /// 13 points from 0.05 to 50, log-spaced on each side of 1.0 (which is
    /// included): 5 steps from 0.05 to 1 and 7 steps from 1 to 50.
    static AlphaGrid default_grid() {
        std::vector<double> v;
        for (int k = 0; k < 5; ++k) v.push_back(0.05 * std::pow(20.0, k / 5.0));
        v.push_back(1.0);
        for (int k = 1; k <= 7; ++k) v.push_back(k == 7 ? 50.0 : std::pow(50.0, k / 7.0));
        return AlphaGrid(std::move(v));
    }

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    std::ptrdiff_t index_of(double alpha) const {
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (values_[i] == alpha) return static_cast<std::ptrdiff_t>(i);
        return -1;
    }

private:
    std::vector<double> values_;
};

struct CalibrationResult {
    AlphaGrid grid;
    std::vector<double> scores;
    std::size_t selected = 0;
    double alpha_hat = 1.0;
    Criterion criterion = Criterion::log_score;
    double nominal_level = 0.9;
};

/// Index of the largest score; scores within 1e-12 of the best keep the earlier (smaller alpha) index.
inline std::size_t select_index(std::span<const double> scores) {
    detail::require(!scores.empty(), "select_index: no scores");
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.size(); ++j)
        if (scores[j] > scores[best] + 1e-12) best = j;
    return best;
}

inline CalibrationResult select_alpha(const AlphaGrid& grid, std::vector<double> scores, Criterion criterion,
                                      double nominal_level = 0.9) {
    detail::require_shape(scores.size() == grid.size(), "select_alpha: one score per grid point required");
    CalibrationResult r;
    r.grid = grid;
    r.selected = select_index(scores);
    r.alpha_hat = grid[r.selected];
    r.scores = std::move(scores);
    r.criterion = criterion;
    r.nominal_level = nominal_level;
    return r;
}

struct TuneOptions {
    Criterion criterion = Criterion::log_score;
    double nominal_level = 0.9;
    Eigen::Index B = 500;
    std::uint64_t seed = 0;
    bool include_noise = true;
};

/// Seeds used for grid point k: its Dirichlet stream and its noise stream.
inline std::uint64_t draw_seed_for(std::uint64_t seed, std::size_t k) { return rng::derive_seed(seed, k); }
inline std::uint64_t noise_seed_for(std::uint64_t seed, std::size_t k) {
    return rng::derive_seed(rng::derive_seed(seed, "noise"), k);
}

/// Criterion value for one set of shift draws on a dataset: average log-score,
/// or -|coverage - nominal| for the coverage criterion.
inline double criterion_score(const FittedModel& model, const ShiftDraws& draws, const Dataset& data,
                              const TuneOptions& opt, std::uint64_t noise_seed) {
    std::vector<PredictiveEnsemble> ens;
    ens.reserve(static_cast<std::size_t>(data.size()));
    for (Eigen::Index i = 0; i < data.size(); ++i) ens.push_back(ensemble_from_shifts(model, draws, data.X.row(i).transpose()));
    if (opt.criterion == Criterion::log_score) return average_log_score(ens, as_span(data.y));
    const auto iv = intervals_for(ens, opt.nominal_level, opt.include_noise, noise_seed);
    return -std::abs(empirical_coverage(iv, as_span(data.y)) - opt.nominal_level);
}

/// Score at grid point k, using that point's dedicated streams.
inline double score_at_grid_point(const FittedModel& model, const InfluencePack& pack, const Dataset& data,
                                  const AlphaGrid& grid, std::size_t k, const TuneOptions& opt) {
    const ShiftDraws draws = draw_shifts(pack, grid[k], opt.B, draw_seed_for(opt.seed, k));
    return criterion_score(model, draws, data, opt, noise_seed_for(opt.seed, k));
}

/// Grid search for the concentration maximizing the validation criterion.
inline CalibrationResult tune_alpha(const FittedModel& model, const InfluencePack& pack, const Dataset& val,
                                    const AlphaGrid& grid, const TuneOptions& opt) {
    detail::require(!val.empty(), "tune_alpha: empty validation set");
    detail::require(grid.size() >= 1, "tune_alpha: empty grid");
    detail::require(opt.nominal_level > 0.0 && opt.nominal_level < 1.0, "tune_alpha: nominal level outside (0, 1)");
    detail::require(opt.B >= 2, "tune_alpha: B must be at least 2");
    std::vector<double> scores(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) scores[k] = score_at_grid_point(model, pack, val, grid, k, opt);
    return select_alpha(grid, std::move(scores), opt.criterion, opt.nominal_level);
}

struct ConsistencyRow {
    Eigen::Index m = 0;
    double mean_gap = 0.0;
    double sd_gap = 0.0;
};

/// Draws a fresh validation set of the requested size.
using DataSource = std::function<Dataset(Eigen::Index m, Rng& g)>;

/// For each validation size m, repeatedly draws a validation set, tunes alpha by
/// log-score and records |S_val(alpha_hat) - S_test(alpha_hat)|, both scores using
/// the draws of the selected grid point. Returns per-m mean and sd of the gap.
inline std::vector<ConsistencyRow> consistency_diagnostic(const FittedModel& model, const InfluencePack& pack,
                                                          const AlphaGrid& grid, const std::vector<Eigen::Index>& val_sizes,
                                                          const Dataset& test, int replications,
                                                          const DataSource& data_source, std::uint64_t seed,
                                                          Eigen::Index B = 500) {
    detail::require(!val_sizes.empty(), "consistency_diagnostic: no validation sizes");
    detail::require(replications >= 1, "consistency_diagnostic: replications must be >= 1");
    detail::require(!test.empty(), "consistency_diagnostic: empty test set");
    for (std::size_t i = 0; i < val_sizes.size(); ++i) {
        detail::require(val_sizes[i] >= 1, "consistency_diagnostic: validation sizes must be positive");
        if (i > 0) detail::require(val_sizes[i] > val_sizes[i - 1], "consistency_diagnostic: sizes must increase");
    }
    std::vector<ConsistencyRow> rows;
    for (std::size_t mi = 0; mi < val_sizes.size(); ++mi) {
        const Eigen::Index m = val_sizes[mi];
        std::vector<double> gaps;
        for (int r = 0; r < replications; ++r) {
            const std::uint64_t rep_seed = rng::derive_seed(rng::derive_seed(seed, "replication"),
                                                            static_cast<std::uint64_t>(mi) * 1000003ULL + r);
            Rng g(rng::derive_seed(rep_seed, "validation-data"));
            const Dataset val = data_source(m, g);
            TuneOptions opt;
            opt.criterion = Criterion::log_score;
            opt.B = B;
            opt.seed = rep_seed;
            const CalibrationResult cal = tune_alpha(model, pack, val, grid, opt);
            const ShiftDraws draws = draw_shifts(pack, cal.alpha_hat, B, draw_seed_for(rep_seed, cal.selected));
            const double s_test = criterion_score(model, draws, test, opt, noise_seed_for(rep_seed, cal.selected));
            gaps.push_back(std::abs(cal.scores[cal.selected] - s_test));
        }
        ConsistencyRow row;
        row.m = m;
        double mean = 0.0;
        for (double gp : gaps) mean += gp;
        mean /= static_cast<double>(gaps.size());
        double var = 0.0;
        for (double gp : gaps) var += (gp - mean) * (gp - mean);
        row.mean_gap = mean;
        row.sd_gap = gaps.size() > 1 ? std::sqrt(var / static_cast<double>(gaps.size() - 1)) : 0.0;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace confbb
