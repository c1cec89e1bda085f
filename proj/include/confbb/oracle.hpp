#pragma once

// Influence approximation against full weighted refits.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "confbb/bootstrap.hpp"
#include "confbb/dataset.hpp"
#include "confbb/models.hpp"
#include "confbb/parallel.hpp"
#include "confbb/rng.hpp"

namespace confbb {

struct OracleDraw {
    double param_err = 0.0;  // |theta_IF - theta_refit|
    double pred_err = 0.0;   // mean over queries of |linearized IF prediction - refit prediction|
};

/// K Dirichlet draws; for each, compares the influence parameters and
/// linearized predictions at the rows of `queries` with an exact refit.
inline std::vector<OracleDraw> compare_with_retraining(const FittedModel& model, const Dataset& train,
                                                       const Eigen::MatrixXd& queries, double alpha, int K,
                                                       std::uint64_t seed) {
    detail::require(K >= 1, "compare_with_retraining: K must be >= 1");
    const InfluencePack pack = InfluencePack::from(model);
    std::vector<OracleDraw> out(static_cast<std::size_t>(K));
    parallel::for_each_index(out.size(), [&](std::size_t k) {
        Rng g = rng::make(seed, k);
        const WeightVector w = sample_dirichlet(alpha, train.size(), g);
        const Eigen::VectorXd theta_if = perturb_parameters(pack, model.theta_hat, w);
        const Eigen::VectorXd theta_rt = retrain_oracle(model, train, w);
        OracleDraw d;
        d.param_err = (theta_if - theta_rt).norm();
        double acc = 0.0;
        for (Eigen::Index q = 0; q < queries.rows(); ++q) {
            const Eigen::VectorXd x = queries.row(q).transpose();
            acc += std::abs(linearized_prediction(model, x, theta_if) - predict_at(model, x, theta_rt));
        }
        d.pred_err = queries.rows() > 0 ? acc / static_cast<double>(queries.rows()) : 0.0;
        out[k] = d;
    });
    return out;
}

/// Parameter error e(t) = |theta_IF(w_t) - theta_refit(w_t)| along w_t = uniform + t delta.
inline double influence_error_along(const FittedModel& model, const Dataset& train, const Eigen::VectorXd& delta,
                                    double t) {
    const Eigen::Index n = train.size();
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)) + t * delta;
    const WeightVector wv(w, 1.0);
    const InfluencePack pack = InfluencePack::from(model);
    return (perturb_parameters(pack, model.theta_hat, wv) - retrain_oracle(model, train, wv)).norm();
}

/// Random zero-sum direction scaled by 1/n (so uniform + t delta stays on the
/// simplex for |t| well below 1).
inline Eigen::VectorXd zero_sum_direction(Eigen::Index n, Rng& g) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng::standard_normal(g);
    z.array() -= z.mean();
    const double bound = z.cwiseAbs().maxCoeff();
    if (bound > 0.0) z /= bound;
    return z / static_cast<double>(n);
}

/// Mean of e(2t)/e(t) over random zero-sum directions. Close to 4 when the
/// influence error is second order in the perturbation.
inline double quadratic_error_ratio(const FittedModel& model, const Dataset& train, double t, int directions,
                                    std::uint64_t seed) {
    detail::require(directions >= 1, "quadratic_error_ratio: need at least one direction");
    std::vector<double> ratios(static_cast<std::size_t>(directions));
    parallel::for_each_index(ratios.size(), [&](std::size_t k) {
        Rng g = rng::make(seed, k);
        const Eigen::VectorXd delta = zero_sum_direction(train.size(), g);
        const double e1 = influence_error_along(model, train, delta, t);
        const double e2 = influence_error_along(model, train, delta, 2.0 * t);
        ratios[k] = e2 / e1;
    });
    double acc = 0.0;
    for (double r : ratios) acc += r;
    return acc / static_cast<double>(ratios.size());
}

}  // namespace confbb
