#pragma once

// Monte Carlo dropout on the fitted MLP. Each pass masks the input-to-hidden
// weights with Bernoulli(1 - p) and rescales kept weights by 1 / (1 - p);
// biases and output weights are never masked. The network is trained without dropout.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "confbb/errors.hpp"
#include "confbb/models.hpp"
#include "confbb/parallel.hpp"
#include "confbb/predictive.hpp"
#include "confbb/rng.hpp"

namespace confbb {

struct DropoutConfig {
    double p = 0.1;
    Eigen::Index T = 1000;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require(p >= 0.0 && p < 1.0, "dropout p must be in [0, 1)");
        detail::require(T >= 1, "dropout T must be >= 1");
    }
};

inline double masked_forward(const FittedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, double p, Rng& g) {
    if (model.spec().kind != ModelKind::mlp) throw UnsupportedModel("masked_forward: dropout needs an mlp model");
    detail::require(p >= 0.0 && p < 1.0, "dropout p must be in [0, 1)");
    const Architecture& a = model.arch;
    a.check_input(x);
    const auto m = a.mlp_view(model.theta_hat);
    const Eigen::VectorXd xs = a.scale_input(x);
    const double keep = 1.0 - p;
    Eigen::MatrixXd W = m.W;
    if (p > 0.0) {
        for (Eigen::Index j = 0; j < W.rows(); ++j)
            for (Eigen::Index k = 0; k < W.cols(); ++k) W(j, k) = rng::bernoulli(keep, g) ? W(j, k) / keep : 0.0;
    }
    const Eigen::VectorXd t = (W * xs + m.b1).array().tanh().matrix();
    return a.y_shift + a.y_scale * (m.v.dot(t) + m.b2);
}

/// T masked passes packaged as a predictive ensemble; pass t uses stream (seed, t).
inline PredictiveEnsemble dropout_ensemble(const FittedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                                           const DropoutConfig& cfg) {
    cfg.validate();
    if (model.spec().kind != ModelKind::mlp) throw UnsupportedModel("dropout_ensemble: dropout needs an mlp model");
    PredictiveEnsemble e;
    e.samples.resize(cfg.T);
    const Eigen::VectorXd xq = x;
    parallel::for_each_index(static_cast<std::size_t>(cfg.T), [&](std::size_t t) {
        Rng g = rng::make(cfg.seed, t);
        e.samples(static_cast<Eigen::Index>(t)) = masked_forward(model, xq, cfg.p, g);
    });
    e.sigma_hat = model.sigma_hat;
    e.bandwidth_floor = bandwidth_floor(model);
    e.alpha = 0.0;
    e.x_query = xq;
    return e;
}

}  // namespace confbb
