#pragma once

// Bayesian bootstrap by influence functions.
//
// A Dirichlet(alpha, ..., alpha) weight vector w reweights the training data.
// Instead of refitting, the reweighted minimizer is taken from a first-order
// expansion around the uniform-weight fit:
//
//     theta_w = theta_hat - H^{-1} sum_i (w_i - 1/n) grad l_i(theta_hat)
//
// and predictions are linearized in theta around theta_hat.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>

#include "confbb/dataset.hpp"
#include "confbb/errors.hpp"
#include "confbb/models.hpp"
#include "confbb/rng.hpp"

namespace confbb {

/// A point on the probability simplex together with the concentration it was drawn at.
class WeightVector {
public:
    static constexpr double kSimplexTolerance = 1e-12;

    WeightVector(Eigen::VectorXd w, double alpha) : w_(std::move(w)), alpha_(alpha) {
        detail::require(w_.size() >= 1, "weight vector must be nonempty");
        detail::require((w_.array() >= 0.0).all() && w_.allFinite(), "weights must be nonnegative");
        detail::require(std::abs(w_.sum() - 1.0) <= kSimplexTolerance, "weights must sum to one");
    }

    static WeightVector uniform(Eigen::Index n, double alpha = 1.0) {
        return WeightVector(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), alpha);
    }

    const Eigen::VectorXd& values() const { return w_; }
    double alpha() const { return alpha_; }
    Eigen::Index size() const { return w_.size(); }
    double operator[](Eigen::Index i) const { return w_(i); }

private:
    Eigen::VectorXd w_;
    double alpha_;
};

/// Dirichlet(alpha 1_n) draw by normalizing n independent Gamma(alpha, 1) variates.
inline WeightVector sample_dirichlet(double alpha, Eigen::Index n, Rng& g) {
    detail::require(alpha > 0.0 && std::isfinite(alpha), "sample_dirichlet: alpha must be positive");
    detail::require(n >= 1, "sample_dirichlet: n must be positive");
    Eigen::VectorXd w(n);
    for (;;) {
        for (Eigen::Index i = 0; i < n; ++i) w(i) = rng::gamma(alpha, g);
        const double s = w.sum();
        if (s > 0.0 && std::isfinite(s)) {
            w /= s;
            break;
        }
        // every gamma underflowed (tiny alpha); redraw
    }
    // Renormalize once more so the sum is one to rounding.
    w /= w.sum();
    return WeightVector(std::move(w), alpha);
}

/// Stored per-sample loss gradients and the factorized Hessian of the source fit.
struct InfluencePack {
    Eigen::MatrixXd centered_grads;  // n x d
    const HessianApprox* hessian_ref = nullptr;

    Eigen::Index n() const { return centered_grads.rows(); }
    Eigen::Index d() const { return centered_grads.cols(); }

    /// Holds a pointer to model.hessian; the model must outlive the pack.
    static InfluencePack from(const FittedModel& model) {
        InfluencePack p;
        p.centered_grads = model.per_sample_grads;
        p.hessian_ref = &model.hessian;
        return p;
    }
};

/// Parameter shift theta_w - theta_hat.
inline Eigen::VectorXd influence_shift(const InfluencePack& pack, const Eigen::VectorXd& w) {
    detail::require_shape(w.size() == pack.n(), "perturb_parameters: weight length differs from n");
    const Eigen::VectorXd centered = w.array() - 1.0 / static_cast<double>(pack.n());
    const Eigen::VectorXd v = pack.centered_grads.transpose() * centered;
    return -influence_solve(*pack.hessian_ref, v);
}

inline Eigen::VectorXd perturb_parameters(const InfluencePack& pack, const Eigen::VectorXd& theta_hat,
                                          const WeightVector& w) {
    detail::require_shape(theta_hat.size() == pack.d(), "perturb_parameters: parameter dimension mismatch");
    return theta_hat + influence_shift(pack, w.values());
}

/// predict(x) + grad f(x)^T (theta_w - theta_hat); never evaluates the model at theta_w.
inline double linearized_prediction(const FittedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& theta_w) {
    detail::require_shape(theta_w.size() == model.param_count(), "linearized_prediction: parameter dimension mismatch");
    return predict(model, x) + prediction_gradient(model, x).dot(theta_w - model.theta_hat);
}

/// Exact weighted empirical risk minimizer, the full-retraining reference for
/// perturb_parameters. The MLP refit warm-starts at theta_hat (at most 2000 iterations).
inline Eigen::VectorXd retrain_oracle(const FittedModel& base, const Dataset& train, const WeightVector& w) {
    detail::require_shape(w.size() == train.size() && train.size() == base.n_train,
                          "retrain_oracle: weight length differs from training size");
    return weighted_refit(base, train, w.values(), 2000);
}

}  // namespace confbb
