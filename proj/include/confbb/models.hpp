#pragma once

// Differentiable base predictors: linear, ridge and a one-hidden-layer tanh MLP.
//
// All models share one loss convention. With f(x, theta) = y_shift + y_scale * net(x, theta)
// and standardized residual r = (y - f) / y_scale, the per-sample loss is
//
//     l_i(theta) = 0.5 * r_i^2 + 0.5 * lambda * |P theta|^2
//
// where P masks the penalized coordinates (ridge: all but the intercept; mlp: all).
// Linear models use y_shift = 0 and y_scale = 1, so the loss is on the original
// scale. The MLP works on standardized targets; influence perturbations are
// invariant to that rescaling because it multiplies H and every gradient alike.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "confbb/dataset.hpp"
#include "confbb/errors.hpp"
#include "confbb/rng.hpp"

namespace confbb {

enum class ModelKind { linear, ridge, mlp };
enum class Activation { tanh };
enum class HessianMode { exact, gauss_newton, diagonal };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::linear: return "linear";
        case ModelKind::ridge: return "ridge";
        case ModelKind::mlp: return "mlp";
    }
    return "linear";
}

inline const char* to_string(HessianMode m) {
    switch (m) {
        case HessianMode::exact: return "exact";
        case HessianMode::gauss_newton: return "gauss_newton";
        case HessianMode::diagonal: return "diagonal";
    }
    return "exact";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "linear") return ModelKind::linear;
    if (s == "ridge") return ModelKind::ridge;
    if (s == "mlp") return ModelKind::mlp;
    throw InvalidParameter("unknown model kind '" + s + "'");
}

inline HessianMode parse_hessian_mode(const std::string& s) {
    if (s == "exact") return HessianMode::exact;
    if (s == "gauss_newton") return HessianMode::gauss_newton;
    if (s == "diagonal") return HessianMode::diagonal;
    throw InvalidParameter("unknown hessian mode '" + s + "'");
}

struct ModelSpec {
    ModelKind kind = ModelKind::linear;
    double ridge_lambda = 0.0;   // ridge only
    int hidden_width = 32;       // mlp only
    Activation activation = Activation::tanh;
    bool fit_intercept = true;   // linear/ridge; the mlp always carries biases
    double weight_decay = 1e-3;  // mlp only, L2 on standardized scale
    std::optional<HessianMode> hessian_mode;
    int max_iterations = 5000;

    static ModelSpec linear(bool intercept = true) {
        ModelSpec s;
        s.kind = ModelKind::linear;
        s.fit_intercept = intercept;
        return s;
    }
    static ModelSpec ridge(double lambda, bool intercept = true) {
        ModelSpec s;
        s.kind = ModelKind::ridge;
        s.ridge_lambda = lambda;
        s.fit_intercept = intercept;
        return s;
    }
    static ModelSpec mlp(int width = 32, double decay = 1e-3) {
        ModelSpec s;
        s.kind = ModelKind::mlp;
        s.hidden_width = width;
        s.weight_decay = decay;
        return s;
    }

    HessianMode effective_hessian_mode() const {
        if (hessian_mode) return *hessian_mode;
        return kind == ModelKind::mlp ? HessianMode::gauss_newton : HessianMode::exact;
    }

    double penalty() const {
        switch (kind) {
            case ModelKind::linear: return 0.0;
            case ModelKind::ridge: return ridge_lambda;
            case ModelKind::mlp: return weight_decay;
        }
        return 0.0;
    }

    void validate() const {
        detail::require(ridge_lambda >= 0.0 && std::isfinite(ridge_lambda), "ridge_lambda must be >= 0");
        detail::require(hidden_width >= 1, "hidden_width must be >= 1");
        detail::require(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay must be >= 0");
        detail::require(max_iterations >= 1, "max_iterations must be >= 1");
    }
};

/// Structure of a model over a fixed input dimension, including the affine
/// input/target scaling. Evaluates outputs and derivatives at any parameter vector.
struct Architecture {
    ModelSpec spec;
    Eigen::Index input_dim = 0;
    Eigen::VectorXd x_shift;  // per-input standardization (identity for linear models)
    Eigen::VectorXd x_scale;
    double y_shift = 0.0;
    double y_scale = 1.0;

    Eigen::Index param_count() const {
        if (spec.kind == ModelKind::mlp) {
            const Eigen::Index h = spec.hidden_width;
            return h * input_dim + 2 * h + 1;
        }
        return input_dim + (spec.fit_intercept ? 1 : 0);
    }

    /// Penalty mask P as a 0/1 vector.
    Eigen::VectorXd penalty_mask() const {
        Eigen::VectorXd m = Eigen::VectorXd::Ones(param_count());
        if (spec.kind != ModelKind::mlp && spec.fit_intercept) m(0) = 0.0;
        return m;
    }

    void check_input(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        detail::require_shape(x.size() == input_dim, "input has dimension " + std::to_string(x.size()) +
                                                         ", model expects " + std::to_string(input_dim));
    }

    void check_params(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
        detail::require_shape(theta.size() == param_count(), "parameter vector has wrong dimension");
    }

    Eigen::VectorXd scale_input(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        return ((x - x_shift).array() / x_scale.array()).matrix();
    }

    /// Design row for linear models.
    Eigen::VectorXd design_row(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        Eigen::VectorXd phi(param_count());
        Eigen::Index off = 0;
        if (spec.fit_intercept) phi(off++) = 1.0;
        phi.segment(off, input_dim) = x;
        return phi;
    }

    // ---- raw network on the standardized scale ----

    struct MlpView {
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W;
        Eigen::Map<const Eigen::VectorXd> b1;
        Eigen::Map<const Eigen::VectorXd> v;
        double b2;
    };

    MlpView mlp_view(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
        const Eigen::Index h = spec.hidden_width, D = input_dim;
        const double* p = theta.data();
        return MlpView{{p, h, D}, {p + h * D, h}, {p + h * D + h, h}, p[h * D + 2 * h]};
    }

    /// net(x_scaled, theta).
    double net(const Eigen::Ref<const Eigen::VectorXd>& xs, const Eigen::Ref<const Eigen::VectorXd>& theta) const {
        if (spec.kind != ModelKind::mlp) return design_row(xs).dot(theta);
        const auto m = mlp_view(theta);
        const Eigen::VectorXd t = (m.W * xs + m.b1).array().tanh().matrix();
        return m.v.dot(t) + m.b2;
    }

    /// Gradient of net with respect to theta, at a scaled input.
    Eigen::VectorXd net_gradient(const Eigen::Ref<const Eigen::VectorXd>& xs,
                                 const Eigen::Ref<const Eigen::VectorXd>& theta) const {
        if (spec.kind != ModelKind::mlp) return design_row(xs);
        const Eigen::Index h = spec.hidden_width, D = input_dim;
        const auto m = mlp_view(theta);
        const Eigen::VectorXd t = (m.W * xs + m.b1).array().tanh().matrix();
        Eigen::VectorXd g(param_count());
        for (Eigen::Index j = 0; j < h; ++j) {
            const double dj = m.v(j) * (1.0 - t(j) * t(j));
            for (Eigen::Index k = 0; k < D; ++k) g(j * D + k) = dj * xs(k);
            g(h * D + j) = dj;
            g(h * D + h + j) = t(j);
        }
        g(h * D + 2 * h) = 1.0;
        return g;
    }

    /// Adds scale * d^2 net / d theta^2 at a scaled input into `acc`. Zero for linear models.
    void accumulate_net_hessian(const Eigen::Ref<const Eigen::VectorXd>& xs,
                                const Eigen::Ref<const Eigen::VectorXd>& theta, double scale,
                                Eigen::MatrixXd& acc) const {
        if (spec.kind != ModelKind::mlp) return;
        const Eigen::Index h = spec.hidden_width, D = input_dim;
        const auto m = mlp_view(theta);
        const Eigen::VectorXd t = (m.W * xs + m.b1).array().tanh().matrix();
        auto add = [&](Eigen::Index a, Eigen::Index b, double val) {
            acc(a, b) += val;
            if (a != b) acc(b, a) += val;
        };
        for (Eigen::Index j = 0; j < h; ++j) {
            const double d1 = 1.0 - t(j) * t(j);
            const double d2 = -2.0 * t(j) * d1;
            const double vd2 = scale * m.v(j) * d2;
            const Eigen::Index bj = h * D + j, vj = h * D + h + j;
            // W_j. block, W_j./b1_j, b1_j/b1_j
            for (Eigen::Index k = 0; k < D; ++k) {
                for (Eigen::Index l = k; l < D; ++l) add(j * D + k, j * D + l, vd2 * xs(k) * xs(l));
                add(j * D + k, bj, vd2 * xs(k));
                add(j * D + k, vj, scale * d1 * xs(k));
            }
            add(bj, bj, vd2);
            add(bj, vj, scale * d1);
        }
    }

    // ---- original-scale outputs ----

    double output(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& theta) const {
        check_input(x);
        check_params(theta);
        return y_shift + y_scale * net(scale_input(x), theta);
    }

    Eigen::VectorXd output_gradient(const Eigen::Ref<const Eigen::VectorXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& theta) const {
        check_input(x);
        check_params(theta);
        return y_scale * net_gradient(scale_input(x), theta);
    }

    /// Per-sample loss l(z, theta) under the shared convention.
    double loss(const Eigen::Ref<const Eigen::VectorXd>& x, double y,
                const Eigen::Ref<const Eigen::VectorXd>& theta) const {
        const double r = (y - output(x, theta)) / y_scale;
        const Eigen::VectorXd pt = penalty_mask().cwiseProduct(theta);
        return 0.5 * r * r + 0.5 * spec.penalty() * pt.squaredNorm();
    }

    /// Per-sample loss gradient.
    Eigen::VectorXd loss_gradient(const Eigen::Ref<const Eigen::VectorXd>& x, double y,
                                  const Eigen::Ref<const Eigen::VectorXd>& theta) const {
        const Eigen::VectorXd xs = scale_input(x);
        const double r = (y - y_shift) / y_scale - net(xs, theta);
        return -r * net_gradient(xs, theta) + spec.penalty() * penalty_mask().cwiseProduct(theta);
    }
};

/// Dense factorization of H + damping * I (or its diagonal), with the
/// undamped matrix kept for inspection.
class HessianApprox {
public:
    HessianMode mode = HessianMode::exact;
    Eigen::MatrixXd matrix;  // undamped H (diagonal mode: diagonal matrix)
    double damping_lambda = 0.0;

    Eigen::Index dim() const { return matrix.rows(); }

    /// Factorizes H, first undamped, then with damping
    /// max(1e-8, 1e-6 trace(H)/d) doubled up to 20 times.
    static HessianApprox factorize(HessianMode mode, Eigen::MatrixXd H) {
        HessianApprox out;
        out.mode = mode;
        const Eigen::Index d = H.rows();
        if (mode == HessianMode::diagonal) H = Eigen::MatrixXd(H.diagonal().asDiagonal());
        out.matrix = std::move(H);
        if (d == 0) return out;
        if (out.try_factor(0.0)) return out;
        double lambda = std::max(1e-8, 1e-6 * std::abs(out.matrix.trace()) / static_cast<double>(d));
        for (int k = 0; k <= 20; ++k, lambda *= 2.0) {
            if (out.try_factor(lambda)) return out;
        }
        throw IllConditioned("hessian factorization failed after damping escalation");
    }

    /// Solves (H + damping I) u = v.
    Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& v) const {
        detail::require_shape(v.size() == dim(), "influence_solve: right-hand side has wrong dimension");
        if (dim() == 0) return Eigen::VectorXd(0);
        if (mode == HessianMode::diagonal) return (v.array() / diag_.array()).matrix();
        auto scaled_solve = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
            return (equil_.array() * llt_.solve((equil_.array() * rhs.array()).matrix()).array()).matrix();
        };
        Eigen::VectorXd u = scaled_solve(v);
        // one step of iterative refinement
        const Eigen::VectorXd r = v - damped_apply(u);
        u += scaled_solve(r);
        return u;
    }

    /// (H + damping I) u.
    Eigen::VectorXd damped_apply(const Eigen::Ref<const Eigen::VectorXd>& u) const {
        return matrix * u + damping_lambda * u;
    }

private:
    static constexpr double kMinRcond = 1e-13;

    bool try_factor(double lambda) {
        const Eigen::Index d = matrix.rows();
        if (mode == HessianMode::diagonal) {
            Eigen::VectorXd dg = matrix.diagonal().array() + lambda;
            const double mx = dg.maxCoeff(), mn = dg.minCoeff();
            if (!(mn > 0.0) || mn < kMinRcond * mx) return false;
            diag_ = std::move(dg);
            damping_lambda = lambda;
            return true;
        }
        Eigen::MatrixXd A = matrix;
        A.diagonal().array() += lambda;
        if (!A.allFinite() || !(A.diagonal().minCoeff() > 0.0)) return false;
        // symmetric Jacobi scaling: factor S A S with S = diag(A)^{-1/2}
        Eigen::VectorXd s = A.diagonal().cwiseSqrt().cwiseInverse();
        A = s.asDiagonal() * A * s.asDiagonal();
        (void)d;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() != Eigen::Success || !(llt.rcond() >= kMinRcond)) return false;
        llt_ = std::move(llt);
        equil_ = std::move(s);
        damping_lambda = lambda;
        return true;
    }

    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd equil_;
    Eigen::VectorXd diag_;
};

/// Loss-weighted Hessian matrix of the empirical risk at theta. Weights sum to one.
inline Eigen::MatrixXd hessian_matrix(const Architecture& arch, const Dataset& data,
                                      const Eigen::Ref<const Eigen::VectorXd>& theta,
                                      const Eigen::Ref<const Eigen::VectorXd>& weights, HessianMode mode) {
    const Eigen::Index d = arch.param_count();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd curvature = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const Eigen::VectorXd xs = arch.scale_input(data.X.row(i).transpose());
        const Eigen::VectorXd g = arch.net_gradient(xs, theta);
        H.selfadjointView<Eigen::Lower>().rankUpdate(g, weights(i));
        if (mode == HessianMode::exact && arch.spec.kind == ModelKind::mlp) {
            const double r = (data.y(i) - arch.y_shift) / arch.y_scale - arch.net(xs, theta);
            arch.accumulate_net_hessian(xs, theta, -weights(i) * r, curvature);
        }
    }
    H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
    H += curvature;
    H.diagonal() += arch.spec.penalty() * arch.penalty_mask();
    if (mode == HessianMode::diagonal) H = Eigen::MatrixXd(H.diagonal().asDiagonal());
    return H;
}

struct FittedModel {
    Architecture arch;
    Eigen::VectorXd theta_hat;
    Eigen::MatrixXd per_sample_grads;  // n x d, rows are loss gradients at theta_hat
    HessianApprox hessian;
    double sigma_hat = 0.0;       // residual sd, original scale
    double target_sd = 0.0;       // sd of training targets
    Eigen::Index n_train = 0;
    double stationarity = 0.0;    // norm of the mean loss gradient
    int iterations = 0;

    const ModelSpec& spec() const { return arch.spec; }
    Eigen::Index param_count() const { return arch.param_count(); }
};

inline double predict(const FittedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return model.arch.output(x, model.theta_hat);
}

inline double predict_at(const FittedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& theta) {
    return model.arch.output(x, theta);
}

inline Eigen::VectorXd prediction_gradient(const FittedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return model.arch.output_gradient(x, model.theta_hat);
}

inline Eigen::VectorXd influence_solve(const HessianApprox& h, const Eigen::Ref<const Eigen::VectorXd>& v) {
    return h.solve(v);
}

namespace detail {

inline double sample_sd(const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    // shifted by the first element so constant input gives exactly zero
    const Eigen::ArrayXd d = v.array() - v(0);
    const double m = d.mean();
    return std::sqrt((d - m).square().sum() / static_cast<double>(v.size() - 1));
}

inline Architecture make_architecture(const ModelSpec& spec, const Dataset& train) {
    spec.validate();
    Architecture a;
    a.spec = spec;
    a.input_dim = train.dim();
    a.x_shift = Eigen::VectorXd::Zero(a.input_dim);
    a.x_scale = Eigen::VectorXd::Ones(a.input_dim);
    if (spec.kind == ModelKind::mlp) {
        detail::require(a.input_dim >= 1, "mlp needs at least one input");
        for (Eigen::Index k = 0; k < a.input_dim; ++k) {
            const Eigen::VectorXd col = train.X.col(k);
            a.x_shift(k) = col.mean();
            const double sd = sample_sd(col);
            a.x_scale(k) = sd > 0.0 ? sd : 1.0;
        }
        a.y_shift = train.y.mean();
        const double sd = sample_sd(train.y);
        a.y_scale = sd > 0.0 ? sd : 1.0;
    }
    return a;
}

/// Weighted objective sum_i w_i l_i(theta) and its gradient.
inline double weighted_objective(const Architecture& arch, const Dataset& data, const Eigen::VectorXd& w,
                                 const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Eigen::MatrixXd* gn) {
    const Eigen::Index d = arch.param_count();
    const Eigen::VectorXd mask = arch.penalty_mask();
    const double lambda = arch.spec.penalty();
    double value = 0.0;
    if (grad) grad->setZero(d);
    if (gn) gn->setZero(d, d);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const Eigen::VectorXd xs = arch.scale_input(data.X.row(i).transpose());
        const double r = (data.y(i) - arch.y_shift) / arch.y_scale - arch.net(xs, theta);
        value += 0.5 * w(i) * r * r;
        if (grad || gn) {
            const Eigen::VectorXd g = arch.net_gradient(xs, theta);
            if (grad) *grad -= (w(i) * r) * g;
            if (gn) gn->selfadjointView<Eigen::Lower>().rankUpdate(g, w(i));
        }
    }
    const Eigen::VectorXd pt = mask.cwiseProduct(theta);
    value += 0.5 * lambda * pt.squaredNorm();
    if (grad) *grad += lambda * pt;
    if (gn) {
        gn->triangularView<Eigen::StrictlyUpper>() = gn->transpose();
        gn->diagonal() += lambda * mask;
    }
    return value;
}

struct SolveOutcome {
    Eigen::VectorXd theta;
    double grad_norm = 0.0;
    int iterations = 0;
};

/// Closed-form weighted (penalized) least squares for linear/ridge models.
inline SolveOutcome solve_linear(const Architecture& arch, const Dataset& data, const Eigen::VectorXd& w) {
    const Eigen::Index n = data.size(), d = arch.param_count();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd phi = arch.design_row(data.X.row(i).transpose());
        A.selfadjointView<Eigen::Lower>().rankUpdate(phi, w(i));
        b += w(i) * data.y(i) * phi;
    }
    A.triangularView<Eigen::StrictlyUpper>() = A.transpose();
    A.diagonal() += arch.spec.penalty() * arch.penalty_mask();
    SolveOutcome out;
    if (d == 0) {
        out.theta = Eigen::VectorXd(0);
        return out;
    }
    if (!(A.diagonal().minCoeff() > 0.0)) throw SingularFit("design matrix is singular; add ridge regularization");
    // column equilibration so badly scaled inputs are not mistaken for rank deficiency
    const Eigen::VectorXd s = A.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd As = s.asDiagonal() * A * s.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(As);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13 ||
        ldlt.vectorD().minCoeff() <= 1e-14)
        throw SingularFit("design matrix is singular; add ridge regularization");
    auto solve = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
        return (s.array() * ldlt.solve((s.array() * rhs.array()).matrix()).array()).matrix();
    };
    Eigen::VectorXd theta = solve(b);
    for (int k = 0; k < 2; ++k) theta += solve(b - A * theta);
    out.theta = std::move(theta);
    out.grad_norm = (A * out.theta - b).norm();
    return out;
}

/// Levenberg-Marquardt on the weighted MLP objective starting from `theta0`.
inline SolveOutcome solve_mlp(const Architecture& arch, const Dataset& data, const Eigen::VectorXd& w,
                              Eigen::VectorXd theta0, int max_iterations, double tolerance) {
    const Eigen::Index d = arch.param_count();
    Eigen::VectorXd theta = std::move(theta0);
    Eigen::VectorXd grad(d);
    Eigen::MatrixXd gn(d, d);
    double value = weighted_objective(arch, data, w, theta, &grad, &gn);
    double mu = 1e-3;
    SolveOutcome out;
    int it = 0;
    for (; it < max_iterations && grad.norm() > tolerance; ++it) {
        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Eigen::MatrixXd A = gn;
            A.diagonal().array() += mu;
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() != Eigen::Success) {
                mu *= 4.0;
                continue;
            }
            const Eigen::VectorXd step = -llt.solve(grad);
            const Eigen::VectorXd cand = theta + step;
            const double cand_value = weighted_objective(arch, data, w, cand, nullptr, nullptr);
            if (std::isfinite(cand_value) && cand_value <= value) {
                theta = cand;
                value = cand_value;
                mu = std::max(mu * 0.3, 1e-12);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        value = weighted_objective(arch, data, w, theta, &grad, &gn);
        if (!accepted) break;
    }
    out.theta = std::move(theta);
    out.grad_norm = grad.norm();
    out.iterations = it;
    return out;
}

inline Eigen::VectorXd initial_mlp_params(const Architecture& arch, std::uint64_t seed) {
    const Eigen::Index h = arch.spec.hidden_width, D = arch.input_dim;
    Rng g(rng::derive_seed(seed, "mlp-init"));
    Eigen::VectorXd theta(arch.param_count());
    const double w_sd = 1.0 / std::sqrt(static_cast<double>(D));
    const double v_sd = 1.0 / std::sqrt(static_cast<double>(h));
    for (Eigen::Index i = 0; i < h * D; ++i) theta(i) = w_sd * rng::standard_normal(g);
    for (Eigen::Index j = 0; j < h; ++j) theta(h * D + j) = 0.5 * rng::standard_normal(g);
    for (Eigen::Index j = 0; j < h; ++j) theta(h * D + h + j) = v_sd * rng::standard_normal(g);
    theta(h * D + 2 * h) = 0.0;
    return theta;
}

}  // namespace detail

/// Gradient-norm tolerance accepted for a fit to count as stationary.
inline double stationarity_tolerance(const ModelSpec& spec) { return spec.kind == ModelKind::mlp ? 1e-4 : 1e-6; }

/// Hessian of the uniform-weight empirical risk at the model's parameters.
inline HessianApprox compute_hessian(const FittedModel& model, const Dataset& train, HessianMode mode) {
    detail::require_shape(train.size() == model.n_train, "compute_hessian: training set size mismatch");
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(train.size(), 1.0 / static_cast<double>(train.size()));
    return HessianApprox::factorize(mode, hessian_matrix(model.arch, train, model.theta_hat, w, mode));
}

/// Fits the empirical risk minimizer and caches gradients, Hessian and noise scale.
inline FittedModel fit_erm(const ModelSpec& spec, const Dataset& train, std::uint64_t seed = 0) {
    const Architecture arch = detail::make_architecture(spec, train);
    const Eigen::Index n = train.size(), d = arch.param_count();
    if (spec.kind == ModelKind::mlp)
        detail::require(n >= 2, "fit_erm: mlp needs at least 2 training points");
    else
        detail::require(n >= std::max<Eigen::Index>(1, spec.kind == ModelKind::linear ? d : 1),
                        "fit_erm: fewer training points than parameters");
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));

    FittedModel m;
    m.arch = arch;
    m.n_train = n;
    detail::SolveOutcome sol;
    if (spec.kind == ModelKind::mlp) {
        sol = detail::solve_mlp(arch, train, w, detail::initial_mlp_params(arch, seed), spec.max_iterations, 1e-8);
        if (sol.grad_norm > stationarity_tolerance(spec))
            throw ConvergenceFailure("fit_erm: mlp did not reach a stationary point", sol.grad_norm);
    } else {
        sol = detail::solve_linear(arch, train, w);
    }
    m.theta_hat = std::move(sol.theta);
    m.iterations = sol.iterations;

    m.per_sample_grads.resize(n, d);
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = train.X.row(i).transpose();
        m.per_sample_grads.row(i) = arch.loss_gradient(x, train.y(i), m.theta_hat).transpose();
        resid(i) = train.y(i) - arch.output(x, m.theta_hat);
    }
    m.stationarity = n > 0 ? m.per_sample_grads.colwise().mean().norm() : 0.0;
    const double rss = resid.squaredNorm();
    if (spec.kind == ModelKind::mlp)
        m.sigma_hat = std::sqrt(rss / static_cast<double>(n));
    else
        m.sigma_hat = std::sqrt(rss / static_cast<double>(std::max<Eigen::Index>(n - d, 1)));
    m.target_sd = detail::sample_sd(train.y);
    m.hessian = compute_hessian(m, train, spec.effective_hessian_mode());
    return m;
}

/// Exact minimizer of sum_i w_i l_i(theta) for the model's architecture.
/// Linear models solve the weighted normal equations; the MLP warm-starts at theta_hat.
inline Eigen::VectorXd weighted_refit(const FittedModel& base, const Dataset& train, const Eigen::VectorXd& w,
                                      int max_iterations = 2000) {
    detail::require_shape(w.size() == train.size(), "weighted refit: weight count differs from training size");
    if (base.spec().kind == ModelKind::mlp)
        return detail::solve_mlp(base.arch, train, w, base.theta_hat, max_iterations, 1e-10).theta;
    return detail::solve_linear(base.arch, train, w).theta;
}

}  // namespace confbb
