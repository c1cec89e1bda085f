#pragma once

#include <Eigen/Dense>
#include <string>

#include "confbb/errors.hpp"

namespace confbb {

enum class Role { train, validation, test, unspecified };

inline const char* to_string(Role r) {
    switch (r) {
        case Role::train: return "train";
        case Role::validation: return "validation";
        case Role::test: return "test";
        case Role::unspecified: return "unspecified";
    }
    return "unspecified";
}

/// Paired inputs (one row per observation) and scalar targets.
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Role role = Role::unspecified;

    Dataset() = default;
    Dataset(Eigen::MatrixXd inputs, Eigen::VectorXd targets, Role r = Role::unspecified)
        : X(std::move(inputs)), y(std::move(targets)), role(r) {
        detail::require_shape(X.rows() == y.size(), "dataset: input rows and target count differ");
    }

    Eigen::Index size() const { return y.size(); }
    Eigen::Index dim() const { return X.cols(); }
    bool empty() const { return y.size() == 0; }

    Dataset with_role(Role r) const {
        Dataset d = *this;
        d.role = r;
        return d;
    }
};

inline void require_role(const Dataset& d, Role expected, const std::string& where) {
    if (d.role != expected)
        throw InvalidParameter(where + ": expected a " + to_string(expected) + " partition, got " +
                               to_string(d.role));
}

}  // namespace confbb
