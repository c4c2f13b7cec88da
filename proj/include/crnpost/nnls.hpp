#pragma once

#include <Eigen/Dense>

namespace crnpost {

struct NnlsResult {
    Eigen::VectorXd x;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = true;
};

/// Lawson-Hanson active-set solution of min ||A x - b||_2 subject to x >= 0.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations = 0);

}  // namespace crnpost
