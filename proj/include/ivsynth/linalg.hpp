#pragma once

#include <Eigen/Core>
#include <vector>

namespace ivsynth {

struct WeightVector {
    Eigen::VectorXd values;
    bool on_simplex = true;

    std::vector<int> support(double threshold = 1e-10) const;
};

// objective(w) = w' M w - 2 b' w + c with M symmetric PSD.
struct SimplexQp {
    Eigen::MatrixXd M;
    Eigen::VectorXd b;
    double c = 0.0;

    double objective(const Eigen::VectorXd& w) const;
};

struct QpOptions {
    double tol = 1e-11;          // fixed-point residual, weight scale
    int max_iter = 200000;
    double support_threshold = 1e-10;
};

struct QpSolution {
    WeightVector weights;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    // Smallest curvature of M on the active face fell below 1e-8, so the
    // minimizer is not unique up to that scale.
    bool face_degenerate = false;
};

// Accelerated projected gradient from the uniform start, with function-value
// restarts. The returned point sums to one exactly and is never worse than
// the uniform point or any vertex.
QpSolution solve_simplex_qp(const SimplexQp& qp, const QpOptions& opt = {});

// Euclidean projection onto the probability simplex, exact O(n log n).
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

// Projection in the metric ||x||_G^2 = x' G x, G symmetric PSD; solved as a
// simplex QP, so a degenerate metric picks the solver's limit point.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, const Eigen::MatrixXd& metric,
                                const QpOptions& opt = {});

// Minimum-L2-norm unconstrained minimizer of the quadratic, M^+ b, with
// eigenvalues below max(dim) * eps * sigma_max treated as zero.
Eigen::VectorXd min_norm_quadratic(const SimplexQp& qp);

struct HullResult {
    bool inside = false;
    double distance = 0.0;       // Euclidean distance to the hull
    Eigen::VectorXd weights;     // certificate, on the simplex
};

// Membership of target in the convex hull of the columns of points.
HullResult in_convex_hull(const Eigen::VectorXd& target, const Eigen::MatrixXd& points,
                          double tol, const QpOptions& opt = {});

// Bartlett (Newey-West) long-run variance of a T x d series, demeaned,
// symmetrized, and eigenvalue-floored at zero. bandwidth < 0 selects
// floor(4 * (T/100)^(2/9)); bandwidth 0 is the sample covariance.
Eigen::MatrixXd hac_lrv(const Eigen::MatrixXd& series, int bandwidth = -1);

int hac_auto_bandwidth(Eigen::Index T);

struct FactorFit {
    Eigen::MatrixXd factors;    // T x r, factors' * factors / T = I
    Eigen::MatrixXd loadings;   // r x N, loadings * loadings' diagonal
    int rank = 0;
    Eigen::VectorXd singular_values;      // all singular values of the data
    Eigen::VectorXd residual_variances;   // per unit, filled by callers
    std::vector<int> units;               // unit indices behind the columns
};

// Rank-r SVD factorization of data' (data is units x periods):
// data' ~ factors * loadings, Frobenius-optimal at rank r. The first
// nonzero loading of each factor is made positive.
FactorFit svd_pca(const Eigen::MatrixXd& data, int rank);

// Number of singular values exceeding 2.858 times the median singular value.
int estimate_rank_svt(const Eigen::MatrixXd& data);

}  // namespace ivsynth
