#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mwdml/gmm.hpp"
#include "mwdml/lattice.hpp"

namespace mwdml {

/// Scores are N x q_dim with rows in row-major cell order of the shape.

/// (n/N^2) sum_{i,j: i_k = j_k} psi_i psi_j', from per-cluster sums.
Eigen::MatrixXd psi_hat_k(const Eigen::MatrixXd& scores, const Shape& shape, int k);
/// Sum of psi_hat_k over the dimensions.
Eigen::MatrixXd psi_hat(const Eigen::MatrixXd& scores, const Shape& shape);
/// (n/N^2) sum over pairs sharing every coordinate in supp(e), from joint-cluster sums.
Eigen::MatrixXd psi_tilde_e(const Eigen::MatrixXd& scores, const Shape& shape, Mask e);

struct CgmPsi
{
    std::vector<Mask> masks;
    std::vector<Eigen::MatrixXd> terms;  // psi_tilde_e, aligned with masks
    Eigen::MatrixXd total;               // sum_e (-1)^{|e|+1} psi_tilde_e
};
CgmPsi cgm_psi(const Eigen::MatrixXd& scores, const Shape& shape);

enum class VarianceMode
{
    PsiHat,
    Cgm
};

struct ClusterVarianceResult
{
    VarianceMode mode = VarianceMode::PsiHat;
    std::vector<Eigen::MatrixXd> per_dimension;  // psi_hat_k
    Eigen::MatrixXd psi;                         // the middle matrix used for V
    std::vector<double> per_dimension_min_eigen;
    double psi_min_eigen = 0.0;
    Eigen::MatrixXd V;
    Eigen::VectorXd se;  // sqrt(diag(V) / n)
};

/// Sandwich with the fit's J and Upsilon around `psi`; n is the smallest dimension.
ClusterVarianceResult v_hat(const GmmFit& fit, const Eigen::MatrixXd& psi, int n);

/// Scores at the fit, the chosen middle matrix, and the sandwich in one call.
ClusterVarianceResult cluster_variance(const GmmFit& fit, const Eigen::MatrixXd& scores, const Shape& shape,
                                       VarianceMode mode = VarianceMode::PsiHat);

struct Interval
{
    double lower = 0.0;
    double upper = 0.0;
    bool contains(double x) const { return lower <= x && x <= upper; }
};

/// theta_j +- z_{(1+level)/2} se_j.
std::vector<Interval> confidence_interval(const GmmFit& fit, const ClusterVarianceResult& result, double level);

/// Two-sided standard normal quantile z_{(1+level)/2}.
double normal_critical_value(double level);

double min_eigenvalue(const Eigen::MatrixXd& symmetric);

}  // namespace mwdml
