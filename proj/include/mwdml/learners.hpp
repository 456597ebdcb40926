#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwdml/lattice.hpp"

namespace mwdml {

enum class Link
{
    Identity,
    Logistic
};

struct LassoSpec
{
    double lambda = 0.0;
    Link link = Link::Identity;
    int max_iter = 10000;
    double tol = 1e-10;  // on the largest standardized coefficient change per sweep
};

/// Coefficients on the original feature scale; the penalty applies to the
/// standardized coefficients.
struct LassoFit
{
    Link link = Link::Identity;
    double lambda = 0.0;
    double intercept = 0.0;
    Eigen::VectorXd beta;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective;  // after each sweep

    /// Linear index for one feature row.
    double linear(const Eigen::Ref<const Eigen::RowVectorXd>& row) const { return intercept + row.dot(beta); }
    /// Fitted mean: linear index, or its logistic transform.
    double predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

/// Cyclic coordinate descent with soft-thresholding on
///   (1/2N) ||y - b0 - X beta||^2 + lambda ||beta_std||_1           (identity)
///   (1/N) sum log(1 + e^eta) - y eta + lambda ||beta_std||_1      (logistic)
/// Logistic sweeps use the curvature bound 1/4, so every sweep lowers the
/// objective. Hitting max_iter leaves converged = false.
LassoFit fit_lasso(const LassoSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Penalty z_{1-1/Nbar} * max_j sd_j where sd_j^2 = Psi_hat(x_j r)_jj / n is the
/// multiway cluster-robust variance of the mean score of standardized feature j
/// against residual r (rows of X follow the row-major cell order of shape).
double lasso_penalty_rule(const Eigen::MatrixXd& X, const Eigen::VectorXd& residual, const Shape& shape);

/// Iterated penalty rule: starts from residuals y - ybar, then recomputes the
/// penalty from the residuals of the previous fit until it changes by at most
/// 0.1% (15 passes at most). The returned fit records the final lambda.
LassoFit fit_lasso_default(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Shape& shape,
                           Link link = Link::Identity);

struct TreeSpec
{
    int max_leaves = 8;
    int min_leaf = 5;
};

/// Axis-aligned regression tree; leaves predict the mean of their region.
struct RegressionTree
{
    struct Node
    {
        int feature = -1;  // -1 for leaves
        double threshold = 0.0;
        int left = -1;   // x[feature] <= threshold
        int right = -1;
        double value = 0.0;
        std::size_t count = 0;
    };
    std::vector<Node> nodes;  // nodes[0] is the root

    int leaves() const;
    double predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

/// Best-first greedy growth: the leaf whose best split removes the most squared
/// error is split next, until max_leaves or no split leaves min_leaf rows on
/// both sides with positive gain.
RegressionTree fit_tree(const TreeSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

enum class LearnerClass
{
    Glm,
    Tree,
    Dnn
};

/// Inputs for the VC characteristics of the bundled learner classes. Unused
/// fields are ignored for a given class; C defaults to 1.
struct VcParams
{
    double s = 0.0;  // glm sparsity
    double p = 0.0;  // feature count
    double L = 0.0;  // tree leaves or network depth
    double W = 0.0;  // network parameters
    double U = 0.0;  // network hidden units
    double C = 1.0;
    int K = 1;       // clustering dimensions
};

struct VcCharacteristics
{
    double A = 0.0;
    double v = 0.0;
};

/// glm: v = s, A = C e p / s;  tree: v = 2 C L log(2 L p), A = C;
/// dnn: v = 2 C L W log(p U), A = C. A is floored at e^{2(K-1)/16} v e.
VcCharacteristics vc_characteristics(LearnerClass cls, const VcParams& params);
LearnerClass parse_learner_class(const std::string& name);

struct RateInputs
{
    double v = 1.0;
    double A = 2.718281828459045;
    double Nbar = 1.0;
    double n = 1.0;
    double envelope_norm = 1.0;  // ||F||_{P,q}
    double q = 4.0;
    int k = 1;
    int K = 1;
};

struct RateResult
{
    double variance_branch = 0.0;  // (v log(max(A, Nbar)) / n)^{k/2}
    double envelope_branch = 0.0;  // (||F|| v log(max(A, Nbar)) / n^{1/2 - 1/q})^k
    double rho = 0.0;              // max of the two
};

RateResult rho_rate(const RateInputs& inputs);

}  // namespace mwdml
