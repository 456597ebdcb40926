#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwdml/dgp.hpp"
#include "mwdml/error.hpp"
#include "mwdml/models.hpp"

namespace mwdml {

enum class WeightingMode
{
    Identity,
    TwoStep  // inverse multiway cluster-robust Psi_hat at a first-step estimate
};

struct WeightingSpec
{
    WeightingMode mode = WeightingMode::TwoStep;
    double ridge = 0.0;
    /// Start for the weighting matrix; empty means the identity-weighted fit.
    std::optional<Eigen::VectorXd> theta_init;
};

struct EstimationSpec
{
    Eigen::VectorXd theta_start;
    /// Parameter box; empty vectors mean unbounded.
    Eigen::VectorXd lower, upper;
    WeightingSpec weighting;
    double tol = 1e-10;  // on ||J' U psi_bar||
    int max_iter = 100;
    int max_halvings = 30;
};

struct GmmFit
{
    Eigen::VectorXd theta;
    Eigen::MatrixXd J;        // J_N(theta_hat), q_dim x d
    Eigen::MatrixXd Upsilon;
    Eigen::VectorXd moment;   // psi_bar at theta_hat
    Eigen::VectorXd theta_initial;  // first-step estimate behind Upsilon, if any
    int iterations = 0;
    double foc_norm = 0.0;
    bool converged = false;
    bool boundary = false;
    bool rank_deficient = false;
    bool used_bracketing = false;
};

/// Thrown with the offending cell positions when psi is not finite.
class NonFiniteScore : public NumericalError
{
  public:
    NonFiniteScore(const std::string& what, std::vector<std::size_t> cells)
        : NumericalError(what), cells_(std::move(cells))
    {
    }
    const std::vector<std::size_t>& cells() const { return cells_; }

  private:
    std::vector<std::size_t> cells_;
};

/// Per-cell scores as an N x q_dim matrix, rows in row-major cell order.
Eigen::MatrixXd score_matrix(const MomentModel& model, const ClusteredSample& sample, const Eigen::VectorXd& theta,
                             const NuisanceParam& eta);

/// psi_bar_N(theta) = N^{-1} sum_i psi(X_i, theta, eta).
Eigen::VectorXd empirical_moment(const MomentModel& model, const ClusteredSample& sample, const Eigen::VectorXd& theta,
                                 const NuisanceParam& eta);

/// Identity, or (Psi_hat(theta_init) + ridge I)^{-1}.
Eigen::MatrixXd weighting_matrix(const MomentModel& model, const ClusteredSample& sample,
                                 const Eigen::VectorXd& theta_init, const NuisanceParam& eta,
                                 const WeightingSpec& spec);

/// Minimizes psi_bar' U psi_bar for a fixed weighting matrix by damped
/// Gauss-Newton; for d = 1 a bracketing root search on the first-order
/// condition takes over if Newton stalls.
GmmFit solve_gmm_fixed(const MomentModel& model, const ClusteredSample& sample, const NuisanceParam& eta,
                       const Eigen::MatrixXd& Upsilon, const EstimationSpec& spec);

/// Full estimator: builds the weighting matrix from spec.weighting (running
/// the identity-weighted first step when no start is given) and solves.
GmmFit solve_gmm(const MomentModel& model, const ClusteredSample& sample, const NuisanceParam& eta,
                 const EstimationSpec& spec);

}  // namespace mwdml
