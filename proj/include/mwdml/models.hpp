#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwdml/dgp.hpp"
#include "mwdml/nuisance.hpp"
#include "mwdml/projection.hpp"

namespace mwdml {

/// Moment function psi(x, theta, eta) with values in R^{q_dim}, theta in R^d.
class MomentModel
{
  public:
    virtual ~MomentModel() = default;

    virtual std::string name() const = 0;
    /// Length q_dim of the moment vector.
    virtual int moments() const = 0;
    /// Parameter dimension d.
    virtual int params() const = 0;
    /// Nuisance components the score reads.
    virtual std::vector<std::string> nuisance_names() const { return {}; }
    /// False for scores that are deliberately not Neyman orthogonal.
    virtual bool orthogonal() const { return true; }
    /// True when psi is affine in theta, so the first-order condition is linear.
    virtual bool linear_in_theta() const { return false; }

    virtual Eigen::VectorXd score(Record x, const Eigen::VectorXd& theta, const NuisanceParam& eta) const = 0;
    /// d psi / d theta' (q_dim x d) when available in closed form.
    virtual std::optional<Eigen::MatrixXd> score_derivative(Record x, const Eigen::VectorXd& theta,
                                                            const NuisanceParam& eta) const;
};

/// psi = x_y - theta.
class LocationModel final : public MomentModel
{
  public:
    explicit LocationModel(int y = 0) : y_(y) {}

    std::string name() const override { return "location"; }
    int moments() const override { return 1; }
    int params() const override { return 1; }
    bool linear_in_theta() const override { return true; }
    Eigen::VectorXd score(Record x, const Eigen::VectorXd& theta, const NuisanceParam& eta) const override;
    std::optional<Eigen::MatrixXd> score_derivative(Record x, const Eigen::VectorXd& theta,
                                                    const NuisanceParam& eta) const override;

  private:
    int y_;
};

/// Linear IV with one endogenous regressor: psi_j = (y - theta d) z_j. More
/// than one instrument makes the model over-identified.
class IvModel final : public MomentModel
{
  public:
    IvModel(int y, int d, std::vector<int> z);

    std::string name() const override { return "iv"; }
    int moments() const override { return static_cast<int>(z_.size()); }
    int params() const override { return 1; }
    bool linear_in_theta() const override { return true; }
    Eigen::VectorXd score(Record x, const Eigen::VectorXd& theta, const NuisanceParam& eta) const override;
    std::optional<Eigen::MatrixXd> score_derivative(Record x, const Eigen::VectorXd& theta,
                                                    const NuisanceParam& eta) const override;

  private:
    int y_, d_;
    std::vector<int> z_;
};

/// Partially linear regression, residual-product score
/// psi = (y - l(x) - theta (d - m(x))) (d - m(x)) with nuisances "l" and "m".
class PlrModel final : public MomentModel
{
  public:
    PlrModel(int y = 0, int d = 1) : y_(y), d_(d) {}

    std::string name() const override { return "plr"; }
    int moments() const override { return 1; }
    int params() const override { return 1; }
    std::vector<std::string> nuisance_names() const override { return {"l", "m"}; }
    bool linear_in_theta() const override { return true; }
    Eigen::VectorXd score(Record x, const Eigen::VectorXd& theta, const NuisanceParam& eta) const override;
    std::optional<Eigen::MatrixXd> score_derivative(Record x, const Eigen::VectorXd& theta,
                                                    const NuisanceParam& eta) const override;

  private:
    int y_, d_;
};

/// Control score psi = (y - theta d - g(x)) d with nuisance "g"; not orthogonal.
class NonOrthogonalPlrModel final : public MomentModel
{
  public:
    NonOrthogonalPlrModel(int y = 0, int d = 1) : y_(y), d_(d) {}

    std::string name() const override { return "plr_naive"; }
    int moments() const override { return 1; }
    int params() const override { return 1; }
    std::vector<std::string> nuisance_names() const override { return {"g"}; }
    bool orthogonal() const override { return false; }
    bool linear_in_theta() const override { return true; }
    Eigen::VectorXd score(Record x, const Eigen::VectorXd& theta, const NuisanceParam& eta) const override;
    std::optional<Eigen::MatrixXd> score_derivative(Record x, const Eigen::VectorXd& theta,
                                                    const NuisanceParam& eta) const override;

  private:
    int y_, d_;
};

/// psi(x, theta, eta); non-finite entries are left for the caller to flag.
Eigen::VectorXd evaluate_score(const MomentModel& model, Record x, const Eigen::VectorXd& theta,
                               const NuisanceParam& eta);

enum class JacobianMethod
{
    Auto,  // analytic when available, else central differences
    Analytic,
    FiniteDifference
};

/// d psi / d theta' at one record.
Eigen::MatrixXd score_derivative(const MomentModel& model, Record x, const Eigen::VectorXd& theta,
                                 const NuisanceParam& eta, JacobianMethod method = JacobianMethod::Auto);

/// J_N(theta) = -d/d theta' of the sample mean of psi (q_dim x d).
Eigen::MatrixXd score_jacobian(const MomentModel& model, const ClusteredSample& sample, const Eigen::VectorXd& theta,
                               const NuisanceParam& eta, JacobianMethod method = JacobianMethod::Auto);

/// Root-mean-square distance between two nuisance parameters over the sample,
/// pooled across the named components.
double nuisance_distance(const NuisanceParam& a, const NuisanceParam& b, const ClusteredSample& sample,
                         const std::vector<std::string>& names);

struct OrthogonalityReport
{
    std::vector<double> derivatives;  // one per direction
    double max_abs = 0.0;
};

/// Central differences of tau -> E psi(X, theta0, eta0 + tau dir) at tau = 0
/// over the step grid (decreasing), Richardson-extrapolated. Population
/// expectations use exact enumeration or a fixed-seed Monte Carlo sample.
/// Each direction reports the derivative of largest magnitude across moments.
OrthogonalityReport orthogonality_check(const MomentModel& model, const DgpSpec& spec, const Eigen::VectorXd& theta0,
                                        const NuisanceParam& eta0, const std::vector<NuisanceParam>& directions,
                                        const std::vector<double>& steps, ProjectionOptions options = {});

/// Scales each component of `direction` to unit L2(P) norm.
NuisanceParam normalize_direction(const NuisanceParam& direction, const DgpSpec& spec,
                                  ProjectionOptions options = {});

struct OracleVariance
{
    Eigen::MatrixXd J0;
    Eigen::MatrixXd Upsilon;
    Eigen::MatrixXd Psi0;
    std::vector<Eigen::MatrixXd> dimension_terms;  // Var(E[psi | U_{e_k}])
    std::vector<double> mu;                        // n / N_k
    Eigen::MatrixXd V;
    bool degenerate = false;  // every dimension term is numerically zero
};

/// Psi0 = sum_k mu_k Var(E[psi | U_{e_k}]) together with J0 = -E d psi / d theta'
/// and, when J0 has full column rank, V. Upsilon defaults to the identity.
OracleVariance oracle_psi0(const MomentModel& model, const DgpSpec& spec, const Eigen::VectorXd& theta0,
                           const NuisanceParam& eta0, ProjectionOptions options = {},
                           std::optional<Eigen::MatrixXd> upsilon = std::nullopt);

/// (J'UJ)^{-1} J'U Psi U J (J'UJ)^{-1}, symmetrized.
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& J, const Eigen::MatrixXd& Upsilon, const Eigen::MatrixXd& Psi);

/// V from the oracle pieces.
Eigen::MatrixXd oracle_V(const OracleVariance& oracle);

}  // namespace mwdml
