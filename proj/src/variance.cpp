#include "mwdml/variance.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "mwdml/error.hpp"

namespace mwdml {
namespace {

void check_scores(const Eigen::MatrixXd& scores, const Shape& shape)
{
    if (static_cast<std::size_t>(scores.rows()) != shape.cells())
        throw DomainError("score matrix needs one row per cell");
}

double scale(const Shape& shape)
{
    const double N = static_cast<double>(shape.cells());
    return static_cast<double>(shape.min_dim()) / (N * N);
}

}  // namespace

double min_eigenvalue(const Eigen::MatrixXd& symmetric)
{
    if (symmetric.size() == 0)
        return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (symmetric + symmetric.transpose()),
                                                       Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

Eigen::MatrixXd psi_hat_k(const Eigen::MatrixXd& scores, const Shape& shape, int k)
{
    check_scores(scores, shape);
    if (k < 0 || k >= shape.order())
        throw DomainError("dimension index out of range");
    std::size_t stride = 1;
    for (int j = shape.order() - 1; j > k; --j)
        stride *= static_cast<std::size_t>(shape.dim(j));
    const auto Nk = static_cast<std::size_t>(shape.dim(k));

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(Nk), scores.cols());
    for (std::size_t c = 0; c < shape.cells(); ++c)
        sums.row(static_cast<Eigen::Index>((c / stride) % Nk)) += scores.row(static_cast<Eigen::Index>(c));
    return scale(shape) * sums.transpose() * sums;
}

Eigen::MatrixXd psi_hat(const Eigen::MatrixXd& scores, const Shape& shape)
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(scores.cols(), scores.cols());
    for (int k = 0; k < shape.order(); ++k)
        out += psi_hat_k(scores, shape, k);
    return out;
}

Eigen::MatrixXd psi_tilde_e(const Eigen::MatrixXd& scores, const Shape& shape, Mask e)
{
    check_scores(scores, shape);
    if (e.empty() || !e.subset_of(Mask::full(shape.order())))
        throw DomainError("mask must be nonzero and fit the shape");
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(masked_count(shape, e)), scores.cols());
    for (std::size_t c = 0; c < shape.cells(); ++c)
    {
        const auto cluster = masked_linear_index(shape, e, from_linear(shape, c));
        sums.row(static_cast<Eigen::Index>(cluster)) += scores.row(static_cast<Eigen::Index>(c));
    }
    return scale(shape) * sums.transpose() * sums;
}

CgmPsi cgm_psi(const Eigen::MatrixXd& scores, const Shape& shape)
{
    CgmPsi out;
    out.total = Eigen::MatrixXd::Zero(scores.cols(), scores.cols());
    for (Mask e : masks_by_weight(shape.order()))
    {
        auto term = psi_tilde_e(scores, shape, e);
        out.total += (e.weight() % 2 ? 1.0 : -1.0) * term;
        out.masks.push_back(e);
        out.terms.push_back(std::move(term));
    }
    return out;
}

ClusterVarianceResult v_hat(const GmmFit& fit, const Eigen::MatrixXd& psi, int n)
{
    if (n < 1)
        throw DomainError("n must be positive");
    ClusterVarianceResult out;
    out.psi = psi;
    out.psi_min_eigen = min_eigenvalue(psi);
    out.V = sandwich(fit.J, fit.Upsilon, psi);
    out.se.resize(out.V.rows());
    for (Eigen::Index j = 0; j < out.V.rows(); ++j)
        out.se(j) = out.V(j, j) >= 0.0 ? std::sqrt(out.V(j, j) / n) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

ClusterVarianceResult cluster_variance(const GmmFit& fit, const Eigen::MatrixXd& scores, const Shape& shape,
                                       VarianceMode mode)
{
    std::vector<Eigen::MatrixXd> per_dim;
    std::vector<double> eigen;
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(scores.cols(), scores.cols());
    for (int k = 0; k < shape.order(); ++k)
    {
        per_dim.push_back(psi_hat_k(scores, shape, k));
        eigen.push_back(min_eigenvalue(per_dim.back()));
        total += per_dim.back();
    }
    const Eigen::MatrixXd middle = mode == VarianceMode::Cgm ? cgm_psi(scores, shape).total : total;
    auto out = v_hat(fit, middle, shape.min_dim());
    out.mode = mode;
    out.per_dimension = std::move(per_dim);
    out.per_dimension_min_eigen = std::move(eigen);
    return out;
}

double normal_critical_value(double level)
{
    if (!(level > 0.0 && level < 1.0))
        throw DomainError("confidence level must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

std::vector<Interval> confidence_interval(const GmmFit& fit, const ClusterVarianceResult& result, double level)
{
    const double z = normal_critical_value(level);
    if (result.se.size() != fit.theta.size())
        throw DomainError("standard errors do not match the parameter dimension");
    std::vector<Interval> out;
    for (Eigen::Index j = 0; j < fit.theta.size(); ++j)
        out.push_back({fit.theta(j) - z * result.se(j), fit.theta(j) + z * result.se(j)});
    return out;
}

}  // namespace mwdml
