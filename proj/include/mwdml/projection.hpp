#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "mwdml/dgp.hpp"

namespace mwdml {

using ScalarFn = std::function<double(Record)>;
using VectorFn = std::function<Eigen::VectorXd(Record)>;

enum class ProjectionMode
{
    /// Enumerate the joint support of the complementary factors; finite laws only.
    Exact,
    /// Average over fresh draws of the complementary factors.
    MonteCarlo
};

struct ProjectionOptions
{
    ProjectionMode mode = ProjectionMode::Exact;
    int draws = 0;           // Monte Carlo budget per projection
    std::uint64_t seed = 0;  // keys the Monte Carlo streams
};

/// Conditional projections P_e f and the Hoeffding components pi_e f for a
/// fixed batch of scalar functions over one realized latent table.
///
/// Exact mode refuses continuous latent laws rather than approximating.
/// Results are cached by (mask, atom indices of the conditioning factors), so
/// an engine instance must not be shared between threads.
class ProjectionEngine
{
  public:
    ProjectionEngine(const DgpSpec& spec, const LatentTable& table, std::vector<ScalarFn> functions,
                     ProjectionOptions options = {});

    std::size_t size() const { return functions_.size(); }
    const DgpSpec& spec() const { return spec_; }

    /// P f = E f(X_1), one entry per function.
    const std::vector<double>& population_mean();
    /// E[f(X_i) | {U_{i.e'}}_{e' <= e}]; the zero mask gives P f.
    std::vector<double> conditional(const MultiIndex& cell, Mask e);
    /// pi_e f through the recursion P_e f - P f - sum over proper nonzero submasks.
    std::vector<double> pi_recursive(const MultiIndex& cell, Mask e);
    /// pi_e f through the inclusion-exclusion form sum_{e' <= e} (-1)^{|e|-|e'|} P_{e'} f.
    std::vector<double> pi_mobius(const MultiIndex& cell, Mask e);
    /// H_N^e(f): average of pi_e f over I_{N,e}.
    std::vector<double> component(Mask e);

    /// Average of pi_e f over the joint support of every factor U_{i.e'} with
    /// e' <= e and l in supp(e'), holding the remaining factors at the cell's
    /// values. Zero for every l in supp(e). Exact mode only.
    std::vector<double> pi_integrated_over(const MultiIndex& cell, Mask e, int l);

  private:
    struct Fixed
    {
        std::vector<std::span<const double>> values;  // by mask bits; empty span = free
        std::vector<int> atoms;
    };

    Fixed fixed_from_table(const MultiIndex& cell, Mask e) const;
    std::vector<double> expect(const Fixed& fixed, std::uint64_t stream);
    std::vector<double> conditional_cached(const MultiIndex& cell, Mask e);

    const DgpSpec& spec_;
    const LatentTable& table_;
    std::vector<ScalarFn> functions_;
    ProjectionOptions options_;
    std::vector<double> mean_;
    bool mean_ready_ = false;
    std::map<std::vector<int>, std::vector<double>> cache_;
    std::vector<double> record_;
};

/// Single-function conveniences.
double conditional_projection(const ScalarFn& f, const DgpSpec& spec, const ClusteredSample& sample,
                              const MultiIndex& cell, Mask e, ProjectionOptions options = {});

struct PiProjection
{
    double recursive = 0.0;
    double mobius = 0.0;
};
PiProjection pi_projection(const ScalarFn& f, const DgpSpec& spec, const ClusteredSample& sample,
                           const MultiIndex& cell, Mask e, ProjectionOptions options = {});

/// H_N^e(f) for every nonzero mask, with the pieces of the identity
/// sum_e H_N^e(f) = E_N f - P f.
struct HoeffdingComponents
{
    Shape shape;
    std::vector<Mask> masks;
    std::vector<double> values;        // H_N^e(f), aligned with masks
    std::vector<std::size_t> counts;   // |I_{N,e}|
    double sample_mean = 0.0;          // E_N f from the observed records
    double population_mean = 0.0;      // P f

    double total() const;
    /// sum_e H_N^e(f) - (E_N f - P f).
    double reconstruction_error() const { return total() - (sample_mean - population_mean); }
};

HoeffdingComponents hoeffding_decompose(const ScalarFn& f, const DgpSpec& spec, const ClusteredSample& sample,
                                        ProjectionOptions options = {});

struct HajekResult
{
    double projection = 0.0;                 // H_n f
    double empirical_process = 0.0;          // G_n f = sqrt(n) (E_N f - P f)
    std::vector<double> dimension_values;    // per-dimension contribution to H_n f
    std::vector<double> dimension_variance;  // Var(E[f | U_{e_k}])
};

HajekResult hajek_projection(const ScalarFn& f, const DgpSpec& spec, const ClusteredSample& sample,
                             ProjectionOptions options = {});

/// E g(X_1) for a vector-valued g. Exact enumeration or `draws` fresh cells.
Eigen::VectorXd population_expectation(const DgpSpec& spec, const VectorFn& g, ProjectionOptions options);

/// Cov(E[g | U_{e_k}]) for every dimension k. Exact mode enumerates; Monte Carlo
/// mode averages g(X_1) g(X_{2-e_k})' - mean mean' over pairs of cells sharing
/// only the factor U_{e_k}.
std::vector<Eigen::MatrixXd> dimension_covariances(const DgpSpec& spec, const VectorFn& g,
                                                   ProjectionOptions options);

/// ||P_e f||_{P,2} for each function. Exact mode enumerates the factors below e
/// and the complementary factors; Monte Carlo mode nests `draws` outer draws of
/// the conditioning factors around `draws` inner draws of the rest.
std::vector<double> projected_l2_norms(const DgpSpec& spec, const std::vector<ScalarFn>& functions, Mask e,
                                       ProjectionOptions options);

}  // namespace mwdml
