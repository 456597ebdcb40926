#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwdml/bounds.hpp"
#include "mwdml/dgp.hpp"
#include "mwdml/gmm.hpp"
#include "mwdml/learners.hpp"
#include "mwdml/models.hpp"
#include "mwdml/variance.hpp"

namespace mwdml {

struct ModelConfig
{
    std::string name = "location";  // location | iv | plr | plr_naive
    std::string y = "y";
    std::string d = "d";
    std::vector<std::string> instruments{"z"};
};

struct LearnerConfig
{
    std::string name = "oracle";  // oracle | lasso | tree
    std::optional<double> lambda;  // lasso; empty selects the cluster-robust rule
    Link link = Link::Identity;
    TreeSpec tree;
    std::vector<std::string> features;  // empty: every field except y, d and instruments
};

struct OracleConfig
{
    bool enabled = true;
    ProjectionOptions projection{ProjectionMode::MonteCarlo, 200000, 0};
};

/// Scalar test function of one record field.
struct FunctionConfig
{
    std::string kind = "field";  // field | square | indicator
    std::string field = "y";
    double threshold = 0.0;
};

struct DecomposeConfig
{
    FunctionConfig function;
    ProjectionOptions projection;
};

struct BoundsConfig
{
    std::string field = "y";
    std::vector<double> thresholds;
    double A = 2.718281828459045;
    double v = 1.0;
    std::vector<Mask> masks;
    BoundOptions options;
};

/// Unspecified constants of the theory, echoed into reports only.
struct TheoryConstants
{
    double C1 = 1.0;
    double C2 = 1.0;
    double C4 = 1.0;
};

struct McConfig
{
    DgpSpec dgp;
    ModelConfig model;
    LearnerConfig learner;
    EstimationSpec estimation;
    VarianceMode variance = VarianceMode::PsiHat;
    std::vector<Shape> shapes;
    int replications = 100;
    std::uint64_t seed = 0;
    double level = 0.95;
    std::optional<std::vector<double>> theta0;  // defaults to the composer's
    OracleConfig oracle;
    TheoryConstants constants;
    std::string replications_file = "replications.csv";
    std::string summary_file = "summary.json";
    std::optional<DecomposeConfig> decompose;
    std::optional<BoundsConfig> bounds;
};

/// Parses a JSON document; every problem surfaces as ConfigError.
McConfig parse_config(const std::string& json_text);
/// Sets the base seed and every seed derived from it.
void reseed(McConfig& config, std::uint64_t seed);
/// Reads and parses a config file; unreadable files raise IoError.
McConfig load_config(const std::filesystem::path& path);

std::unique_ptr<MomentModel> make_model(const ModelConfig& config, const std::vector<std::string>& fields);
ScalarFn make_function(const FunctionConfig& config, const std::vector<std::string>& fields);
Eigen::VectorXd true_theta(const McConfig& config);

/// Nuisance fit on the full sample (no sample splitting).
struct NuisanceFit
{
    NuisanceParam eta;
    std::vector<std::string> names;
    std::vector<double> lambdas;  // lasso penalty per component, aligned with names
};
NuisanceFit fit_nuisance(const McConfig& config, const MomentModel& model, const ClusteredSample& sample);

struct ReplicationRecord
{
    int shape_id = 0;
    int rep = 0;
    Eigen::VectorXd theta_hat;
    Eigen::VectorXd se;
    Eigen::MatrixXd V;
    bool covered = false;
    bool converged = false;
    bool boundary = false;
    bool rank_deficient = false;
    bool failed = false;
    std::string error;
    std::vector<double> lambdas;

    bool usable() const { return !failed && converged && !boundary; }
    std::string flags() const;
};

/// generate, fit nuisances, solve, variance, interval. Seeded by
/// (config.seed, shape_id, rep). Failures are recorded, never thrown.
ReplicationRecord run_replication(const McConfig& config, int shape_id, int rep);

struct ShapeSummary
{
    Shape shape;
    int replications = 0;
    int used = 0;
    int discarded_nonconvergence = 0;
    int discarded_boundary = 0;
    int discarded_error = 0;
    Eigen::VectorXd bias, rmse, mean_se, sd;
    double coverage = 0.0;
    double coverage_se = 0.0;
    Eigen::VectorXd ks;  // per coordinate
    std::string ks_standardization;  // "oracle" or "vhat"
    Eigen::MatrixXd mean_V;
    std::optional<Eigen::MatrixXd> V_oracle;
    double v_rel_error = std::numeric_limits<double>::quiet_NaN();       // ||mean V_hat - V|| / ||V||
    double v_rel_error_mean = std::numeric_limits<double>::quiet_NaN();  // mean of ||V_hat - V|| / ||V||
    bool degenerate = false;
    bool unbalanced = false;
    std::vector<double> mean_lambdas;
    std::string oracle_note;  // why the oracle variance is missing, if it failed
};

struct McResult
{
    std::vector<ReplicationRecord> records;  // shape-major, then rep
    std::vector<ShapeSummary> summaries;
    int params = 1;  // parameter dimension d
};

/// Oracle asymptotic variance for one shape; empty when the DGP has no
/// closed-form nuisance for the model.
std::optional<OracleVariance> shape_oracle(const McConfig& config, const Shape& shape);

McResult run_monte_carlo(const McConfig& config, int threads = 1);

/// Standardized-estimate Kolmogorov-Smirnov distance to N(0, 1).
double ks_distance_normal(std::vector<double> z);

void write_replications_csv(const McResult& result, std::ostream& out);
void write_summary_json(const McConfig& config, const McResult& result, std::ostream& out);
/// Writes both files into `dir`, creating it if needed.
void emit_reports(const McConfig& config, const McResult& result, const std::filesystem::path& dir);

}  // namespace mwdml
