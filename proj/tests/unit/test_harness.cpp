#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "mwdml/error.hpp"
#include "mwdml/harness.hpp"
#include "mwdml/rng.hpp"

using namespace mwdml;

namespace {

const char* kLocation = R"({
  "dgp": {"shape": [6, 5],
          "tau": {"name": "additive", "params": {"offset": 1.0}},
          "latent": {"default": {"kind": "normal", "sd": 1.0}}},
  "model": {"name": "location"},
  "learner": {"name": "oracle"},
  "oracle": {"mode": "monte_carlo", "draws": 2000},
  "replications": 20,
  "seed": 3
})";

const char* kPlrLasso = R"({
  "dgp": {"shape": [30, 30],
          "tau": {"name": "plr", "params": {"theta0": 1.0, "gamma": [1.0, 0.0, 0.0],
                                            "delta": [0.0, 1.0, 0.0]}},
          "latent": {"default": {"kind": "normal", "sd": 1.0},
                     "masks": {"11": {"kind": "normal", "sd": 0.5}}}},
  "model": {"name": "plr"},
  "learner": {"name": "lasso"},
  "estimation": {"theta_start": 0.0, "weighting": "two_step"},
  "oracle": false,
  "replications": 100,
  "seed": 5
})";

std::string with(const char* base, const std::string& key, const nlohmann::json& value)
{
    auto j = nlohmann::json::parse(base);
    j[key] = value;
    return j.dump();
}

}  // namespace

TEST_SUITE("harness")
{
    TEST_CASE("malformed configs raise ConfigError")
    {
        CHECK_NOTHROW(parse_config(kLocation));
        CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
        CHECK_THROWS_AS(parse_config("{}"), ConfigError);
        CHECK_THROWS_AS(parse_config(with(kLocation, "replications", 0)), ConfigError);
        CHECK_THROWS_AS(parse_config(with(kLocation, "level", 1.5)), ConfigError);
        CHECK_THROWS_AS(parse_config(with(kLocation, "seed", -1)), ConfigError);
        CHECK_THROWS_AS(parse_config(with(kLocation, "variance", "hc3")), ConfigError);
        CHECK_THROWS_AS(parse_config(with(kLocation, "model", {{"name", "probit"}})), ConfigError);
        CHECK_THROWS_AS(parse_config(with(kLocation, "shapes", {{4, 4, 4}})), ConfigError);
        // The oracle learner needs closed-form nuisances the additive DGP lacks.
        CHECK_THROWS_AS(parse_config(with(kLocation, "model", {{"name", "plr"}})), ConfigError);
        CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
    }

    TEST_CASE("location estimate is the grand mean")
    {
        const auto config = parse_config(kLocation);
        const auto rec = run_replication(config, 0, 4);
        REQUIRE(rec.usable());
        const auto spec = config.dgp.reshaped(config.shapes[0]);
        const auto sample = simulate(spec, derive_seed(config.seed, {0, 4}));
        const auto y = sample.column("y");
        const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
        CHECK(rec.theta_hat(0) == doctest::Approx(mean).epsilon(1e-12));
        CHECK(rec.se(0) > 0.0);
        CHECK(true_theta(config)(0) == 1.0);
    }

    TEST_CASE("replications are deterministic and thread-independent")
    {
        const auto config = parse_config(kLocation);
        const auto a = run_replication(config, 0, 7);
        const auto b = run_replication(config, 0, 7);
        CHECK(a.theta_hat == b.theta_hat);
        CHECK(a.se == b.se);

        std::ostringstream one, four, s1, s4;
        const auto r1 = run_monte_carlo(config, 1);
        const auto r4 = run_monte_carlo(config, 4);
        write_replications_csv(r1, one);
        write_replications_csv(r4, four);
        CHECK(one.str() == four.str());
        write_summary_json(config, r1, s1);
        write_summary_json(config, r4, s4);
        CHECK(s1.str() == s4.str());

        auto reseeded = config;
        reseed(reseeded, 4);
        CHECK(run_replication(reseeded, 0, 7).theta_hat != a.theta_hat);
    }

    TEST_CASE("summary JSON round-trips")
    {
        const auto config = parse_config(kLocation);
        const auto result = run_monte_carlo(config, 1);
        std::ostringstream out;
        write_summary_json(config, result, out);
        const auto j = nlohmann::json::parse(out.str());
        CHECK(j["model"] == "location");
        CHECK(j["replications"] == 20);
        REQUIRE(j["shapes"].size() == 1);
        const auto& s = j["shapes"][0];
        CHECK(s["used"].get<int>() == result.summaries[0].used);
        CHECK(s["coverage"].get<double>() == result.summaries[0].coverage);
        CHECK(s["shape"] == nlohmann::json::array({6, 5}));
        CHECK(s["ks_standardization"] == "oracle");
    }

    TEST_CASE("lasso nuisances converge with finite standard errors")
    {
        const auto config = parse_config(kPlrLasso);
        const auto result = run_monte_carlo(config, 1);
        const auto& s = result.summaries[0];
        CHECK(s.used >= 99);
        for (const auto& r : result.records)
            if (r.usable())
                CHECK(r.se.allFinite());
        REQUIRE(s.mean_lambdas.size() == 2);
        CHECK(s.mean_lambdas[0] > 0.0);
    }

    TEST_CASE("replication CSV layout")
    {
        McResult empty;
        std::ostringstream out;
        write_replications_csv(empty, out);
        CHECK(out.str() == "shape_id,rep,theta_hat_1,se_1,covered,flags\n");

        McResult one;
        ReplicationRecord r;
        r.theta_hat = Eigen::VectorXd::Constant(1, 0.5);
        r.se = Eigen::VectorXd::Constant(1, 0.25);
        r.covered = true;
        r.converged = true;
        one.records.push_back(r);
        std::ostringstream row;
        write_replications_csv(one, row);
        CHECK(row.str() == "shape_id,rep,theta_hat_1,se_1,covered,flags\n0,0,0.5,0.25,1,ok\n");
    }

    TEST_CASE("KS distance sanity")
    {
        CHECK(ks_distance_normal({0.0}) == doctest::Approx(0.5));
        CHECK(std::isnan(ks_distance_normal({})));
        std::vector<double> far(50, 100.0);
        CHECK(ks_distance_normal(far) == doctest::Approx(1.0));

        // Midpoint quantiles of N(0, 1) sit 1 / (2m) from the empirical steps.
        const boost::math::normal_distribution<> normal;
        std::vector<double> z;
        for (int i = 0; i < 400; ++i)
            z.push_back(boost::math::quantile(normal, (i + 0.5) / 400.0));
        CHECK(ks_distance_normal(z) == doctest::Approx(1.0 / 800.0));
    }
}
