#include <doctest.h>

#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "adml/errors.hpp"
#include "adml/normal.hpp"

using namespace adml;

TEST_CASE("normal quantile at the 97.5% point") {
  CHECK(std::abs(normal_quantile(0.975) - 1.959963984540054) <= 1e-14);
  CHECK(normal_quantile(0.5) == 0.0);
}

TEST_CASE("normal quantile agrees with boost over the unit interval") {
  const boost::math::normal_distribution<double> z;
  for (double p : {1e-300, 1e-20, 1e-8, 1e-3, 0.02, 0.1, 0.3, 0.425, 0.6, 0.9, 0.95, 0.999, 1 - 1e-12}) {
    const double expected = boost::math::quantile(z, p);
    CHECK(std::abs(normal_quantile(p) - expected) <= 1e-13 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("normal quantile inverts the cdf and rejects probabilities outside [0, 1]") {
  for (double x = -6.0; x <= 3.0; x += 0.25) CHECK(normal_quantile(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
  CHECK(std::isinf(normal_quantile(0.0)));
  CHECK_THROWS_AS(normal_quantile(1.5), InvalidInput);
  CHECK_THROWS_AS(normal_quantile(std::nan("")), InvalidInput);
}
