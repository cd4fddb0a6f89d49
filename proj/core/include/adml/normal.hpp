#pragma once

namespace adml {

// Standard normal quantile, Wichura's AS 241 (PPND16), ~1e-16 relative.
double normal_quantile(double p);

double normal_cdf(double x);

}  // namespace adml
