"""Central numeric tolerances and test-budget constants.

Keeping these in one place means every audit and acceptance check reads its
threshold from here; nothing hand-tunes a tolerance at the call site.
"""

# exact integer checks: no tolerance (equality on int arrays)

# floating-point identity after exact-in-theory arithmetic
EXACT_FLOAT = 1e-9

# two-sample Kolmogorov-Smirnov at the 1% level: c(0.01) = 1.628
KS_COEFF_1PCT = 1.628

# table comparison slack for one-sample checks against stored quantiles
TABLE_SUP_SLACK = 0.05

# ordinary-least-squares slope tolerance for scaling-exponent fits
SLOPE_TOL = 0.15

# relative tolerance for moment comparisons (mean/variance of ensembles)
MOMENT_RTOL = 0.10

# one-point marginal audit: KS distance to the reference table
MARGINAL_KS_TOL = 0.10

# one-point marginal audit: |sample mean - table mean|
MARGINAL_MEAN_TOL = 0.15

# web-distance marginal audit: |sample mean - table mean|
WEB_MEAN_TOL = 0.25

# independent-increments audit: |empirical correlation|
INDEP_CORR_TOL = 0.10

# slope preservation for the stationary-horizon audit (relative)
SLOPE_RTOL = 0.10
