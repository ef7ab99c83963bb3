#ifndef TBS_STATS_HPP
#define TBS_STATS_HPP

#include <cstdint>
#include <random>

namespace tbs {

using Rng = std::mt19937_64;

/// Independent stream for (master seed, stream index). The mapping only
/// depends on its two arguments, so replications and chains do not depend on
/// scheduling order.
Rng make_stream(std::uint64_t master_seed, std::uint64_t index);

namespace stats {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

// Log densities. Shape/rate parameterisations throughout.
double log_normal_pdf(double x, double mean, double var);
double log_gamma_pdf(double x, double shape, double rate);
double log_inv_gamma_pdf(double x, double shape, double rate);
double log_beta_pdf(double x, double a, double b);

double normal_quantile(double p);
double normal_cdf(double x);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);
double logit(double p);
double inv_logit(double x);

double draw_uniform(Rng& rng);
double draw_normal(Rng& rng, double mean, double sd);
double draw_gamma(Rng& rng, double shape, double rate);
double draw_inv_gamma(Rng& rng, double shape, double rate);
double draw_beta(Rng& rng, double a, double b);
bool draw_bernoulli(Rng& rng, double p);

/// Gamma(shape, rate) restricted to (0, 1], by inversion of the regularised
/// incomplete gamma function. rate = 0 gives the Beta(shape, 1) limit.
double draw_gamma_unit_truncated(Rng& rng, double shape, double rate);

}  // namespace stats
}  // namespace tbs

#endif  // TBS_STATS_HPP
