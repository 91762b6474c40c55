#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "jumpmeans/common.hpp"

namespace jumpmeans {

// ---------------------------------------------------------------------------
// Scaled dwell distributions and the penalties they induce as the scale
// parameter beta grows. The scaled exponential with rate lambda and scale
// beta is Gamma(beta, beta * lambda): mean 1/lambda, variance 1/(lambda^2 beta).
// ---------------------------------------------------------------------------

struct ScaledExpParams {
  double rate = 1.0;   // lambda > 0
  double scale = 1.0;  // beta > 0
};

inline double scaled_exp_logpdf(double t, double rate, double scale) {
  if (!(rate > 0) || !(scale > 0))
    throw std::invalid_argument("scaled_exp_logpdf: rate and scale must be positive");
  if (!(t > 0)) return -kInf;
  return scale * std::log(scale * rate) - std::lgamma(scale) +
         (scale - 1.0) * std::log(t) - scale * rate * t;
}

inline double scaled_exp_logpdf(double t, const ScaledExpParams& p) {
  return scaled_exp_logpdf(t, p.rate, p.scale);
}

// Limit penalty of a completed dwell: h(lambda, t) = lambda t - ln(lambda t) - 1.
// Nonnegative, zero exactly at t = 1/lambda, convex in t.
inline double dwell_penalty(double rate, double t) {
  if (!(rate > 0)) throw std::invalid_argument("dwell_penalty: rate must be positive");
  if (!(t > 0)) return kInf;
  double x = rate * t;
  return std::max(0.0, x - std::log(x) - 1.0);
}

// Limit penalty of a right-censored dwell: active only once lambda t >= 1.
inline double censored_penalty(double rate, double t) {
  if (!(rate > 0)) throw std::invalid_argument("censored_penalty: rate must be positive");
  if (!(t >= 0)) throw std::invalid_argument("censored_penalty: time must be nonnegative");
  if (rate * t < 1.0) return 0.0;
  return dwell_penalty(rate, t);
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma in log space. Series for x < a+1, Lentz
// continued fraction otherwise; both evaluated in logs so large shape
// parameters (a ~ 1e4 and beyond) stay inside double range.
// ---------------------------------------------------------------------------

namespace detail {

// ln of the series representation of P(a, x); requires 0 < x < a + 1.
inline double log_gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-17) break;
  }
  return a * std::log(x) - x - std::lgamma(a) + std::log(sum);
}

// ln of the continued-fraction representation of Q(a, x); requires x >= a + 1.
inline double log_gamma_q_cf(double a, double x) {
  const double fpmin = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 10000; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 3e-17) break;
  }
  return a * std::log(x) - x - std::lgamma(a) + std::log(h);
}

// ln(1 - e^l) for l <= 0, stable near both ends.
inline double log1mexp(double l) {
  if (l >= 0.0) return -kInf;
  constexpr double ln2 = 0.6931471805599453;
  return l > -ln2 ? std::log(-std::expm1(l)) : std::log1p(-std::exp(l));
}

}  // namespace detail

// ln P(a, x), P the regularized lower incomplete gamma.
inline double log_gamma_p(double a, double x) {
  if (!(a > 0) || x < 0) throw std::invalid_argument("log_gamma_p: bad arguments");
  if (x == 0.0) return -kInf;
  if (x < a + 1.0) return detail::log_gamma_p_series(a, x);
  return detail::log1mexp(detail::log_gamma_q_cf(a, x));
}

// ln Q(a, x), Q the regularized upper incomplete gamma.
inline double log_gamma_q(double a, double x) {
  if (!(a > 0) || x < 0) throw std::invalid_argument("log_gamma_q: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::log1mexp(detail::log_gamma_p_series(a, x));
  return detail::log_gamma_q_cf(a, x);
}

// Finite-scale censored penalty (ln Gamma(beta) - ln Gamma(beta, beta lambda t)) / beta,
// written through the regularized upper function: -ln Q(beta, beta lambda t) / beta.
// Converges pointwise to censored_penalty as beta grows.
inline double censored_penalty_finite_beta(double rate, double t, double beta) {
  if (!(rate > 0) || !(beta > 0))
    throw std::invalid_argument("censored_penalty_finite_beta: rate and beta must be positive");
  if (!(t >= 0)) throw std::invalid_argument("censored_penalty_finite_beta: time must be nonnegative");
  return -log_gamma_q(beta, beta * rate * t) / beta;
}

// ---------------------------------------------------------------------------
// Discrete KL divergence and the scaled transition-prior density.
// ---------------------------------------------------------------------------

// KL(p || q) with the 0 ln 0 = 0 convention; +inf when p puts mass where q
// has none. No flooring: callers decide how to regularize.
inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double out = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (p[i] < 0 || q[i] < 0) throw std::invalid_argument("kl_divergence: negative entry");
    if (q[i] == 0.0) return kInf;
    out += p[i] * std::log(p[i] / q[i]);
  }
  return out;
}

// Scaled t-prime density on (0, inf):
//   f(t) = gamma0^(alpha beta) / B(beta, alpha beta)
//          * t^(beta-1) / (t + gamma0)^((1+alpha) beta).
// alpha plays the role of accumulated mass, gamma0 of accumulated time.
inline double stp_logpdf(double t, double beta, double alpha, double gamma0) {
  if (!(beta > 0) || !(alpha > 0) || !(gamma0 > 0))
    throw std::invalid_argument("stp_logpdf: parameters must be positive");
  if (!(t > 0)) return -kInf;
  double log_beta_fn = std::lgamma(beta) + std::lgamma(alpha * beta) - std::lgamma(beta + alpha * beta);
  return alpha * beta * std::log(gamma0) - log_beta_fn + (beta - 1.0) * std::log(t) -
         (1.0 + alpha) * beta * std::log(t + gamma0);
}

}  // namespace jumpmeans
