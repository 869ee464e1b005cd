#pragma once

// Small probabilistic models with exactly computable KL divergences, used as
// ground truth for the log-likelihood geometry: finite exponential families,
// Markov token models, and the weight-merging interpolation predictor.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "llmap/rng.hpp"
#include "llmap/types.hpp"

namespace llmap {

/// Distribution over outcomes 0..M-1.
struct FiniteDistribution {
  Vector probs;

  std::size_t size() const { return static_cast<std::size_t>(probs.size()); }
  /// Throws DataError unless probs >= 0 and sum to 1 within 1e-12.
  void validate() const;
};

/// sum_x p(x) ln(p(x) / q(x)); terms with p(x) = 0 contribute 0. Throws
/// DataError when p(x) > 0 = q(x).
double exact_kl(const FiniteDistribution& p, const FiniteDistribution& q);

Vector dirichlet(SplitMix64& rng, const Vector& concentration);

/// p(x; theta) = p0(x) exp(theta^T b(x) - psi(theta)), with b an M x K matrix.
class ExpFamily {
 public:
  ExpFamily(FiniteDistribution base, Matrix b, double lambda);

  std::size_t n_outcomes() const { return base_.size(); }
  std::size_t n_models() const { return static_cast<std::size_t>(b_.cols()); }
  double lambda() const { return lambda_; }
  const FiniteDistribution& base() const { return base_; }
  const Matrix& b() const { return b_; }

  /// log-partition by log-sum-exp.
  double psi(const Vector& theta) const;
  Vector log_member(const Vector& theta) const;
  FiniteDistribution member(const Vector& theta) const;
  /// theta = lambda * e_i.
  Vector model_theta(std::size_t i) const;
  FiniteDistribution model(std::size_t i) const { return member(model_theta(i)); }

 private:
  FiniteDistribution base_;
  Matrix b_;
  double lambda_;
};

/// b_{x,i} = (ln p_i(x) - ln p0(x)) / lambda, so member(lambda e_i) = p_i and
/// psi(lambda e_i) = 0.
ExpFamily expfamily_from_models(const FiniteDistribution& p0, const std::vector<FiniteDistribution>& models,
                                double lambda);

/// p0 ~ Dirichlet(1) over M outcomes; each b column is ln(r / p0) for
/// r proportional to p0 * w, w ~ Dirichlet(concentration), then centered and
/// scaled to unit variance under p0. Models are member(lambda e_i).
ExpFamily random_family(std::size_t outcomes, std::size_t models, double lambda, std::uint64_t seed,
                        double concentration = 100.0);

/// Inverse-CDF draws with SplitMix64(seed).
std::vector<std::size_t> sample_outcomes(const FiniteDistribution& dist, std::size_t n, std::uint64_t seed);

/// K x n matrix of log p_i(x_s) for the family's registered models.
Matrix family_loglik(const ExpFamily& fam, const std::vector<std::size_t>& samples);

struct VarianceReport {
  std::size_t i = 0;
  std::size_t j = 0;
  double lambda = 0.0;
  std::size_t n_samples = 0;
  double exact_2kl = 0.0;         // 2 KL(p_i, p_j), enumerated
  double variance_exact = 0.0;    // Var_{p0}(l_i - l_j), enumerated
  double variance_sampled = 0.0;  // biased sample variance of l_i - l_j
  double q_estimate = 0.0;        // ||q_i - q_j||^2 / n from the sampled matrix
  double theory_error = 0.0;      // |exact_2kl - variance_exact|
  double sampling_error = 0.0;    // |variance_exact - variance_sampled|

  double relative_error() const;  // |q_estimate - exact_2kl| / exact_2kl
};

/// Samples are drawn from member(generator) when given, else from p0.
VarianceReport validate_variance_identity(const ExpFamily& fam, std::size_t i, std::size_t j,
                                          std::size_t n_samples, std::uint64_t seed,
                                          const std::optional<Vector>& generator = std::nullopt);
/// Every ordered pair i != j, all from one shared sample.
std::vector<VarianceReport> validate_all_pairs(const ExpFamily& fam, std::size_t n_samples, std::uint64_t seed,
                                               const std::optional<Vector>& generator = std::nullopt);

std::string format_variance_reports(const std::vector<VarianceReport>& reports);

using TokenText = std::vector<std::size_t>;

/// p(y_t | previous `order` tokens); the history before the first token is
/// padded with BOS, which has index `vocab`. Context index of the window
/// (c_1, ..., c_k), oldest first, is sum c_m (V+1)^(k-m).
struct MarkovTokenModel {
  std::size_t vocab = 0;
  std::size_t order = 1;
  Matrix transition;  // (V+1)^order x V

  std::size_t n_contexts() const;
  std::size_t start_context() const;
  std::size_t next_context(std::size_t context, std::size_t token) const;
  void validate() const;
};

MarkovTokenModel uniform_token_model(std::size_t vocab, std::size_t order);
/// Rows ~ Dirichlet(concentration).
MarkovTokenModel random_token_model(std::size_t vocab, std::size_t order, SplitMix64& rng,
                                    double concentration = 1.0);
/// p(y | c) proportional to base(y | c) exp(lambda b(c, y)).
MarkovTokenModel tilt(const MarkovTokenModel& base, const Matrix& b, double lambda);

TokenText sample_text(const MarkovTokenModel& model, std::size_t length, SplitMix64& rng);
Vector token_log_probs(const MarkovTokenModel& model, const TokenText& text);
double text_loglik(const MarkovTokenModel& model, const TokenText& text);

/// zeta_t = log p(y_t | history) - l(x) / n.
Vector token_coordinates(const MarkovTokenModel& model, const TokenText& text);
/// sum over positions of KL(p(. | history), q(. | history)).
double token_kl_sum(const MarkovTokenModel& p, const MarkovTokenModel& q, const TokenText& text);

/// Expected conditional KL at each position 1..n under p's context marginals.
std::vector<double> position_kl(const MarkovTokenModel& p, const MarkovTokenModel& q, std::size_t length);
/// Exact KL between length-n text distributions (sum of position_kl).
double exact_text_kl(const MarkovTokenModel& p, const MarkovTokenModel& q, std::size_t length);
/// Same quantity by enumerating all V^n texts; refuses more than 1e6 texts.
double exact_text_kl_enumerate(const MarkovTokenModel& p, const MarkovTokenModel& q, std::size_t length);

struct TokenValidationConfig {
  std::size_t n_texts = 200;
  std::size_t length = 64;
  double lambda = 0.2;
  double switch_prob = 0.05;
  double concentration = 20.0;
  double minor_scale = 0.25;
  std::uint64_t seed = 0;
};

/// Order-1 base over 4 tokens in two regimes {0, 1} and {2, 3} (BOS behaves
/// like regime 0): regime switches with probability switch_prob, weights inside
/// a regime are Dirichlet(concentration). b(c, .) is a +1/-1 contrast between
/// the two tokens of each regime, standardized under base(. | c) and scaled by
/// 1 in regime-0 contexts and minor_scale in regime-1 contexts.
struct RegimePair {
  MarkovTokenModel base;
  MarkovTokenModel plus;   // tilt(+lambda b)
  MarkovTokenModel minus;  // tilt(-lambda b)
};

RegimePair regime_pair(const TokenValidationConfig& cfg);

struct TokenValidationReport {
  std::vector<double> zeta_sq;  // ||zeta_plus - zeta_minus||^2 per text
  std::vector<double> kl2_sum;  // 2 * token_kl_sum(plus, minus) per text
  double pearson_r = 0.0;
  double exact_text_kl = 0.0;
  double position_kl_mean = 0.0;      // mean over positions of expected KL
  double position_kl_variance = 0.0;  // its variance across positions
};

/// Texts are sampled from the base model.
TokenValidationReport validate_token_level(const TokenValidationConfig& cfg);

struct InterpolationGrid {
  Vector l0, l1, l2;
  std::vector<double> alphas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> betas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  double r1 = 1.0;
  double r2 = 1.0;
  double phi = 1.5707963267948966;
};

/// l0 + alpha (l1 - l0) + beta (l2 - l0).
Vector interpolate_loglik(const InterpolationGrid& grid, double alpha, double beta);
/// (alpha r1 + beta r2 cos phi, beta r2 sin phi).
std::pair<double, double> weight_plane_coords(double r1, double r2, double phi, double alpha, double beta);

/// Synthetic log-likelihood matrix for pipeline runs: n_texts outcomes drawn
/// from p0, scored by every model of the family. Models carry types, created
/// dates and benchmark scores derived from their mean log-likelihood; texts
/// carry categories and byte lengths.
LogLikMatrix simulate_matrix(const ExpFamily& fam, std::size_t n_texts, std::uint64_t seed);

}  // namespace llmap
