#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "llmap/error.hpp"
#include "llmap/matrix_core.hpp"
#include "llmap/oracle.hpp"

namespace llmap {

void FiniteDistribution::validate() const {
  if (probs.size() < 1) throw DataError("distribution has no outcomes");
  if (!probs.allFinite() || (probs.array() < 0.0).any()) throw DataError("distribution has negative or non-finite mass");
  if (std::abs(probs.sum() - 1.0) > 1e-12) throw DataError("distribution does not sum to 1");
}

double exact_kl(const FiniteDistribution& p, const FiniteDistribution& q) {
  if (p.size() != q.size()) throw DataError("KL between distributions over different outcome sets");
  double kl = 0.0;
  for (Eigen::Index x = 0; x < p.probs.size(); ++x) {
    const double px = p.probs(x);
    if (px == 0.0) continue;
    const double qx = q.probs(x);
    if (qx == 0.0) throw DataError("KL is infinite: outcome " + std::to_string(x) + " has p > 0 and q = 0");
    kl += px * std::log(px / qx);
  }
  return kl;
}

Vector dirichlet(SplitMix64& rng, const Vector& concentration) {
  Vector g(concentration.size());
  for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = rng.gamma(concentration(k));
  return g / g.sum();
}

ExpFamily::ExpFamily(FiniteDistribution base, Matrix b, double lambda)
    : base_(std::move(base)), b_(std::move(b)), lambda_(lambda) {
  base_.validate();
  if (static_cast<std::size_t>(b_.rows()) != base_.size()) throw DataError("b must have one row per outcome");
  if (!b_.allFinite()) throw DataError("b contains non-finite values");
  if (!(lambda_ > 0.0)) throw ConfigError("lambda must be positive");
}

double ExpFamily::psi(const Vector& theta) const {
  if (theta.size() != b_.cols()) throw ConfigError("theta has the wrong dimension");
  double top = -std::numeric_limits<double>::infinity();
  Vector a(b_.rows());
  for (Eigen::Index x = 0; x < b_.rows(); ++x) {
    a(x) = base_.probs(x) > 0.0 ? std::log(base_.probs(x)) + b_.row(x).dot(theta)
                                : -std::numeric_limits<double>::infinity();
    top = std::max(top, a(x));
  }
  double s = 0.0;
  for (Eigen::Index x = 0; x < a.size(); ++x) s += std::exp(a(x) - top);
  return top + std::log(s);
}

Vector ExpFamily::log_member(const Vector& theta) const {
  const double p = psi(theta);
  Vector out(b_.rows());
  for (Eigen::Index x = 0; x < b_.rows(); ++x) {
    out(x) = base_.probs(x) > 0.0 ? std::log(base_.probs(x)) + b_.row(x).dot(theta) - p
                                  : -std::numeric_limits<double>::infinity();
  }
  return out;
}

FiniteDistribution ExpFamily::member(const Vector& theta) const {
  return FiniteDistribution{log_member(theta).array().exp()};
}

Vector ExpFamily::model_theta(std::size_t i) const {
  if (i >= n_models()) throw ConfigError("model index out of range");
  Vector theta = Vector::Zero(b_.cols());
  theta(Eigen::Index(i)) = lambda_;
  return theta;
}

ExpFamily expfamily_from_models(const FiniteDistribution& p0, const std::vector<FiniteDistribution>& models,
                                double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  p0.validate();
  Matrix b(p0.probs.size(), Eigen::Index(models.size()));
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    m.validate();
    if (m.size() != p0.size()) throw DataError("model " + std::to_string(i) + " has a different outcome set");
    for (Eigen::Index x = 0; x < b.rows(); ++x) {
      const bool in0 = p0.probs(x) > 0.0;
      const bool in1 = m.probs(x) > 0.0;
      if (in0 != in1) throw DataError("model " + std::to_string(i) + " does not share the base support");
      b(x, Eigen::Index(i)) = in0 ? (std::log(m.probs(x)) - std::log(p0.probs(x))) / lambda : 0.0;
    }
  }
  return ExpFamily(p0, std::move(b), lambda);
}

ExpFamily random_family(std::size_t outcomes, std::size_t models, double lambda, std::uint64_t seed,
                        double concentration) {
  if (outcomes < 2 || models < 1) throw ConfigError("random family needs M >= 2 and K >= 1");
  SplitMix64 rng(seed);
  const auto m = Eigen::Index(outcomes);
  FiniteDistribution p0{dirichlet(rng, Vector::Ones(m))};
  Matrix b(m, Eigen::Index(models));
  for (Eigen::Index i = 0; i < b.cols(); ++i) {
    const Vector w = dirichlet(rng, Vector::Constant(m, concentration));
    const Vector r = p0.probs.cwiseProduct(w) / p0.probs.dot(w);
    Vector col = (r.array().log() - p0.probs.array().log()).matrix();
    const double mean = p0.probs.dot(col);
    col.array() -= mean;
    const double sd = std::sqrt(p0.probs.dot(col.cwiseProduct(col)));
    if (!(sd > 0.0)) throw DataError("degenerate random family column");
    b.col(i) = col / sd;
  }
  return ExpFamily(std::move(p0), std::move(b), lambda);
}

std::vector<std::size_t> sample_outcomes(const FiniteDistribution& dist, std::size_t n, std::uint64_t seed) {
  std::vector<double> cdf(dist.size());
  double run = 0.0;
  for (std::size_t x = 0; x < cdf.size(); ++x) cdf[x] = run += dist.probs(Eigen::Index(x));
  SplitMix64 rng(seed);
  std::vector<std::size_t> out(n);
  for (auto& o : out) {
    // Zero-mass outcomes share a CDF value with their predecessor, so upper_bound skips them.
    const double u = rng.uniform01() * run;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    o = std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
  }
  return out;
}

Matrix family_loglik(const ExpFamily& fam, const std::vector<std::size_t>& samples) {
  const auto k = Eigen::Index(fam.n_models());
  Matrix l(k, Eigen::Index(samples.size()));
  for (Eigen::Index i = 0; i < k; ++i) {
    const Vector lm = fam.log_member(fam.model_theta(std::size_t(i)));
    for (std::size_t s = 0; s < samples.size(); ++s) l(i, Eigen::Index(s)) = lm(Eigen::Index(samples[s]));
  }
  return l;
}

double VarianceReport::relative_error() const {
  return exact_2kl > 0.0 ? std::abs(q_estimate - exact_2kl) / exact_2kl : std::abs(q_estimate);
}

namespace {

std::vector<VarianceReport> reports_for(const ExpFamily& fam, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                        std::size_t n_samples, std::uint64_t seed,
                                        const std::optional<Vector>& generator) {
  if (n_samples < 2) throw ConfigError("need at least 2 samples");
  const FiniteDistribution source = generator ? fam.member(*generator) : fam.base();
  const auto samples = sample_outcomes(source, n_samples, seed);
  const Matrix l = family_loglik(fam, samples);
  const ModelCoordinates coords = double_center(l);
  const double n = static_cast<double>(n_samples);

  std::vector<Vector> log_models;
  std::vector<FiniteDistribution> models;
  for (std::size_t i = 0; i < fam.n_models(); ++i) {
    log_models.push_back(fam.log_member(fam.model_theta(i)));
    models.push_back(fam.model(i));
  }
  const Vector& p0 = fam.base().probs;

  std::vector<VarianceReport> out;
  for (const auto& [i, j] : pairs) {
    VarianceReport r;
    r.i = i;
    r.j = j;
    r.lambda = fam.lambda();
    r.n_samples = n_samples;
    r.exact_2kl = 2.0 * exact_kl(models[i], models[j]);

    double m1 = 0.0, m2 = 0.0;
    for (Eigen::Index x = 0; x < p0.size(); ++x) {
      if (p0(x) == 0.0) continue;
      const double d = log_models[i](x) - log_models[j](x);
      m1 += p0(x) * d;
      m2 += p0(x) * d * d;
    }
    r.variance_exact = std::max(m2 - m1 * m1, 0.0);

    const Vector diff = (l.row(Eigen::Index(i)) - l.row(Eigen::Index(j))).transpose();
    const double mean = diff.sum() / n;
    r.variance_sampled = (diff.array() - mean).square().sum() / n;
    r.q_estimate = (coords.q.row(Eigen::Index(i)) - coords.q.row(Eigen::Index(j))).squaredNorm() / n;
    r.theory_error = std::abs(r.exact_2kl - r.variance_exact);
    r.sampling_error = std::abs(r.variance_exact - r.variance_sampled);
    out.push_back(r);
  }
  return out;
}

}  // namespace

VarianceReport validate_variance_identity(const ExpFamily& fam, std::size_t i, std::size_t j,
                                          std::size_t n_samples, std::uint64_t seed,
                                          const std::optional<Vector>& generator) {
  if (i >= fam.n_models() || j >= fam.n_models()) throw ConfigError("model index out of range");
  return reports_for(fam, {{i, j}}, n_samples, seed, generator).front();
}

std::vector<VarianceReport> validate_all_pairs(const ExpFamily& fam, std::size_t n_samples, std::uint64_t seed,
                                               const std::optional<Vector>& generator) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < fam.n_models(); ++i) {
    for (std::size_t j = 0; j < fam.n_models(); ++j) {
      if (i != j) pairs.emplace_back(i, j);
    }
  }
  return reports_for(fam, pairs, n_samples, seed, generator);
}

std::string format_variance_reports(const std::vector<VarianceReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"i", r.i},
                   {"j", r.j},
                   {"lambda", r.lambda},
                   {"n_samples", r.n_samples},
                   {"exact_2kl", r.exact_2kl},
                   {"variance_exact", r.variance_exact},
                   {"variance_sampled", r.variance_sampled},
                   {"q_estimate", r.q_estimate},
                   {"errors", {{"theory", r.theory_error}, {"sampling", r.sampling_error}}}});
  }
  return arr.dump(2) + "\n";
}

}  // namespace llmap
