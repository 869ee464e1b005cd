#include <cmath>

#include "llmap/analysis.hpp"
#include "llmap/error.hpp"
#include "llmap/oracle.hpp"

namespace llmap {

namespace {

using Index = Eigen::Index;

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t e = 0; e < exp; ++e) r *= base;
  return r;
}

double row_kl(const MarkovTokenModel& p, const MarkovTokenModel& q, std::size_t context) {
  double kl = 0.0;
  for (Index y = 0; y < p.transition.cols(); ++y) {
    const double py = p.transition(Index(context), y);
    if (py == 0.0) continue;
    const double qy = q.transition(Index(context), y);
    if (qy == 0.0) throw DataError("KL is infinite: q assigns zero probability to a token p can emit");
    kl += py * std::log(py / qy);
  }
  return kl;
}

void check_pair(const MarkovTokenModel& p, const MarkovTokenModel& q) {
  if (p.vocab != q.vocab || p.order != q.order) throw ConfigError("token models must share vocabulary and order");
}

}  // namespace

std::size_t MarkovTokenModel::n_contexts() const { return ipow(vocab + 1, order); }

std::size_t MarkovTokenModel::start_context() const {
  std::size_t c = 0;
  for (std::size_t m = 0; m < order; ++m) c = c * (vocab + 1) + vocab;
  return c;
}

std::size_t MarkovTokenModel::next_context(std::size_t context, std::size_t token) const {
  if (order == 0) return 0;
  return (context * (vocab + 1) + token) % n_contexts();
}

void MarkovTokenModel::validate() const {
  if (vocab < 1) throw ConfigError("token model needs a non-empty vocabulary");
  if (static_cast<std::size_t>(transition.rows()) != n_contexts() ||
      static_cast<std::size_t>(transition.cols()) != vocab) {
    throw DataError("transition table has the wrong shape");
  }
  for (Index c = 0; c < transition.rows(); ++c) {
    if (!transition.row(c).allFinite() || (transition.row(c).array() < 0.0).any() ||
        std::abs(transition.row(c).sum() - 1.0) > 1e-12) {
      throw DataError("transition row " + std::to_string(c) + " is not a distribution");
    }
  }
}

MarkovTokenModel uniform_token_model(std::size_t vocab, std::size_t order) {
  MarkovTokenModel m{vocab, order, {}};
  m.transition = Matrix::Constant(Index(m.n_contexts()), Index(vocab), 1.0 / static_cast<double>(vocab));
  return m;
}

MarkovTokenModel random_token_model(std::size_t vocab, std::size_t order, SplitMix64& rng, double concentration) {
  MarkovTokenModel m{vocab, order, {}};
  m.transition.resize(Index(m.n_contexts()), Index(vocab));
  for (Index c = 0; c < m.transition.rows(); ++c) {
    m.transition.row(c) = dirichlet(rng, Vector::Constant(Index(vocab), concentration)).transpose();
  }
  return m;
}

MarkovTokenModel tilt(const MarkovTokenModel& base, const Matrix& b, double lambda) {
  if (b.rows() != base.transition.rows() || b.cols() != base.transition.cols()) {
    throw DataError("tilt statistic has the wrong shape");
  }
  MarkovTokenModel out = base;
  for (Index c = 0; c < b.rows(); ++c) {
    double top = -std::numeric_limits<double>::infinity();
    for (Index y = 0; y < b.cols(); ++y) top = std::max(top, lambda * b(c, y));
    double z = 0.0;
    for (Index y = 0; y < b.cols(); ++y) {
      out.transition(c, y) = base.transition(c, y) * std::exp(lambda * b(c, y) - top);
      z += out.transition(c, y);
    }
    out.transition.row(c) /= z;
  }
  return out;
}

TokenText sample_text(const MarkovTokenModel& model, std::size_t length, SplitMix64& rng) {
  TokenText text(length);
  std::size_t ctx = model.start_context();
  for (auto& tok : text) {
    const double u = rng.uniform01();
    double run = 0.0;
    tok = model.vocab - 1;
    for (std::size_t y = 0; y < model.vocab; ++y) {
      run += model.transition(Index(ctx), Index(y));
      if (u < run) {
        tok = y;
        break;
      }
    }
    ctx = model.next_context(ctx, tok);
  }
  return text;
}

Vector token_log_probs(const MarkovTokenModel& model, const TokenText& text) {
  Vector out(Index(text.size()));
  std::size_t ctx = model.start_context();
  for (std::size_t t = 0; t < text.size(); ++t) {
    if (text[t] >= model.vocab) throw DataError("token outside the vocabulary");
    const double p = model.transition(Index(ctx), Index(text[t]));
    if (p == 0.0) throw DataError("zero-probability transition at position " + std::to_string(t + 1));
    out(Index(t)) = std::log(p);
    ctx = model.next_context(ctx, text[t]);
  }
  return out;
}

double text_loglik(const MarkovTokenModel& model, const TokenText& text) {
  return token_log_probs(model, text).sum();
}

Vector token_coordinates(const MarkovTokenModel& model, const TokenText& text) {
  if (text.empty()) throw DataError("token coordinates of an empty text");
  const Vector logs = token_log_probs(model, text);
  return logs.array() - logs.sum() / static_cast<double>(logs.size());
}

double token_kl_sum(const MarkovTokenModel& p, const MarkovTokenModel& q, const TokenText& text) {
  check_pair(p, q);
  double total = 0.0;
  std::size_t ctx = p.start_context();
  for (auto tok : text) {
    total += row_kl(p, q, ctx);
    ctx = p.next_context(ctx, tok);
  }
  return total;
}

std::vector<double> position_kl(const MarkovTokenModel& p, const MarkovTokenModel& q, std::size_t length) {
  check_pair(p, q);
  const std::size_t nc = p.n_contexts();
  std::vector<double> kl_row(nc);
  for (std::size_t c = 0; c < nc; ++c) kl_row[c] = row_kl(p, q, c);
  std::vector<double> marginal(nc, 0.0), next(nc);
  marginal[p.start_context()] = 1.0;
  std::vector<double> out;
  for (std::size_t t = 0; t < length; ++t) {
    double e = 0.0;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
      if (marginal[c] == 0.0) continue;
      e += marginal[c] * kl_row[c];
      for (std::size_t y = 0; y < p.vocab; ++y) next[p.next_context(c, y)] += marginal[c] * p.transition(Index(c), Index(y));
    }
    out.push_back(e);
    marginal.swap(next);
  }
  return out;
}

double exact_text_kl(const MarkovTokenModel& p, const MarkovTokenModel& q, std::size_t length) {
  double total = 0.0;
  for (double v : position_kl(p, q, length)) total += v;
  return total;
}

double exact_text_kl_enumerate(const MarkovTokenModel& p, const MarkovTokenModel& q, std::size_t length) {
  check_pair(p, q);
  double count = 1.0;
  for (std::size_t t = 0; t < length; ++t) count *= static_cast<double>(p.vocab);
  if (count > 1e6) throw ConfigError("enumeration would visit more than 1e6 texts");
  const auto n = static_cast<std::size_t>(count);
  TokenText text(length, 0);
  double kl = 0.0;
  for (std::size_t code = 0; code < n; ++code) {
    std::size_t rest = code;
    for (std::size_t t = 0; t < length; ++t) {
      text[t] = rest % p.vocab;
      rest /= p.vocab;
    }
    double lp = 0.0, lq = 0.0;
    bool possible = true;
    std::size_t ctx = p.start_context();
    for (auto tok : text) {
      const double pt = p.transition(Index(ctx), Index(tok));
      if (pt == 0.0) {
        possible = false;
        break;
      }
      const double qt = q.transition(Index(ctx), Index(tok));
      if (qt == 0.0) throw DataError("KL is infinite: q assigns zero probability to a text p can emit");
      lp += std::log(pt);
      lq += std::log(qt);
      ctx = p.next_context(ctx, tok);
    }
    if (possible) kl += std::exp(lp) * (lp - lq);
  }
  return kl;
}

RegimePair regime_pair(const TokenValidationConfig& cfg) {
  constexpr std::size_t kVocab = 4;
  SplitMix64 rng(cfg.seed);
  MarkovTokenModel base{kVocab, 1, Matrix::Zero(kVocab + 1, kVocab)};
  Matrix b = Matrix::Zero(kVocab + 1, kVocab);
  const Vector conc = Vector::Constant(2, cfg.concentration);
  for (Index c = 0; c <= Index(kVocab); ++c) {
    const Index regime = (c == 2 || c == 3) ? 1 : 0;
    const Index other = 1 - regime;
    const Vector stay = dirichlet(rng, conc) * (1.0 - cfg.switch_prob);
    const Vector leave = dirichlet(rng, conc) * cfg.switch_prob;
    base.transition.block(c, 2 * regime, 1, 2) = stay.transpose();
    base.transition.block(c, 2 * other, 1, 2) = leave.transpose();

    const Vector p = base.transition.row(c).transpose();
    Vector raw(4);
    raw << 1.0, -1.0, 1.0, -1.0;
    const double mean = p.dot(raw);
    raw.array() -= mean;
    const double sd = std::sqrt(p.dot(raw.cwiseProduct(raw)));
    const double scale = regime == 0 ? 1.0 : cfg.minor_scale;
    b.row(c) = (raw / sd * scale).transpose();
  }
  base.transition.array().colwise() /= base.transition.rowwise().sum().array();
  RegimePair out{base, tilt(base, b, cfg.lambda), tilt(base, b, -cfg.lambda)};
  return out;
}

TokenValidationReport validate_token_level(const TokenValidationConfig& cfg) {
  if (cfg.n_texts < 2 || cfg.length < 1) throw ConfigError("token validation needs >= 2 texts of length >= 1");
  const RegimePair pair = regime_pair(cfg);
  SplitMix64 rng(cfg.seed ^ 0x5eedULL);
  TokenValidationReport out;
  for (std::size_t s = 0; s < cfg.n_texts; ++s) {
    const TokenText text = sample_text(pair.base, cfg.length, rng);
    const Vector zp = token_coordinates(pair.plus, text);
    const Vector zm = token_coordinates(pair.minus, text);
    out.zeta_sq.push_back((zp - zm).squaredNorm());
    out.kl2_sum.push_back(2.0 * token_kl_sum(pair.plus, pair.minus, text));
  }
  const Vector a = Eigen::Map<const Vector>(out.zeta_sq.data(), Index(out.zeta_sq.size()));
  const Vector bvec = Eigen::Map<const Vector>(out.kl2_sum.data(), Index(out.kl2_sum.size()));
  out.pearson_r = pearson(a, bvec);
  const auto pos = position_kl(pair.plus, pair.minus, cfg.length);
  out.exact_text_kl = 0.0;
  for (double v : pos) out.exact_text_kl += v;
  out.position_kl_mean = out.exact_text_kl / static_cast<double>(pos.size());
  double var = 0.0;
  for (double v : pos) var += (v - out.position_kl_mean) * (v - out.position_kl_mean);
  out.position_kl_variance = var / static_cast<double>(pos.size());
  return out;
}

}  // namespace llmap
