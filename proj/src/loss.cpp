#include "combat/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "combat/error.hpp"

namespace combat {

namespace {

double norm(std::span<const double> x) {
  return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw Error(ErrorKind::kNumericFailure, std::string("non-finite ") + what);
}

}  // namespace

void validate_pair(const EmbeddingPair& pair) {
  if (pair.v_eos.size() != pair.a_eos.size() || pair.v_eos.size() < 2) {
    throw Error(ErrorKind::kDegenerateEmbedding, "embeddings must share a dimension >= 2");
  }
  if (norm(pair.v_eos) == 0.0 || norm(pair.a_eos) == 0.0) {
    throw Error(ErrorKind::kDegenerateEmbedding, "zero-norm embedding");
  }
}

void validate_prediction(const ActionPrediction& pred) {
  double sum = 0.0;
  for (double p : pred.probs) {
    if (!(p >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "negative or NaN probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, "probabilities do not sum to 1");
  }
}

double cosine_similarity(std::span<const double> v, std::span<const double> a) {
  const double nv = norm(v);
  const double na = norm(a);
  if (nv == 0.0 || na == 0.0 || v.size() != a.size()) {
    throw Error(ErrorKind::kDegenerateEmbedding, "cosine of a zero or mismatched vector");
  }
  return std::inner_product(v.begin(), v.end(), a.begin(), 0.0) / (nv * na);
}

double contrastive_term(const EmbeddingPair& pair, bool matched) {
  validate_pair(pair);
  const double pull = 1.0 - cosine_similarity(pair.v_eos, pair.a_eos);
  return matched ? pull : -pull;
}

AlignmentTerm alignment_term(std::span<const double> probs, ActionCategory c_star) {
  const auto idx = static_cast<std::size_t>(priority_rank(c_star));
  if (idx >= probs.size()) throw Error(ErrorKind::kInvalidArgument, "c* outside the distribution");
  const double p = probs[idx];
  if (!(p >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "negative or NaN probability");
  if (p < kProbabilityFloor) return AlignmentTerm{-std::log(kProbabilityFloor), true};
  return AlignmentTerm{-std::log(p), false};
}

LossBreakdown composite_loss(const EmbeddingPair& pair, const ActionPrediction& pred,
                             const ActionSet& label, double l_lang,
                             const PrioritySchedule& schedule) {
  if (!(l_lang >= 0.0) || !std::isfinite(l_lang)) {
    throw Error(ErrorKind::kInvalidArgument, "language loss must be a finite value >= 0");
  }
  validate_prediction(pred);
  const MatchResult m = priority_match(label, pred.output_set);

  LossBreakdown out;
  out.l_lang = l_lang;
  out.c_star = m.c_star;
  out.matched = m.matched;
  out.l_con = contrastive_term(pair, m.matched);
  if (m.matched) {
    out.l_align = 0.0;
  } else {
    const AlignmentTerm a = alignment_term(pred, m.c_star);
    out.l_align = a.value;
    out.clamped_probability = a.clamped;
  }
  out.l_act = out.l_con + out.l_align;
  out.alpha = schedule.weight_of(m.c_star);
  out.total = out.l_lang + out.alpha * out.l_act;
  return out;
}

ContrastiveGradient contrastive_gradient(const EmbeddingPair& pair, bool matched) {
  validate_pair(pair);
  const auto& v = pair.v_eos;
  const auto& a = pair.a_eos;
  const double nv = norm(v);
  const double na = norm(a);
  const double cos = cosine_similarity(v, a);
  // d cos / dv = a / (|v||a|) - cos * v / |v|^2, symmetric in a.
  const double sign = matched ? -1.0 : 1.0;
  ContrastiveGradient g{std::vector<double>(v.size()), std::vector<double>(a.size())};
  for (std::size_t i = 0; i < v.size(); ++i) {
    g.d_v[i] = sign * (a[i] / (nv * na) - cos * v[i] / (nv * nv));
    g.d_a[i] = sign * (v[i] / (nv * na) - cos * a[i] / (na * na));
  }
  return g;
}

std::vector<double> alignment_gradient(std::span<const double> probs, ActionCategory c_star) {
  const auto idx = static_cast<std::size_t>(priority_rank(c_star));
  std::vector<double> g(probs.size(), 0.0);
  const double p = std::max(probs[idx], kProbabilityFloor);
  g[idx] = -1.0 / p;
  return g;
}

GradCheckReport finite_diff_check(const ScalarFn& fn, const GradientFn& grad,
                                  std::span<const double> point, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) {
    throw Error(ErrorKind::kInvalidArgument, "finite-difference step must lie in [1e-7, 1e-3]");
  }
  const std::vector<double> analytic = grad(point);
  if (analytic.size() != point.size()) {
    throw Error(ErrorKind::kInvalidArgument, "gradient dimension mismatch");
  }
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> fd(point.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = fn(x);
    x[i] = orig - h;
    const double down = fn(x);
    x[i] = orig;
    require_finite(up, "function value");
    require_finite(down, "function value");
    fd[i] = (up - down) / (2.0 * h);
  }
  GradCheckReport r;
  double a2 = 0.0, f2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require_finite(analytic[i], "analytic gradient");
    a2 += analytic[i] * analytic[i];
    f2 += fd[i] * fd[i];
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd[i]), 1e-6});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic[i] - fd[i]) / denom);
  }
  r.analytic_norm = std::sqrt(a2);
  r.fd_norm = std::sqrt(f2);
  return r;
}

GradCheckReport check_contrastive_gradient(const EmbeddingPair& pair, bool matched, double h) {
  validate_pair(pair);
  const std::size_t d = pair.v_eos.size();
  // Flattened [v; a] so one check covers both gradients.
  std::vector<double> point(pair.v_eos);
  point.insert(point.end(), pair.a_eos.begin(), pair.a_eos.end());
  auto unflatten = [d](std::span<const double> x) {
    return EmbeddingPair{{x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d)},
                         {x.begin() + static_cast<std::ptrdiff_t>(d), x.end()}};
  };
  ScalarFn fn = [&](std::span<const double> x) { return contrastive_term(unflatten(x), matched); };
  GradientFn grad = [&](std::span<const double> x) {
    auto g = contrastive_gradient(unflatten(x), matched);
    g.d_v.insert(g.d_v.end(), g.d_a.begin(), g.d_a.end());
    return g.d_v;
  };
  return finite_diff_check(fn, grad, point, h);
}

GradCheckReport check_alignment_gradient(std::span<const double> probs, ActionCategory c_star,
                                         double h) {
  ScalarFn fn = [c_star](std::span<const double> x) { return alignment_term(x, c_star).value; };
  GradientFn grad = [c_star](std::span<const double> x) { return alignment_gradient(x, c_star); };
  // The truncation error of -log p grows like (h / p)^2, so the step shrinks
  // with p(c*) below 0.01.
  double step = h;
  const auto idx = static_cast<std::size_t>(priority_rank(c_star));
  if (idx < probs.size() && probs[idx] > 0.0) step = std::max(1e-7, h * std::min(1.0, probs[idx] / 1e-2));
  return finite_diff_check(fn, grad, probs, step);
}

std::vector<double> random_unit_vector(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(d);
  double n = 0.0;
  while (n == 0.0) {
    for (auto& x : v) x = normal(rng);
    n = norm(v);
  }
  for (auto& x : v) x /= n;
  return v;
}

std::array<double, kNumCategories> random_simplex_point(std::mt19937_64& rng, double min_mass) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::array<double, kNumCategories> p{};
  double sum = 0.0;
  for (auto& x : p) {
    x = min_mass + uni(rng);
    sum += x;
  }
  for (auto& x : p) x /= sum;
  return p;
}

}  // namespace combat
