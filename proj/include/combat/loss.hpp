#pragma once

// Adaptive action-weighted objective as a scalar functional:
//   L = L_lang + alpha(c*) * L_act
//   L_act = 1 - cos(v, a)                    if the label's top action is predicted
//         = -(1 - cos(v, a)) - log p(c*)     otherwise
// with analytic gradients and a central-difference checker.

#include <array>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "combat/action.hpp"

namespace combat {

struct EmbeddingPair {
  std::vector<double> v_eos;  // visual terminal representation
  std::vector<double> a_eos;  // answer terminal representation
};

// Throws kDegenerateEmbedding on dimension mismatch, d < 2, or a zero vector.
void validate_pair(const EmbeddingPair& pair);

struct ActionPrediction {
  std::array<double, kNumCategories> probs{};  // indexed by priority rank
  ActionSet output_set;
};

// Throws kInvalidArgument unless probs are non-negative and sum to 1 (1e-9).
void validate_prediction(const ActionPrediction& pred);

inline constexpr double kProbabilityFloor = 1e-12;

struct AlignmentTerm {
  double value = 0.0;
  bool clamped = false;  // p(c*) was below kProbabilityFloor
};

struct LossBreakdown {
  double l_lang = 0.0;
  double l_con = 0.0;
  double l_align = 0.0;
  double l_act = 0.0;
  double alpha = 0.0;
  double total = 0.0;
  ActionCategory c_star = ActionCategory::kHeal;
  bool matched = false;
  bool clamped_probability = false;
};

double cosine_similarity(std::span<const double> v, std::span<const double> a);

// matched: 1 - cos(v, a); mismatched: the negation.
double contrastive_term(const EmbeddingPair& pair, bool matched);

// -log p(c*) for the single supervised action position.
AlignmentTerm alignment_term(std::span<const double> probs, ActionCategory c_star);
inline AlignmentTerm alignment_term(const ActionPrediction& pred, ActionCategory c_star) {
  return alignment_term(std::span<const double>(pred.probs), c_star);
}

LossBreakdown composite_loss(const EmbeddingPair& pair, const ActionPrediction& pred,
                             const ActionSet& label, double l_lang,
                             const PrioritySchedule& schedule = PrioritySchedule::standard());

struct ContrastiveGradient {
  std::vector<double> d_v;
  std::vector<double> d_a;
};

ContrastiveGradient contrastive_gradient(const EmbeddingPair& pair, bool matched);
// Gradient w.r.t. the probability vector (only the c* entry is non-zero).
std::vector<double> alignment_gradient(std::span<const double> probs, ActionCategory c_star);

using ScalarFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

struct GradCheckReport {
  double analytic_norm = 0.0;
  double fd_norm = 0.0;
  double max_rel_error = 0.0;
};

// Central differences: g_i ~ (f(x + h e_i) - f(x - h e_i)) / 2h, compared
// component-wise as |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-6).
// Throws kInvalidArgument for h outside [1e-7, 1e-3], kNumericFailure on
// non-finite values.
GradCheckReport finite_diff_check(const ScalarFn& fn, const GradientFn& grad,
                                  std::span<const double> point, double h);

GradCheckReport check_contrastive_gradient(const EmbeddingPair& pair, bool matched, double h);
// Uses a step of h scaled down by p(c*) / 0.01 when p(c*) is below 0.01.
GradCheckReport check_alignment_gradient(std::span<const double> probs, ActionCategory c_star,
                                         double h);

// Synthetic inputs for tests and the loss-check command.
std::vector<double> random_unit_vector(std::size_t d, std::mt19937_64& rng);
std::array<double, kNumCategories> random_simplex_point(std::mt19937_64& rng, double min_mass = 1e-3);

}  // namespace combat
