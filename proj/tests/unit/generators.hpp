#pragma once

// Hand-rolled random generators for property-style tests.

#include <random>

#include "combat/action.hpp"

namespace testgen {

inline combat::ActionEvent random_event(std::mt19937_64& rng, combat::ActionCategory c) {
  if (combat::is_hold_capable(c) && rng() % 3 != 0) {
    return combat::ActionEvent::hold(c, 1 + static_cast<std::int64_t>(rng() % 9999));
  }
  return combat::ActionEvent::tap(c);
}

// A set with between `min_size` and 10 distinct categories in random order.
inline combat::ActionSet random_set(std::mt19937_64& rng, int min_size) {
  std::vector<combat::ActionCategory> cats(combat::kPriorityOrder.begin(),
                                           combat::kPriorityOrder.end());
  std::shuffle(cats.begin(), cats.end(), rng);
  const int span = combat::kNumCategories - min_size + 1;
  const int n = min_size + static_cast<int>(rng() % static_cast<unsigned>(span));
  combat::ActionSet s;
  for (int i = 0; i < n; ++i) s.add(random_event(rng, cats[static_cast<std::size_t>(i)]));
  return s;
}

}  // namespace testgen
