#pragma once

#include <string>

namespace rmae_acceptance {

struct GradSummary {
  double worst = 0;
  std::string where;
  int checks = 0;
};

// Block and full-model finite-difference checks in double precision.
GradSummary gradient_suite(int trials);

}  // namespace rmae_acceptance
