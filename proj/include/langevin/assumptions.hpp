#pragma once

#include <string>
#include <vector>

namespace langevin {

// Constants appearing in the growth and singularity conditions on U, G and D.
// a5 is signed: condition (ii') subtracts a5 q/|q|^{beta2+1}, condition (ii)
// uses |a5| as the coefficient of |q|^{-beta2}.
struct AssumptionConstants {
  double lambda = 1.0;
  double beta1 = 1.0;
  double beta2 = 0.0;
  double a1 = 1.0, a2 = 1.0, a3 = 1.0, a4 = 1.0, a5 = 0.0, a6 = 0.0;
  double gamma_lo = 1.0;
  double gamma_hi = 1.0;
  // Set when the constants back the N >= 2 relativistic model, which needs beta1 in (1, 2].
  bool relativistic_multi = false;

  std::vector<std::string> problems() const;

  bool operator==(const AssumptionConstants&) const = default;
};

}  // namespace langevin
