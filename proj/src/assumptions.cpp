#include "langevin/assumptions.hpp"

namespace langevin {

std::vector<std::string> AssumptionConstants::problems() const {
  std::vector<std::string> out;
  if (!(lambda >= 1.0)) out.push_back("lambda must be >= 1");
  if (!(beta1 >= 1.0)) out.push_back("beta1 must be >= 1");
  if (!(beta2 >= 0.0 && beta2 < beta1)) out.push_back("beta2 must lie in [0, beta1)");
  if (!(a1 > 0.0 && a2 > 0.0 && a3 > 0.0 && a4 > 0.0))
    out.push_back("a1, a2, a3, a4 must be positive");
  // Pure power laws satisfy the singular-part conditions with a6 = 0 exactly,
  // so zero is admitted here.
  if (!(a6 >= 0.0)) out.push_back("a6 must be nonnegative");
  if (!(gamma_lo > 0.0 && gamma_lo <= gamma_hi))
    out.push_back("ellipticity bounds need 0 < gamma_lo <= gamma_hi");
  if (relativistic_multi && !(beta1 > 1.0 && beta1 <= 2.0))
    out.push_back("relativistic multi-particle use needs beta1 in (1, 2]");
  return out;
}

}  // namespace langevin
