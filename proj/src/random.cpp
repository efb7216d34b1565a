#include "cinet/random.hpp"

#include <algorithm>
#include <cmath>

namespace cinet {

std::vector<double> sample_dirichlet(Rng& rng, int dim, double concentration) {
  std::vector<double> out(static_cast<std::size_t>(dim));
  if (concentration >= 1.0) {
    std::gamma_distribution<double> gamma(concentration, 1.0);
    double total = 0.0;
    for (double& v : out) {
      v = gamma(rng);
      total += v;
    }
    for (double& v : out) v /= total;
    return out;
  }

  // Gamma(a) = Gamma(a + 1) * U^(1/a); keep the logarithm.
  std::gamma_distribution<double> gamma(concentration + 1.0, 1.0);
  std::vector<double> logs(out.size());
  for (double& l : logs) {
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    l = std::log(gamma(rng)) + std::log(u) / concentration;
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(logs[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace cinet
