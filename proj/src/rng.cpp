#include "gdp/rng.hpp"

#include <numeric>

namespace gdp {

std::vector<std::size_t> weighted_draw_order(SeededRng& rng, std::span<const double> weights) {
  struct Keyed {
    double key;
    std::size_t index;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    // One draw per item regardless of weight keeps the stream position a
    // function of the population size only.
    const double u = rng.uniform_open0();
    if (!(weights[i] > 0.0)) continue;
    keyed.push_back({std::log(u) / weights[i], i});
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) { return a.key > b.key; });
  std::vector<std::size_t> order;
  order.reserve(keyed.size());
  for (const auto& k : keyed) order.push_back(k.index);
  return order;
}

std::vector<std::size_t> sample_indices_without_replacement(SeededRng& rng, std::span<const double> weights,
                                                            std::size_t k) {
  std::vector<std::size_t> order = weighted_draw_order(rng, weights);
  if (order.size() < k)
    fail(ErrorCode::InsufficientPopulation,
         "requested " + std::to_string(k) + " of " + std::to_string(order.size()) + " eligible items");
  order.resize(k);
  return order;
}

}  // namespace gdp
