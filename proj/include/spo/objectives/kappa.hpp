#pragma once

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/core/error.hpp"

namespace spo {

// Coefficients of the round-n implicit reward
//   R_n(x, y) = sum_{i=1..n} kappa_i log(pi_i(y|x) / pi_{i-1}(y|x)).
// kappas[i-1] holds kappa_i; alphas[k-1] holds alpha_k.
struct KappaSchedule {
  std::size_t round_n = 1;
  double beta = 0.1;
  std::vector<double> alphas;
  std::vector<double> kappas;

  double kappa(std::size_t i) const { return kappas.at(i - 1); }

  nlohmann::json to_json() const {
    return {{"n", round_n}, {"beta", beta}, {"alphas", alphas}, {"kappas", kappas}};
  }
  static KappaSchedule from_json(const nlohmann::json& j) {
    return {j.at("n").get<std::size_t>(), j.at("beta").get<double>(), j.at("alphas").get<std::vector<double>>(),
            j.at("kappas").get<std::vector<double>>()};
  }
};

// kappa_n = beta, kappa_{n-1} = -beta alpha_{n-1}, and for i in 2..n-1
//   kappa_{n-i} = -beta alpha_{n-i} prod_{j=2..i} (1 - alpha_{n-1-i+j}).
inline KappaSchedule kappa_schedule(std::size_t n, double beta, const std::vector<double>& alphas) {
  require(n >= 1, "kappa_schedule: n must be >= 1");
  require(beta > 0.0 && std::isfinite(beta), "kappa_schedule: beta must be positive");
  require(alphas.size() == n - 1, "kappa_schedule: expected " + std::to_string(n - 1) + " alphas, got " +
                                      std::to_string(alphas.size()));
  for (double a : alphas) require(a >= 0.0 && a < 1.0, "kappa_schedule: alpha outside [0, 1)");

  auto alpha = [&](std::size_t k) { return alphas[k - 1]; };
  std::vector<double> kappas(n, 0.0);
  auto kappa = [&](std::size_t i) -> double& { return kappas[i - 1]; };

  kappa(n) = beta;
  if (n >= 2) kappa(n - 1) = -beta * alpha(n - 1);
  for (std::size_t i = 2; i <= n - 1; ++i) {
    double prod = 1.0;
    for (std::size_t j = 2; j <= i; ++j) prod *= 1.0 - alpha(n - 1 - i + j);
    kappa(n - i) = -beta * alpha(n - i) * prod;
  }
  return {n, beta, alphas, std::move(kappas)};
}

// Closed form when every previous dimension shares one alpha:
//   kappa_{n-i} = -beta alpha (1 - alpha)^{i-1}.
inline std::vector<double> equal_alpha_kappas(std::size_t n, double beta, double alpha) {
  std::vector<double> kappas(n, 0.0);
  kappas[n - 1] = beta;
  for (std::size_t i = 1; i <= n - 1; ++i) {
    kappas[n - i - 1] = -beta * alpha * std::pow(1.0 - alpha, static_cast<double>(i - 1));
  }
  return kappas;
}

}  // namespace spo
