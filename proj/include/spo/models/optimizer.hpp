#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "spo/core/error.hpp"

namespace spo {

enum class OptimizerKind : std::uint8_t { GradientDescent, Adam };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd" || s == "gd") return OptimizerKind::GradientDescent;
  throw InputError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, std::size_t size) : kind_(kind), lr_(lr) {
    if (kind_ == OptimizerKind::Adam) {
      m_.assign(size, 0.0);
      v_.assign(size, 0.0);
    }
  }

  void step(std::span<double> params, std::span<const double> grad) {
    if (kind_ == OptimizerKind::GradientDescent) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grad[i];
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  OptimizerKind kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace spo
