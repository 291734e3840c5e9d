#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "motiongait/autograd.hpp"

namespace motiongait {

struct GradCheckEntry {
  std::size_t input = 0;
  std::int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  std::int64_t failing_elements = 0;
};

struct GradCheckReport {
  std::string name;
  double tolerance = 0.0;
  std::vector<GradCheckEntry> inputs;

  double worst_rel_error() const;
  bool passed() const { return worst_rel_error() < tolerance; }
};

using GradFn = std::function<Var<double>(const std::vector<Var<double>>&)>;

/// Analytic VJP against central differences for every element of every input.
/// Non-scalar outputs are contracted with fixed pseudo-random weights first.
/// Relative error is |a - n| / max(|a|, |n|, 1e-3).
GradCheckReport grad_check(std::string name, const GradFn& fn,
                           const std::vector<Tensor<double>>& inputs, double tolerance,
                           double step = 1e-5);

/// Every differentiable op on small random inputs.
std::vector<GradCheckReport> run_op_grad_suite(std::uint64_t seed, double tolerance = 1e-5);

/// Joint loss of a micro network (channels 2,2,2, two parts, 8x8 frames,
/// four sequences of two subjects) differentiated with respect to every
/// trainable tensor at once.
GradCheckReport model_grad_check(std::uint64_t seed, double tolerance = 1e-4);

std::string format_report(const GradCheckReport& report);

}  // namespace motiongait
