#include "motiongait/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "motiongait/ops.hpp"

namespace motiongait {

double GradCheckReport::worst_rel_error() const {
  double worst = 0.0;
  for (const auto& e : inputs) worst = std::max(worst, e.rel_error);
  return worst;
}

namespace {

Var<double> contract(const Var<double>& y) {
  if (y.value().numel() == 1) return y;
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor<double> w(y.shape());
  for (double& v : w.data()) v = u(rng);
  return sum(mul(y, Var<double>::leaf(std::move(w))));
}

double evaluate(const GradFn& fn, const std::vector<Tensor<double>>& inputs) {
  NoGradGuard guard;
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(Var<double>::leaf(t));
  return contract(fn(vars)).value()[0];
}

}  // namespace

GradCheckReport grad_check(std::string name, const GradFn& fn,
                           const std::vector<Tensor<double>>& inputs, double tolerance,
                           double step) {
  GradCheckReport report;
  report.name = std::move(name);
  report.tolerance = tolerance;

  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(Var<double>::leaf(t, true));
  backward(contract(fn(vars)));

  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    GradCheckEntry entry;
    entry.input = k;
    const Tensor<double> analytic =
        vars[k].has_grad() ? vars[k].grad() : Tensor<double>(inputs[k].shape());
    for (std::int64_t i = 0; i < inputs[k].numel(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + step;
      const double fp = evaluate(fn, probe);
      probe[k][i] = orig - step;
      const double fm = evaluate(fn, probe);
      probe[k][i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
      if (rel >= tolerance) ++entry.failing_elements;
      if (entry.worst_index < 0 || rel > entry.rel_error) {
        entry.worst_index = i;
        entry.rel_error = rel;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    report.inputs.push_back(entry);
  }
  return report;
}

std::string format_report(const GradCheckReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-28s %s worst_rel=%.3e tol=%.0e", report.name.c_str(),
                report.passed() ? "PASS" : "FAIL", report.worst_rel_error(), report.tolerance);
  std::string out = buf;
  for (const auto& e : report.inputs) {
    std::snprintf(buf, sizeof(buf), "\n    input %zu: worst element %lld analytic=% .6e numeric=% .6e rel=%.3e failing=%lld",
                  e.input, static_cast<long long>(e.worst_index), e.analytic, e.numeric,
                  e.rel_error, static_cast<long long>(e.failing_elements));
    out += buf;
  }
  return out;
}

std::vector<GradCheckReport> run_op_grad_suite(std::uint64_t seed, double tolerance) {
  std::mt19937_64 rng(seed);
  auto random = [&](Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<double> t(std::move(shape));
    for (double& v : t.data()) v = u(rng);
    return t;
  };
  // Values bounded away from zero, for ops with a kink there.
  auto away_from_zero = [&](Shape shape) {
    Tensor<double> t = random(std::move(shape), 0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (double& v : t.data()) v = sign(rng) ? v : -v;
    return t;
  };
  using V = std::vector<Var<double>>;
  std::vector<GradCheckReport> out;
  const Shape s4{2, 3, 4, 3};

  out.push_back(grad_check("add", [](const V& v) { return add(v[0], v[1]); }, {random(s4), random(s4)}, tolerance));
  out.push_back(grad_check("sub", [](const V& v) { return sub(v[0], v[1]); }, {random(s4), random(s4)}, tolerance));
  out.push_back(grad_check("mul", [](const V& v) { return mul(v[0], v[1]); }, {random(s4), random(s4)}, tolerance));
  out.push_back(grad_check("abs", [](const V& v) { return abs(v[0]); }, {away_from_zero(s4)}, tolerance));
  out.push_back(grad_check("sigmoid", [](const V& v) { return sigmoid(v[0]); }, {random(s4, -3, 3)}, tolerance));
  out.push_back(grad_check("add_scalar", [](const V& v) { return add_scalar(v[0], 0.7); }, {random(s4)}, tolerance));
  out.push_back(grad_check("mul_scalar", [](const V& v) { return mul_scalar(v[0], -1.3); }, {random(s4)}, tolerance));
  out.push_back(grad_check("sum", [](const V& v) { return sum(v[0]); }, {random(s4)}, tolerance));
  out.push_back(grad_check("reduce_mean", [](const V& v) { return reduce_mean(v[0], 1); }, {random(s4)}, tolerance));
  out.push_back(grad_check("reduce_max", [](const V& v) { return reduce_max(v[0], 1); }, {random(s4)}, tolerance));
  const Segments seg{{0, 2}, {2, 3}};
  out.push_back(grad_check("segment_mean", [seg](const V& v) { return segment_mean(v[0], 1, seg); }, {random(s4)}, tolerance));
  out.push_back(grad_check("segment_repeat", [seg](const V& v) { return segment_repeat(v[0], 1, seg); }, {random({2, 2, 4, 3})}, tolerance));
  out.push_back(grad_check("split_h+concat_h", [](const V& v) {
    auto parts = split_h(v[0], 2);
    return concat_h(std::vector<Var<double>>{mul_scalar(parts[1], 2.0), parts[0]});
  }, {random(s4)}, tolerance));
  out.push_back(grad_check("conv3d", [](const V& v) { return conv3d(v[0], v[1], v[2]); },
                           {random({2, 3, 4, 4}), random({3, 2, 3, 3, 3}), random({3})}, tolerance));
  out.push_back(grad_check("conv3d_strided", [](const V& v) {
    Conv3dOptions o;
    o.stride = {3, 2, 1};
    o.padding = {0, 1, 0};
    return conv3d(v[0], v[1], v[2], o);
  }, {random({2, 6, 5, 4}), random({2, 2, 3, 3, 2}), random({2})}, tolerance));
  out.push_back(grad_check("max_pool3d", [](const V& v) { return max_pool3d(v[0], {1, 2, 2}); }, {random({2, 2, 4, 4})}, tolerance));
  out.push_back(grad_check("gem_pool", [](const V& v) { return gem_pool(v[0], v[1]); },
                           {random({2, 3, 5}, 0.1, 1.5), Tensor<double>::scalar(3.0)}, tolerance));
  out.push_back(grad_check("reshape+permute", [](const V& v) {
    return permute(reshape(v[0], Shape{6, 4, 3}), {2, 0, 1});
  }, {random(s4)}, tolerance));
  out.push_back(grad_check("stack", [](const V& v) { return stack(V{v[0], v[1]}); }, {random({3, 2}), random({3, 2})}, tolerance));
  out.push_back(grad_check("bmm", [](const V& v) { return bmm(v[0], v[1]); }, {random({2, 3, 4}), random({2, 4, 5})}, tolerance));
  out.push_back(grad_check("matmul", [](const V& v) { return matmul(v[0], v[1]); }, {random({3, 4}), random({4, 2})}, tolerance));
  out.push_back(grad_check("batchnorm_train", [](const V& v) {
    BatchNormState<double> st;
    return batchnorm(v[0], v[1], v[2], st, true);
  }, {random({5, 3}), random({3}), random({3})}, tolerance));
  out.push_back(grad_check("batchnorm_eval", [](const V& v) {
    BatchNormState<double> st;
    st.running_mean = Tensor<double>(Shape{3}, std::vector<double>{0.1, -0.2, 0.3});
    st.running_var = Tensor<double>(Shape{3}, std::vector<double>{0.5, 1.5, 2.0});
    return batchnorm(v[0], v[1], v[2], st, false);
  }, {random({5, 3}), random({3}), random({3})}, tolerance));
  out.push_back(grad_check("softmax_cross_entropy", [](const V& v) {
    return softmax_cross_entropy(v[0], {0, 2, 1, 2});
  }, {random({4, 3}, -2, 2)}, tolerance));
  return out;
}

}  // namespace motiongait
