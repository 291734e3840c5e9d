#include <random>

#include "motiongait/gradcheck.hpp"
#include "motiongait/loss.hpp"
#include "motiongait/network.hpp"

namespace motiongait {

namespace {

NetworkConfig micro_config() {
  NetworkConfig c;
  c.stage_channels = {2, 2, 2};
  c.num_mge_blocks = 2;
  c.num_parts = 2;
  c.embed_dim = 3;
  c.num_classes = 3;
  c.input_height = 8;
  c.input_width = 8;
  return c;
}

// Assigns tensors in named_parameters() order.
void bind(NetworkParams<double>& p, const std::vector<Var<double>>& v) {
  std::size_t i = 0;
  p.stem_weight = v[i++];
  p.stem_bias = v[i++];
  p.lta_weight = v[i++];
  p.lta_bias = v[i++];
  for (auto& block : p.blocks) {
    block.global_kernel = v[i++];
    block.global_bias = v[i++];
    for (std::size_t k = 0; k < block.part_kernels.size(); ++k) {
      block.part_kernels[k] = v[i++];
      block.part_biases[k] = v[i++];
    }
  }
  p.gem_p = v[i++];
  p.fc_weight = v[i++];
  p.bn_gamma = v[i++];
  p.bn_beta = v[i++];
  p.classifier = v[i++];
}

}  // namespace

GradCheckReport model_grad_check(std::uint64_t seed, double tolerance) {
  const NetworkConfig config = micro_config();
  const NetworkParams<double> base = init_params<double>(config, seed);
  std::vector<Tensor<double>> inputs;
  for (const auto& [name, v] : base.named_parameters()) inputs.push_back(v.value());

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Tensor<double>> batch;
  for (int n = 0; n < 4; ++n) {
    Tensor<double> t(Shape{1, 6, config.input_height, config.input_width});
    for (double& x : t.data()) x = u(rng);
    batch.push_back(std::move(t));
  }
  const std::vector<std::int64_t> labels{0, 0, 1, 1};

  auto fn = [&](const std::vector<Var<double>>& vars) {
    NetworkParams<double> p = base;
    p.bn_state = base.bn_state;
    bind(p, vars);
    const auto out = forward(batch, config, p, Mode::Train);
    return joint_loss(out, labels, 0.2).total;
  };
  return grad_check("micro_model.joint_loss", fn, inputs, tolerance);
}

}  // namespace motiongait
