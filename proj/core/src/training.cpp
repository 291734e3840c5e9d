#include "motiongait/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "motiongait/checkpoint.hpp"
#include "motiongait/error.hpp"
#include "motiongait/parallel.hpp"

namespace fs = std::filesystem;

namespace motiongait {

void TrainConfig::validate() const {
  if (P < 2) throw ConfigError("train.P must be at least 2");
  if (K < 2) throw ConfigError("train.K must be at least 2");
  if (!(margin > 0.0)) throw ConfigError("train.margin must be positive");
  if (!(adam.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("train.eps must be positive");
  if (iterations < 1) throw ConfigError("train.iterations must be positive");
  if (frames_per_sample < 1) throw ConfigError("train.frames must be positive");
  if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be positive");
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::int64_t iteration, std::int64_t slot) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32),
                    static_cast<std::uint32_t>(slot)};
  return std::mt19937_64(seq);
}

namespace {

// Uniform integer in [0, n) from raw generator output; the rejection loop
// keeps it unbiased and independent of the standard library's distributions.
std::int64_t below(std::mt19937_64& rng, std::int64_t n) {
  const auto un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t r;
  do r = rng();
  while (r >= limit);
  return static_cast<std::int64_t>(r % un);
}

}  // namespace

BaSampler::BaSampler(const std::vector<std::int64_t>& labels, std::int64_t P, std::int64_t K, std::uint64_t seed)
    : P_(P), K_(K), seed_(seed) {
  std::map<std::int64_t, std::vector<std::int64_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<std::int64_t>(i));
  for (auto& [cls, members] : groups) {
    class_ids_.push_back(cls);
    by_class_.push_back(std::move(members));
  }
  if (P < 1 || K < 1) throw ConfigError("sampler: P and K must be positive");
  if (num_classes() < P) {
    throw ConfigError("sampler: need at least P=" + std::to_string(P) + " subjects, dataset has " +
                      std::to_string(num_classes()));
  }
}

BaSampler::Batch BaSampler::batch(std::int64_t iteration) const {
  auto rng = stream_rng(seed_, iteration, 0);
  std::vector<std::int64_t> order(by_class_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
  for (std::int64_t i = 0; i < P_; ++i) {
    const auto j = i + below(rng, static_cast<std::int64_t>(order.size()) - i);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  Batch b;
  for (std::int64_t i = 0; i < P_; ++i) {
    const auto c = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
    std::vector<std::int64_t> pool = by_class_[c];
    const auto n = static_cast<std::int64_t>(pool.size());
    for (std::int64_t k = 0; k < K_; ++k) {
      std::int64_t pick;
      if (n >= K_) {
        const auto j = k + below(rng, n - k);
        std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
        pick = pool[static_cast<std::size_t>(k)];
      } else {
        pick = pool[static_cast<std::size_t>(below(rng, n))];
      }
      b.samples.push_back(pick);
      b.labels.push_back(class_ids_[c]);
    }
  }
  return b;
}

std::vector<std::int64_t> sample_window(std::int64_t n, std::int64_t target, std::mt19937_64& rng) {
  if (n < 1) throw ContractError("sample_window: empty sequence");
  std::vector<std::int64_t> idx(static_cast<std::size_t>(target));
  const std::int64_t start = n > target ? below(rng, n - target + 1) : 0;
  for (std::int64_t i = 0; i < target; ++i) idx[static_cast<std::size_t>(i)] = n > target ? start + i : i % n;
  return idx;
}

namespace {

std::vector<std::int64_t> checked_labels(const std::vector<SilhouetteSequence>& seqs, std::vector<std::int64_t> labels,
                                         const NetworkConfig& net) {
  if (labels.size() != seqs.size()) throw ContractError("trainer: one label per sequence required");
  for (const auto l : labels)
    if (l < 0 || l >= net.num_classes) {
      throw ConfigError("trainer: class id " + std::to_string(l) + " outside num_classes " +
                        std::to_string(net.num_classes));
    }
  return labels;
}

std::vector<Var<float>> trainable(const NetworkParams<float>& params) {
  std::vector<Var<float>> out;
  for (const auto& [name, v] : params.named_parameters()) out.push_back(v);
  return out;
}

}  // namespace

Trainer::Trainer(NetworkConfig network, TrainConfig train, std::vector<SilhouetteSequence> sequences,
                 std::vector<std::int64_t> labels, std::string config_echo)
    : network_(std::move(network)),
      train_(std::move(train)),
      sequences_(std::move(sequences)),
      config_echo_(std::move(config_echo)),
      sampler_((network_.validate(), train_.validate(), checked_labels(sequences_, labels, network_)), train_.P,
               train_.K, train_.seed),
      params_(init_params<float>(network_, train_.seed)),
      adam_(trainable(params_), train_.adam) {}

IterationRecord Trainer::step(const std::optional<fs::path>& dump_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t it = iteration_ + 1;
  const auto batch = sampler_.batch(it);
  std::vector<Tensor<float>> clips;
  std::vector<std::vector<std::int64_t>> windows;
  for (std::size_t k = 0; k < batch.samples.size(); ++k) {
    const auto& seq = sequences_[static_cast<std::size_t>(batch.samples[k])];
    auto rng = stream_rng(train_.seed, it, static_cast<std::int64_t>(k) + 1);
    windows.push_back(sample_window(seq.num_frames, train_.frames_per_sample, rng));
    clips.push_back(seq.gather(windows.back()));
  }

  auto out = forward(clips, network_, params_, Mode::Train);
  auto loss = joint_loss(out, batch.labels, static_cast<float>(train_.margin));
  const float joint = loss.total.value()[0];
  if (!std::isfinite(joint)) {
    if (dump_path) {
      std::ofstream dump(*dump_path, std::ios::trunc);
      dump << "iteration " << it << "\ntriplet " << loss.triplet << "\ncross_entropy " << loss.cross_entropy
           << "\njoint " << joint << "\nembeddings_finite " << all_finite(out.embeddings.value())
           << "\nlogits_finite " << all_finite(out.logits.value()) << "\nbatch:\n";
      for (std::size_t k = 0; k < batch.samples.size(); ++k) {
        const auto& key = sequences_[static_cast<std::size_t>(batch.samples[k])].key;
        dump << "  " << key.subject << ' ' << key.condition.str() << ' ' << view_str(key.view) << " label "
             << batch.labels[k] << " frames";
        for (const auto f : windows[k]) dump << ' ' << f;
        dump << '\n';
      }
      dump << "parameters:\n";
      for (const auto& [name, v] : params_.named_parameters())
        dump << "  " << name << " finite " << all_finite(v.value()) << '\n';
    }
    throw NumericError("non-finite joint loss at iteration " + std::to_string(it) +
                       (dump_path ? "; diagnostics in " + dump_path->string() : std::string()));
  }
  adam_.zero_grad();
  backward(loss.total);
  adam_.step();
  iteration_ = it;

  IterationRecord rec;
  rec.iteration = it;
  rec.triplet = loss.triplet;
  rec.cross_entropy = loss.cross_entropy;
  rec.joint = joint;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  history_.push_back(rec);
  return rec;
}

void Trainer::run(const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());
  const fs::path csv_path = out_dir / "loss.csv";
  const bool fresh = iteration_ == 0 || !fs::exists(csv_path);
  std::ofstream csv(csv_path, fresh ? std::ios::trunc : std::ios::app);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  if (fresh) csv << "iteration,triplet,ce,joint,wall_ms\n";
  char line[160];
  while (iteration_ < train_.iterations) {
    const auto rec = step(out_dir / "nan_dump.txt");
    std::snprintf(line, sizeof line, "%lld,%.9g,%.9g,%.9g,%.3f\n", static_cast<long long>(rec.iteration), rec.triplet,
                  rec.cross_entropy, rec.joint, rec.wall_ms);
    csv << line << std::flush;
    if (iteration_ % train_.checkpoint_every == 0) {
      save(out_dir / ("checkpoint_" + std::to_string(iteration_) + ".mgck"));
    }
  }
  save(out_dir / "final.mgck");
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.config_echo = config_echo_;
  store_network(ckpt, params_);
  store_optimizer(ckpt, params_, adam_);
  ckpt.integers["iteration"] = iteration_;
  return ckpt;
}

void Trainer::save(const fs::path& path) const { write_checkpoint(path, checkpoint()); }

void Trainer::resume(const fs::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  restore_network(ckpt, params_);
  restore_optimizer(ckpt, params_, adam_);
  iteration_ = ckpt.integer("iteration");
}

std::vector<std::vector<float>> embed_sequences(const std::vector<SilhouetteSequence>& sequences,
                                                const NetworkConfig& config, NetworkParams<float>& params) {
  std::vector<std::vector<float>> out(sequences.size());
  parallel_for(sequences.size(), [&](std::size_t i) {
    NoGradGuard guard;
    auto fwd = forward<float>({sequences[i].to_tensor()}, config, params, Mode::Eval);
    out[i] = descriptors(fwd.embeddings.value()).front();
  });
  return out;
}

}  // namespace motiongait
