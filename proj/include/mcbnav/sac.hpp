#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcbnav/mlp.hpp"
#include "mcbnav/observation.hpp"
#include "mcbnav/replay.hpp"
#include "mcbnav/world.hpp"

namespace mcbnav::sac {

using nn::Matrix;
using nn::Mlp;
using nn::RowVector;
using nn::Vector;

inline constexpr int kActionDim = 2;

struct SacConfig {
  std::vector<int> hidden{100, 100, 100};
  double gamma = 0.99;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;
  double offset_lr = 3e-4;
  double rho = 0.995;  // target networks keep this fraction per update
  int batch_size = 128;
  int warmup = 1000;
  bool auto_alpha = true;
  double init_alpha = 0.2;
  double target_entropy = -static_cast<double>(kActionDim);
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  double final_layer_scale = 0.01;
  double offset_init = 0.0;
  /// Upper clamp for the lidar transform offset: the smallest reading the
  /// simulator can produce (robot radius) minus the transform epsilon.
  double offset_max = 0.12;
  obs::TransformConfig transform;
  world::ActionLimits limits;
};

/// Everything a checkpoint restores.
struct SacParams {
  Mlp actor;
  Mlp q1;
  Mlp q2;
  Mlp q1_target;
  Mlp q2_target;
  double offset = 0.0;  // lidar transform offset, trained through the actor loss
  double log_alpha = 0.0;
  std::int64_t step = 0;

  double alpha() const;
  bool all_finite() const;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SacParams init_params(int state_dim, const SacConfig& cfg, std::mt19937_64& rng);

/// Maps a squashed value in [-1, 1] affinely onto [lo, hi].
world::Action to_world_action(double v_squashed, double w_squashed, const world::ActionLimits& lim);
/// Inverse of to_world_action.
Eigen::Vector2d to_squashed(const world::Action& a, const world::ActionLimits& lim);

/// Sum over action dims of log((hi - lo) / 2).
double log_action_scale(const world::ActionLimits& lim);

struct PolicyBatch {
  Matrix mean;       // action_dim x B
  Matrix log_std;    // clamped
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> log_std_clamped;
  Matrix noise;      // standard normal draws
  Matrix pre_squash; // mean + std * noise
  Matrix squashed;   // tanh(pre_squash)
  RowVector log_prob;  // density of the range-mapped action
  Mlp::Cache cache;
};

/// Reparameterized tanh-Gaussian sample for every column of `states`.
PolicyBatch policy_forward(const Mlp& actor, const Matrix& states, const Matrix& noise,
                           const SacConfig& cfg);

/// log density of the range-mapped action whose pre-squash value is `pre_squash`.
double squashed_log_prob(double mean, double log_std, double pre_squash, double half_range);

/// Replay minibatch in raw form; states are rebuilt with the current offset.
struct Batch {
  Matrix ranges;        // m x B
  Matrix extras;        // 4 x B: goal distance, goal bearing, v, w
  Matrix next_ranges;
  Matrix next_extras;
  Matrix actions;       // squashed, action_dim x B
  Vector rewards;
  Vector terminals;     // 0 or 1

  Eigen::Index size() const { return rewards.size(); }
};

Batch make_batch(const std::vector<const replay::Transition*>& transitions,
                 const world::ActionLimits& lim);

/// Builds transformed states; fills d(states)/d(offset) when requested.
Matrix transform_states(const Matrix& ranges, const Matrix& extras, double offset,
                        const obs::TransformConfig& cfg, Matrix* d_offset = nullptr);

/// y = r + gamma * (1 - d) * (min target Q(s', a') - alpha * log pi(a'|s')).
/// Terminal rows return r without touching s'.
Vector critic_targets(const SacParams& p, const Batch& batch, const Matrix& next_states,
                      const Matrix& next_noise, double alpha, const SacConfig& cfg);

/// 0.5 * mean((Q(s, a) - y)^2); accumulates into `grad` when non-null.
double critic_loss(const Mlp& q, const Matrix& state_actions, const Vector& targets, Mlp* grad);

struct ActorLoss {
  double loss = 0.0;
  double mean_log_prob = 0.0;
  double d_offset = 0.0;  // d loss / d offset through both actor and critic inputs
};

/// mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a)) with a reparameterized.
ActorLoss actor_loss(const Mlp& actor, const Mlp& q1, const Mlp& q2, const Matrix& states,
                     const Matrix& d_states_d_offset, const Matrix& noise, double alpha,
                     const SacConfig& cfg, Mlp* actor_grad);

Matrix stack_state_action(const Matrix& states, const Matrix& actions);

struct Losses {
  double critic1 = 0.0;
  double critic2 = 0.0;
  double actor = 0.0;
  double temperature = 0.0;
  double alpha = 0.0;
  double offset = 0.0;
};

/// Soft actor-critic learner. Single owner; not thread-safe.
class SacAgent {
 public:
  SacAgent(int state_dim, SacConfig cfg, std::uint64_t seed);
  SacAgent(SacParams params, SacConfig cfg, std::uint64_t seed);

  /// Samples from the policy, or returns the squashed mean when deterministic.
  world::Action act(const obs::RawObservation& observation, bool deterministic);

  /// One gradient step on every network plus temperature and offset, then a
  /// soft target update. Throws NumericalError on a non-finite loss or parameter.
  Losses update(const Batch& batch);

  const SacParams& params() const { return params_; }
  SacParams& params() { return params_; }
  const SacConfig& config() const { return cfg_; }
  int state_dim() const { return params_.actor.input_dim(); }

 private:
  void init_optimizers();

  SacConfig cfg_;
  SacParams params_;
  nn::Adam actor_opt_;
  nn::Adam q1_opt_;
  nn::Adam q2_opt_;
  nn::ScalarAdam alpha_opt_;
  nn::ScalarAdam offset_opt_;
  std::mt19937_64 act_rng_;
  std::mt19937_64 update_rng_;
};

/// Deterministic action from parameters alone.
world::Action mean_action(const SacParams& p, const obs::RawObservation& observation,
                          const SacConfig& cfg);

}  // namespace mcbnav::sac
