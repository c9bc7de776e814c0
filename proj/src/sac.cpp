#include "mcbnav/sac.hpp"

#include <cmath>
#include <sstream>

namespace mcbnav::sac {
namespace {

constexpr double kLogSqrtTwoPi = 0.91893853320467274178;  // 0.5 * log(2 pi)
constexpr double kLog2 = 0.69314718055994530942;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// log(1 - tanh(u)^2), stable for large |u|.
double log_one_minus_tanh_sq(double u) { return 2.0 * (kLog2 - u - softplus(-2.0 * u)); }

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  }
  return m;
}

Vector half_ranges(const world::ActionLimits& lim) {
  Vector h(kActionDim);
  h << 0.5 * (lim.v_max - lim.v_min), 0.5 * (lim.w_max - lim.w_min);
  return h;
}

std::string describe(const SacParams& p, const Losses& l) {
  std::ostringstream os;
  os << "step=" << p.step << " offset=" << p.offset << " log_alpha=" << p.log_alpha
     << " critic1=" << l.critic1 << " critic2=" << l.critic2 << " actor=" << l.actor
     << " temperature=" << l.temperature << " finite(actor,q1,q2)=" << p.actor.all_finite()
     << p.q1.all_finite() << p.q2.all_finite();
  return os.str();
}

}  // namespace

double SacParams::alpha() const { return std::exp(log_alpha); }

bool SacParams::all_finite() const {
  return actor.all_finite() && q1.all_finite() && q2.all_finite() && q1_target.all_finite() &&
         q2_target.all_finite() && std::isfinite(offset) && std::isfinite(log_alpha);
}

SacParams init_params(int state_dim, const SacConfig& cfg, std::mt19937_64& rng) {
  std::vector<int> actor_sizes{state_dim};
  actor_sizes.insert(actor_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  actor_sizes.push_back(2 * kActionDim);
  std::vector<int> critic_sizes{state_dim + kActionDim};
  critic_sizes.insert(critic_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  critic_sizes.push_back(1);

  SacParams p;
  p.actor = Mlp(actor_sizes, rng, cfg.final_layer_scale);
  p.q1 = Mlp(critic_sizes, rng);
  p.q2 = Mlp(critic_sizes, rng);
  p.q1_target = p.q1;
  p.q2_target = p.q2;
  p.offset = std::min(cfg.offset_init, cfg.offset_max);
  p.log_alpha = std::log(cfg.init_alpha);
  return p;
}

world::Action to_world_action(double v_squashed, double w_squashed, const world::ActionLimits& lim) {
  world::Action a{lim.v_min + 0.5 * (v_squashed + 1.0) * (lim.v_max - lim.v_min),
                  lim.w_min + 0.5 * (w_squashed + 1.0) * (lim.w_max - lim.w_min)};
  // Rounding can leave the box by an ulp.
  return lim.clamp(a);
}

Eigen::Vector2d to_squashed(const world::Action& a, const world::ActionLimits& lim) {
  return {2.0 * (a.v - lim.v_min) / (lim.v_max - lim.v_min) - 1.0,
          2.0 * (a.w - lim.w_min) / (lim.w_max - lim.w_min) - 1.0};
}

double log_action_scale(const world::ActionLimits& lim) {
  return half_ranges(lim).array().log().sum();
}

double squashed_log_prob(double mean, double log_std, double pre_squash, double half_range) {
  const double z = (pre_squash - mean) / std::exp(log_std);
  return -0.5 * z * z - log_std - kLogSqrtTwoPi - log_one_minus_tanh_sq(pre_squash) -
         std::log(half_range);
}

PolicyBatch policy_forward(const Mlp& actor, const Matrix& states, const Matrix& noise,
                           const SacConfig& cfg) {
  PolicyBatch out;
  const Matrix raw = actor.forward(states, out.cache);
  out.mean = raw.topRows(kActionDim);
  const Matrix raw_log_std = raw.bottomRows(kActionDim);
  out.log_std = raw_log_std.cwiseMax(cfg.log_std_min).cwiseMin(cfg.log_std_max);
  out.log_std_clamped =
      (raw_log_std.array() < cfg.log_std_min) || (raw_log_std.array() > cfg.log_std_max);
  out.noise = noise;
  out.pre_squash = out.mean.array() + out.log_std.array().exp() * noise.array();
  out.squashed = out.pre_squash.array().tanh();

  const double log_scale = log_action_scale(cfg.limits);
  out.log_prob.resize(states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    double lp = -log_scale;
    for (Eigen::Index k = 0; k < kActionDim; ++k) {
      const double eps = noise(k, j);
      lp += -0.5 * eps * eps - out.log_std(k, j) - kLogSqrtTwoPi -
            log_one_minus_tanh_sq(out.pre_squash(k, j));
    }
    out.log_prob[j] = lp;
  }
  return out;
}

Batch make_batch(const std::vector<const replay::Transition*>& transitions,
                 const world::ActionLimits& lim) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(transitions.size());
  if (n == 0) return b;
  const auto m = static_cast<Eigen::Index>(transitions.front()->state.ranges.size());
  b.ranges.resize(m, n);
  b.next_ranges.resize(m, n);
  b.extras.resize(4, n);
  b.next_extras.resize(4, n);
  b.actions.resize(kActionDim, n);
  b.rewards.resize(n);
  b.terminals.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const replay::Transition& tr = *transitions[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < m; ++i) {
      b.ranges(i, j) = tr.state.ranges[static_cast<std::size_t>(i)];
      b.next_ranges(i, j) = tr.next_state.ranges[static_cast<std::size_t>(i)];
    }
    b.extras.col(j) << tr.state.goal_distance, tr.state.goal_bearing, tr.state.v, tr.state.w;
    b.next_extras.col(j) << tr.next_state.goal_distance, tr.next_state.goal_bearing,
        tr.next_state.v, tr.next_state.w;
    b.actions.col(j) = to_squashed(tr.action, lim);
    b.rewards[j] = tr.reward;
    b.terminals[j] = tr.terminal ? 1.0 : 0.0;
  }
  return b;
}

Matrix transform_states(const Matrix& ranges, const Matrix& extras, double offset,
                        const obs::TransformConfig& cfg, Matrix* d_offset) {
  const Eigen::Index m = ranges.rows();
  Matrix s(m + extras.rows(), ranges.cols());
  if (d_offset != nullptr) d_offset->setZero(s.rows(), s.cols());
  for (Eigen::Index j = 0; j < ranges.cols(); ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const obs::TransformResult t = obs::reciprocal_transform(ranges(i, j), offset, cfg);
      s(i, j) = t.value;
      // d/d offset of 1 / (l - offset) is its square; constant once clamped.
      if (d_offset != nullptr && !t.clamped) (*d_offset)(i, j) = t.value * t.value;
    }
  }
  s.bottomRows(extras.rows()) = extras;
  return s;
}

Matrix stack_state_action(const Matrix& states, const Matrix& actions) {
  Matrix x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

Vector critic_targets(const SacParams& p, const Batch& batch, const Matrix& next_states,
                      const Matrix& next_noise, double alpha, const SacConfig& cfg) {
  const PolicyBatch next = policy_forward(p.actor, next_states, next_noise, cfg);
  const Matrix x = stack_state_action(next_states, next.squashed);
  const Matrix q1 = p.q1_target.forward(x);
  const Matrix q2 = p.q2_target.forward(x);
  Vector y(batch.size());
  for (Eigen::Index j = 0; j < batch.size(); ++j) {
    if (batch.terminals[j] != 0.0) {
      y[j] = batch.rewards[j];
    } else {
      const double soft_value = std::min(q1(0, j), q2(0, j)) - alpha * next.log_prob[j];
      y[j] = batch.rewards[j] + cfg.gamma * soft_value;
    }
  }
  return y;
}

double critic_loss(const Mlp& q, const Matrix& state_actions, const Vector& targets, Mlp* grad) {
  Mlp::Cache cache;
  const Matrix out = q.forward(state_actions, cache);
  const double n = static_cast<double>(targets.size());
  const RowVector err = out.row(0) - targets.transpose();
  const double loss = 0.5 * err.squaredNorm() / n;
  if (grad != nullptr) q.backward(cache, err / n, grad);
  return loss;
}

ActorLoss actor_loss(const Mlp& actor, const Mlp& q1, const Mlp& q2, const Matrix& states,
                     const Matrix& d_states_d_offset, const Matrix& noise, double alpha,
                     const SacConfig& cfg, Mlp* actor_grad) {
  const Eigen::Index n = states.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const PolicyBatch pol = policy_forward(actor, states, noise, cfg);
  const Matrix x = stack_state_action(states, pol.squashed);
  Mlp::Cache c1;
  Mlp::Cache c2;
  const Matrix v1 = q1.forward(x, c1);
  const Matrix v2 = q2.forward(x, c2);

  ActorLoss out;
  Matrix g1 = Matrix::Zero(1, n);
  Matrix g2 = Matrix::Zero(1, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool first = v1(0, j) <= v2(0, j);
    const double q_min = first ? v1(0, j) : v2(0, j);
    (first ? g1 : g2)(0, j) = -inv_n;
    out.loss += (alpha * pol.log_prob[j] - q_min) * inv_n;
    out.mean_log_prob += pol.log_prob[j] * inv_n;
  }
  const Matrix dx = q1.backward(c1, g1, nullptr) + q2.backward(c2, g2, nullptr);
  const Eigen::Index sd = states.rows();
  const Matrix d_action = dx.bottomRows(kActionDim);

  const Eigen::ArrayXXd tanh_u = pol.squashed.array();
  const Eigen::ArrayXXd d_pre = 2.0 * alpha * inv_n * tanh_u +
                                d_action.array() * (1.0 - tanh_u.square());
  Eigen::ArrayXXd d_log_std =
      -alpha * inv_n + d_pre * pol.log_std.array().exp() * pol.noise.array();
  d_log_std = pol.log_std_clamped.select(0.0, d_log_std);

  Matrix d_raw(2 * kActionDim, n);
  d_raw.topRows(kActionDim) = d_pre.matrix();
  d_raw.bottomRows(kActionDim) = d_log_std.matrix();
  Mlp scratch;
  Mlp* grad = actor_grad;
  if (grad == nullptr) {
    scratch = Mlp::zeros_like(actor);
    grad = &scratch;
  }
  const Matrix d_states = actor.backward(pol.cache, d_raw, grad) + dx.topRows(sd);
  out.d_offset = (d_states.array() * d_states_d_offset.array()).sum();
  return out;
}

SacAgent::SacAgent(int state_dim, SacConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), act_rng_(seed ^ 0x5ac0a11ce5eedULL), update_rng_(seed ^ 0x0b5e55edULL) {
  std::mt19937_64 init_rng(seed);
  params_ = init_params(state_dim, cfg_, init_rng);
  init_optimizers();
}

SacAgent::SacAgent(SacParams params, SacConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      params_(std::move(params)),
      act_rng_(seed ^ 0x5ac0a11ce5eedULL),
      update_rng_(seed ^ 0x0b5e55edULL) {
  init_optimizers();
}

void SacAgent::init_optimizers() {
  actor_opt_ = nn::Adam(params_.actor, {.lr = cfg_.actor_lr});
  q1_opt_ = nn::Adam(params_.q1, {.lr = cfg_.critic_lr});
  q2_opt_ = nn::Adam(params_.q2, {.lr = cfg_.critic_lr});
  alpha_opt_ = nn::ScalarAdam({.lr = cfg_.alpha_lr});
  offset_opt_ = nn::ScalarAdam({.lr = cfg_.offset_lr});
}

world::Action SacAgent::act(const obs::RawObservation& observation, bool deterministic) {
  if (deterministic) return mean_action(params_, observation, cfg_);
  const Matrix s = obs::to_state_vector(observation, params_.offset, cfg_.transform);
  const Matrix noise = standard_normal(kActionDim, 1, act_rng_);
  const PolicyBatch pol = policy_forward(params_.actor, s, noise, cfg_);
  return to_world_action(pol.squashed(0, 0), pol.squashed(1, 0), cfg_.limits);
}

world::Action mean_action(const SacParams& p, const obs::RawObservation& observation,
                          const SacConfig& cfg) {
  const Matrix s = obs::to_state_vector(observation, p.offset, cfg.transform);
  const Matrix raw = p.actor.forward(s);
  return to_world_action(std::tanh(raw(0, 0)), std::tanh(raw(1, 0)), cfg.limits);
}

Losses SacAgent::update(const Batch& batch) {
  const Eigen::Index n = batch.size();
  Losses losses;
  const double alpha = params_.alpha();

  Matrix d_offset;
  const Matrix states =
      transform_states(batch.ranges, batch.extras, params_.offset, cfg_.transform, &d_offset);
  const Matrix next_states =
      transform_states(batch.next_ranges, batch.next_extras, params_.offset, cfg_.transform);

  const Matrix next_noise = standard_normal(kActionDim, n, update_rng_);
  const Vector y = critic_targets(params_, batch, next_states, next_noise, alpha, cfg_);
  const Matrix sa = stack_state_action(states, batch.actions);
  Mlp g1 = Mlp::zeros_like(params_.q1);
  Mlp g2 = Mlp::zeros_like(params_.q2);
  losses.critic1 = critic_loss(params_.q1, sa, y, &g1);
  losses.critic2 = critic_loss(params_.q2, sa, y, &g2);
  q1_opt_.step(params_.q1, g1);
  q2_opt_.step(params_.q2, g2);

  const Matrix noise = standard_normal(kActionDim, n, update_rng_);
  Mlp ga = Mlp::zeros_like(params_.actor);
  const ActorLoss al = actor_loss(params_.actor, params_.q1, params_.q2, states, d_offset, noise,
                                  alpha, cfg_, &ga);
  losses.actor = al.loss;
  actor_opt_.step(params_.actor, ga);
  offset_opt_.step(params_.offset, al.d_offset);
  params_.offset = std::min(params_.offset, cfg_.offset_max);

  losses.temperature = -params_.log_alpha * (al.mean_log_prob + cfg_.target_entropy);
  if (cfg_.auto_alpha) {
    alpha_opt_.step(params_.log_alpha, -(al.mean_log_prob + cfg_.target_entropy));
  }

  params_.q1_target.soft_update_from(params_.q1, cfg_.rho);
  params_.q2_target.soft_update_from(params_.q2, cfg_.rho);
  ++params_.step;

  losses.alpha = params_.alpha();
  losses.offset = params_.offset;
  const bool finite_losses = std::isfinite(losses.critic1) && std::isfinite(losses.critic2) &&
                             std::isfinite(losses.actor) && std::isfinite(losses.temperature);
  if (!finite_losses || !params_.all_finite()) {
    throw NumericalError("non-finite value during SAC update: " + describe(params_, losses));
  }
  return losses;
}

}  // namespace mcbnav::sac
