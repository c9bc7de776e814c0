#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "mcbnav/checkpoint.hpp"
#include "mcbnav/mlp.hpp"
#include "mcbnav/sac.hpp"
#include "support.hpp"

using namespace mcbnav;
using namespace mcbnav::sac;
using testing::min_hidden_margin;
using testing::relative_error;

namespace {

constexpr double kH = 1e-5;
constexpr double kKinkMargin = 1e-3;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  }
  return m;
}

// Central differences of f over every flattened parameter of `net`.
template <typename F>
std::vector<double> numeric_gradient(Mlp& net, F f) {
  std::vector<double> p = net.flatten();
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + kH;
    net.unflatten(p);
    const double up = f();
    p[i] = keep - kH;
    net.unflatten(p);
    const double down = f();
    p[i] = keep;
    g[i] = (up - down) / (2.0 * kH);
  }
  net.unflatten(p);
  return g;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i]));
  return worst;
}

// Plain loops over weights, independent of the Eigen forward pass.
std::vector<double> naive_forward(const Mlp& net, std::vector<double> x) {
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& W = net.layers[k].weight;
    const auto& b = net.layers[k].bias;
    std::vector<double> y(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      double acc = b[i];
      for (Eigen::Index j = 0; j < W.cols(); ++j) acc += W(i, j) * x[static_cast<std::size_t>(j)];
      y[static_cast<std::size_t>(i)] = (k + 1 < net.layers.size() && acc < 0.0) ? 0.0 : acc;
    }
    x = std::move(y);
  }
  return x;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

SacConfig small_config() {
  SacConfig cfg;
  cfg.hidden = {16, 16};
  cfg.batch_size = 8;
  return cfg;
}

replay::Transition random_transition(std::mt19937_64& rng, int beams, bool terminal) {
  std::uniform_real_distribution<double> ur(0.3, 6.0), ua(-1.0, 1.0), ud(0.0, 8.0);
  replay::Transition t;
  for (int i = 0; i < beams; ++i) {
    t.state.ranges.push_back(ur(rng));
    t.next_state.ranges.push_back(ur(rng));
  }
  t.state.goal_distance = ud(rng);
  t.state.goal_bearing = 3.0 * ua(rng);
  t.next_state.goal_distance = ud(rng);
  t.next_state.goal_bearing = 3.0 * ua(rng);
  t.action = to_world_action(ua(rng), ua(rng), world::ActionLimits{});
  t.reward = 5.0 * ua(rng);
  t.terminal = terminal;
  return t;
}

Batch random_batch(std::mt19937_64& rng, int beams, int n, double terminal_fraction) {
  std::vector<replay::Transition> items;
  std::bernoulli_distribution term(terminal_fraction);
  for (int i = 0; i < n; ++i) items.push_back(random_transition(rng, beams, term(rng)));
  std::vector<const replay::Transition*> ptrs;
  for (const auto& t : items) ptrs.push_back(&t);
  return make_batch(ptrs, world::ActionLimits{});
}

}  // namespace

TEST_SUITE("sac") {

TEST_CASE("mlp gradients match central differences") {
  std::mt19937_64 rng(100);
  std::uniform_int_distribution<int> dim(1, 5), width(2, 6), depth(1, 3), batch(1, 4);
  int trials = 0;
  double worst = 0.0;
  while (trials < 100) {
    std::vector<int> sizes{dim(rng)};
    const int hidden = depth(rng);
    for (int i = 0; i < hidden; ++i) sizes.push_back(width(rng));
    sizes.push_back(dim(rng));
    Mlp net(sizes, rng);
    const Matrix x = random_matrix(sizes.front(), batch(rng), rng);
    if (min_hidden_margin(net, x) < kKinkMargin) continue;
    const Matrix weights = random_matrix(sizes.back(), x.cols(), rng);

    Mlp::Cache cache;
    net.forward(x, cache);
    Mlp grad = Mlp::zeros_like(net);
    const Matrix dx = net.backward(cache, weights, &grad);
    auto loss = [&]() { return (net.forward(x).array() * weights.array()).sum(); };
    worst = std::max(worst, max_rel(grad.flatten(), numeric_gradient(net, loss)));

    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Matrix xp = x, xm = x;
        xp(i, j) += kH;
        xm(i, j) -= kH;
        const double fd = ((net.forward(xp).array() * weights.array()).sum() -
                           (net.forward(xm).array() * weights.array()).sum()) /
                          (2.0 * kH);
        worst = std::max(worst, relative_error(dx(i, j), fd));
      }
    }
    ++trials;
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("ten-parameter network gradient") {
  std::mt19937_64 rng(10);
  Mlp net({1, 3, 1}, rng);
  REQUIRE(net.parameter_count() == 10);
  Matrix x(1, 3);
  x << 0.7, -0.4, 1.3;
  REQUIRE(min_hidden_margin(net, x) > kKinkMargin);
  Mlp::Cache cache;
  net.forward(x, cache);
  Mlp grad = Mlp::zeros_like(net);
  net.backward(cache, Matrix::Ones(1, 3), &grad);
  const auto fd = numeric_gradient(net, [&]() { return net.forward(x).sum(); });
  CHECK(max_rel(grad.flatten(), fd) < 1e-4);
}

TEST_CASE("critic loss gradient") {
  std::mt19937_64 rng(7);
  int trials = 0;
  double worst = 0.0;
  while (trials < 30) {
    Mlp q({6, 8, 8, 1}, rng);
    const Matrix sa = random_matrix(6, 5, rng);
    if (min_hidden_margin(q, sa) < kKinkMargin) continue;
    const Vector y = random_matrix(5, 1, rng, 3.0);
    Mlp grad = Mlp::zeros_like(q);
    critic_loss(q, sa, y, &grad);
    const auto fd = numeric_gradient(q, [&]() { return critic_loss(q, sa, y, nullptr); });
    worst = std::max(worst, max_rel(grad.flatten(), fd));
    ++trials;
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("actor loss gradients for parameters and the lidar offset") {
  std::mt19937_64 rng(21);
  SacConfig cfg;
  const int beams = 3;
  const int sd = obs::state_dim(beams);
  const double alpha = 0.37;
  int trials = 0;
  double worst_params = 0.0;
  double worst_offset = 0.0;
  std::uniform_real_distribution<double> ur(0.4, 3.0);
  while (trials < 30) {
    Mlp actor({sd, 8, 8, 2 * kActionDim}, rng, 0.5);
    Mlp q1({sd + kActionDim, 8, 8, 1}, rng);
    Mlp q2({sd + kActionDim, 8, 8, 1}, rng);
    const int n = 4;
    Matrix ranges(beams, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < beams; ++i) ranges(i, j) = ur(rng);
    }
    const Matrix extras = random_matrix(4, n, rng);
    const double offset = 0.05;
    const Matrix noise = random_matrix(kActionDim, n, rng);
    Matrix d_off;
    const Matrix states = transform_states(ranges, extras, offset, cfg.transform, &d_off);

    // Reject draws near a ReLU kink, the twin-critic switch, or the log-std clamp.
    const PolicyBatch pol = policy_forward(actor, states, noise, cfg);
    const Matrix x = stack_state_action(states, pol.squashed);
    const Matrix v1 = q1.forward(x), v2 = q2.forward(x);
    if (min_hidden_margin(actor, states) < kKinkMargin || min_hidden_margin(q1, x) < kKinkMargin ||
        min_hidden_margin(q2, x) < kKinkMargin || (v1 - v2).cwiseAbs().minCoeff() < kKinkMargin ||
        pol.log_std_clamped.any()) {
      continue;
    }

    Mlp grad = Mlp::zeros_like(actor);
    const ActorLoss al = actor_loss(actor, q1, q2, states, d_off, noise, alpha, cfg, &grad);
    auto loss = [&]() {
      return actor_loss(actor, q1, q2, states, d_off, noise, alpha, cfg, nullptr).loss;
    };
    worst_params = std::max(worst_params, max_rel(grad.flatten(), numeric_gradient(actor, loss)));

    auto loss_at = [&](double b) {
      Matrix d;
      const Matrix s = transform_states(ranges, extras, b, cfg.transform, &d);
      return actor_loss(actor, q1, q2, s, d, noise, alpha, cfg, nullptr).loss;
    };
    const double fd = (loss_at(offset + kH) - loss_at(offset - kH)) / (2.0 * kH);
    worst_offset = std::max(worst_offset, relative_error(al.d_offset, fd));
    ++trials;
  }
  CHECK(worst_params < 1e-4);
  CHECK(worst_offset < 1e-4);
}

TEST_CASE("squashed log density matches quadrature of the Gaussian") {
  const double mean = 0.3, log_std = std::log(0.5);
  const double half = 0.25, center = 0.25;  // [0, 0.5]
  const double sigma = std::exp(log_std);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const double u = mean + sigma * n(rng);
    const double a = center + half * std::tanh(u);
    const double delta = 1e-6 * half;
    const double ua = std::atanh((a - delta - center) / half);
    const double ub = std::atanh((a + delta - center) / half);
    const double mass = normal_cdf((ub - mean) / sigma) - normal_cdf((ua - mean) / sigma);
    const double density = mass / (2.0 * delta);
    CHECK(std::abs(squashed_log_prob(mean, log_std, u, half) - std::log(density)) < 1e-4);
  }

  // The density integrates to one over the action interval.
  const int m = 200000;
  double total = 0.0;
  for (int i = 1; i < m; ++i) {
    const double a = center - half + 2.0 * half * i / m;
    const double u = std::atanh((a - center) / half);
    total += std::exp(squashed_log_prob(mean, log_std, u, half)) * (2.0 * half / m);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("policy log-prob is the sum of per-dimension densities") {
  std::mt19937_64 rng(3);
  SacConfig cfg;
  Mlp actor({5, 8, 4}, rng, 1.0);
  const Matrix s = random_matrix(5, 6, rng);
  const Matrix noise = random_matrix(2, 6, rng);
  const PolicyBatch p = policy_forward(actor, s, noise, cfg);
  const double hv = 0.5 * (cfg.limits.v_max - cfg.limits.v_min);
  const double hw = 0.5 * (cfg.limits.w_max - cfg.limits.w_min);
  for (Eigen::Index j = 0; j < 6; ++j) {
    const double ref = squashed_log_prob(p.mean(0, j), p.log_std(0, j), p.pre_squash(0, j), hv) +
                       squashed_log_prob(p.mean(1, j), p.log_std(1, j), p.pre_squash(1, j), hw);
    CHECK(p.log_prob[j] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("emitted actions stay inside the box") {
  SacConfig cfg = small_config();
  SacAgent agent(obs::state_dim(4), cfg, 9);
  // Large final-layer weights push the mean into saturation.
  for (auto& l : agent.params().actor.layers) l.weight *= 20.0;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> wide(-50.0, 50.0), range(1e-6, 6.0);
  for (int i = 0; i < 10000; ++i) {
    obs::RawObservation o;
    for (int b = 0; b < 4; ++b) o.ranges.push_back(range(rng));
    o.goal_distance = std::abs(wide(rng));
    o.goal_bearing = wide(rng) / 16.0;
    o.v = wide(rng);
    o.w = wide(rng);
    const world::Action a = agent.act(o, i % 2 == 0);
    CHECK(cfg.limits.contains(a));
  }
}

TEST_CASE("log-std at the floor gives the mapped mean") {
  SacConfig cfg;
  std::mt19937_64 rng(1);
  SacParams p = init_params(obs::state_dim(2), cfg, rng);
  auto& last = p.actor.layers.back();
  last.weight.setZero();
  last.bias << 0.3, -0.2, -50.0, -50.0;
  SacAgent agent(p, cfg, 4);
  obs::RawObservation o;
  o.ranges = {1.0, 2.0};
  const world::Action a = agent.act(o, false);
  const world::Action m = to_world_action(std::tanh(0.3), std::tanh(-0.2), cfg.limits);
  CHECK(a.v == doctest::Approx(m.v).epsilon(1e-7));
  CHECK(a.w == doctest::Approx(m.w).epsilon(1e-7));
  CHECK(mean_action(p, o, cfg) == m);
}

TEST_CASE("action mapping round trip") {
  const world::ActionLimits lim;
  CHECK(to_world_action(-1, -1, lim) == world::Action{0.0, -kPi / 2});
  CHECK(to_world_action(1, 1, lim) == world::Action{0.5, kPi / 2});
  const Eigen::Vector2d s = to_squashed({0.125, 0.3}, lim);
  const world::Action back = to_world_action(s[0], s[1], lim);
  CHECK(back.v == doctest::Approx(0.125));
  CHECK(back.w == doctest::Approx(0.3));
  CHECK(log_action_scale(lim) == doctest::Approx(std::log(0.25) + std::log(kPi / 2)));
}

TEST_CASE("terminal targets equal the reward for any next state") {
  std::mt19937_64 rng(12);
  SacConfig cfg;
  SacParams p = init_params(obs::state_dim(5), cfg, rng);
  Batch b = random_batch(rng, 5, 64, 0.5);
  const Matrix next = transform_states(b.next_ranges, b.next_extras, 0.0, cfg.transform);
  const Matrix noise = random_matrix(kActionDim, 64, rng);
  const Vector y = critic_targets(p, b, next, noise, 0.2, cfg);

  Matrix garbage = random_matrix(next.rows(), next.cols(), rng, 1e6);
  garbage(0, 0) = std::nan("");
  const Vector yg = critic_targets(p, b, garbage, noise, 0.2, cfg);
  int terminals = 0;
  for (Eigen::Index j = 0; j < 64; ++j) {
    if (b.terminals[j] == 1.0) {
      CHECK(y[j] == b.rewards[j]);
      CHECK(yg[j] == b.rewards[j]);
      ++terminals;
    }
  }
  CHECK(terminals > 0);

  Batch single = b;
  single.rewards.setConstant(-10.0);
  single.terminals.setOnes();
  const Vector ys = critic_targets(p, single, garbage, noise, 0.2, cfg);
  for (Eigen::Index j = 0; j < 64; ++j) CHECK(ys[j] == -10.0);
}

TEST_CASE("bootstrapped target arithmetic") {
  std::mt19937_64 rng(13);
  SacConfig cfg;
  SacParams p = init_params(obs::state_dim(2), cfg, rng);
  for (Mlp* q : {&p.q1_target, &p.q2_target}) {
    q->layers.back().weight.setZero();
    q->layers.back().bias.setConstant(1.0);
  }
  Batch b = random_batch(rng, 2, 3, 0.0);
  b.rewards.setZero();
  const Matrix next = transform_states(b.next_ranges, b.next_extras, 0.0, cfg.transform);
  const Vector y = critic_targets(p, b, next, random_matrix(2, 3, rng), 0.0, cfg);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(y[j] == 0.99);
}

TEST_CASE("non-terminal targets match a scalar-loop oracle") {
  std::mt19937_64 rng(14);
  SacConfig cfg;
  const int beams = 4;
  SacParams p = init_params(obs::state_dim(beams), cfg, rng);
  p.actor = Mlp(p.actor.sizes(), rng, 1.0);
  const Batch b = random_batch(rng, beams, 32, 0.3);
  const double offset = 0.07;
  const Matrix next = transform_states(b.next_ranges, b.next_extras, offset, cfg.transform);
  const Matrix noise = random_matrix(kActionDim, 32, rng);
  const double alpha = 0.15;
  const Vector y = critic_targets(p, b, next, noise, alpha, cfg);

  const double half[2] = {0.5 * (cfg.limits.v_max - cfg.limits.v_min),
                          0.5 * (cfg.limits.w_max - cfg.limits.w_min)};
  for (Eigen::Index j = 0; j < 32; ++j) {
    double expected = b.rewards[j];
    if (b.terminals[j] == 0.0) {
      std::vector<double> s;
      for (int i = 0; i < beams; ++i) s.push_back(1.0 / (b.next_ranges(i, j) - offset));
      for (int i = 0; i < 4; ++i) s.push_back(b.next_extras(i, j));
      const std::vector<double> raw = naive_forward(p.actor, s);
      double logp = 0.0;
      std::vector<double> sa = s;
      for (int k = 0; k < 2; ++k) {
        const double ls = std::clamp(raw[2 + k], cfg.log_std_min, cfg.log_std_max);
        const double u = raw[k] + std::exp(ls) * noise(k, j);
        const double a = std::tanh(u);
        logp += -0.5 * noise(k, j) * noise(k, j) - ls - 0.5 * std::log(2.0 * kPi) -
                std::log(1.0 - a * a) - std::log(half[k]);
        sa.push_back(a);
      }
      const double q1 = naive_forward(p.q1_target, sa)[0];
      const double q2 = naive_forward(p.q2_target, sa)[0];
      expected += 0.99 * (std::min(q1, q2) - alpha * logp);
    }
    CHECK(y[j] == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("zero learning rates leave every parameter bit-identical") {
  SacConfig cfg = small_config();
  cfg.actor_lr = cfg.critic_lr = cfg.alpha_lr = cfg.offset_lr = 0.0;
  SacAgent agent(obs::state_dim(3), cfg, 5);
  const SacParams before = agent.params();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5; ++i) agent.update(random_batch(rng, 3, 8, 0.3));
  const SacParams& after = agent.params();
  CHECK(after.actor.flatten() == before.actor.flatten());
  CHECK(after.q1.flatten() == before.q1.flatten());
  CHECK(after.q2.flatten() == before.q2.flatten());
  CHECK(after.q1_target.flatten() == before.q1_target.flatten());
  CHECK(after.q2_target.flatten() == before.q2_target.flatten());
  CHECK(after.offset == before.offset);
  CHECK(after.log_alpha == before.log_alpha);
  CHECK(after.step == 5);
}

TEST_CASE("soft update contracts the target gap by rho") {
  std::mt19937_64 rng(15);
  Mlp q({4, 6, 1}, rng);
  Mlp target({4, 6, 1}, rng);
  const double before = target.max_abs_diff(q);
  target.soft_update_from(q, 0.995);
  CHECK(target.max_abs_diff(q) == doctest::Approx(0.995 * before).epsilon(1e-12));
  Mlp same = q;
  same.soft_update_from(q, 0.995);
  CHECK(same.flatten() == q.flatten());
}

TEST_CASE("critics converge to a repeated terminal reward") {
  SacConfig cfg = small_config();
  cfg.hidden = {32, 32};
  SacAgent agent(obs::state_dim(3), cfg, 2);
  std::mt19937_64 rng(2);
  replay::Transition t = random_transition(rng, 3, true);
  t.reward = -10.0;
  std::vector<const replay::Transition*> ptrs(8, &t);
  const Batch b = make_batch(ptrs, cfg.limits);
  for (int i = 0; i < 4000; ++i) agent.update(b);
  const Matrix s = transform_states(b.ranges, b.extras, agent.params().offset, cfg.transform);
  const Matrix sa = stack_state_action(s, b.actions);
  CHECK(std::abs(agent.params().q1.forward(sa)(0, 0) + 10.0) < 1e-2);
  CHECK(std::abs(agent.params().q2.forward(sa)(0, 0) + 10.0) < 1e-2);
}

TEST_CASE("offset stays clamped below the smallest reading") {
  SacConfig cfg = small_config();
  SacAgent agent(obs::state_dim(3), cfg, 6);
  agent.params().offset = 0.5;
  std::mt19937_64 rng(6);
  agent.update(random_batch(rng, 3, 8, 0.2));
  CHECK(agent.params().offset <= cfg.offset_max);
}

TEST_CASE("non-finite losses raise a diagnostic") {
  SacConfig cfg = small_config();
  SacAgent agent(obs::state_dim(3), cfg, 6);
  std::mt19937_64 rng(6);
  Batch b = random_batch(rng, 3, 8, 0.2);
  b.rewards[0] = std::nan("");
  CHECK_THROWS_AS(agent.update(b), NumericalError);
}

TEST_CASE("adam first step moves by the learning rate") {
  std::mt19937_64 rng(16);
  Mlp p({2, 3, 1}, rng);
  Mlp g = Mlp::zeros_like(p);
  std::vector<double> gv = g.flatten();
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] = (i % 2 == 0 ? 1.0 : -1.0) * (0.1 + i);
  g.unflatten(gv);
  nn::Adam opt(p, {.lr = 0.01});
  const std::vector<double> before = p.flatten();
  opt.step(p, g);
  const std::vector<double> after = p.flatten();
  for (std::size_t i = 0; i < before.size(); ++i) {
    // Bias-corrected m/sqrt(v) is sign(g) on the first step.
    CHECK(after[i] - before[i] == doctest::Approx(-0.01 * (gv[i] > 0 ? 1.0 : -1.0)).epsilon(1e-6));
  }
}

TEST_CASE("checkpoint round trip is bit-identical") {
  testing::TempDir dir("ckpt");
  SacConfig cfg = small_config();
  SacAgent agent(obs::state_dim(3), cfg, 8);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 3; ++i) agent.update(random_batch(rng, 3, 8, 0.3));
  agent.params().offset = 0.0625;
  const std::string path = dir.str("a.ckpt");
  save_checkpoint(agent.params(), path);
  const SacParams back = load_checkpoint(path);
  CHECK(back.step == agent.params().step);
  CHECK(back.offset == agent.params().offset);
  CHECK(back.log_alpha == agent.params().log_alpha);
  CHECK(back.actor.flatten() == agent.params().actor.flatten());
  CHECK(back.q2_target.flatten() == agent.params().q2_target.flatten());
  const Matrix s = random_matrix(obs::state_dim(3), 4, rng);
  CHECK(back.actor.forward(s) == agent.params().actor.forward(s));

  std::vector<char> bytes = serialize_checkpoint(agent.params());
  SUBCASE("truncated") {
    bytes.resize(bytes.size() - 9);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), CheckpointError);
    std::ofstream(dir.str("t.ckpt"), std::ios::binary).write(bytes.data(), 40);
    CHECK_THROWS_AS(load_checkpoint(dir.str("t.ckpt")), CheckpointError);
  }
  SUBCASE("corrupt") {
    bytes[bytes.size() / 2] ^= 0x10;
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), CheckpointError);
  }
  SUBCASE("version") {
    bytes[8] = 7;
    CHECK_THROWS_WITH_AS(deserialize_checkpoint(bytes), doctest::Contains("version"), CheckpointError);
  }
  SUBCASE("magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), CheckpointError);
  }
  SUBCASE("missing") { CHECK_THROWS_AS(load_checkpoint(dir.str("none.ckpt")), CheckpointError); }
}

}
