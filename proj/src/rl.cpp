#include "lidarnav/rl.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "lidarnav/checkpoint.hpp"
#include "lidarnav/errors.hpp"
#include "lidarnav/preprocess.hpp"

namespace lidarnav {

std::uint64_t params_fingerprint(const std::vector<Param*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const Param* p : params) {
    mix(p->name.data(), p->name.size());
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      const float f = static_cast<float>(p->value[i]);
      mix(&f, sizeof(f));
    }
  }
  return h;
}

// ------------------------------------------------------------ state input

std::vector<double> ImageVaePipeline::state_from_scan(const LidarScan& scan) {
  NormalizedScan ns = normalize_ranges(scan, scan.sensor.max_range);
  LocalOccupancyImage img =
      scan_to_local_image(ns, vae.config().resolution,
                          2.0 * scan.sensor.max_range, scan.sensor.max_range);
  const int res = vae.config().resolution;
  Tensor x({1, 1, res, res});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) x[static_cast<std::int64_t>(i)] = img.pixels[i];
  Tensor mean = vae.encode_mean(x);
  return std::vector<double>(mean.data(), mean.data() + mean.size());
}

std::vector<double> RawVaePipeline::state_from_scan(const LidarScan& scan) {
  if (scan.beam_count() != vae.config().beam_count)
    throw DataError("raw pipeline: scan beam count does not match encoder");
  LidarScan repaired = replace_invalid_with_neighbor_average(scan);
  NormalizedScan ns = normalize_ranges(repaired, scan.sensor.max_range);
  Tensor x({1, 1, vae.config().beam_count});
  for (std::size_t i = 0; i < ns.values.size(); ++i) x[static_cast<std::int64_t>(i)] = ns.values[i];
  Tensor mean = vae.encode_mean(x);
  return std::vector<double>(mean.data(), mean.data() + mean.size());
}

// ------------------------------------------------------------- environment

NavEnv::NavEnv(const NavEnvConfig& cfg, StatePipeline& pipeline, Rng rng)
    : cfg_(cfg), pipeline_(pipeline), rng_(rng) {}

std::vector<double> NavEnv::observe() {
  LidarScan scan = cast_scan(world_, pose_, cfg_.sensor, rng_);
  return pipeline_.state_from_scan(scan);
}

std::vector<double> NavEnv::reset() {
  world_ = generate_simple_room(rng_, cfg_.room);
  pose_ = sample_spawn_pose(world_, rng_, cfg_.robot_radius);
  steps_ = 0;
  done_ = false;
  state_ = observe();
  return state_;
}

namespace {

// earliest parameter s in [0,1] along a→b with |a + s(b−a) − c| <= thr;
// +inf when the path never comes that close
double earliest_contact(Vec2 a, Vec2 b, Vec2 c, double thr) {
  const Vec2 d = b - a, f = a - c;
  const double qa = d.dot(d);
  const double qc = f.dot(f) - thr * thr;
  if (qa < 1e-18) return qc <= 0.0 ? 0.0 : kInf;
  const double qb = 2.0 * d.dot(f);
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return kInf;
  const double s1 = (-qb - std::sqrt(disc)) / (2.0 * qa);
  if (s1 >= 0.0 && s1 <= 1.0) return s1;
  if (qc <= 0.0) return 0.0;  // already inside the threshold
  return kInf;
}

}  // namespace

NavEnv::StepResult NavEnv::step(double dx, double dy) {
  if (done_) throw DataError("nav env: step called after episode end");
  dx = std::clamp(dx, -cfg_.action_bound, cfg_.action_bound);
  dy = std::clamp(dy, -cfg_.action_bound, cfg_.action_bound);
  const Vec2 delta = rotate({dx, dy}, pose_.heading);
  const Vec2 a = pose_.position();
  const Vec2 b = a + delta;
  ++steps_;

  StepResult res;
  const Pole& goal = world_.poles[*world_.goal_pole_index];
  const double s_goal = earliest_contact(a, b, goal.center, cfg_.goal_threshold);
  if (s_goal <= 1.0) {
    // the goal pole is reached unless a wall blocks the path to the
    // earliest contact point
    const Vec2 g{a.x + (b.x - a.x) * s_goal, a.y + (b.y - a.y) * s_goal};
    const bool blocked = check_path_collision(world_, pose_, g, cfg_.robot_radius);
    res.reward = blocked ? cfg_.r_collision : cfg_.r_goal;
    res.done = true;
    done_ = true;
    res.state = state_;
    return res;
  }
  if (check_path_collision(world_, pose_, b, cfg_.robot_radius)) {
    res.reward = cfg_.r_collision;
    res.done = true;
    done_ = true;
    res.state = state_;
    return res;
  }

  if (delta.norm() > 1e-12)
    pose_ = Pose{b.x, b.y, normalize_angle(std::atan2(delta.y, delta.x))};
  if (steps_ >= cfg_.max_steps) {
    done_ = true;
    res.truncated = true;
  }
  res.done = done_;
  state_ = observe();
  res.state = state_;
  return res;
}

Vec2 NavEnv::goal_relative_position() const {
  const Pole& goal = world_.poles[*world_.goal_pole_index];
  return rotate(goal.center - pose_.position(), -pose_.heading);
}

// ---------------------------------------------------------- replay buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("replay buffer: capacity must be >= 1");
}

void ReplayBuffer::add(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[head_] = std::move(t);
  }
  head_ = (head_ + 1) % capacity_;
}

std::vector<int> ReplayBuffer::sample_indices(int batch, Rng& rng) const {
  const int n = static_cast<int>(data_.size());
  if (batch > n) throw DataError("replay buffer: batch larger than buffer");
  // Floyd's without-replacement sampler
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(batch));
  std::unordered_set<int> seen;
  for (int j = n - batch; j < n; ++j) {
    const int t = static_cast<int>(rng.uniform_int(0, j));
    if (seen.insert(t).second) {
      out.push_back(t);
    } else {
      seen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

// -------------------------------------------------------------------- TD3

namespace {

void build_mlp(Stack& net, const std::string& prefix, int in, int hidden,
               int out, Rng& rng, double tanh_scale) {
  net.add<Dense>(prefix + ".l1", in, hidden, rng);
  net.add<Relu>(prefix + ".relu1");
  net.add<Dense>(prefix + ".l2", hidden, hidden, rng);
  net.add<Relu>(prefix + ".relu2");
  net.add<Dense>(prefix + ".head", hidden, out, rng, Init::kSmallUniform);
  if (tanh_scale > 0.0) net.add<ScaledTanh>(prefix + ".tanh", tanh_scale);
}

void copy_params(Stack& dst, Stack& src) {
  auto d = dst.params(), s = src.params();
  for (std::size_t i = 0; i < d.size(); ++i) d[i]->value = s[i]->value;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor out({n, ca + cb});
  for (int i = 0; i < n; ++i) {
    std::copy(a.data() + static_cast<std::size_t>(i) * ca,
              a.data() + static_cast<std::size_t>(i + 1) * ca,
              out.data() + static_cast<std::size_t>(i) * (ca + cb));
    std::copy(b.data() + static_cast<std::size_t>(i) * cb,
              b.data() + static_cast<std::size_t>(i + 1) * cb,
              out.data() + static_cast<std::size_t>(i) * (ca + cb) + ca);
  }
  return out;
}

}  // namespace

Td3Agent::Td3Agent(int state_dim, int action_dim, const Td3Config& cfg,
                   std::uint64_t seed)
    : state_dim_(state_dim), action_dim_(action_dim), cfg_(cfg) {
  if (cfg.gamma <= 0.0 || cfg.gamma >= 1.0)
    throw ConfigError("td3: gamma must lie in (0, 1)");
  if (cfg.policy_delay < 1) throw ConfigError("td3: policy_delay must be >= 1");
  if (cfg.tau <= 0.0 || cfg.tau > 1.0)
    throw ConfigError("td3: tau must lie in (0, 1]");
  Rng rng = Rng(seed).split(0x7d3);
  build_mlp(actor, "actor", state_dim, cfg.hidden, action_dim, rng,
            cfg.action_bound);
  build_mlp(critic1, "critic1", state_dim + action_dim, cfg.hidden, 1, rng, 0.0);
  build_mlp(critic2, "critic2", state_dim + action_dim, cfg.hidden, 1, rng, 0.0);
  build_mlp(target_actor, "tactor", state_dim, cfg.hidden, action_dim, rng,
            cfg.action_bound);
  build_mlp(target_critic1, "tcritic1", state_dim + action_dim, cfg.hidden, 1,
            rng, 0.0);
  build_mlp(target_critic2, "tcritic2", state_dim + action_dim, cfg.hidden, 1,
            rng, 0.0);
  copy_params(target_actor, actor);
  copy_params(target_critic1, critic1);
  copy_params(target_critic2, critic2);

  AdamConfig ac;
  ac.lr = cfg.lr;
  opt_actor_ = std::make_unique<Adam>(actor.params(), ac);
  opt_critic1_ = std::make_unique<Adam>(critic1.params(), ac);
  opt_critic2_ = std::make_unique<Adam>(critic2.params(), ac);
}

std::vector<double> Td3Agent::select_action(const std::vector<double>& state,
                                            bool explore, Rng& rng) {
  if (static_cast<int>(state.size()) != state_dim_)
    throw DataError("td3: state length does not match actor input");
  Tensor s({1, state_dim_});
  std::copy(state.begin(), state.end(), s.data());
  Tensor a = actor.forward(s, false);
  std::vector<double> out(static_cast<std::size_t>(action_dim_));
  for (int i = 0; i < action_dim_; ++i) {
    double v = a[i];
    if (explore) v += rng.normal() * cfg_.explore_noise;
    out[static_cast<std::size_t>(i)] =
        std::clamp(v, -cfg_.action_bound, cfg_.action_bound);
  }
  return out;
}

Tensor Td3Agent::td3_targets(const Tensor& next_states,
                             const std::vector<double>& rewards,
                             const std::vector<std::uint8_t>& dones, Rng& rng) {
  const int b = next_states.dim(0);
  Tensor a2 = target_actor.forward(next_states, false);
  for (std::int64_t i = 0; i < a2.size(); ++i) {
    const double noise = std::clamp(rng.normal() * cfg_.policy_noise,
                                    -cfg_.noise_clip, cfg_.noise_clip);
    a2[i] = std::clamp(a2[i] + noise, -cfg_.action_bound, cfg_.action_bound);
  }
  Tensor sa = concat_cols(next_states, a2);
  Tensor q1 = target_critic1.forward(sa, false);
  Tensor q2 = target_critic2.forward(sa, false);
  Tensor y({b, 1});
  for (int i = 0; i < b; ++i)
    y[i] = rewards[static_cast<std::size_t>(i)] +
           cfg_.gamma * (dones[static_cast<std::size_t>(i)] ? 0.0 : 1.0) *
               std::min(q1[i], q2[i]);
  return y;
}

void Td3Agent::soft_update_targets(double tau) {
  auto blend = [tau](Stack& target, Stack& online) {
    auto t = target.params(), o = online.params();
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::int64_t j = 0; j < t[i]->value.size(); ++j)
        t[i]->value[j] = tau * o[i]->value[j] + (1.0 - tau) * t[i]->value[j];
  };
  blend(target_actor, actor);
  blend(target_critic1, critic1);
  blend(target_critic2, critic2);
}

bool Td3Agent::update(ReplayBuffer& buffer, Rng& rng) {
  const int b = cfg_.batch_size;
  if (static_cast<int>(buffer.size()) < b) return false;
  const std::vector<int> idx = buffer.sample_indices(b, rng);

  Tensor s({b, state_dim_}), a({b, action_dim_}), s2({b, state_dim_});
  std::vector<double> r(static_cast<std::size_t>(b));
  std::vector<std::uint8_t> d(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    const Transition& t = buffer.at(static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]));
    std::copy(t.state.begin(), t.state.end(), s.data() + static_cast<std::size_t>(i) * state_dim_);
    std::copy(t.action.begin(), t.action.end(), a.data() + static_cast<std::size_t>(i) * action_dim_);
    std::copy(t.next_state.begin(), t.next_state.end(), s2.data() + static_cast<std::size_t>(i) * state_dim_);
    r[static_cast<std::size_t>(i)] = t.reward;
    d[static_cast<std::size_t>(i)] = t.done;
  }

  const Tensor y = td3_targets(s2, r, d, rng);
  const Tensor sa = concat_cols(s, a);
  for (Stack* critic : {&critic1, &critic2}) {
    Tensor q = critic->forward(sa, true);
    Tensor dq({b, 1});
    for (int i = 0; i < b; ++i) dq[i] = 2.0 * (q[i] - y[i]) / b;
    critic->backward(dq);
  }
  opt_critic1_->step();
  opt_critic2_->step();
  ++updates_;

  if (updates_ % cfg_.policy_delay == 0) {
    Tensor a_pi = actor.forward(s, true);
    Tensor q = critic1.forward(concat_cols(s, a_pi), true);
    Tensor dq({b, 1});
    dq.fill(-1.0 / b);
    Tensor dsa = critic1.backward(dq);
    Tensor da({b, action_dim_});
    for (int i = 0; i < b; ++i)
      std::copy(dsa.data() + static_cast<std::size_t>(i) * (state_dim_ + action_dim_) + state_dim_,
                dsa.data() + static_cast<std::size_t>(i + 1) * (state_dim_ + action_dim_),
                da.data() + static_cast<std::size_t>(i) * action_dim_);
    actor.backward(da);
    opt_actor_->step();
    critic1.zero_grad();  // grads from the actor pass, not a critic update
    soft_update_targets(cfg_.tau);
  }
  return true;
}

std::vector<Param*> Td3Agent::params() {
  std::vector<Param*> out;
  for (Stack* net : {&actor, &critic1, &critic2, &target_actor,
                     &target_critic1, &target_critic2})
    for (Param* p : net->params()) out.push_back(p);
  return out;
}

std::string Td3Agent::graph_spec() const {
  return "actor:" + actor.spec() + "|critic1:" + critic1.spec() +
         "|critic2:" + critic2.spec() + "|tactor:" + target_actor.spec() +
         "|tcritic1:" + target_critic1.spec() +
         "|tcritic2:" + target_critic2.spec();
}

// ---------------------------------------------------------------- training

std::vector<double> evaluate_policy(Td3Agent& agent, const NavEnvConfig& env_cfg,
                                    StatePipeline& pipeline, int episodes,
                                    Rng rng) {
  if (episodes < 1) throw ConfigError("evaluate_policy: episodes must be >= 1");
  NavEnv env(env_cfg, pipeline, rng.split(0));
  Rng action_rng = rng.split(1);
  std::vector<double> rewards;
  rewards.reserve(static_cast<std::size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<double> s = env.reset();
    double total = 0.0;
    while (true) {
      const std::vector<double> a = agent.select_action(s, false, action_rng);
      NavEnv::StepResult res = env.step(a[0], a[1]);
      total += res.reward;
      s = res.state;
      if (res.done) break;
    }
    rewards.push_back(total);
  }
  return rewards;
}

std::vector<EpochEval> train_agent(
    StatePipeline& pipeline, const NavEnvConfig& env_cfg,
    const RlTrainConfig& cfg, const std::string& checkpoint_path,
    const nlohmann::json& meta,
    const std::function<void(int, const EpochEval&)>& on_epoch) {
  Rng root(cfg.seed);
  NavEnv env(env_cfg, pipeline, root.split(1));
  Rng action_rng = root.split(2);
  Rng update_rng = root.split(3);
  Td3Agent agent(pipeline.state_dim(), 2, cfg.td3, root.split(4).seed());
  ReplayBuffer buffer(cfg.replay_capacity);

  const std::uint64_t frozen_before = pipeline.fingerprint();
  std::vector<EpochEval> evals;
  std::int64_t total_steps = 0;
  std::vector<double> s = env.reset();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      std::vector<double> a;
      if (total_steps < cfg.warmup_steps) {
        a = {action_rng.uniform(-cfg.td3.action_bound, cfg.td3.action_bound),
             action_rng.uniform(-cfg.td3.action_bound, cfg.td3.action_bound)};
      } else {
        a = agent.select_action(s, true, action_rng);
      }
      NavEnv::StepResult res = env.step(a[0], a[1]);
      buffer.add({s, a, res.reward, res.state, res.done && !res.truncated});
      s = res.done ? env.reset() : res.state;
      ++total_steps;
      if (total_steps >= cfg.warmup_steps) agent.update(buffer, update_rng);
    }
    const std::vector<double> rewards = evaluate_policy(
        agent, env_cfg, pipeline, cfg.eval_episodes, root.split(1000 + epoch));
    EpochEval ev;
    ev.mean = 0.0;
    ev.min = rewards[0];
    ev.max = rewards[0];
    for (double v : rewards) {
      ev.mean += v;
      ev.min = std::min(ev.min, v);
      ev.max = std::max(ev.max, v);
    }
    ev.mean /= static_cast<double>(rewards.size());
    evals.push_back(ev);
    if (on_epoch) on_epoch(epoch, ev);
  }

  if (pipeline.fingerprint() != frozen_before)
    throw DataError("rl training: frozen state pipeline changed");
  if (!checkpoint_path.empty()) {
    nlohmann::json m = meta;
    m["updates"] = agent.update_count();
    save_checkpoint(checkpoint_path, agent.graph_spec(), agent.params(), m);
  }
  return evals;
}

}  // namespace lidarnav
