#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidarnav/nn.hpp"
#include "lidarnav/optim.hpp"
#include "lidarnav/vae.hpp"
#include "lidarnav/world.hpp"

namespace lidarnav {

// FNV-1a over the f32 narrowing of every parameter, in order; the frozen-
// encoder guarantee compares this before and after RL training.
std::uint64_t params_fingerprint(const std::vector<Param*>& params);

// ------------------------------------------------------------ state input

// Maps a lidar scan to the agent's state vector. Parameters are frozen:
// nothing in the RL loop may update them.
class StatePipeline {
 public:
  virtual ~StatePipeline() = default;
  virtual int state_dim() const = 0;
  virtual std::vector<double> state_from_scan(const LidarScan& scan) = 0;
  virtual std::uint64_t fingerprint() = 0;
};

class ImageVaePipeline : public StatePipeline {
 public:
  ImageVaePipeline(const ImageVaeConfig& cfg, std::uint64_t seed)
      : vae(cfg, seed) {}
  int state_dim() const override { return vae.config().latent_dim; }
  std::vector<double> state_from_scan(const LidarScan& scan) override;
  std::uint64_t fingerprint() override { return params_fingerprint(vae.params()); }

  ImageVae vae;
};

// Also serves as the no-pretraining baseline when left at random init
// ("untrained preprocessing pipeline").
class RawVaePipeline : public StatePipeline {
 public:
  RawVaePipeline(const RawVaeConfig& cfg, std::uint64_t seed)
      : vae(cfg, seed) {}
  int state_dim() const override { return vae.config().latent_dim; }
  std::vector<double> state_from_scan(const LidarScan& scan) override;
  std::uint64_t fingerprint() override { return params_fingerprint(vae.params()); }

  RawVae vae;
};

// ------------------------------------------------------------- environment

struct NavEnvConfig {
  SimpleRoomConfig room;
  SensorSpec sensor;
  double action_bound = 2.0;    // meters, per axis
  double goal_threshold = 0.1;  // meters from pole center to path
  double robot_radius = 0.15;
  int max_steps = 20;
  double r_goal = 1.0;
  double r_collision = -1.0;
};

class NavEnv {
 public:
  NavEnv(const NavEnvConfig& cfg, StatePipeline& pipeline, Rng rng);

  std::vector<double> reset();

  struct StepResult {
    std::vector<double> state;
    double reward = 0.0;
    bool done = false;
    bool truncated = false;  // max-step cutoff, reward 0
  };
  // action in the robot frame, clamped to ±action_bound per axis
  StepResult step(double dx, double dy);

  bool done() const { return done_; }
  int steps_taken() const { return steps_; }
  const WorldModel& world() const { return world_; }
  const Pose& pose() const { return pose_; }
  // goal pole center in the robot frame (test/oracle hook)
  Vec2 goal_relative_position() const;

 private:
  std::vector<double> observe();

  NavEnvConfig cfg_;
  StatePipeline& pipeline_;
  Rng rng_;
  WorldModel world_;
  Pose pose_;
  int steps_ = 0;
  bool done_ = true;
  std::vector<double> state_;
};

// ---------------------------------------------------------- replay buffer

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;  // true only for terminal goal/collision, not truncation
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void add(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_[i]; }
  // uniform without replacement within the batch
  std::vector<int> sample_indices(int batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

// -------------------------------------------------------------------- TD3

struct Td3Config {
  double gamma = 0.99;
  double tau = 0.005;
  int policy_delay = 2;
  double policy_noise = 0.2;   // target smoothing std
  double noise_clip = 0.5;     // smoothing clip c
  double explore_noise = 0.1;  // exploration std
  double action_bound = 2.0;
  int batch_size = 128;
  double lr = 3e-4;
  int hidden = 128;
};

class Td3Agent {
 public:
  Td3Agent(int state_dim, int action_dim, const Td3Config& cfg,
           std::uint64_t seed);

  std::vector<double> select_action(const std::vector<double>& state,
                                    bool explore, Rng& rng);
  // One TD3 gradient step; no-op (returns false) until the buffer holds a
  // full batch.
  bool update(ReplayBuffer& buffer, Rng& rng);

  // y_i = r_i + γ·(1−done_i)·min(Q′₁, Q′₂)(s′_i, clip(π′(s′_i)+ε̃, bounds))
  Tensor td3_targets(const Tensor& next_states, const std::vector<double>& rewards,
                     const std::vector<std::uint8_t>& dones, Rng& rng);
  void soft_update_targets(double tau);

  std::vector<Param*> params();  // online + target nets, actor first
  std::string graph_spec() const;
  std::int64_t update_count() const { return updates_; }
  const Td3Config& config() const { return cfg_; }

  Stack actor, critic1, critic2;
  Stack target_actor, target_critic1, target_critic2;

 private:
  int state_dim_, action_dim_;
  Td3Config cfg_;
  std::unique_ptr<Adam> opt_actor_, opt_critic1_, opt_critic2_;
  std::int64_t updates_ = 0;
};

// ---------------------------------------------------------------- training

struct RlTrainConfig {
  Td3Config td3;
  int epochs = 100;
  int steps_per_epoch = 500;
  int eval_episodes = 20;
  int warmup_steps = 1000;  // uniform-random actions, no updates
  std::size_t replay_capacity = 1000000;
  std::uint64_t seed = 0;
};

struct EpochEval {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Greedy rollouts; returns per-episode total rewards.
std::vector<double> evaluate_policy(Td3Agent& agent, const NavEnvConfig& env_cfg,
                                    StatePipeline& pipeline, int episodes, Rng rng);

// Epoch loop of environment interaction and TD3 updates with end-of-epoch
// evaluation. The pipeline is frozen throughout. Writes the agent as an
// NNCK checkpoint after the final epoch when checkpoint_path is nonempty.
std::vector<EpochEval> train_agent(
    StatePipeline& pipeline, const NavEnvConfig& env_cfg,
    const RlTrainConfig& cfg, const std::string& checkpoint_path,
    const nlohmann::json& meta,
    const std::function<void(int, const EpochEval&)>& on_epoch = nullptr);

}  // namespace lidarnav
