#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <span>
#include <vector>

#include "alrl/nn/network.hpp"

namespace alrl::agent {

using nn::Rng;

struct Transition {
    std::vector<double> state;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;

    bool operator==(const Transition&) const = default;
};

/// Fixed-capacity FIFO of transitions, sampled uniformly.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 1000);

    void remember(Transition t);
    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    bool empty() const noexcept { return items_.empty(); }
    /// 0 is the oldest stored transition.
    const Transition& operator[](std::size_t i) const { return items_[i]; }
    void clear() { items_.clear(); }

    /// n distinct indices drawn uniformly without replacement; n <= size().
    std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

private:
    std::size_t capacity_;
    std::deque<Transition> items_;
};

/// JSON file: {"capacity": n, "transitions": [{"s", "a", "r", "s2", "done"}, ...]}, oldest first.
void save_buffer(const std::filesystem::path& path, const ReplayBuffer& buffer);
ReplayBuffer load_buffer(const std::filesystem::path& path);

/// Softmax temperature: tau_start while t < exploration, then linear down to
/// tau_end over `conversion` steps, tau_end afterwards.
struct GreedSchedule {
    double tau_start = 1.0;
    double tau_end = 0.2;
    long exploration = 4000;
    long conversion = 4000;

    double operator()(long t) const;
};

/// Linear from `start` at t = 0 to `end` at t = total - 1, clamped outside.
struct LearningRateSchedule {
    double start = 1e-3;
    double end = 1e-5;
    long total = 12000;

    double operator()(long t) const;
};

struct AgentConfig {
    std::vector<std::size_t> hidden = {48, 24};
    bool batchnorm = true;
    double l2 = 0.001;
    double leaky_slope = 0.3;
    double gamma = 0.9;
    int target_sync = 10;
    std::size_t batch_size = 64;

    /// Hidden widths (24, 12), used with the single-image environment.
    static AgentConfig small();
    /// Hidden widths (48, 24).
    static AgentConfig large();
};

/// Dense(h1, leaky) -> BN -> Dense(h2, leaky) -> BN -> Dense(actions, linear), MSE loss.
nn::Network build_q_network(std::size_t state_dim, std::size_t action_space, const AgentConfig& cfg);

/// Argmax with ties to the lowest index.
std::size_t greedy_action(std::span<const double> q);
/// Sample from Cat(softmax(q / tau)).
std::size_t softmax_action(std::span<const double> q, double tau, Rng& rng);

class Agent {
public:
    Agent(std::size_t state_dim, std::size_t action_space, AgentConfig cfg, Rng& rng);
    /// Wraps an existing primary network; the target starts as a copy.
    Agent(nn::Network primary, AgentConfig cfg);

    const AgentConfig& config() const noexcept { return cfg_; }
    std::size_t state_dim() const noexcept { return state_dim_; }
    std::size_t action_space() const noexcept { return action_space_; }
    const nn::Network& primary() const noexcept { return primary_; }
    nn::Network& primary() noexcept { return primary_; }
    const nn::Network& target() const noexcept { return target_; }
    long update_counter() const noexcept { return updates_; }

    /// Primary Q-values for one state, eval mode.
    std::vector<double> q_values(std::span<const double> state) const;
    std::vector<double> target_q_values(std::span<const double> state) const;

    std::size_t act(std::span<const double> state, double tau, Rng& rng, bool greedy) const;

    /// r if done, else r + gamma * Q_target(s', argmax_a Q_primary(s', a)).
    double ddqn_target(const Transition& t) const;

    /// One SGD step on a uniform minibatch, regressing Q(s)[a] toward the
    /// DDQN target. Returns 0 without updating while the buffer is smaller
    /// than the batch size. Syncs the target every target_sync updates.
    double train_step(const ReplayBuffer& buffer, double lr, Rng& rng);

    void sync_target() { target_ = primary_; }

private:
    void check_state(std::span<const double> state) const;

    AgentConfig cfg_;
    std::size_t state_dim_;
    std::size_t action_space_;
    nn::Network primary_;
    nn::Network target_;
    long updates_ = 0;
};

struct AgentMeta {
    long step = 0;
    double tau = 1.0;
    double lr = 0.0;
};

struct LoadedAgent {
    Agent agent;
    AgentMeta meta;
};

/// Primary network in the nn checkpoint container, metadata kind "ddqn_agent".
void save_agent(const std::filesystem::path& path, const Agent& agent, const AgentMeta& meta);
LoadedAgent load_agent(const std::filesystem::path& path);

}  // namespace alrl::agent
