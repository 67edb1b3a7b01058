#include "alrl/agent/ddqn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "alrl/errors.hpp"
#include "alrl/nn/checkpoint.hpp"

namespace alrl::agent {

using nlohmann::json;

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::remember(Transition t) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(t));
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
    if (n > items_.size()) throw ConfigError("cannot sample more transitions than stored");
    std::vector<std::size_t> idx(items_.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
    return idx;
}

void save_buffer(const std::filesystem::path& path, const ReplayBuffer& buffer) {
    json items = json::array();
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        const auto& t = buffer[i];
        items.push_back({{"s", t.state}, {"a", t.action}, {"r", t.reward}, {"s2", t.next_state}, {"done", t.done}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << json{{"capacity", buffer.capacity()}, {"transitions", items}}.dump();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ReplayBuffer load_buffer(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    json j;
    try {
        j = json::parse(in);
        ReplayBuffer buffer(j.at("capacity").get<std::size_t>());
        for (const auto& t : j.at("transitions")) {
            buffer.remember({t.at("s").get<std::vector<double>>(), t.at("a").get<std::size_t>(),
                             t.at("r").get<double>(), t.at("s2").get<std::vector<double>>(),
                             t.at("done").get<bool>()});
        }
        return buffer;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": malformed replay buffer: " + e.what());
    }
}

double GreedSchedule::operator()(long t) const {
    if (t < exploration) return tau_start;
    if (conversion <= 0 || t >= exploration + conversion) return tau_end;
    const double frac = static_cast<double>(t - exploration) / static_cast<double>(conversion);
    return tau_start + (tau_end - tau_start) * frac;
}

double LearningRateSchedule::operator()(long t) const {
    if (total <= 1 || t <= 0) return t <= 0 ? start : end;
    const double frac = std::min(1.0, static_cast<double>(t) / static_cast<double>(total - 1));
    return start + (end - start) * frac;
}

AgentConfig AgentConfig::small() {
    AgentConfig c;
    c.hidden = {24, 12};
    return c;
}

AgentConfig AgentConfig::large() { return AgentConfig{}; }

nn::Network build_q_network(std::size_t state_dim, std::size_t action_space, const AgentConfig& cfg) {
    if (state_dim == 0 || action_space == 0) throw ConfigError("Q-network needs non-zero input and output sizes");
    std::vector<nn::Layer> layers;
    std::size_t in = state_dim;
    for (std::size_t h : cfg.hidden) {
        auto d = nn::Layer::dense(in, h, nn::Activation::leaky_relu, cfg.l2);
        d.leaky_slope = cfg.leaky_slope;
        layers.push_back(std::move(d));
        if (cfg.batchnorm) layers.push_back(nn::Layer::batchnorm(h));
        in = h;
    }
    layers.push_back(nn::Layer::dense(in, action_space, nn::Activation::none, cfg.l2));
    return nn::Network(std::move(layers), nn::Loss::mse);
}

std::size_t greedy_action(std::span<const double> q) {
    if (q.empty()) throw ConfigError("no Q-values");
    return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
}

std::size_t softmax_action(std::span<const double> q, double tau, Rng& rng) {
    const auto p = nn::softmax(q, tau);
    std::discrete_distribution<std::size_t> d(p.begin(), p.end());
    return d(rng);
}

Agent::Agent(std::size_t state_dim, std::size_t action_space, AgentConfig cfg, Rng& rng)
    : cfg_(std::move(cfg)),
      state_dim_(state_dim),
      action_space_(action_space),
      primary_(build_q_network(state_dim, action_space, cfg_)) {
    nn::initialize(primary_, rng);
    target_ = primary_;
}

Agent::Agent(nn::Network primary, AgentConfig cfg) : cfg_(std::move(cfg)), primary_(std::move(primary)) {
    auto shape = primary_.input_shape();
    if (!shape || shape->size() != 1) throw ConfigError("Q-network must take flat state vectors");
    state_dim_ = (*shape)[0];
    action_space_ = primary_.output_size();
    target_ = primary_;
}

void Agent::check_state(std::span<const double> state) const {
    if (state.size() != state_dim_) {
        throw ConfigError("state has " + std::to_string(state.size()) + " features, agent expects " +
                          std::to_string(state_dim_));
    }
}

std::vector<double> Agent::q_values(std::span<const double> state) const {
    check_state(state);
    auto q = primary_.predict(nn::Tensor({1, state_dim_}, {state.begin(), state.end()}));
    return {q.values().begin(), q.values().end()};
}

std::vector<double> Agent::target_q_values(std::span<const double> state) const {
    check_state(state);
    auto q = target_.predict(nn::Tensor({1, state_dim_}, {state.begin(), state.end()}));
    return {q.values().begin(), q.values().end()};
}

std::size_t Agent::act(std::span<const double> state, double tau, Rng& rng, bool greedy) const {
    const auto q = q_values(state);
    if (greedy) return greedy_action(q);
    if (!(tau > 0.0)) throw ConfigError("greed parameter must be positive");
    return softmax_action(q, tau, rng);
}

double Agent::ddqn_target(const Transition& t) const {
    if (t.done) return t.reward;
    const auto a = greedy_action(q_values(t.next_state));
    return t.reward + cfg_.gamma * target_q_values(t.next_state)[a];
}

double Agent::train_step(const ReplayBuffer& buffer, double lr, Rng& rng) {
    const std::size_t n = cfg_.batch_size;
    if (buffer.size() < n) return 0.0;
    const auto idx = buffer.sample_indices(n, rng);

    nn::Tensor states({n, state_dim_});
    nn::Tensor next({n, state_dim_});
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = buffer[idx[i]];
        check_state(t.state);
        if (t.action >= action_space_) throw ConfigError("stored action out of range");
        std::copy(t.state.begin(), t.state.end(), states.row(i).begin());
        if (!t.done) {
            check_state(t.next_state);
            std::copy(t.next_state.begin(), t.next_state.end(), next.row(i).begin());
        }
    }
    const auto q_next = primary_.predict(next);
    const auto q_next_target = target_.predict(next);

    nn::Tensor target({n, action_space_});
    nn::Tensor mask({n, action_space_});
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = buffer[idx[i]];
        double y = t.reward;
        if (!t.done) y += cfg_.gamma * q_next_target.row(i)[greedy_action(q_next.row(i))];
        target.row(i)[t.action] = y;
        mask.row(i)[t.action] = 1.0;
    }

    auto grads = nn::backward(primary_, states, target, &mask);
    if (!std::isfinite(grads.loss)) {
        std::ostringstream msg;
        msg << "agent loss diverged at update " << updates_ << " (loss " << grads.loss << ", lr " << lr << ")";
        throw NumericError(msg.str());
    }
    nn::sgd_step(primary_, grads, lr);
    ++updates_;
    if (cfg_.target_sync > 0 && updates_ % cfg_.target_sync == 0) sync_target();
    return grads.loss;
}

namespace {

json agent_config_json(const AgentConfig& c) {
    return {{"hidden", c.hidden},         {"batchnorm", c.batchnorm},     {"l2", c.l2},
            {"leaky_slope", c.leaky_slope}, {"gamma", c.gamma},           {"target_sync", c.target_sync},
            {"batch_size", c.batch_size}};
}

}  // namespace

void save_agent(const std::filesystem::path& path, const Agent& agent, const AgentMeta& meta) {
    json j = {{"kind", "ddqn_agent"},
              {"config", agent_config_json(agent.config())},
              {"state_dim", agent.state_dim()},
              {"action_space", agent.action_space()},
              {"step", meta.step},
              {"tau", meta.tau},
              {"lr", meta.lr}};
    nn::save_checkpoint(path, agent.primary(), j.dump());
}

LoadedAgent load_agent(const std::filesystem::path& path) {
    auto ck = nn::load_checkpoint(path);
    try {
        const auto j = json::parse(ck.metadata);
        if (j.at("kind") != "ddqn_agent") throw ConfigError(path.string() + " is not an agent checkpoint");
        const auto& c = j.at("config");
        AgentConfig cfg;
        cfg.hidden = c.at("hidden").get<std::vector<std::size_t>>();
        cfg.batchnorm = c.at("batchnorm").get<bool>();
        cfg.l2 = c.at("l2").get<double>();
        cfg.leaky_slope = c.at("leaky_slope").get<double>();
        cfg.gamma = c.at("gamma").get<double>();
        cfg.target_sync = c.at("target_sync").get<int>();
        cfg.batch_size = c.at("batch_size").get<std::size_t>();
        AgentMeta meta{j.at("step").get<long>(), j.at("tau").get<double>(), j.at("lr").get<double>()};
        return {Agent(std::move(ck.network), cfg), meta};
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": bad agent metadata: " + e.what());
    }
}

}  // namespace alrl::agent
