#ifndef TSL_AGENT_HPP
#define TSL_AGENT_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsl/rng.hpp"

namespace tsl {

// One decision step of the per-intersection MDP: state and next state are
// the per-phase stopped averages of consecutive cycles, the reward is the
// negated stopped sum observed over the cycle the action ran.
struct MdpStep {
    std::array<double, 2> state{};
    int action = 0;
    double reward = 0.0;
    std::array<double, 2> next_state{};
};

inline double reward_from_state(const std::array<double, 2> &w) { return -(w[0] + w[1]); }

// Total discounted reward of a (truncated) reward sequence.
double discounted_return(std::span<const double> rewards, double gamma);

// Fully-connected network with rectifier hidden units and a linear output
// row per action. Parameters live in one flat vector (weights row-major,
// then biases, per layer) so optimizers and finite differences can treat
// the model as a plain parameter vector.
class QNetwork {
public:
    explicit QNetwork(std::vector<int> arch);

    const std::vector<int> &arch() const { return arch_; }
    int input_dim() const { return arch_.front(); }
    int output_dim() const { return arch_.back(); }
    int param_count() const { return static_cast<int>(params_.size()); }
    std::vector<double> &params() { return params_; }
    const std::vector<double> &params() const { return params_; }

    void init_random(Rng &rng);

    std::vector<double> forward(std::span<const double> input) const;
    double q_value(std::span<const double> input, int action) const;
    double max_q(std::span<const double> input) const;
    // lowest index wins ties
    int argmax_q(std::span<const double> input) const;

private:
    std::vector<int> arch_;
    std::vector<double> params_;
    friend struct NetWorkspace;
};

// Mean squared temporal-difference loss over a batch and its gradient in the
// behaviour network's parameters; the target network only shapes the targets.
struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};
LossAndGrad dqn_loss_and_gradient(std::span<const MdpStep> batch, const QNetwork &behaviour,
                                  const QNetwork &target, double gamma);

// epsilon-greedy over the network's Q-row; ties break to the lowest index.
int select_action(const QNetwork &net, std::span<const double> state, double epsilon, Rng &rng);

class Adam {
public:
    Adam(int param_count, double learning_rate);
    void step(std::vector<double> &params, const std::vector<double> &grad);

private:
    double lr_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::int64_t t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity);
    void add(const MdpStep &step);
    int size() const { return static_cast<int>(data_.size()); }
    int capacity() const { return capacity_; }
    std::vector<MdpStep> sample(int batch_size, Rng &rng) const;

private:
    int capacity_;
    int next_ = 0;
    std::vector<MdpStep> data_;
};

struct DqnHyperParams {
    std::vector<int> arch = {2, 32, 32, 7};
    double learning_rate = 1e-3;
    double gamma = 0.95;
    int replay_capacity = 10000;
    int batch_size = 32;
    int warmup = 100;
    int target_sync_interval = 200;
    double epsilon_start = 1.0;
    double epsilon_final = 0.05;
    double epsilon_anneal_fraction = 0.6; // fraction of training cycles
};

// One DQN learner (one intersection). Deterministic given its seed.
class DqnAgent {
public:
    DqnAgent(const DqnHyperParams &hp, std::uint64_t seed);

    int select(const std::array<double, 2> &state, double epsilon);
    void train_step(const MdpStep &step);

    const DqnHyperParams &hyper() const { return hp_; }
    const QNetwork &net() const { return net_; }
    QNetwork &net() { return net_; }
    const QNetwork &target() const { return target_; }
    std::int64_t steps() const { return steps_; }
    double last_loss() const { return last_loss_; }

    // epsilon at training cycle c of total_cycles, linearly annealed over the
    // first epsilon_anneal_fraction of the run
    double epsilon_at(std::int64_t cycle, std::int64_t total_cycles) const;

    std::string to_checkpoint_json(std::uint64_t seed, std::int64_t cycles_trained) const;
    static DqnAgent from_checkpoint_json(const std::string &text);

private:
    DqnHyperParams hp_;
    Rng rng_;
    QNetwork net_;
    QNetwork target_;
    ReplayBuffer replay_;
    Adam adam_;
    std::int64_t steps_ = 0;
    double last_loss_ = 0.0;
};

// --- tabular oracle ---

class QTable {
public:
    QTable(int n_states, int n_actions);
    double &at(int s, int a) { return q_[s * n_actions_ + a]; }
    double at(int s, int a) const { return q_[s * n_actions_ + a]; }
    double max_q(int s) const;
    int greedy(int s) const; // lowest index wins ties
    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }

    void q_update(int s, int a, double r, int s_next, double alpha, double gamma);

private:
    int n_states_;
    int n_actions_;
    std::vector<double> q_;
};

} // namespace tsl

#endif
