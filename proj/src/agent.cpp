#include "tsl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "tsl/errors.hpp"

namespace tsl {

using nlohmann::json;

double discounted_return(std::span<const double> rewards, double gamma) {
    double total = 0.0;
    double factor = 1.0;
    for (double r : rewards) {
        total += factor * r;
        factor *= gamma;
    }
    return total;
}

// --- QNetwork ---

QNetwork::QNetwork(std::vector<int> arch) : arch_(std::move(arch)) {
    if (arch_.size() < 2) throw std::invalid_argument("network needs at least input and output layers");
    int count = 0;
    for (std::size_t l = 0; l + 1 < arch_.size(); ++l) count += arch_[l] * arch_[l + 1] + arch_[l + 1];
    params_.assign(count, 0.0);
}

void QNetwork::init_random(Rng &rng) {
    int offset = 0;
    for (std::size_t l = 0; l + 1 < arch_.size(); ++l) {
        int fan_in = arch_[l];
        int fan_out = arch_[l + 1];
        double limit = std::sqrt(6.0 / fan_in);
        for (int i = 0; i < fan_in * fan_out; ++i) params_[offset + i] = (2.0 * rng.next_double() - 1.0) * limit;
        offset += fan_in * fan_out;
        for (int i = 0; i < fan_out; ++i) params_[offset + i] = 0.0;
        offset += fan_out;
    }
}

namespace {

// activations per layer for one forward pass
struct Workspace {
    std::vector<std::vector<double>> act; // act[0] = input, act.back() = output
};

void forward_into(const std::vector<int> &arch, const std::vector<double> &params, std::span<const double> input,
                  Workspace &ws) {
    if (static_cast<int>(input.size()) != arch.front()) throw std::invalid_argument("network input dimension mismatch");
    ws.act.assign(arch.size(), {});
    ws.act[0].assign(input.begin(), input.end());
    int offset = 0;
    for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
        int in_dim = arch[l];
        int out_dim = arch[l + 1];
        ws.act[l + 1].assign(out_dim, 0.0);
        const double *w = params.data() + offset;
        const double *b = params.data() + offset + in_dim * out_dim;
        for (int o = 0; o < out_dim; ++o) {
            double z = b[o];
            const double *row = w + o * in_dim;
            for (int i = 0; i < in_dim; ++i) z += row[i] * ws.act[l][i];
            bool hidden = l + 2 < arch.size();
            ws.act[l + 1][o] = hidden ? std::max(0.0, z) : z;
        }
        offset += in_dim * out_dim + out_dim;
    }
}

} // namespace

std::vector<double> QNetwork::forward(std::span<const double> input) const {
    Workspace ws;
    forward_into(arch_, params_, input, ws);
    return ws.act.back();
}

double QNetwork::q_value(std::span<const double> input, int action) const { return forward(input)[action]; }

double QNetwork::max_q(std::span<const double> input) const {
    auto q = forward(input);
    return *std::max_element(q.begin(), q.end());
}

int QNetwork::argmax_q(std::span<const double> input) const {
    auto q = forward(input);
    return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

LossAndGrad dqn_loss_and_gradient(std::span<const MdpStep> batch, const QNetwork &behaviour, const QNetwork &target,
                                  double gamma) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    if (behaviour.arch() != target.arch()) throw std::invalid_argument("behaviour/target architecture mismatch");
    const auto &arch = behaviour.arch();
    LossAndGrad out;
    out.grad.assign(behaviour.param_count(), 0.0);
    double inv_b = 1.0 / static_cast<double>(batch.size());
    Workspace ws;
    for (const MdpStep &step : batch) {
        if (step.action < 0 || step.action >= behaviour.output_dim())
            throw std::invalid_argument("action outside network output range");
        double y = step.reward + gamma * target.max_q(step.next_state);
        forward_into(arch, behaviour.params(), step.state, ws);
        double q_sa = ws.act.back()[step.action];
        double residual = y - q_sa;
        out.loss += residual * residual * inv_b;

        // backward: d loss / d q_sa = -2 residual / B; targets are constants
        std::vector<double> delta(arch.back(), 0.0);
        delta[step.action] = -2.0 * residual * inv_b;
        int offset = behaviour.param_count();
        for (int l = static_cast<int>(arch.size()) - 2; l >= 0; --l) {
            int in_dim = arch[l];
            int out_dim = arch[l + 1];
            offset -= in_dim * out_dim + out_dim;
            double *gw = out.grad.data() + offset;
            double *gb = out.grad.data() + offset + in_dim * out_dim;
            const double *w = behaviour.params().data() + offset;
            std::vector<double> delta_prev(in_dim, 0.0);
            for (int o = 0; o < out_dim; ++o) {
                double d = delta[o];
                if (d == 0.0) continue;
                gb[o] += d;
                double *grow = gw + o * in_dim;
                const double *wrow = w + o * in_dim;
                for (int i = 0; i < in_dim; ++i) {
                    grow[i] += d * ws.act[l][i];
                    delta_prev[i] += d * wrow[i];
                }
            }
            if (l > 0) // rectifier mask of the layer below
                for (int i = 0; i < in_dim; ++i)
                    if (ws.act[l][i] <= 0.0) delta_prev[i] = 0.0;
            delta = std::move(delta_prev);
        }
    }
    return out;
}

int select_action(const QNetwork &net, std::span<const double> state, double epsilon, Rng &rng) {
    if (epsilon > 0.0 && rng.next_double() < epsilon) return rng.next_index(net.output_dim());
    return net.argmax_q(state);
}

// --- Adam ---

Adam::Adam(int param_count, double learning_rate)
    : lr_(learning_rate), m_(param_count, 0.0), v_(param_count, 0.0) {}

void Adam::step(std::vector<double> &params, const std::vector<double> &grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw std::invalid_argument("optimizer/parameter size mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
    }
}

// --- replay ---

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("replay capacity must be positive");
    data_.reserve(capacity);
}

void ReplayBuffer::add(const MdpStep &step) {
    if (size() < capacity_) {
        data_.push_back(step);
    } else {
        data_[next_] = step;
        next_ = (next_ + 1) % capacity_;
    }
}

std::vector<MdpStep> ReplayBuffer::sample(int batch_size, Rng &rng) const {
    std::vector<MdpStep> batch;
    batch.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) batch.push_back(data_[rng.next_index(size())]);
    return batch;
}

// --- agent ---

DqnAgent::DqnAgent(const DqnHyperParams &hp, std::uint64_t seed)
    : hp_(hp),
      rng_(splitmix64(seed ^ 0xa9e47ULL)),
      net_(hp.arch),
      target_(hp.arch),
      replay_(hp.replay_capacity),
      adam_(QNetwork(hp.arch).param_count(), hp.learning_rate) {
    net_.init_random(rng_);
    target_.params() = net_.params();
}

int DqnAgent::select(const std::array<double, 2> &state, double epsilon) {
    return select_action(net_, state, epsilon, rng_);
}

void DqnAgent::train_step(const MdpStep &step) {
    replay_.add(step);
    ++steps_;
    if (replay_.size() >= hp_.warmup) {
        auto batch = replay_.sample(hp_.batch_size, rng_);
        auto lg = dqn_loss_and_gradient(batch, net_, target_, hp_.gamma);
        adam_.step(net_.params(), lg.grad);
        last_loss_ = lg.loss;
    }
    if (steps_ % hp_.target_sync_interval == 0) target_.params() = net_.params();
}

double DqnAgent::epsilon_at(std::int64_t cycle, std::int64_t total_cycles) const {
    double anneal = hp_.epsilon_anneal_fraction * static_cast<double>(total_cycles);
    if (anneal <= 0.0) return hp_.epsilon_final;
    double frac = static_cast<double>(cycle) / anneal;
    if (frac >= 1.0) return hp_.epsilon_final;
    return hp_.epsilon_start + (hp_.epsilon_final - hp_.epsilon_start) * frac;
}

std::string DqnAgent::to_checkpoint_json(std::uint64_t seed, std::int64_t cycles_trained) const {
    json doc;
    doc["schema"] = 1;
    doc["arch"] = hp_.arch;
    doc["weights"] = net_.params();
    doc["target_weights"] = target_.params();
    doc["meta"] = {{"seed", seed},
                   {"cycles_trained", cycles_trained},
                   {"steps", steps_},
                   {"hyperparameters",
                    {{"learning_rate", hp_.learning_rate},
                     {"gamma", hp_.gamma},
                     {"replay_capacity", hp_.replay_capacity},
                     {"batch_size", hp_.batch_size},
                     {"warmup", hp_.warmup},
                     {"target_sync_interval", hp_.target_sync_interval},
                     {"epsilon_start", hp_.epsilon_start},
                     {"epsilon_final", hp_.epsilon_final},
                     {"epsilon_anneal_fraction", hp_.epsilon_anneal_fraction}}}};
    return doc.dump(2);
}

DqnAgent DqnAgent::from_checkpoint_json(const std::string &text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception &e) {
        throw ParseError(std::string("invalid checkpoint JSON: ") + e.what());
    }
    if (!doc.contains("schema") || doc["schema"].get<int>() != 1)
        throw ParseError("unsupported checkpoint schema");
    DqnHyperParams hp;
    hp.arch = doc.at("arch").get<std::vector<int>>();
    const json &h = doc.at("meta").at("hyperparameters");
    hp.learning_rate = h.at("learning_rate").get<double>();
    hp.gamma = h.at("gamma").get<double>();
    hp.replay_capacity = h.at("replay_capacity").get<int>();
    hp.batch_size = h.at("batch_size").get<int>();
    hp.warmup = h.at("warmup").get<int>();
    hp.target_sync_interval = h.at("target_sync_interval").get<int>();
    hp.epsilon_start = h.at("epsilon_start").get<double>();
    hp.epsilon_final = h.at("epsilon_final").get<double>();
    hp.epsilon_anneal_fraction = h.at("epsilon_anneal_fraction").get<double>();
    DqnAgent agent(hp, doc.at("meta").at("seed").get<std::uint64_t>());
    auto weights = doc.at("weights").get<std::vector<double>>();
    if (weights.size() != agent.net_.params().size()) throw ParseError("checkpoint weight count mismatch");
    agent.net_.params() = weights;
    auto tweights = doc.at("target_weights").get<std::vector<double>>();
    if (tweights.size() != agent.target_.params().size()) throw ParseError("checkpoint target weight count mismatch");
    agent.target_.params() = tweights;
    agent.steps_ = doc.at("meta").at("steps").get<std::int64_t>();
    return agent;
}

// --- tabular oracle ---

QTable::QTable(int n_states, int n_actions)
    : n_states_(n_states), n_actions_(n_actions), q_(static_cast<std::size_t>(n_states) * n_actions, 0.0) {}

double QTable::max_q(int s) const {
    double best = q_[s * n_actions_];
    for (int a = 1; a < n_actions_; ++a) best = std::max(best, q_[s * n_actions_ + a]);
    return best;
}

int QTable::greedy(int s) const {
    int best = 0;
    for (int a = 1; a < n_actions_; ++a)
        if (q_[s * n_actions_ + a] > q_[s * n_actions_ + best]) best = a;
    return best;
}

void QTable::q_update(int s, int a, double r, int s_next, double alpha, double gamma) {
    double &q = q_[s * n_actions_ + a];
    q += alpha * (r + gamma * max_q(s_next) - q);
}

} // namespace tsl
