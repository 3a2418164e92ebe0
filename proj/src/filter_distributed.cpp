#include "fekf/filter_distributed.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "fekf/errors.hpp"

namespace fekf {

InProcessTransport::InProcessTransport(int node_count) {
    boxes_.reserve(node_count);
    for (int i = 0; i < node_count; ++i) boxes_.push_back(std::make_unique<Box>());
}

void InProcessTransport::send(BoundaryMessage msg) {
    Box& box = *boxes_.at(msg.receiver);
    std::lock_guard lock(box.mutex);
    box.messages.push_back(std::move(msg));
}

std::vector<BoundaryMessage> InProcessTransport::collect(int receiver, int round) {
    Box& box = *boxes_.at(receiver);
    std::lock_guard lock(box.mutex);
    std::vector<BoundaryMessage> out, keep;
    for (auto& m : box.messages) {
        if (m.round == round)
            out.push_back(std::move(m));
        else
            keep.push_back(std::move(m));
    }
    box.messages = std::move(keep);
    return out;
}

namespace {

// Runs fn(i) for i in [0, n), either inline or on a small worker set. Each
// index touches disjoint state, so any schedule yields identical results.
void for_each_node(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const int workers = std::min(threads, n);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<NodeState> make_node_states(const ConsensusRuntime& rt, double initial_value,
                                        double initial_cov) {
    std::vector<NodeState> nodes;
    for (const auto& model : *rt.models) {
        NodeState s;
        s.node = model.node;
        s.x = Vec::Constant(model.size(), initial_value);
        s.x_prev = s.x;
        s.P = initial_cov * Mat::Identity(model.size(), model.size());
        s.phase = Phase::Prior;
        nodes.push_back(std::move(s));
    }
    return nodes;
}

void local_correct(NodeState& node, const Vec& y, const Mat& C, const Mat& R) {
    FilterState state{node.x, node.P, Phase::Prior, node.sample};
    FilterState post = correct(state, y, C, R);
    node.x = post.x;
    node.P = post.P;
    node.x_prev = node.x;  // consensus init: both delay buffers hold the posterior
    node.phase = Phase::Posterior;
    node.round = 0;
}

void local_correct_with_gain(NodeState& node, const Vec& y, const Mat& C, const Mat& gain) {
    node.x = apply_gain(node.x, y, C, gain);
    node.x_prev = node.x;
    node.phase = Phase::Posterior;
    node.round = 0;
}

void consensus_round(const ConsensusRuntime& rt, std::vector<NodeState>& nodes, int round,
                     double gamma_step, const InputProvider& input) {
    const auto& models = *rt.models;
    const int n = static_cast<int>(nodes.size());

    // Send phase: node j serves every node m whose interface set names j.
    for_each_node(n, rt.threads, [&](int j) {
        for (int m = 0; m < n; ++m) {
            if (m == j) continue;
            auto it = models[m].neighbor_cols.find(j);
            if (it == models[m].neighbor_cols.end()) continue;
            const auto& cols = it->second;
            BoundaryMessage msg;
            msg.sender = j;
            msg.receiver = m;
            msg.round = round;
            msg.current.resize(static_cast<int>(cols.size()));
            msg.delayed.resize(static_cast<int>(cols.size()));
            msg.cov_diag.resize(static_cast<int>(cols.size()));
            for (std::size_t k = 0; k < cols.size(); ++k) {
                msg.current[static_cast<int>(k)] = nodes[j].x[cols[k]];
                msg.delayed[static_cast<int>(k)] = nodes[j].x_prev[cols[k]];
                msg.cov_diag[static_cast<int>(k)] =
                    nodes[j].P.size() > 0 ? nodes[j].P(cols[k], cols[k]) : 0.0;
            }
            if (rt.trace) {
                std::lock_guard lock(*rt.trace_mutex);
                *rt.trace << round << ',' << j << ',' << m << ',' << cols.size() << '\n';
            }
            rt.transport->send(std::move(msg));
        }
    });

    // Barrier is implicit: all sends are complete before any node computes.
    for_each_node(n, rt.threads, [&](int m) {
        const LocalModel& model = models[m];
        NodeState& node = nodes[m];
        auto inbox = rt.transport->collect(m, round);

        Vec next = model.A_self * node.x;
        if (model.A_self_delay) next += (*model.A_self_delay) * node.x_prev;
        for (const auto& [j, block] : model.A_neighbor) {
            const BoundaryMessage* msg = nullptr;
            for (const auto& cand : inbox)
                if (cand.sender == j) msg = &cand;
            if (!msg)
                throw ProtocolError("node " + std::to_string(m) + " missing round " +
                                    std::to_string(round) + " message from node " +
                                    std::to_string(j));
            next += block * msg->current;
            next += model.A_neighbor_delay.at(j) * msg->delayed;
        }
        if (input) {
            const Vec u = input(m, round);
            if (u.size() > 0) next += model.B * u;
        }
        node.x_prev = std::move(node.x);
        node.x = std::move(next);
        if (node.P.size() > 0) {
            node.P = (gamma_step * gamma_step) * (model.A_self * node.P * model.A_self.transpose()) +
                     model.Q;
            node.P = 0.5 * (node.P + node.P.transpose());
        }
        node.round = round;
    });
}

void run_sampling_cycle(const ConsensusRuntime& rt, std::vector<NodeState>& nodes,
                        const std::vector<Vec>& y_per_node, int L, double gamma_total,
                        const InputProvider& input) {
    if (L < 1) throw std::invalid_argument("run_sampling_cycle: L must be >= 1");
    const auto& models = *rt.models;
    for (std::size_t m = 0; m < nodes.size(); ++m)
        local_correct(nodes[m], y_per_node.at(m), models[m].C, models[m].R);
    const double gamma_step = std::pow(gamma_total, 1.0 / L);
    for (int l = 1; l <= L; ++l) consensus_round(rt, nodes, l, gamma_step, input);
    for (auto& node : nodes) {
        node.phase = Phase::Prior;
        node.sample += 1;
    }
}

Vec stack_estimates(const std::vector<NodeState>& nodes, const Decomposition& dec) {
    Vec out(dec.augmented_dim());
    for (const auto& node : nodes)
        out.segment(dec.block_offset[node.node], node.x.size()) = node.x;
    return out;
}

Vec gather_global_estimate(const std::vector<NodeState>& nodes, const Decomposition& dec) {
    return dec.gather_mean(stack_estimates(nodes, dec));
}

void write_node_trajectory_csv(std::ostream& os, const Decomposition& dec, int node,
                               const std::vector<double>& times,
                               const std::vector<Vec>& estimates) {
    os << "time,vertex,estimate\n";
    for (std::size_t q = 0; q < estimates.size(); ++q)
        for (int l = 0; l < estimates[q].size(); ++l)
            os << times[q] << ',' << dec.internal_vertices[node][l] << ',' << estimates[q][l]
               << '\n';
}

}  // namespace fekf
