#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "logitmix/tensor.hpp"

namespace logitmix {

struct PolicyConfig {
    int vocab = 0;
    int dim = 32;
    int max_ctx = 16;
    int hidden_layers = 2;
    double init_range = 0.08;

    void validate() const;
};

// Autoregressive policy network. Each context position is scored as:
// token+position embeddings, mean-pooled context summary concatenated with
// the last-token embedding, a tanh MLP, then projection to vocab logits.
// Frozen handles never record gradients; snapshots are frozen deep copies.
class Policy {
public:
    Policy() = default;

    static Policy random_init(const PolicyConfig& cfg, std::uint64_t seed);

    // Length-V logit vector for a context of 1..max_ctx token ids.
    // Graph-tracked when the policy is trainable and grads are enabled.
    Tensor logits(std::span<const int> context) const;

    // Plain values, never graph-tracked.
    std::vector<double> logits_values(std::span<const int> context) const;

    Policy snapshot() const;

    void sgd_step(double learning_rate);
    void zero_grad();

    bool trainable() const { return trainable_; }
    const PolicyConfig& config() const { return cfg_; }

    std::uint64_t checksum() const;

    void save(const std::string& path) const;
    static Policy load(const std::string& path);

    // Fixed order: tok_emb, pos_emb, (w, b) per hidden layer, out_proj.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

private:
    PolicyConfig cfg_;
    bool trainable_ = false;
    Tensor tok_emb_;  // [V, d]
    Tensor pos_emb_;  // [max_ctx, d]
    std::vector<std::pair<Tensor, Tensor>> hidden_;  // first (2d, d), rest (d, d)
    Tensor out_proj_;  // [d, V]
};

}  // namespace logitmix
