#pragma once

#include <span>
#include <vector>

#include "logitmix/model.hpp"
#include "logitmix/tensor.hpp"

namespace logitmix {

enum class MixScheme { None, Logit, Prob };

const char* mix_scheme_name(MixScheme s);
MixScheme mix_scheme_from_name(const std::string& name);

// Policy-combination recipe. None ignores alpha and reference entirely.
struct MixSpec {
    MixScheme scheme = MixScheme::None;
    double alpha = 0.0;
    const Policy* reference = nullptr;

    void validate() const;
};

struct EnsembleMember {
    const Policy* policy = nullptr;
    double weight = 0.0;
};

// Weighted logit ensemble; weights must sum to 1.
struct EnsembleSpec {
    std::vector<EnsembleMember> members;

    void validate() const;
};

// (1-alpha) * z_train + alpha * z_ref, elementwise. Differentiable: the
// gradient into z_train is scaled by exactly (1-alpha).
Tensor mix_logits(const Tensor& z_train, const Tensor& z_ref, double alpha);

// Log-distribution over the vocabulary at one decoding position.
// Logit scheme: log-softmax of the mixed logits. Prob scheme: log of the
// probability mixture. None: log-softmax of the raw policy logits.
Tensor mixed_log_probs(const Policy& policy, const MixSpec& mix,
                       std::span<const int> context);

// Probability vector for sampling and evaluation; never graph-tracked.
std::vector<double> mixed_token_dist(const Policy& policy, const MixSpec& mix,
                                     std::span<const int> context);

// Sum over response tokens of log pi_mix(y_t | prompt, y_<t). Empty response
// gives exactly zero.
Tensor sequence_logprob(const Policy& policy, const MixSpec& mix,
                        std::span<const int> prompt, std::span<const int> response);

// Max-abs deviation between softmax of alpha-mixed log-probabilities and the
// alpha-weighted normalized geometric mean of the two distributions. Both
// inputs must be strictly positive.
double poe_check(std::span<const double> pi1, std::span<const double> pi2, double alpha);

// K-way weighted logit sum; reduces to mix_logits for two members with
// weights (1-alpha, alpha).
Tensor ensemble_mix_logits(const EnsembleSpec& spec, std::span<const int> context);

}  // namespace logitmix
