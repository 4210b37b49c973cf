#include "logitmix/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "logitmix/errors.hpp"

namespace logitmix {

const char* mix_scheme_name(MixScheme s) {
    switch (s) {
        case MixScheme::None: return "none";
        case MixScheme::Logit: return "logit";
        case MixScheme::Prob: return "prob";
    }
    return "?";
}

MixScheme mix_scheme_from_name(const std::string& name) {
    if (name == "none") return MixScheme::None;
    if (name == "logit") return MixScheme::Logit;
    if (name == "prob") return MixScheme::Prob;
    throw ConfigError("unknown mix scheme: " + name);
}

void MixSpec::validate() const {
    if (alpha < 0.0 || alpha > 1.0 || !std::isfinite(alpha)) {
        throw ConfigError("mix.alpha must be in [0,1]");
    }
    if (scheme != MixScheme::None) {
        if (reference == nullptr) throw ConfigError("mix.reference is required for logit/prob mixing");
        if (reference->trainable()) throw ConfigError("mix.reference must be a frozen policy");
    }
}

void EnsembleSpec::validate() const {
    if (members.empty()) throw ConfigError("ensemble: at least one member required");
    double total = 0.0;
    for (const auto& m : members) {
        if (m.policy == nullptr) throw ConfigError("ensemble: null member policy");
        if (m.weight < 0.0) throw ConfigError("ensemble: negative member weight");
        total += m.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("ensemble: weights must sum to 1");
}

Tensor mix_logits(const Tensor& z_train, const Tensor& z_ref, double alpha) {
    if (alpha < 0.0 || alpha > 1.0 || !std::isfinite(alpha)) {
        throw ConfigError("mix_logits: alpha must be in [0,1]");
    }
    if (z_train.shape != z_ref.shape) throw ShapeError("mix_logits: length mismatch");
    return add(scalar_mul(z_train, 1.0 - alpha), scalar_mul(z_ref, alpha));
}

Tensor mixed_log_probs(const Policy& policy, const MixSpec& mix,
                       std::span<const int> context) {
    mix.validate();
    switch (mix.scheme) {
        case MixScheme::None:
            return log_softmax(policy.logits(context));
        case MixScheme::Logit: {
            Tensor z_ref = mix.reference->logits(context);
            return log_softmax(mix_logits(policy.logits(context), z_ref, mix.alpha));
        }
        case MixScheme::Prob: {
            Tensor p_train = softmax(policy.logits(context));
            Tensor p_ref = softmax(mix.reference->logits(context));
            return log(add(scalar_mul(p_train, 1.0 - mix.alpha), scalar_mul(p_ref, mix.alpha)));
        }
    }
    throw ConfigError("mixed_log_probs: bad scheme");
}

std::vector<double> mixed_token_dist(const Policy& policy, const MixSpec& mix,
                                     std::span<const int> context) {
    NoGradGuard ng;
    mix.validate();
    switch (mix.scheme) {
        case MixScheme::None:
            return *softmax(policy.logits(context)).data;
        case MixScheme::Logit: {
            Tensor z_ref = mix.reference->logits(context);
            return *softmax(mix_logits(policy.logits(context), z_ref, mix.alpha)).data;
        }
        case MixScheme::Prob: {
            Tensor p_train = softmax(policy.logits(context));
            Tensor p_ref = softmax(mix.reference->logits(context));
            return *add(scalar_mul(p_train, 1.0 - mix.alpha), scalar_mul(p_ref, mix.alpha)).data;
        }
    }
    throw ConfigError("mixed_token_dist: bad scheme");
}

Tensor sequence_logprob(const Policy& policy, const MixSpec& mix,
                        std::span<const int> prompt, std::span<const int> response) {
    mix.validate();
    if (prompt.empty()) throw InputError("sequence_logprob: empty prompt");
    const std::size_t total = prompt.size() + response.size();
    if (total > static_cast<std::size_t>(policy.config().max_ctx)) {
        throw InputError("sequence_logprob: prompt+response exceeds max_ctx");
    }
    if (response.empty()) return Tensor::scalar(0.0);

    std::vector<int> context(prompt.begin(), prompt.end());
    std::vector<Tensor> terms;
    terms.reserve(response.size());
    for (int token : response) {
        Tensor lp = mixed_log_probs(policy, mix, context);
        terms.push_back(pick(lp, token));
        context.push_back(token);
    }
    return add_n(terms);
}

double poe_check(std::span<const double> pi1, std::span<const double> pi2, double alpha) {
    if (alpha < 0.0 || alpha > 1.0 || !std::isfinite(alpha)) {
        throw ConfigError("poe_check: alpha must be in [0,1]");
    }
    if (pi1.size() != pi2.size() || pi1.empty()) throw ShapeError("poe_check: size mismatch");
    const std::size_t n = pi1.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (pi1[i] <= 0.0 || pi2[i] <= 0.0) throw DomainError("poe_check: zero-probability entry");
    }

    // Route 1: softmax of the alpha-mixed log-probabilities.
    std::vector<double> mixed_logit(n);
    for (std::size_t i = 0; i < n; ++i) {
        mixed_logit[i] = (1.0 - alpha) * std::log(pi1[i]) + alpha * std::log(pi2[i]);
    }
    const double m = *std::max_element(mixed_logit.begin(), mixed_logit.end());
    double denom = 0.0;
    for (double z : mixed_logit) denom += std::exp(z - m);
    std::vector<double> via_softmax(n);
    for (std::size_t i = 0; i < n; ++i) via_softmax[i] = std::exp(mixed_logit[i] - m) / denom;

    // Route 2: normalized weighted geometric mean.
    std::vector<double> geo(n);
    double z_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        geo[i] = std::pow(pi1[i], 1.0 - alpha) * std::pow(pi2[i], alpha);
        z_norm += geo[i];
    }

    double max_dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        max_dev = std::max(max_dev, std::abs(via_softmax[i] - geo[i] / z_norm));
    }
    return max_dev;
}

Tensor ensemble_mix_logits(const EnsembleSpec& spec, std::span<const int> context) {
    spec.validate();
    std::vector<Tensor> scaled;
    scaled.reserve(spec.members.size());
    for (const auto& m : spec.members) {
        scaled.push_back(scalar_mul(m.policy->logits(context), m.weight));
    }
    if (scaled.size() == 1) return scaled[0];
    return add_n(scaled);
}

}  // namespace logitmix
