#include "logitmix/model.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "logitmix/errors.hpp"
#include "logitmix/rng.hpp"

namespace logitmix {

namespace {

constexpr const char* kFormatTag = "logitmix-ckpt v1";

Tensor clone_tensor(const Tensor& t, bool requires_grad) {
    return Tensor::from(t.shape, *t.data, requires_grad);
}

void fill_uniform(Tensor& t, Rng& rng, double range) {
    for (double& v : *t.data) v = rng.uniform(-range, range);
}

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffULL;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_double_hex(std::FILE* f, double v) {
    std::fprintf(f, " %a", v);
}

}  // namespace

void PolicyConfig::validate() const {
    if (vocab < 2) throw ConfigError("model.vocab must be at least 2");
    if (dim < 1) throw ConfigError("model.dim must be positive");
    if (max_ctx < 1) throw ConfigError("model.max_ctx must be positive");
    if (hidden_layers < 1) throw ConfigError("model.hidden_layers must be at least 1");
    if (init_range <= 0.0) throw ConfigError("model.init_range must be positive");
}

Policy Policy::random_init(const PolicyConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Policy p;
    p.cfg_ = cfg;
    p.trainable_ = true;
    Rng rng(derive_seed(seed, 0x6d6f64656cULL));

    p.tok_emb_ = Tensor::zeros({cfg.vocab, cfg.dim}, true);
    p.pos_emb_ = Tensor::zeros({cfg.max_ctx, cfg.dim}, true);
    fill_uniform(p.tok_emb_, rng, cfg.init_range);
    fill_uniform(p.pos_emb_, rng, cfg.init_range);
    int in_dim = 2 * cfg.dim;
    for (int l = 0; l < cfg.hidden_layers; ++l) {
        Tensor w = Tensor::zeros({in_dim, cfg.dim}, true);
        Tensor b = Tensor::zeros({cfg.dim}, true);
        fill_uniform(w, rng, cfg.init_range);
        fill_uniform(b, rng, cfg.init_range);
        p.hidden_.emplace_back(std::move(w), std::move(b));
        in_dim = cfg.dim;
    }
    p.out_proj_ = Tensor::zeros({cfg.dim, cfg.vocab}, true);
    fill_uniform(p.out_proj_, rng, cfg.init_range);
    return p;
}

Tensor Policy::logits(std::span<const int> context) const {
    const int n = static_cast<int>(context.size());
    if (n < 1) throw InputError("logits: empty context");
    if (n > cfg_.max_ctx) throw InputError("logits: context longer than max_ctx");
    for (int id : context) {
        if (id < 0 || id >= cfg_.vocab) throw InputError("logits: token id out of range");
    }

    std::vector<Tensor> embedded;
    embedded.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        embedded.push_back(add(row(tok_emb_, context[static_cast<std::size_t>(i)]), row(pos_emb_, i)));
    }
    Tensor pooled = scalar_mul(add_n(embedded), 1.0 / n);
    Tensor h = concat(pooled, embedded.back());
    for (const auto& [w, b] : hidden_) h = tanh(linear(h, w, b));
    return vec_mat(h, out_proj_);
}

std::vector<double> Policy::logits_values(std::span<const int> context) const {
    NoGradGuard ng;
    return *logits(context).data;
}

Policy Policy::snapshot() const {
    Policy out;
    out.cfg_ = cfg_;
    out.trainable_ = false;
    out.tok_emb_ = clone_tensor(tok_emb_, false);
    out.pos_emb_ = clone_tensor(pos_emb_, false);
    for (const auto& [w, b] : hidden_) {
        out.hidden_.emplace_back(clone_tensor(w, false), clone_tensor(b, false));
    }
    out.out_proj_ = clone_tensor(out_proj_, false);
    return out;
}

void Policy::sgd_step(double learning_rate) {
    if (!trainable_) throw ContractError("sgd_step: policy is frozen");
    for (Tensor* t : parameters()) {
        auto& d = *t->data;
        auto& g = *t->grad;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= learning_rate * g[i];
        t->zero_grad();
    }
}

void Policy::zero_grad() {
    if (!trainable_) return;
    for (Tensor* t : parameters()) t->zero_grad();
}

std::uint64_t Policy::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(h, static_cast<std::uint64_t>(cfg_.vocab));
    h = fnv1a(h, static_cast<std::uint64_t>(cfg_.dim));
    h = fnv1a(h, static_cast<std::uint64_t>(cfg_.max_ctx));
    for (const Tensor* t : parameters()) {
        for (int d : t->shape) h = fnv1a(h, static_cast<std::uint64_t>(d));
        for (double v : *t->data) h = fnv1a(h, std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

std::vector<Tensor*> Policy::parameters() {
    std::vector<Tensor*> out{&tok_emb_, &pos_emb_};
    for (auto& [w, b] : hidden_) {
        out.push_back(&w);
        out.push_back(&b);
    }
    out.push_back(&out_proj_);
    return out;
}

std::vector<const Tensor*> Policy::parameters() const {
    std::vector<const Tensor*> out{&tok_emb_, &pos_emb_};
    for (const auto& [w, b] : hidden_) {
        out.push_back(&w);
        out.push_back(&b);
    }
    out.push_back(&out_proj_);
    return out;
}

namespace {

std::vector<std::string> tensor_names(const PolicyConfig& cfg) {
    std::vector<std::string> names{"tok_emb", "pos_emb"};
    for (int l = 0; l < cfg.hidden_layers; ++l) {
        names.push_back("hidden" + std::to_string(l) + "_w");
        names.push_back("hidden" + std::to_string(l) + "_b");
    }
    names.push_back("out_proj");
    return names;
}

}  // namespace

void Policy::save(const std::string& path) const {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw InputError("save: cannot open " + path);
    std::fprintf(f, "%s\n", kFormatTag);
    std::fprintf(f, "vocab %d\n", cfg_.vocab);
    std::fprintf(f, "dim %d\n", cfg_.dim);
    std::fprintf(f, "max_ctx %d\n", cfg_.max_ctx);
    std::fprintf(f, "hidden_layers %d\n", cfg_.hidden_layers);
    std::fprintf(f, "init_range %a\n", cfg_.init_range);
    std::fprintf(f, "trainable %d\n", trainable_ ? 1 : 0);
    const auto names = tensor_names(cfg_);
    const auto params = parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor* t = params[i];
        std::fprintf(f, "tensor %s %zu", names[i].c_str(), t->shape.size());
        for (int d : t->shape) std::fprintf(f, " %d", d);
        std::fprintf(f, "\n");
        const int cols = t->shape.size() == 2 ? t->shape[1] : t->shape[0];
        const std::size_t total = t->numel();
        for (std::size_t j = 0; j < total; ++j) {
            write_double_hex(f, (*t->data)[j]);
            if ((j + 1) % static_cast<std::size_t>(cols) == 0) std::fprintf(f, "\n");
        }
    }
    std::fclose(f);
}

Policy Policy::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("load: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kFormatTag) {
        throw InputError("load: unrecognized checkpoint format in " + path);
    }
    PolicyConfig cfg;
    bool trainable = false;
    auto read_kv = [&](const char* key) -> std::string {
        if (!std::getline(in, line)) throw InputError("load: truncated header");
        std::istringstream ss(line);
        std::string k, v;
        ss >> k >> v;
        if (k != key) throw InputError(std::string("load: expected key ") + key);
        return v;
    };
    cfg.vocab = std::stoi(read_kv("vocab"));
    cfg.dim = std::stoi(read_kv("dim"));
    cfg.max_ctx = std::stoi(read_kv("max_ctx"));
    cfg.hidden_layers = std::stoi(read_kv("hidden_layers"));
    cfg.init_range = std::strtod(read_kv("init_range").c_str(), nullptr);
    trainable = std::stoi(read_kv("trainable")) != 0;
    cfg.validate();

    Policy p;
    p.cfg_ = cfg;
    p.trainable_ = trainable;
    const auto names = tensor_names(cfg);
    std::vector<Tensor> loaded;
    for (const std::string& name : names) {
        if (!std::getline(in, line)) throw InputError("load: missing tensor " + name);
        std::istringstream ss(line);
        std::string kw, got;
        std::size_t rank = 0;
        ss >> kw >> got >> rank;
        if (kw != "tensor" || got != name) throw InputError("load: expected tensor " + name);
        std::vector<int> shape(rank);
        for (auto& d : shape) ss >> d;
        std::size_t total = 1;
        for (int d : shape) total *= static_cast<std::size_t>(d);
        std::vector<double> values;
        values.reserve(total);
        while (values.size() < total) {
            if (!std::getline(in, line)) throw InputError("load: truncated tensor " + name);
            const char* s = line.c_str();
            char* end = nullptr;
            for (;;) {
                const double v = std::strtod(s, &end);
                if (end == s) break;
                values.push_back(v);
                s = end;
            }
        }
        if (values.size() != total) throw InputError("load: wrong value count in " + name);
        loaded.push_back(Tensor::from(shape, std::move(values), trainable));
    }

    std::size_t idx = 0;
    p.tok_emb_ = loaded[idx++];
    p.pos_emb_ = loaded[idx++];
    for (int l = 0; l < cfg.hidden_layers; ++l) {
        Tensor w = loaded[idx++];
        Tensor b = loaded[idx++];
        p.hidden_.emplace_back(std::move(w), std::move(b));
    }
    p.out_proj_ = loaded[idx++];
    return p;
}

}  // namespace logitmix
