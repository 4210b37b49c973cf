#include "logitmix/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>

#include "logitmix/errors.hpp"

namespace logitmix {

namespace {

thread_local bool g_grad_enabled = true;

std::size_t shape_numel(const std::vector<int>& shape) {
    if (shape.empty()) throw ShapeError("tensor: empty shape");
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor: dimension sizes must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

bool tracked(const Tensor& t) { return g_grad_enabled && t.requires_grad; }

Tensor make_result(std::vector<int> shape, bool track) {
    Tensor out;
    const std::size_t n = shape_numel(shape);
    out.shape = std::move(shape);
    out.data = std::make_shared<std::vector<double>>(n, 0.0);
    if (track) {
        out.requires_grad = true;
        out.grad = std::make_shared<std::vector<double>>(n, 0.0);
    }
    return out;
}

void attach(Tensor& out, std::vector<Tensor> parents,
            std::function<void(const Tensor&)> bw) {
    if (!out.requires_grad) return;
    out.node = std::make_shared<GraphNode>();
    out.node->parents = std::move(parents);
    out.node->backward = std::move(bw);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) throw ShapeError(std::string(op) + ": shape mismatch");
}

void accumulate(const Tensor& parent, const std::vector<double>& g) {
    if (!parent.grad) return;
    auto& pg = *parent.grad;
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return make_result(std::move(shape), requires_grad);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values,
                    bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    if (n != values.size()) throw ShapeError("tensor: value count does not match shape");
    Tensor out = make_result(std::move(shape), requires_grad);
    *out.data = std::move(values);
    return out;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

std::size_t Tensor::numel() const { return data ? data->size() : 0; }

double Tensor::value() const {
    if (numel() != 1) throw ShapeError("value: tensor is not scalar");
    return (*data)[0];
}

void Tensor::zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw ShapeError("backward: root must be scalar");
    if (!loss.requires_grad || !loss.grad) return;
    if (!loss.node) {
        // Root is itself a leaf; its own gradient accumulates.
        (*loss.grad)[0] += 1.0;
        return;
    }

    // Iterative post-order DFS: every node appears after all of its parents,
    // so a reverse scan visits each node exactly once with its output
    // gradient complete.
    struct Frame {
        Tensor t;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    std::vector<Tensor> topo;
    std::unordered_set<GraphNode*> seen;
    stack.push_back({loss, 0});
    seen.insert(loss.node.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        GraphNode* n = f.t.node.get();
        if (f.next_parent < n->parents.size()) {
            const Tensor p = n->parents[f.next_parent++];
            if (p.node && !seen.count(p.node.get())) {
                seen.insert(p.node.get());
                stack.push_back({p, 0});
            }
            continue;
        }
        topo.push_back(f.t);
        stack.pop_back();
    }

    // Interior gradients are per-sweep scratch; leaves keep accumulating.
    for (const Tensor& t : topo) {
        if (t.grad) std::fill(t.grad->begin(), t.grad->end(), 0.0);
    }
    (*loss.grad)[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        it->node->backward(*it);
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const bool track = tracked(a) || tracked(b);
    Tensor out = make_result(a.shape, track);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] + (*b.data)[i];
    attach(out, {a, b}, [](const Tensor& o) {
        accumulate(o.node->parents[0], *o.grad);
        accumulate(o.node->parents[1], *o.grad);
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const bool track = tracked(a) || tracked(b);
    Tensor out = make_result(a.shape, track);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
    attach(out, {a, b}, [](const Tensor& o) {
        accumulate(o.node->parents[0], *o.grad);
        const Tensor& pb = o.node->parents[1];
        if (pb.grad) {
            for (std::size_t i = 0; i < o.grad->size(); ++i) (*pb.grad)[i] -= (*o.grad)[i];
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const bool track = tracked(a) || tracked(b);
    Tensor out = make_result(a.shape, track);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
    attach(out, {a, b}, [](const Tensor& o) {
        const Tensor& pa = o.node->parents[0];
        const Tensor& pb = o.node->parents[1];
        const std::size_t n2 = o.grad->size();
        if (pa.grad) {
            for (std::size_t i = 0; i < n2; ++i) (*pa.grad)[i] += (*o.grad)[i] * (*pb.data)[i];
        }
        if (pb.grad) {
            for (std::size_t i = 0; i < n2; ++i) (*pb.grad)[i] += (*o.grad)[i] * (*pa.data)[i];
        }
    });
    return out;
}

Tensor scalar_mul(const Tensor& a, double c) {
    Tensor out = make_result(a.shape, tracked(a));
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = c * (*a.data)[i];
    attach(out, {a}, [c](const Tensor& o) {
        const Tensor& pa = o.node->parents[0];
        if (pa.grad) {
            for (std::size_t i = 0; i < o.grad->size(); ++i) (*pa.grad)[i] += c * (*o.grad)[i];
        }
    });
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out = make_result(a.shape, tracked(a));
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] + c;
    attach(out, {a}, [](const Tensor& o) { accumulate(o.node->parents[0], *o.grad); });
    return out;
}

Tensor neg(const Tensor& a) { return scalar_mul(a, -1.0); }

Tensor tanh(const Tensor& a) {
    Tensor out = make_result(a.shape, tracked(a));
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = std::tanh((*a.data)[i]);
    attach(out, {a}, [](const Tensor& o) {
        const Tensor& pa = o.node->parents[0];
        if (!pa.grad) return;
        for (std::size_t i = 0; i < o.grad->size(); ++i) {
            const double y = (*o.data)[i];
            (*pa.grad)[i] += (*o.grad)[i] * (1.0 - y * y);
        }
    });
    return out;
}

Tensor exp(const Tensor& a) {
    Tensor out = make_result(a.shape, tracked(a));
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = std::exp((*a.data)[i]);
    attach(out, {a}, [](const Tensor& o) {
        const Tensor& pa = o.node->parents[0];
        if (!pa.grad) return;
        for (std::size_t i = 0; i < o.grad->size(); ++i) {
            (*pa.grad)[i] += (*o.grad)[i] * (*o.data)[i];
        }
    });
    return out;
}

Tensor log(const Tensor& a) {
    Tensor out = make_result(a.shape, tracked(a));
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (*a.data)[i];
        if (x <= 0.0) throw DomainError("log: nonpositive input");
        (*out.data)[i] = std::log(x);
    }
    attach(out, {a}, [](const Tensor& o) {
        const Tensor& pa = o.node->parents[0];
        if (!pa.grad) return;
        for (std::size_t i = 0; i < o.grad->size(); ++i) {
            (*pa.grad)[i] += (*o.grad)[i] / (*pa.data)[i];
        }
    });
    return out;
}

Tensor clip(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw ShapeError("clip: lo > hi");
    Tensor out = make_result(a.shape, tracked(a));
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = std::clamp((*a.data)[i], lo, hi);
    attach(out, {a}, [lo, hi](const Tensor& o) {
        const Tensor& pa = o.node->parents[0];
        if (!pa.grad) return;
        for (std::size_t i = 0; i < o.grad->size(); ++i) {
            const double x = (*pa.data)[i];
            if (x >= lo && x <= hi) (*pa.grad)[i] += (*o.grad)[i];
        }
    });
    return out;
}

Tensor min_elem(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "min_elem");
    const bool track = tracked(a) || tracked(b);
    Tensor out = make_result(a.shape, track);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        (*out.data)[i] = std::min((*a.data)[i], (*b.data)[i]);
    }
    attach(out, {a, b}, [](const Tensor& o) {
        const Tensor& pa = o.node->parents[0];
        const Tensor& pb = o.node->parents[1];
        for (std::size_t i = 0; i < o.grad->size(); ++i) {
            // Ties route to the first operand.
            if ((*pa.data)[i] <= (*pb.data)[i]) {
                if (pa.grad) (*pa.grad)[i] += (*o.grad)[i];
            } else if (pb.grad) {
                (*pb.grad)[i] += (*o.grad)[i];
            }
        }
    });
    return out;
}

Tensor sum(const Tensor& a) {
    Tensor out = make_result({1}, tracked(a));
    double s = 0.0;
    for (double v : *a.data) s += v;
    (*out.data)[0] = s;
    attach(out, {a}, [](const Tensor& o) {
        const Tensor& pa = o.node->parents[0];
        if (!pa.grad) return;
        const double g = (*o.grad)[0];
        for (double& pg : *pa.grad) pg += g;
    });
    return out;
}

Tensor add_n(std::span<const Tensor> terms) {
    if (terms.empty()) throw ShapeError("add_n: no terms");
    bool track = false;
    for (const Tensor& t : terms) {
        require_same_shape(terms[0], t, "add_n");
        track = track || tracked(t);
    }
    Tensor out = make_result(terms[0].shape, track);
    const std::size_t n = out.numel();
    for (const Tensor& t : terms) {
        for (std::size_t i = 0; i < n; ++i) (*out.data)[i] += (*t.data)[i];
    }
    attach(out, std::vector<Tensor>(terms.begin(), terms.end()), [](const Tensor& o) {
        for (const Tensor& p : o.node->parents) accumulate(p, *o.grad);
    });
    return out;
}

Tensor pick(const Tensor& v, int index) {
    if (v.shape.size() != 1) throw ShapeError("pick: expected 1-D tensor");
    if (index < 0 || index >= v.shape[0]) throw ShapeError("pick: index out of range");
    Tensor out = make_result({1}, tracked(v));
    (*out.data)[0] = v.at(index);
    attach(out, {v}, [index](const Tensor& o) {
        const Tensor& pv = o.node->parents[0];
        if (pv.grad) (*pv.grad)[static_cast<std::size_t>(index)] += (*o.grad)[0];
    });
    return out;
}

Tensor row(const Tensor& m, int r) {
    if (m.shape.size() != 2) throw ShapeError("row: expected 2-D tensor");
    if (r < 0 || r >= m.shape[0]) throw ShapeError("row: index out of range");
    const int cols = m.shape[1];
    Tensor out = make_result({cols}, tracked(m));
    const std::size_t base = static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
    for (int c = 0; c < cols; ++c) (*out.data)[static_cast<std::size_t>(c)] = (*m.data)[base + static_cast<std::size_t>(c)];
    attach(out, {m}, [r, cols](const Tensor& o) {
        const Tensor& pm = o.node->parents[0];
        if (!pm.grad) return;
        const std::size_t b = static_cast<std::size_t>(r) * static_cast<std::size_t>(cols);
        for (int c = 0; c < cols; ++c) {
            (*pm.grad)[b + static_cast<std::size_t>(c)] += (*o.grad)[static_cast<std::size_t>(c)];
        }
    });
    return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 1 || b.shape.size() != 1) throw ShapeError("concat: expected 1-D tensors");
    const int na = a.shape[0];
    const int nb = b.shape[0];
    const bool track = tracked(a) || tracked(b);
    Tensor out = make_result({na + nb}, track);
    std::copy(a.data->begin(), a.data->end(), out.data->begin());
    std::copy(b.data->begin(), b.data->end(), out.data->begin() + na);
    attach(out, {a, b}, [na, nb](const Tensor& o) {
        const Tensor& pa = o.node->parents[0];
        const Tensor& pb = o.node->parents[1];
        if (pa.grad) {
            for (int i = 0; i < na; ++i) (*pa.grad)[static_cast<std::size_t>(i)] += (*o.grad)[static_cast<std::size_t>(i)];
        }
        if (pb.grad) {
            for (int i = 0; i < nb; ++i) {
                (*pb.grad)[static_cast<std::size_t>(i)] += (*o.grad)[static_cast<std::size_t>(na + i)];
            }
        }
    });
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2) throw ShapeError("matmul: expected 2-D tensors");
    if (a.shape[1] != b.shape[0]) throw ShapeError("matmul: inner dimensions disagree");
    const int m = a.shape[0];
    const int k = a.shape[1];
    const int n = b.shape[1];
    const bool track = tracked(a) || tracked(b);
    Tensor out = make_result({m, n}, track);
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = a.at(i, p);
            for (int j = 0; j < n; ++j) {
                (*out.data)[static_cast<std::size_t>(i) * n + j] += av * b.at(p, j);
            }
        }
    }
    attach(out, {a, b}, [m, k, n](const Tensor& o) {
        const Tensor& pa = o.node->parents[0];
        const Tensor& pb = o.node->parents[1];
        if (pa.grad) {
            for (int i = 0; i < m; ++i) {
                for (int p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) {
                        s += (*o.grad)[static_cast<std::size_t>(i) * n + j] * pb.at(p, j);
                    }
                    (*pa.grad)[static_cast<std::size_t>(i) * k + p] += s;
                }
            }
        }
        if (pb.grad) {
            for (int p = 0; p < k; ++p) {
                for (int j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < m; ++i) {
                        s += pa.at(i, p) * (*o.grad)[static_cast<std::size_t>(i) * n + j];
                    }
                    (*pb.grad)[static_cast<std::size_t>(p) * n + j] += s;
                }
            }
        }
    });
    return out;
}

Tensor vec_mat(const Tensor& v, const Tensor& m) {
    if (v.shape.size() != 1 || m.shape.size() != 2) throw ShapeError("vec_mat: expected 1-D by 2-D");
    if (v.shape[0] != m.shape[0]) throw ShapeError("vec_mat: inner dimensions disagree");
    const int k = m.shape[0];
    const int n = m.shape[1];
    const bool track = tracked(v) || tracked(m);
    Tensor out = make_result({n}, track);
    for (int i = 0; i < k; ++i) {
        const double vi = v.at(i);
        for (int j = 0; j < n; ++j) (*out.data)[static_cast<std::size_t>(j)] += vi * m.at(i, j);
    }
    attach(out, {v, m}, [k, n](const Tensor& o) {
        const Tensor& pv = o.node->parents[0];
        const Tensor& pm = o.node->parents[1];
        if (pv.grad) {
            for (int i = 0; i < k; ++i) {
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += (*o.grad)[static_cast<std::size_t>(j)] * pm.at(i, j);
                (*pv.grad)[static_cast<std::size_t>(i)] += s;
            }
        }
        if (pm.grad) {
            for (int i = 0; i < k; ++i) {
                const double vi = pv.at(i);
                for (int j = 0; j < n; ++j) {
                    (*pm.grad)[static_cast<std::size_t>(i) * n + j] += vi * (*o.grad)[static_cast<std::size_t>(j)];
                }
            }
        }
    });
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (b.shape.size() != 1 || w.shape.size() != 2 || b.shape[0] != w.shape[1]) {
        throw ShapeError("linear: bias shape does not match weight columns");
    }
    return add(vec_mat(x, w), b);
}

Tensor softmax(const Tensor& z) {
    if (z.shape.size() != 1 || z.shape[0] < 1) throw ShapeError("softmax: expected nonempty 1-D tensor");
    const int n = z.shape[0];
    Tensor out = make_result({n}, tracked(z));
    const double m = *std::max_element(z.data->begin(), z.data->end());
    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = std::exp(z.at(i) - m);
        (*out.data)[static_cast<std::size_t>(i)] = e;
        denom += e;
    }
    for (int i = 0; i < n; ++i) (*out.data)[static_cast<std::size_t>(i)] /= denom;
    attach(out, {z}, [n](const Tensor& o) {
        const Tensor& pz = o.node->parents[0];
        if (!pz.grad) return;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += (*o.grad)[static_cast<std::size_t>(j)] * (*o.data)[static_cast<std::size_t>(j)];
        for (int i = 0; i < n; ++i) {
            const double yi = (*o.data)[static_cast<std::size_t>(i)];
            (*pz.grad)[static_cast<std::size_t>(i)] += yi * ((*o.grad)[static_cast<std::size_t>(i)] - dot);
        }
    });
    return out;
}

Tensor log_softmax(const Tensor& z) {
    if (z.shape.size() != 1 || z.shape[0] < 1) throw ShapeError("log_softmax: expected nonempty 1-D tensor");
    const int n = z.shape[0];
    Tensor out = make_result({n}, tracked(z));
    const double m = *std::max_element(z.data->begin(), z.data->end());
    double denom = 0.0;
    for (int i = 0; i < n; ++i) denom += std::exp(z.at(i) - m);
    const double lse = m + std::log(denom);
    for (int i = 0; i < n; ++i) (*out.data)[static_cast<std::size_t>(i)] = z.at(i) - lse;
    attach(out, {z}, [n](const Tensor& o) {
        const Tensor& pz = o.node->parents[0];
        if (!pz.grad) return;
        double gsum = 0.0;
        for (int j = 0; j < n; ++j) gsum += (*o.grad)[static_cast<std::size_t>(j)];
        for (int i = 0; i < n; ++i) {
            const double pi = std::exp((*o.data)[static_cast<std::size_t>(i)]);
            (*pz.grad)[static_cast<std::size_t>(i)] += (*o.grad)[static_cast<std::size_t>(i)] - pi * gsum;
        }
    });
    return out;
}

void assert_finite(const Tensor& t, const char* what) {
    for (double v : *t.data) {
        if (!std::isfinite(v)) throw DomainError(std::string("non-finite value in ") + what);
    }
}

}  // namespace logitmix
