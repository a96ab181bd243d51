#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "atom/rng.hpp"
#include "atom/tensor.hpp"

namespace atom::ad {

struct Node;

// Handle to a node in the dynamically built computation graph.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    const Tensor& val() const;
    Tensor& val();
    Tensor& grad();
    bool requires_grad() const;
    bool valid() const { return node_ != nullptr; }

    float scalar() const { return val().v.at(0); }

    std::shared_ptr<Node> node_;
};

// --- primitives -------------------------------------------------------------

Var matmul(const Var& a, const Var& b);     // [n,k] x [k,m] -> [n,m]
Var matmul_nt(const Var& a, const Var& b);  // [n,k] x [m,k]^T -> [n,m]
Var add(const Var& a, const Var& b);        // same shape, or b a row vector broadcast
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, float s);
Var concat(const std::vector<Var>& parts, int axis);  // axis 0 or 1, 2-D (1-D treated as [1,n])
Var slice_rows(const Var& a, int start, int len);
Var reshape(const Var& a, std::vector<int> shape);  // same element count
Var tanh_(const Var& a);
Var sigmoid_(const Var& a);
Var relu_(const Var& a);
Var softmax(const Var& a);  // over the last axis
Var dropout(const Var& a, float p, bool training, atom::Rng& rng);  // inverted dropout
Var embedding_lookup(const Var& table, const std::vector<int>& indices);  // -> [n, dim]
Var sum(const Var& a);       // all elements -> scalar
Var mean(const Var& a);      // all elements -> scalar
Var mean_rows(const Var& a);                              // [n,m] -> [1,m]
Var masked_mean_rows(const Var& a, const std::vector<bool>& mask);  // mean over valid rows
Var max_pool_2d(const Var& a, int kh, int kw, int sh, int sw);  // [C,H,W]
// 'same' zero padding when pad_same, else valid. kernels [Cout,Cin,kh,kw], bias [Cout].
Var conv_2d(const Var& a, const Var& kernels, const Var& bias, bool pad_same);
Var cross_entropy_with_logits(const Var& logits, int target);  // fused log-softmax, scalar
Var mse(const Var& pred, const Var& target);

void backward(const Var& root);  // root must be scalar

// log-softmax over a 1-D logits vector, forward only (for beam scoring)
std::vector<float> log_softmax_values(const Tensor& logits);

// --- parameters -------------------------------------------------------------

struct AdamState {
    Tensor m;
    Tensor v;
};

// Named trainable parameters plus per-parameter Adam state.
class ParamStore {
public:
    Var add(const std::string& name, Tensor init);
    Var get(const std::string& name) const;
    bool has(const std::string& name) const;

    void zero_grad();
    void adam_step(float lr = 1e-4f, float beta1 = 0.9f, float beta2 = 0.999f,
                   float eps = 1e-8f);

    void save(const std::string& path) const;
    void load(const std::string& path);

    // FNV-1a over names, shapes and payload bytes; used by artifact manifests.
    std::uint64_t content_hash() const;

    std::map<std::string, Var>& params() { return params_; }
    const std::map<std::string, Var>& params() const { return params_; }
    long step_count() const { return step_; }

    // Deep copies of parameter values (best-checkpoint bookkeeping).
    std::map<std::string, Tensor> snapshot() const;
    void restore(const std::map<std::string, Tensor>& snap);

private:
    std::map<std::string, Var> params_;
    std::map<std::string, AdamState> adam_;
    long step_ = 0;
};

Tensor xavier_uniform(int rows, int cols, atom::Rng& rng);
Tensor uniform_init(std::vector<int> shape, float lo, float hi, atom::Rng& rng);

// --- gradient checking ------------------------------------------------------

struct GradCheckEntry {
    std::string param;
    std::size_t index;
    double analytic;
    double numeric;
    double rel_err;
};

struct GradCheckReport {
    int checked = 0;
    double max_rel_err = 0.0;
    std::vector<GradCheckEntry> failures;
    bool ok() const { return failures.empty(); }
};

// f rebuilds the scalar loss from the current parameter values; it must be
// deterministic (dropout disabled). Central differences at eps, relative
// error |a-b|/max(|a|,|b|,1e-8) compared against tol_rel.
// atol absorbs float32 forward-evaluation noise: central differences cannot
// resolve gradients below roughly ulp(loss)/eps.
GradCheckReport grad_check(const std::function<Var()>& f, ParamStore& store,
                           float eps = 1e-3f, double tol_rel = 1e-2,
                           std::size_t max_entries_per_param = 0,
                           atom::Rng* sampler = nullptr, double atol = 2e-4);

}  // namespace atom::ad
