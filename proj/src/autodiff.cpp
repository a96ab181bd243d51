#include "atom/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_set>

#include "atom/errors.hpp"

namespace atom::ad {

struct Node {
    Tensor val;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (!grad_alloc) {
            grad = Tensor(val.shape);
            grad_alloc = true;
        }
    }
};

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->val = std::move(value);
    node_->requires_grad = requires_grad;
    if (requires_grad) node_->ensure_grad();
}

const Tensor& Var::val() const { return node_->val; }
Tensor& Var::val() { return node_->val; }
Tensor& Var::grad() {
    node_->ensure_grad();
    return node_->grad;
}
bool Var::requires_grad() const { return node_ && node_->requires_grad; }

namespace {

Var make_node(Tensor val, std::vector<Var> parents,
              std::function<void(Node&)> backprop) {
    Var out(std::move(val));
    for (const auto& p : parents) {
        out.node_->parents.push_back(p.node_);
        if (p.requires_grad()) out.node_->requires_grad = true;
    }
    if (out.node_->requires_grad) out.node_->backprop = std::move(backprop);
    return out;
}

void accumulate(const std::shared_ptr<Node>& n, const Tensor& delta) {
    if (!n->requires_grad) return;
    n->ensure_grad();
    for (std::size_t i = 0; i < delta.v.size(); ++i) n->grad.v[i] += delta.v[i];
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeMismatch(std::string(op) + ": " + a.shape_str() + " vs " + b.shape_str());
}

// view a 1-D tensor as a single-row matrix
std::pair<int, int> as_2d(const Tensor& t) {
    if (t.rank() == 1) return {1, t.shape[0]};
    return {t.shape[0], t.shape[1]};
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    auto [n, k] = as_2d(a.val());
    auto [k2, m] = as_2d(b.val());
    if (k != k2) shape_fail("matmul", a.val(), b.val());
    Tensor out({n, m});
    const float* A = a.val().v.data();
    const float* B = b.val().v.data();
    float* C = out.v.data();
    for (int i = 0; i < n; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const float aik = A[i * k + kk];
            if (aik == 0.0f) continue;
            const float* Brow = B + kk * m;
            float* Crow = C + i * m;
            for (int j = 0; j < m; ++j) Crow[j] += aik * Brow[j];
        }
    }
    int N = n, K = k, M = m;
    return make_node(std::move(out), {a, b}, [a, b, N, K, M](Node& self) {
        const float* G = self.grad.v.data();
        if (a.requires_grad()) {
            Tensor da(a.val().shape);
            const float* B = b.val().v.data();
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < M; ++j) {
                    const float g = G[i * M + j];
                    if (g == 0.0f) continue;
                    for (int kk = 0; kk < K; ++kk) da.v[i * K + kk] += g * B[kk * M + j];
                }
            accumulate(a.node_, da);
        }
        if (b.requires_grad()) {
            Tensor db(b.val().shape);
            const float* A = a.val().v.data();
            for (int i = 0; i < N; ++i)
                for (int kk = 0; kk < K; ++kk) {
                    const float aik = A[i * K + kk];
                    if (aik == 0.0f) continue;
                    for (int j = 0; j < M; ++j) db.v[kk * M + j] += aik * G[i * M + j];
                }
            accumulate(b.node_, db);
        }
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    auto [n, k] = as_2d(a.val());
    auto [m, k2] = as_2d(b.val());
    if (k != k2) shape_fail("matmul_nt", a.val(), b.val());
    Tensor out({n, m});
    const float* A = a.val().v.data();
    const float* B = b.val().v.data();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            float s = 0.0f;
            const float* Ar = A + i * k;
            const float* Br = B + j * k;
            for (int kk = 0; kk < k; ++kk) s += Ar[kk] * Br[kk];
            out.v[i * m + j] = s;
        }
    int N = n, K = k, M = m;
    return make_node(std::move(out), {a, b}, [a, b, N, K, M](Node& self) {
        const float* G = self.grad.v.data();
        if (a.requires_grad()) {
            Tensor da(a.val().shape);
            const float* B = b.val().v.data();
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < M; ++j) {
                    const float g = G[i * M + j];
                    if (g == 0.0f) continue;
                    for (int kk = 0; kk < K; ++kk) da.v[i * K + kk] += g * B[j * K + kk];
                }
            accumulate(a.node_, da);
        }
        if (b.requires_grad()) {
            Tensor db(b.val().shape);
            const float* A = a.val().v.data();
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < M; ++j) {
                    const float g = G[i * M + j];
                    if (g == 0.0f) continue;
                    for (int kk = 0; kk < K; ++kk) db.v[j * K + kk] += g * A[i * K + kk];
                }
            accumulate(b.node_, db);
        }
    });
}

Var add(const Var& a, const Var& b) {
    if (same_shape(a.val(), b.val())) {
        Tensor out = a.val();
        for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.val().v[i];
        return make_node(std::move(out), {a, b}, [a, b](Node& self) {
            accumulate(a.node_, self.grad);
            accumulate(b.node_, self.grad);
        });
    }
    // row-vector broadcast: [n,m] + [m] (or [1,m])
    auto [n, m] = as_2d(a.val());
    auto [bn, bm] = as_2d(b.val());
    if (bn != 1 || bm != m) shape_fail("add", a.val(), b.val());
    Tensor out = a.val();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.v[i * m + j] += b.val().v[j];
    int N = n, M = m;
    return make_node(std::move(out), {a, b}, [a, b, N, M](Node& self) {
        accumulate(a.node_, self.grad);
        if (b.requires_grad()) {
            Tensor db(b.val().shape);
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < M; ++j) db.v[j] += self.grad.v[i * M + j];
            accumulate(b.node_, db);
        }
    });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0f)); }

Var mul(const Var& a, const Var& b) {
    if (!same_shape(a.val(), b.val())) shape_fail("mul", a.val(), b.val());
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.val().v[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        if (a.requires_grad()) {
            Tensor da(a.val().shape);
            for (std::size_t i = 0; i < da.v.size(); ++i)
                da.v[i] = self.grad.v[i] * b.val().v[i];
            accumulate(a.node_, da);
        }
        if (b.requires_grad()) {
            Tensor db(b.val().shape);
            for (std::size_t i = 0; i < db.v.size(); ++i)
                db.v[i] = self.grad.v[i] * a.val().v[i];
            accumulate(b.node_, db);
        }
    });
}

Var scale(const Var& a, float s) {
    Tensor out = a.val();
    for (float& x : out.v) x *= s;
    return make_node(std::move(out), {a}, [a, s](Node& self) {
        if (!a.requires_grad()) return;
        Tensor da(a.val().shape);
        for (std::size_t i = 0; i < da.v.size(); ++i) da.v[i] = self.grad.v[i] * s;
        accumulate(a.node_, da);
    });
}

Var concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw ShapeMismatch("concat: no inputs");
    std::vector<std::pair<int, int>> dims;
    for (const auto& p : parts) dims.push_back(as_2d(p.val()));
    int rows = 0, cols = 0;
    if (axis == 0) {
        cols = dims[0].second;
        for (auto [r, c] : dims) {
            if (c != cols) throw ShapeMismatch("concat axis 0: column mismatch");
            rows += r;
        }
    } else {
        rows = dims[0].first;
        for (auto [r, c] : dims) {
            if (r != rows) throw ShapeMismatch("concat axis 1: row mismatch");
            cols += c;
        }
    }
    Tensor out({rows, cols});
    if (axis == 0) {
        std::size_t off = 0;
        for (const auto& p : parts) {
            std::copy(p.val().v.begin(), p.val().v.end(), out.v.begin() + off);
            off += p.val().v.size();
        }
    } else {
        int coff = 0;
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            auto [r, c] = dims[pi];
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    out.v[i * cols + coff + j] = parts[pi].val().v[i * c + j];
            coff += c;
        }
    }
    std::vector<Var> par = parts;
    return make_node(std::move(out), par, [par, dims, axis, rows, cols](Node& self) {
        if (axis == 0) {
            std::size_t off = 0;
            for (const auto& p : par) {
                if (p.requires_grad()) {
                    Tensor d(p.val().shape);
                    std::copy(self.grad.v.begin() + off,
                              self.grad.v.begin() + off + d.v.size(), d.v.begin());
                    accumulate(p.node_, d);
                }
                off += p.val().v.size();
            }
        } else {
            int coff = 0;
            for (std::size_t pi = 0; pi < par.size(); ++pi) {
                auto [r, c] = dims[pi];
                if (par[pi].requires_grad()) {
                    Tensor d(par[pi].val().shape);
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < c; ++j)
                            d.v[i * c + j] = self.grad.v[i * cols + coff + j];
                    accumulate(par[pi].node_, d);
                }
                coff += c;
            }
        }
    });
}

Var slice_rows(const Var& a, int start, int len) {
    auto [n, m] = as_2d(a.val());
    if (start < 0 || len < 0 || start + len > n) throw ShapeMismatch("slice_rows: out of range");
    Tensor out({len, m});
    std::copy(a.val().v.begin() + static_cast<std::size_t>(start) * m,
              a.val().v.begin() + static_cast<std::size_t>(start + len) * m, out.v.begin());
    int M = m;
    return make_node(std::move(out), {a}, [a, start, len, M](Node& self) {
        if (!a.requires_grad()) return;
        Tensor da(a.val().shape);
        std::copy(self.grad.v.begin(), self.grad.v.end(),
                  da.v.begin() + static_cast<std::size_t>(start) * M);
        accumulate(a.node_, da);
    });
}

Var reshape(const Var& a, std::vector<int> shape) {
    if (Tensor::numel(shape) != a.val().size())
        throw ShapeMismatch("reshape: element count mismatch for " + a.val().shape_str());
    Tensor out(std::move(shape), a.val().v);
    return make_node(std::move(out), {a}, [a](Node& self) {
        if (!a.requires_grad()) return;
        Tensor da(a.val().shape, self.grad.v);
        accumulate(a.node_, da);
    });
}

namespace {

template <typename F, typename DF>
Var unary_op(const Var& a, F f, DF df) {
    Tensor out = a.val();
    for (float& x : out.v) x = f(x);
    return make_node(std::move(out), {a}, [a, df](Node& self) {
        if (!a.requires_grad()) return;
        Tensor da(a.val().shape);
        for (std::size_t i = 0; i < da.v.size(); ++i)
            da.v[i] = self.grad.v[i] * df(a.val().v[i], self.val.v[i]);
        accumulate(a.node_, da);
    });
}

}  // namespace

Var tanh_(const Var& a) {
    return unary_op(a, [](float x) { return std::tanh(x); },
                    [](float, float y) { return 1.0f - y * y; });
}

Var sigmoid_(const Var& a) {
    return unary_op(a, [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
                    [](float, float y) { return y * (1.0f - y); });
}

Var relu_(const Var& a) {
    return unary_op(a, [](float x) { return x > 0.0f ? x : 0.0f; },
                    [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Var softmax(const Var& a) {
    auto [n, m] = as_2d(a.val());
    Tensor out = a.val();
    for (int i = 0; i < n; ++i) {
        float* row = out.v.data() + static_cast<std::size_t>(i) * m;
        float mx = row[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        float sum = 0.0f;
        for (int j = 0; j < m; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int j = 0; j < m; ++j) row[j] /= sum;
    }
    int N = n, M = m;
    return make_node(std::move(out), {a}, [a, N, M](Node& self) {
        if (!a.requires_grad()) return;
        Tensor da(a.val().shape);
        for (int i = 0; i < N; ++i) {
            const float* s = self.val.v.data() + static_cast<std::size_t>(i) * M;
            const float* g = self.grad.v.data() + static_cast<std::size_t>(i) * M;
            float dot = 0.0f;
            for (int j = 0; j < M; ++j) dot += s[j] * g[j];
            for (int j = 0; j < M; ++j)
                da.v[static_cast<std::size_t>(i) * M + j] = s[j] * (g[j] - dot);
        }
        accumulate(a.node_, da);
    });
}

Var dropout(const Var& a, float p, bool training, atom::Rng& rng) {
    if (!training || p <= 0.0f) return a;
    const float keep = 1.0f - p;
    Tensor mask(a.val().shape);
    for (float& m : mask.v) m = (rng.next_float() < p) ? 0.0f : 1.0f / keep;
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= mask.v[i];
    auto mask_ptr = std::make_shared<Tensor>(std::move(mask));
    return make_node(std::move(out), {a}, [a, mask_ptr](Node& self) {
        if (!a.requires_grad()) return;
        Tensor da(a.val().shape);
        for (std::size_t i = 0; i < da.v.size(); ++i)
            da.v[i] = self.grad.v[i] * mask_ptr->v[i];
        accumulate(a.node_, da);
    });
}

Var embedding_lookup(const Var& table, const std::vector<int>& indices) {
    auto [vocab, dim] = as_2d(table.val());
    Tensor out({static_cast<int>(indices.size()), dim});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        int idx = indices[i];
        if (idx < 0 || idx >= vocab)
            throw ShapeMismatch("embedding_lookup: index " + std::to_string(idx) +
                                " out of range [0," + std::to_string(vocab) + ")");
        std::copy(table.val().v.begin() + static_cast<std::size_t>(idx) * dim,
                  table.val().v.begin() + static_cast<std::size_t>(idx + 1) * dim,
                  out.v.begin() + i * dim);
    }
    int D = dim;
    return make_node(std::move(out), {table}, [table, indices, D](Node& self) {
        if (!table.requires_grad()) return;
        Tensor dt(table.val().shape);
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (int j = 0; j < D; ++j)
                dt.v[static_cast<std::size_t>(indices[i]) * D + j] +=
                    self.grad.v[i * D + j];
        accumulate(table.node_, dt);
    });
}

Var sum(const Var& a) {
    float s = 0.0f;
    for (float x : a.val().v) s += x;
    return make_node(Tensor::scalar(s), {a}, [a](Node& self) {
        if (!a.requires_grad()) return;
        accumulate(a.node_, Tensor::full(a.val().shape, self.grad.v[0]));
    });
}

Var mean(const Var& a) {
    const float n = static_cast<float>(a.val().size());
    return scale(sum(a), 1.0f / n);
}

Var mean_rows(const Var& a) {
    auto [n, m] = as_2d(a.val());
    std::vector<bool> mask(static_cast<std::size_t>(n), true);
    return masked_mean_rows(a, mask);
}

Var masked_mean_rows(const Var& a, const std::vector<bool>& mask) {
    auto [n, m] = as_2d(a.val());
    if (static_cast<int>(mask.size()) != n) throw ShapeMismatch("masked_mean_rows: mask size");
    int valid = 0;
    for (bool b : mask)
        if (b) ++valid;
    if (valid == 0) throw ShapeMismatch("masked_mean_rows: empty mask");
    Tensor out({1, m});
    for (int i = 0; i < n; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        for (int j = 0; j < m; ++j) out.v[j] += a.val().v[static_cast<std::size_t>(i) * m + j];
    }
    for (float& x : out.v) x /= static_cast<float>(valid);
    int N = n, M = m, V = valid;
    return make_node(std::move(out), {a}, [a, mask, N, M, V](Node& self) {
        if (!a.requires_grad()) return;
        Tensor da(a.val().shape);
        for (int i = 0; i < N; ++i) {
            if (!mask[static_cast<std::size_t>(i)]) continue;
            for (int j = 0; j < M; ++j)
                da.v[static_cast<std::size_t>(i) * M + j] = self.grad.v[j] / static_cast<float>(V);
        }
        accumulate(a.node_, da);
    });
}

namespace {

// normalize [H,W] to [1,H,W]
std::array<int, 3> as_3d(const Tensor& t) {
    if (t.rank() == 2) return {1, t.shape[0], t.shape[1]};
    if (t.rank() == 3) return {t.shape[0], t.shape[1], t.shape[2]};
    throw ShapeMismatch("expected 2-D or 3-D tensor, got " + t.shape_str());
}

}  // namespace

Var max_pool_2d(const Var& a, int kh, int kw, int sh, int sw) {
    auto [C, H, W] = as_3d(a.val());
    const int OH = (H - kh) / sh + 1;
    const int OW = (W - kw) / sw + 1;
    if (OH <= 0 || OW <= 0) throw ShapeMismatch("max_pool_2d: kernel larger than input");
    Tensor out({C, OH, OW});
    auto argmax = std::make_shared<std::vector<int>>(out.v.size());
    for (int c = 0; c < C; ++c)
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                float best = -std::numeric_limits<float>::infinity();
                int best_idx = -1;
                for (int m = 0; m < kh; ++m)
                    for (int n2 = 0; n2 < kw; ++n2) {
                        int h = oh * sh + m, w = ow * sw + n2;
                        int idx = (c * H + h) * W + w;
                        if (a.val().v[static_cast<std::size_t>(idx)] > best) {
                            best = a.val().v[static_cast<std::size_t>(idx)];
                            best_idx = idx;
                        }
                    }
                int oidx = (c * OH + oh) * OW + ow;
                out.v[static_cast<std::size_t>(oidx)] = best;
                (*argmax)[static_cast<std::size_t>(oidx)] = best_idx;
            }
    return make_node(std::move(out), {a}, [a, argmax](Node& self) {
        if (!a.requires_grad()) return;
        Tensor da(a.val().shape);
        for (std::size_t i = 0; i < self.grad.v.size(); ++i)
            da.v[static_cast<std::size_t>((*argmax)[i])] += self.grad.v[i];
        accumulate(a.node_, da);
    });
}

Var conv_2d(const Var& a, const Var& kernels, const Var& bias, bool pad_same) {
    auto [Cin, H, W] = as_3d(a.val());
    const auto& ks = kernels.val().shape;
    if (kernels.val().rank() != 4 || ks[1] != Cin)
        throw ShapeMismatch("conv_2d: kernels must be [Cout,Cin,kh,kw] matching input channels");
    const int Cout = ks[0], kh = ks[2], kw = ks[3];
    if (static_cast<int>(bias.val().size()) != Cout)
        throw ShapeMismatch("conv_2d: bias size must equal Cout");
    const int ph = pad_same ? (kh - 1) / 2 : 0;
    const int pw = pad_same ? (kw - 1) / 2 : 0;
    const int OH = pad_same ? H : H - kh + 1;
    const int OW = pad_same ? W : W - kw + 1;
    if (OH <= 0 || OW <= 0) throw ShapeMismatch("conv_2d: kernel larger than input");
    Tensor out({Cout, OH, OW});
    auto in_at = [&](int c, int h, int w) -> float {
        if (h < 0 || h >= H || w < 0 || w >= W) return 0.0f;
        return a.val().v[static_cast<std::size_t>((c * H + h) * W + w)];
    };
    for (int co = 0; co < Cout; ++co)
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                float s = bias.val().v[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < Cin; ++ci)
                    for (int m = 0; m < kh; ++m)
                        for (int n2 = 0; n2 < kw; ++n2)
                            s += kernels.val().v[static_cast<std::size_t>(
                                     ((co * Cin + ci) * kh + m) * kw + n2)] *
                                 in_at(ci, oh - ph + m, ow - pw + n2);
                out.v[static_cast<std::size_t>((co * OH + oh) * OW + ow)] = s;
            }
    int CinN = Cin, HN = H, WN = W, CoutN = Cout, khN = kh, kwN = kw, phN = ph, pwN = pw,
        OHN = OH, OWN = OW;
    return make_node(std::move(out), {a, kernels, bias},
                     [a, kernels, bias, CinN, HN, WN, CoutN, khN, kwN, phN, pwN, OHN,
                      OWN](Node& self) {
        Tensor da(a.val().shape), dk(kernels.val().shape), db(bias.val().shape);
        for (int co = 0; co < CoutN; ++co)
            for (int oh = 0; oh < OHN; ++oh)
                for (int ow = 0; ow < OWN; ++ow) {
                    const float g =
                        self.grad.v[static_cast<std::size_t>((co * OHN + oh) * OWN + ow)];
                    if (g == 0.0f) continue;
                    db.v[static_cast<std::size_t>(co)] += g;
                    for (int ci = 0; ci < CinN; ++ci)
                        for (int m = 0; m < khN; ++m)
                            for (int n2 = 0; n2 < kwN; ++n2) {
                                int h = oh - phN + m, w = ow - pwN + n2;
                                if (h < 0 || h >= HN || w < 0 || w >= WN) continue;
                                std::size_t kidx = static_cast<std::size_t>(
                                    ((co * CinN + ci) * khN + m) * kwN + n2);
                                std::size_t iidx =
                                    static_cast<std::size_t>((ci * HN + h) * WN + w);
                                dk.v[kidx] += g * a.val().v[iidx];
                                da.v[iidx] += g * kernels.val().v[kidx];
                            }
                }
        accumulate(a.node_, da);
        accumulate(kernels.node_, dk);
        accumulate(bias.node_, db);
    });
}

Var cross_entropy_with_logits(const Var& logits, int target) {
    const Tensor& lv = logits.val();
    const int r = static_cast<int>(lv.size());
    if (target < 0 || target >= r)
        throw ShapeMismatch("cross_entropy_with_logits: target out of range");
    float mx = lv.v[0];
    for (float x : lv.v) mx = std::max(mx, x);
    double se = 0.0;
    for (float x : lv.v) se += std::exp(static_cast<double>(x - mx));
    const double lse = mx + std::log(se);
    const float loss = static_cast<float>(lse - lv.v[static_cast<std::size_t>(target)]);
    return make_node(Tensor::scalar(loss), {logits}, [logits, target, mx, se](Node& self) {
        if (!logits.requires_grad()) return;
        const float g = self.grad.v[0];
        Tensor dl(logits.val().shape);
        for (std::size_t i = 0; i < dl.v.size(); ++i) {
            float p = static_cast<float>(
                std::exp(static_cast<double>(logits.val().v[i] - mx)) / se);
            dl.v[i] = g * (p - (static_cast<int>(i) == target ? 1.0f : 0.0f));
        }
        accumulate(logits.node_, dl);
    });
}

Var mse(const Var& pred, const Var& target) {
    if (!same_shape(pred.val(), target.val())) shape_fail("mse", pred.val(), target.val());
    const std::size_t n = pred.val().size();
    float s = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        const float d = pred.val().v[i] - target.val().v[i];
        s += d * d;
    }
    s /= static_cast<float>(n);
    return make_node(Tensor::scalar(s), {pred, target}, [pred, target, n](Node& self) {
        const float g = self.grad.v[0] * 2.0f / static_cast<float>(n);
        if (pred.requires_grad()) {
            Tensor d(pred.val().shape);
            for (std::size_t i = 0; i < n; ++i)
                d.v[i] = g * (pred.val().v[i] - target.val().v[i]);
            accumulate(pred.node_, d);
        }
        if (target.requires_grad()) {
            Tensor d(target.val().shape);
            for (std::size_t i = 0; i < n; ++i)
                d.v[i] = -g * (pred.val().v[i] - target.val().v[i]);
            accumulate(target.node_, d);
        }
    });
}

void backward(const Var& root) {
    if (root.val().size() != 1) throw ShapeMismatch("backward: root must be scalar");
    // iterative topological order over the requires_grad subgraph
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node_.get(), 0}};
    seen.insert(root.node_.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i].get();
            ++i;
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    root.node_->ensure_grad();
    root.node_->grad.v[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad_alloc) n->backprop(*n);
    }
}

std::vector<float> log_softmax_values(const Tensor& logits) {
    std::vector<float> out(logits.v.size());
    float mx = logits.v[0];
    for (float x : logits.v) mx = std::max(mx, x);
    double se = 0.0;
    for (float x : logits.v) se += std::exp(static_cast<double>(x - mx));
    const double lse = mx + std::log(se);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(logits.v[i] - lse);
    return out;
}

// --- ParamStore -------------------------------------------------------------

Var ParamStore::add(const std::string& name, Tensor init) {
    if (params_.count(name)) throw ConfigMismatch("duplicate parameter name: " + name);
    Var v(std::move(init), /*requires_grad=*/true);
    params_.emplace(name, v);
    adam_.emplace(name, AdamState{Tensor(v.val().shape), Tensor(v.val().shape)});
    return v;
}

Var ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigMismatch("unknown parameter: " + name);
    return it->second;
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) > 0; }

void ParamStore::zero_grad() {
    for (auto& [name, p] : params_) {
        Tensor& g = p.grad();
        std::fill(g.v.begin(), g.v.end(), 0.0f);
    }
}

void ParamStore::adam_step(float lr, float beta1, float beta2, float eps) {
    ++step_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(beta1), static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(beta2), static_cast<double>(step_));
    for (auto& [name, p] : params_) {
        AdamState& st = adam_.at(name);
        Tensor& g = p.grad();
        Tensor& theta = p.val();
        for (std::size_t i = 0; i < theta.v.size(); ++i) {
            st.m.v[i] = beta1 * st.m.v[i] + (1.0f - beta1) * g.v[i];
            st.v.v[i] = beta2 * st.v.v[i] + (1.0f - beta2) * g.v[i] * g.v[i];
            const float mhat = static_cast<float>(st.m.v[i] / bc1);
            const float vhat = static_cast<float>(st.v.v[i] / bc2);
            theta.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        std::fill(g.v.begin(), g.v.end(), 0.0f);
    }
}

namespace {

template <typename T>
void write_raw(std::ostream& os, const T& x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
void read_raw(std::istream& is, T& x) {
    is.read(reinterpret_cast<char*>(&x), sizeof(T));
}

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void ParamStore::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    write_raw(os, kCheckpointVersion);
    write_raw(os, static_cast<std::uint32_t>(params_.size()));
    for (const auto& [name, p] : params_) {
        write_raw(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Tensor& t = p.val();
        write_raw(os, static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape) write_raw(os, static_cast<std::uint32_t>(d));
        os.write(reinterpret_cast<const char*>(t.v.data()),
                 static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    }
    if (!os) throw IoError("checkpoint write failed: " + path);
}

void ParamStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    std::uint32_t version = 0, count = 0;
    read_raw(is, version);
    if (version != kCheckpointVersion)
        throw ConfigMismatch("unsupported checkpoint version " + std::to_string(version));
    read_raw(is, count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = 0;
        read_raw(is, name_len);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        std::uint32_t rank = 0;
        read_raw(is, rank);
        std::vector<int> shape(rank);
        for (auto& d : shape) {
            std::uint32_t u = 0;
            read_raw(is, u);
            d = static_cast<int>(u);
        }
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.v.data()),
                static_cast<std::streamsize>(t.v.size() * sizeof(float)));
        if (!is) throw IoError("truncated checkpoint: " + path);
        auto it = params_.find(name);
        if (it != params_.end()) {
            if (!same_shape(it->second.val(), t))
                throw ConfigMismatch("checkpoint shape mismatch for " + name);
            it->second.val() = std::move(t);
        } else {
            add(name, std::move(t));
        }
    }
}

std::uint64_t ParamStore::content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix_bytes = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& [name, p] : params_) {
        mix_bytes(name.data(), name.size());
        for (int d : p.val().shape) mix_bytes(&d, sizeof(d));
        mix_bytes(p.val().v.data(), p.val().v.size() * sizeof(float));
    }
    return h;
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
    std::map<std::string, Tensor> snap;
    for (const auto& [name, p] : params_) snap.emplace(name, p.val());
    return snap;
}

void ParamStore::restore(const std::map<std::string, Tensor>& snap) {
    for (const auto& [name, t] : snap) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ConfigMismatch("restore: unknown parameter " + name);
        it->second.val() = t;
    }
}

Tensor xavier_uniform(int rows, int cols, atom::Rng& rng) {
    const float bound = std::sqrt(6.0f / static_cast<float>(rows + cols));
    Tensor t({rows, cols});
    for (float& x : t.v) x = rng.uniform(-bound, bound);
    return t;
}

Tensor uniform_init(std::vector<int> shape, float lo, float hi, atom::Rng& rng) {
    Tensor t(std::move(shape));
    for (float& x : t.v) x = rng.uniform(lo, hi);
    return t;
}

GradCheckReport grad_check(const std::function<Var()>& f, ParamStore& store, float eps,
                           double tol_rel, std::size_t max_entries_per_param,
                           atom::Rng* sampler, double atol) {
    GradCheckReport report;
    store.zero_grad();
    Var loss = f();
    backward(loss);
    std::map<std::string, Tensor> analytic;
    for (auto& [name, p] : store.params()) analytic.emplace(name, p.grad());

    for (auto& [name, p] : store.params()) {
        Tensor& theta = p.val();
        std::vector<std::size_t> entries;
        if (max_entries_per_param > 0 && theta.v.size() > max_entries_per_param && sampler) {
            auto idx = sampler->sample_without_replacement(theta.v.size(), max_entries_per_param);
            entries.assign(idx.begin(), idx.end());
        } else {
            entries.resize(theta.v.size());
            for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
        }
        for (std::size_t i : entries) {
            const float orig = theta.v[i];
            theta.v[i] = orig + eps;
            const double fp = static_cast<double>(f().scalar());
            theta.v[i] = orig - eps;
            const double fm = static_cast<double>(f().scalar());
            theta.v[i] = orig;
            const double numeric = (fp - fm) / (2.0 * static_cast<double>(eps));
            const double a = static_cast<double>(analytic.at(name).v[i]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            // below float32 finite-difference resolution: treat as agreement
            if (std::abs(a - numeric) < atol) continue;
            report.max_rel_err = std::max(report.max_rel_err, rel);
            if (rel > tol_rel) report.failures.push_back({name, i, a, numeric, rel});
        }
    }
    return report;
}

}  // namespace atom::ad
