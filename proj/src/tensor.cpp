#include "dfr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace dfr {

namespace {

// Attention maps are multi-megabyte buffers allocated and freed every step;
// keep them on the heap instead of round-tripping through mmap.
struct MallocTuning {
    MallocTuning() {
#ifdef __GLIBC__
        mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
    }
};
const MallocTuning g_malloc_tuning;

}  // namespace

std::int64_t numel_of(const Shape& shape) {
    std::int64_t n = 1;
    for (int extent : shape) {
        if (extent <= 0) throw DimensionError("non-positive extent in shape " + shape_str(shape));
        n *= extent;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << "x";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

struct Tensor::Node {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // sized lazily during backward
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

namespace {

using Node = Tensor::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(Shape shape, std::vector<double> data, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return node;
}

}  // namespace

struct OpAccess {
    static const NodePtr& node(const Tensor& t) {
        if (!t.node_) throw ContractError("operation on an undefined tensor");
        return t.node_;
    }
    static Tensor wrap(NodePtr node) { return Tensor(std::move(node)); }
};

namespace {

const NodePtr& nd(const Tensor& t) { return OpAccess::node(t); }

Tensor result(Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
              std::function<void(Node&)> backprop) {
    auto node = make_node(std::move(shape), std::move(data), false);
    for (const auto& p : parents) {
        if (p->requires_grad) node->requires_grad = true;
    }
    if (node->requires_grad) {
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
    }
    return OpAccess::wrap(std::move(node));
}

void check_same_shape(const char* op, const Node& a, const Node& b) {
    if (a.shape != b.shape) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                             shape_str(b.shape));
    }
}

// C[m,n] = A[m,k] * B[k,n], accumulation over k in ascending order.
void mm(const double* a, const double* b, double* c, int m, int k, int n) {
    std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// Dot product with four independent accumulators; keeps the FMA pipeline
// busy without licensing reassociation globally.
double dot4(const double* x, const double* y, int n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
        a0 += x[j] * y[j];
        a1 += x[j + 1] * y[j + 1];
        a2 += x[j + 2] * y[j + 2];
        a3 += x[j + 3] * y[j + 3];
    }
    for (; j < n; ++j) a0 += x[j] * y[j];
    return ((a0 + a1) + (a2 + a3));
}

// dA[m,k] += G[m,n] * B^T, dB[k,n] += A^T * G[m,n]; both without
// materializing the transposes.
void mm_backward(const double* a, const double* b, const double* g, double* da, double* db, int m,
                 int k, int n) {
    if (da) {
        for (int i = 0; i < m; ++i) {
            const double* grow = g + static_cast<std::size_t>(i) * n;
            double* darow = da + static_cast<std::size_t>(i) * k;
            for (int kk = 0; kk < k; ++kk) {
                const double* brow = b + static_cast<std::size_t>(kk) * n;
                darow[kk] += dot4(grow, brow, n);
            }
        }
    }
    if (db) {
        for (int i = 0; i < m; ++i) {
            const double* arow = a + static_cast<std::size_t>(i) * k;
            const double* grow = g + static_cast<std::size_t>(i) * n;
            for (int kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                double* dbrow = db + static_cast<std::size_t>(kk) * n;
                for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
            }
        }
    }
}

}  // namespace

// ---- construction / accessors ----

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = numel_of(shape);
    return OpAccess::wrap(make_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = numel_of(shape);
    return OpAccess::wrap(make_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (numel_of(shape) != static_cast<std::int64_t>(data.size())) {
        throw DimensionError("from_data: " + std::to_string(data.size()) +
                             " values do not fill shape " + shape_str(shape));
    }
    return OpAccess::wrap(make_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
    auto n = numel_of(shape);
    std::vector<double> data(static_cast<std::size_t>(n));
    for (auto& v : data) v = rng.uniform(lo, hi);
    return OpAccess::wrap(make_node(std::move(shape), std::move(data), requires_grad));
}

const Shape& Tensor::shape() const { return nd(*this)->shape; }
std::int64_t Tensor::numel() const { return nd(*this)->numel(); }
const std::vector<double>& Tensor::data() const { return nd(*this)->data; }
std::vector<double>& Tensor::data() { return nd(*this)->data; }

double Tensor::item() const {
    const auto& node = nd(*this);
    if (node->numel() != 1) {
        throw ContractError("item() on tensor of shape " + shape_str(node->shape));
    }
    return node->data[0];
}

double Tensor::at(std::initializer_list<int> index) const {
    const auto& node = nd(*this);
    if (index.size() != node->shape.size()) {
        throw DimensionError("at(): rank mismatch for shape " + shape_str(node->shape));
    }
    std::int64_t flat = 0;
    std::size_t d = 0;
    for (int i : index) {
        if (i < 0 || i >= node->shape[d]) throw DimensionError("at(): index out of range");
        flat = flat * node->shape[d] + i;
        ++d;
    }
    return node->data[static_cast<std::size_t>(flat)];
}

bool Tensor::requires_grad() const { return nd(*this)->requires_grad; }
bool Tensor::has_grad() const { return nd(*this)->grad.size() == nd(*this)->data.size(); }

const std::vector<double>& Tensor::grad() const {
    const auto& node = nd(*this);
    if (node->grad.size() != node->data.size()) {
        throw ContractError("grad() before backward populated it");
    }
    return node->grad;
}

void Tensor::zero_grad() {
    auto& node = nd(*this);
    node->grad.assign(node->data.size(), 0.0);
}

void Tensor::backward() const {
    const auto& root = nd(*this);
    if (root->numel() != 1) {
        throw ContractError("backward() requires a scalar, got shape " + shape_str(root->shape));
    }
    if (!root->requires_grad) {
        throw ContractError("backward() on a tensor with no tracked dependencies");
    }

    // Topological order of the recorded graph; every node's inputs precede it.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* node : order) node->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backprop) node->backprop(*node);
    }
    // Drop the recording so the graph does not accumulate across steps.
    for (Node* node : order) {
        node->backprop = nullptr;
        node->parents.clear();
    }
}

// ---- matrix ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto& an = nd(a);
    const auto& bn = nd(b);
    if (an->shape.size() != 2 || bn->shape.size() != 2 || an->shape[1] != bn->shape[0]) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(an->shape) + " and " +
                             shape_str(bn->shape));
    }
    const int m = an->shape[0], k = an->shape[1], n = bn->shape[1];
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    mm(an->data.data(), bn->data.data(), out.data(), m, k, n);
    return result({m, n}, std::move(out), {an, bn}, [m, k, n](Node& node) {
        Node* pa = node.parents[0].get();
        Node* pb = node.parents[1].get();
        if (pa->requires_grad) pa->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        mm_backward(pa->data.data(), pb->data.data(), node.grad.data(),
                    pa->requires_grad ? pa->grad.data() : nullptr,
                    pb->requires_grad ? pb->grad.data() : nullptr, m, k, n);
    });
}

Tensor transpose2d(const Tensor& a) {
    const auto& an = nd(a);
    if (an->shape.size() != 2) {
        throw DimensionError("transpose2d: expected rank 2, got " + shape_str(an->shape));
    }
    const int r = an->shape[0], c = an->shape[1];
    std::vector<double> out(an->data.size());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out[static_cast<std::size_t>(j) * r + i] = an->data[static_cast<std::size_t>(i) * c + j];
    return result({c, r}, std::move(out), {an}, [r, c](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                p->grad[static_cast<std::size_t>(i) * c + j] +=
                    node.grad[static_cast<std::size_t>(j) * r + i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    const auto& an = nd(a);
    if (numel_of(shape) != an->numel()) {
        throw DimensionError("reshape: " + shape_str(an->shape) + " has " +
                             std::to_string(an->numel()) + " elements, target " + shape_str(shape));
    }
    std::vector<double> out = an->data;
    return result(std::move(shape), std::move(out), {an}, [](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        for (std::size_t i = 0; i < node.grad.size(); ++i) p->grad[i] += node.grad[i];
    });
}

Tensor softmax(const Tensor& a, int axis) {
    const auto& an = nd(a);
    const int rank = static_cast<int>(an->shape.size());
    if (axis < 0 || axis >= rank) {
        throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                             shape_str(an->shape));
    }
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= an->shape[d];
    for (int d = axis + 1; d < rank; ++d) inner *= an->shape[d];
    const std::int64_t extent = an->shape[axis];

    std::vector<double> out(an->data.size());
    const double* x = an->data.data();
    double* y = out.data();
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t i = 0; i < inner; ++i) {
            const std::int64_t base = o * extent * inner + i;
            double mx = x[base];
            for (std::int64_t e = 1; e < extent; ++e) mx = std::max(mx, x[base + e * inner]);
            double sum = 0.0;
            for (std::int64_t e = 0; e < extent; ++e) {
                const double v = std::exp(x[base + e * inner] - mx);
                y[base + e * inner] = v;
                sum += v;
            }
            const double inv = 1.0 / sum;
            for (std::int64_t e = 0; e < extent; ++e) y[base + e * inner] *= inv;
        }
    }
    return result(an->shape, std::move(out), {an}, [outer, inner, extent](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        const double* s = node.data.data();
        const double* g = node.grad.data();
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t i = 0; i < inner; ++i) {
                const std::int64_t base = o * extent * inner + i;
                double dot = 0.0;
                for (std::int64_t e = 0; e < extent; ++e) {
                    const std::int64_t at = base + e * inner;
                    dot += g[at] * s[at];
                }
                for (std::int64_t e = 0; e < extent; ++e) {
                    const std::int64_t at = base + e * inner;
                    p->grad[at] += s[at] * (g[at] - dot);
                }
            }
        }
    });
}

// ---- elementwise ops ----

namespace {

Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b,
                          double (*fwd)(double, double),
                          void (*bwd)(double av, double bv, double g, double& da, double& db)) {
    const auto& an = nd(a);
    const auto& bn = nd(b);
    check_same_shape(name, *an, *bn);
    std::vector<double> out(an->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(an->data[i], bn->data[i]);
    return result(an->shape, std::move(out), {an, bn}, [bwd](Node& node) {
        Node* pa = node.parents[0].get();
        Node* pb = node.parents[1].get();
        if (pa->requires_grad) pa->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        double trash = 0.0;
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            double& da = pa->requires_grad ? pa->grad[i] : trash;
            double& db = pb->requires_grad ? pb->grad[i] : trash;
            bwd(pa->data[i], pb->data[i], node.grad[i], da, db);
        }
    });
}

Tensor unary_elementwise(const Tensor& a, double (*fwd)(double),
                         double (*dfdx_from_out)(double x, double y)) {
    const auto& an = nd(a);
    std::vector<double> out(an->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(an->data[i]);
    return result(an->shape, std::move(out), {an}, [dfdx_from_out](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            p->grad[i] += node.grad[i] * dfdx_from_out(p->data[i], node.data[i]);
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) {
            da += g;
            db += g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) {
            da += g;
            db -= g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da += g * y;
            db += g * x;
        });
}

Tensor scale(const Tensor& a, double c) {
    const auto& an = nd(a);
    std::vector<double> out(an->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->data[i] * c;
    return result(an->shape, std::move(out), {an}, [c](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        for (std::size_t i = 0; i < node.grad.size(); ++i) p->grad[i] += node.grad[i] * c;
    });
}

Tensor add_const(const Tensor& a, double c) {
    const auto& an = nd(a);
    std::vector<double> out(an->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->data[i] + c;
    return result(an->shape, std::move(out), {an}, [](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        for (std::size_t i = 0; i < node.grad.size(); ++i) p->grad[i] += node.grad[i];
    });
}

Tensor scale_by(const Tensor& s, const Tensor& a) {
    const auto& sn = nd(s);
    const auto& an = nd(a);
    if (sn->numel() != 1) {
        throw DimensionError("scale_by: scale must be a single element, got " +
                             shape_str(sn->shape));
    }
    const double sv = sn->data[0];
    std::vector<double> out(an->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * an->data[i];
    return result(an->shape, std::move(out), {sn, an}, [](Node& node) {
        Node* ps = node.parents[0].get();
        Node* pa = node.parents[1].get();
        if (ps->requires_grad) {
            ps->ensure_grad();
            double acc = 0.0;
            for (std::size_t i = 0; i < node.grad.size(); ++i) acc += node.grad[i] * pa->data[i];
            ps->grad[0] += acc;
        }
        if (pa->requires_grad) {
            pa->ensure_grad();
            const double sv = ps->data[0];
            for (std::size_t i = 0; i < node.grad.size(); ++i) pa->grad[i] += node.grad[i] * sv;
        }
    });
}

Tensor sigmoid(const Tensor& a) {
    return unary_elementwise(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_elem(const Tensor& a) {
    return unary_elementwise(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log_elem(const Tensor& a) {
    const auto& an = nd(a);
    for (double v : an->data) {
        if (!(v > 0.0)) {
            throw DomainError("log of non-positive value " + std::to_string(v));
        }
    }
    return unary_elementwise(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& a) {
    return unary_elementwise(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// ---- structure ops ----

namespace {

struct ColGeom {
    int c, h, w, k, pad, oh, ow;
};

ColGeom col_geometry(const Shape& in, int k, Padding padding) {
    ColGeom g{};
    g.c = in[0];
    g.h = in[1];
    g.w = in[2];
    g.k = k;
    g.pad = padding == Padding::same ? (k - 1) / 2 : 0;
    g.oh = padding == Padding::same ? g.h : g.h - k + 1;
    g.ow = padding == Padding::same ? g.w : g.w - k + 1;
    return g;
}

}  // namespace

Tensor im2col(const Tensor& input, int k, Padding padding) {
    const auto& in = nd(input);
    if (in->shape.size() != 3) {
        throw DimensionError("im2col: expected [C,H,W], got " + shape_str(in->shape));
    }
    if (k != 1 && k != 3) {
        throw ConfigError("im2col: kernel size " + std::to_string(k) + " unsupported (1 or 3)");
    }
    const ColGeom g = col_geometry(in->shape, k, padding);
    if (g.oh <= 0 || g.ow <= 0) {
        throw DimensionError("im2col: input " + shape_str(in->shape) + " too small for k=" +
                             std::to_string(k) + " valid padding");
    }
    const int rows = g.c * k * k;
    const int cols = g.oh * g.ow;
    std::vector<double> out(static_cast<std::size_t>(rows) * cols, 0.0);
    const double* x = in->data.data();
    for (int c = 0; c < g.c; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const int row = (c * k + ky) * k + kx;
                double* dst = out.data() + static_cast<std::size_t>(row) * cols;
                for (int oy = 0; oy < g.oh; ++oy) {
                    const int iy = oy + ky - g.pad;
                    if (iy < 0 || iy >= g.h) continue;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        const int ix = ox + kx - g.pad;
                        if (ix < 0 || ix >= g.w) continue;
                        dst[oy * g.ow + ox] = x[(static_cast<std::size_t>(c) * g.h + iy) * g.w + ix];
                    }
                }
            }
        }
    }
    return result({rows, cols}, std::move(out), {in}, [g](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        const int cols = g.oh * g.ow;
        for (int c = 0; c < g.c; ++c) {
            for (int ky = 0; ky < g.k; ++ky) {
                for (int kx = 0; kx < g.k; ++kx) {
                    const int row = (c * g.k + ky) * g.k + kx;
                    const double* gsrc = node.grad.data() + static_cast<std::size_t>(row) * cols;
                    for (int oy = 0; oy < g.oh; ++oy) {
                        const int iy = oy + ky - g.pad;
                        if (iy < 0 || iy >= g.h) continue;
                        for (int ox = 0; ox < g.ow; ++ox) {
                            const int ix = ox + kx - g.pad;
                            if (ix < 0 || ix >= g.w) continue;
                            p->grad[(static_cast<std::size_t>(c) * g.h + iy) * g.w + ix] +=
                                gsrc[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Padding padding) {
    const auto& in = nd(input);
    const auto& kn = nd(kernel);
    if (in->shape.size() != 3) {
        throw DimensionError("conv2d: expected [C,H,W] input, got " + shape_str(in->shape));
    }
    if (kn->shape.size() != 4 || kn->shape[2] != kn->shape[3]) {
        throw DimensionError("conv2d: expected [Cout,Cin,k,k] kernel, got " + shape_str(kn->shape));
    }
    const int k = kn->shape[2];
    if (k != 1 && k != 3) {
        throw ConfigError("conv2d: kernel size " + std::to_string(k) + " unsupported (1 or 3)");
    }
    if (kn->shape[1] != in->shape[0]) {
        throw DimensionError("conv2d: kernel " + shape_str(kn->shape) + " does not match input " +
                             shape_str(in->shape));
    }
    const int c_out = kn->shape[0];
    const ColGeom g = col_geometry(in->shape, k, padding);

    Tensor cols = im2col(input, k, padding);
    Tensor kmat = reshape(kernel, {c_out, in->shape[0] * k * k});
    Tensor prod = matmul(kmat, cols);
    if (bias.defined()) {
        prod = add_row_bias(prod, bias);
    }
    return reshape(prod, {c_out, g.oh, g.ow});
}

Tensor global_avg_pool(const Tensor& input) {
    const auto& in = nd(input);
    if (in->shape.size() != 3) {
        throw DimensionError("global_avg_pool: expected [C,H,W], got " + shape_str(in->shape));
    }
    const int c = in->shape[0];
    const std::int64_t hw = static_cast<std::int64_t>(in->shape[1]) * in->shape[2];
    std::vector<double> out(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        const double* base = in->data.data() + static_cast<std::size_t>(ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) acc += base[i];
        out[static_cast<std::size_t>(ch)] = acc / static_cast<double>(hw);
    }
    return result({c}, std::move(out), {in}, [c, hw](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        const double inv = 1.0 / static_cast<double>(hw);
        for (int ch = 0; ch < c; ++ch) {
            const double gv = node.grad[static_cast<std::size_t>(ch)] * inv;
            double* base = p->grad.data() + static_cast<std::size_t>(ch) * hw;
            for (std::int64_t i = 0; i < hw; ++i) base[i] += gv;
        }
    });
}

Tensor sum_all(const Tensor& a) {
    const auto& an = nd(a);
    double acc = 0.0;
    for (double v : an->data) acc += v;
    return result({1}, {acc}, {an}, [](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        const double g = node.grad[0];
        for (auto& gv : p->grad) gv += g;
    });
}

Tensor slice_flat(const Tensor& a, int offset, int len) {
    const auto& an = nd(a);
    if (offset < 0 || len <= 0 || offset + len > an->numel()) {
        throw DimensionError("slice_flat: [" + std::to_string(offset) + ", " +
                             std::to_string(offset + len) + ") out of range for " +
                             shape_str(an->shape));
    }
    std::vector<double> out(an->data.begin() + offset, an->data.begin() + offset + len);
    return result({len}, std::move(out), {an}, [offset, len](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        for (int i = 0; i < len; ++i) p->grad[static_cast<std::size_t>(offset + i)] += node.grad[i];
    });
}

Tensor spatial_column(const Tensor& a, int row, int col) {
    const auto& an = nd(a);
    if (an->shape.size() != 3) {
        throw DimensionError("spatial_column: expected [C,H,W], got " + shape_str(an->shape));
    }
    const int c = an->shape[0], h = an->shape[1], w = an->shape[2];
    if (row < 0 || row >= h || col < 0 || col >= w) {
        throw DimensionError("spatial_column: position (" + std::to_string(row) + "," +
                             std::to_string(col) + ") outside " + shape_str(an->shape));
    }
    std::vector<double> out(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        out[ch] = an->data[(static_cast<std::size_t>(ch) * h + row) * w + col];
    }
    return result({c}, std::move(out), {an}, [c, h, w, row, col](Node& node) {
        Node* p = node.parents[0].get();
        p->ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
            p->grad[(static_cast<std::size_t>(ch) * h + row) * w + col] += node.grad[ch];
        }
    });
}

Tensor add_row_bias(const Tensor& m, const Tensor& bias) {
    const auto& mn = nd(m);
    const auto& bn = nd(bias);
    if (mn->shape.size() != 2 || bn->shape.size() != 1 || bn->shape[0] != mn->shape[0]) {
        throw DimensionError("add_row_bias: matrix " + shape_str(mn->shape) + " with bias " +
                             shape_str(bn->shape));
    }
    const int r = mn->shape[0], c = mn->shape[1];
    std::vector<double> out(mn->data.size());
    for (int i = 0; i < r; ++i) {
        const double b = bn->data[static_cast<std::size_t>(i)];
        const double* src = mn->data.data() + static_cast<std::size_t>(i) * c;
        double* dst = out.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) dst[j] = src[j] + b;
    }
    return result(mn->shape, std::move(out), {mn, bn}, [r, c](Node& node) {
        Node* pm = node.parents[0].get();
        Node* pb = node.parents[1].get();
        if (pm->requires_grad) {
            pm->ensure_grad();
            for (std::size_t i = 0; i < node.grad.size(); ++i) pm->grad[i] += node.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int i = 0; i < r; ++i) {
                const double* g = node.grad.data() + static_cast<std::size_t>(i) * c;
                double acc = 0.0;
                for (int j = 0; j < c; ++j) acc += g[j];
                pb->grad[static_cast<std::size_t>(i)] += acc;
            }
        }
    });
}

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double h) {
    const auto& xn = nd(x);
    std::vector<double> est(xn->data.size());
    for (std::size_t i = 0; i < xn->data.size(); ++i) {
        std::vector<double> bumped = xn->data;
        bumped[i] = xn->data[i] + h;
        const double hi = f(Tensor::from_data(xn->shape, bumped));
        bumped[i] = xn->data[i] - h;
        const double lo = f(Tensor::from_data(xn->shape, std::move(bumped)));
        est[i] = (hi - lo) / (2.0 * h);
    }
    return Tensor::from_data(xn->shape, std::move(est));
}

}  // namespace dfr
