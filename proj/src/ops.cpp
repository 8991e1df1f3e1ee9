#include "flat/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace flat::ad {

namespace {

bool want_grad(const Tensor& t) { return t.defined() && t.has_grad(); }

// Track the output and push the backward closure iff a tape is active and
// at least one input participates in differentiation.
template <typename F>
void maybe_record(Tensor& out, bool any_input_grad, F&& backward) {
    Tape* tape = Tape::active();
    if (!tape || !any_input_grad) return;
    out.set_tracked(true);
    tape->record(std::forward<F>(backward));
}

[[noreturn]] void shape_fail(const std::string& op, const std::string& detail) {
    throw ShapeError(op, detail);
}

void require_defined(const char* op, const Tensor& t) {
    if (!t.defined()) shape_fail(op, "undefined tensor argument");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined("matmul", a);
    require_defined("matmul", b);
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        shape_fail("matmul", shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values_mut();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv.data() + static_cast<size_t>(p) * n;
            double* orow = ov.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    maybe_record(out, want_grad(a) || want_grad(b), [a, b, out, m, k, n]() mutable {
        const auto& og = out.grad();
        if (a.has_grad()) {
            auto& ag = a.grad_mut();
            const auto& bv = b.values();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* orow = og.data() + static_cast<size_t>(i) * n;
                    const double* brow = bv.data() + static_cast<size_t>(p) * n;
                    for (int j = 0; j < n; ++j) s += orow[j] * brow[j];
                    ag[static_cast<size_t>(i) * k + p] += s;
                }
        }
        if (b.has_grad()) {
            auto& bg = b.grad_mut();
            const auto& av = a.values();
            for (int p = 0; p < k; ++p)
                for (int j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < m; ++i)
                        s += av[static_cast<size_t>(i) * k + p] * og[static_cast<size_t>(i) * n + j];
                    bg[static_cast<size_t>(p) * n + j] += s;
                }
        }
    });
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_defined("add", a);
    require_defined("add", b);
    const bool same = std::ranges::equal(a.shape(), b.shape());
    const bool bias_row = a.ndim() == 2 && b.ndim() == 1 && a.dim(1) == b.dim(0);
    if (!same && !bias_row)
        shape_fail("add", shape_str(a.shape()) + " + " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(std::vector<int>(a.shape().begin(), a.shape().end()));
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values_mut();
    if (same) {
        for (size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i];
    } else {
        const int n = a.dim(1);
        for (size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i % n];
    }
    maybe_record(out, want_grad(a) || want_grad(b), [a, b, out, same]() mutable {
        const auto& og = out.grad();
        if (a.has_grad()) {
            auto& ag = a.grad_mut();
            for (size_t i = 0; i < og.size(); ++i) ag[i] += og[i];
        }
        if (b.has_grad()) {
            auto& bg = b.grad_mut();
            if (same) {
                for (size_t i = 0; i < og.size(); ++i) bg[i] += og[i];
            } else {
                const size_t n = bg.size();
                for (size_t i = 0; i < og.size(); ++i) bg[i % n] += og[i];
            }
        }
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_defined("sub", a);
    require_defined("sub", b);
    if (!std::ranges::equal(a.shape(), b.shape()))
        shape_fail("sub", shape_str(a.shape()) + " - " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(std::vector<int>(a.shape().begin(), a.shape().end()));
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values_mut();
    for (size_t i = 0; i < av.size(); ++i) ov[i] = av[i] - bv[i];
    maybe_record(out, want_grad(a) || want_grad(b), [a, b, out]() mutable {
        const auto& og = out.grad();
        if (a.has_grad()) {
            auto& ag = a.grad_mut();
            for (size_t i = 0; i < og.size(); ++i) ag[i] += og[i];
        }
        if (b.has_grad()) {
            auto& bg = b.grad_mut();
            for (size_t i = 0; i < og.size(); ++i) bg[i] -= og[i];
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_defined("mul", a);
    require_defined("mul", b);
    const bool same = std::ranges::equal(a.shape(), b.shape());
    const bool row_scale = a.ndim() == 2 && b.ndim() == 1 && a.dim(0) == b.dim(0);
    if (!same && !row_scale)
        shape_fail("mul", shape_str(a.shape()) + " * " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(std::vector<int>(a.shape().begin(), a.shape().end()));
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values_mut();
    if (same) {
        for (size_t i = 0; i < av.size(); ++i) ov[i] = av[i] * bv[i];
    } else {
        const int d = a.dim(1);
        for (size_t i = 0; i < av.size(); ++i) ov[i] = av[i] * bv[i / d];
    }
    maybe_record(out, want_grad(a) || want_grad(b), [a, b, out, same]() mutable {
        const auto& og = out.grad();
        const auto& av = a.values();
        const auto& bv = b.values();
        if (same) {
            if (a.has_grad()) {
                auto& ag = a.grad_mut();
                for (size_t i = 0; i < og.size(); ++i) ag[i] += og[i] * bv[i];
            }
            if (b.has_grad()) {
                auto& bg = b.grad_mut();
                for (size_t i = 0; i < og.size(); ++i) bg[i] += og[i] * av[i];
            }
        } else {
            const size_t d = static_cast<size_t>(a.dim(1));
            if (a.has_grad()) {
                auto& ag = a.grad_mut();
                for (size_t i = 0; i < og.size(); ++i) ag[i] += og[i] * bv[i / d];
            }
            if (b.has_grad()) {
                auto& bg = b.grad_mut();
                for (size_t i = 0; i < og.size(); ++i) bg[i / d] += og[i] * av[i];
            }
        }
    });
    return out;
}

Tensor scalar_mul(const Tensor& x, double c) {
    require_defined("scalar_mul", x);
    Tensor out = Tensor::zeros(std::vector<int>(x.shape().begin(), x.shape().end()));
    const auto& xv = x.values();
    auto& ov = out.values_mut();
    for (size_t i = 0; i < xv.size(); ++i) ov[i] = c * xv[i];
    maybe_record(out, want_grad(x), [x, out, c]() mutable {
        const auto& og = out.grad();
        auto& xg = x.grad_mut();
        for (size_t i = 0; i < og.size(); ++i) xg[i] += c * og[i];
    });
    return out;
}

Tensor conv1d(const Tensor& x, const Tensor& filters) {
    require_defined("conv1d", x);
    require_defined("conv1d", filters);
    if (x.ndim() != 2 || filters.ndim() != 3 || x.dim(1) != filters.dim(2))
        shape_fail("conv1d", "input " + shape_str(x.shape()) + " filters " + shape_str(filters.shape()));
    const int n = x.dim(0), d = x.dim(1);
    const int F = filters.dim(0), w = filters.dim(1);
    if (n < w)
        shape_fail("conv1d", "sequence length " + std::to_string(n) +
                                 " shorter than filter width " + std::to_string(w));
    const int T = n - w + 1;
    Tensor out = Tensor::zeros({T, F});
    const auto& xv = x.values();
    const auto& fv = filters.values();
    auto& ov = out.values_mut();
    for (int t = 0; t < T; ++t)
        for (int f = 0; f < F; ++f) {
            double s = 0.0;
            const double* fil = fv.data() + static_cast<size_t>(f) * w * d;
            const double* win = xv.data() + static_cast<size_t>(t) * d;
            for (int j = 0; j < w * d; ++j) s += win[j] * fil[j];
            ov[static_cast<size_t>(t) * F + f] = s;
        }
    maybe_record(out, want_grad(x) || want_grad(filters), [x, filters, out, T, F, w, d]() mutable {
        const auto& og = out.grad();
        const auto& xv = x.values();
        const auto& fv = filters.values();
        if (x.has_grad()) {
            auto& xg = x.grad_mut();
            for (int t = 0; t < T; ++t)
                for (int f = 0; f < F; ++f) {
                    const double g = og[static_cast<size_t>(t) * F + f];
                    if (g == 0.0) continue;
                    const double* fil = fv.data() + static_cast<size_t>(f) * w * d;
                    double* win = xg.data() + static_cast<size_t>(t) * d;
                    for (int j = 0; j < w * d; ++j) win[j] += g * fil[j];
                }
        }
        if (filters.has_grad()) {
            auto& fg = filters.grad_mut();
            for (int t = 0; t < T; ++t)
                for (int f = 0; f < F; ++f) {
                    const double g = og[static_cast<size_t>(t) * F + f];
                    if (g == 0.0) continue;
                    const double* win = xv.data() + static_cast<size_t>(t) * d;
                    double* fil = fg.data() + static_cast<size_t>(f) * w * d;
                    for (int j = 0; j < w * d; ++j) fil[j] += g * win[j];
                }
        }
    });
    return out;
}

Tensor max_pool_over_time(const Tensor& x) {
    require_defined("max_pool_over_time", x);
    if (x.ndim() != 2 || x.dim(0) < 1)
        shape_fail("max_pool_over_time", shape_str(x.shape()));
    const int T = x.dim(0), F = x.dim(1);
    Tensor out = Tensor::zeros({1, F});
    std::vector<int> argmax(static_cast<size_t>(F), 0);
    const auto& xv = x.values();
    auto& ov = out.values_mut();
    for (int f = 0; f < F; ++f) {
        double best = xv[f];
        int best_t = 0;
        for (int t = 1; t < T; ++t) {
            const double v = xv[static_cast<size_t>(t) * F + f];
            if (v > best) {
                best = v;
                best_t = t;
            }
        }
        ov[f] = best;
        argmax[static_cast<size_t>(f)] = best_t;
    }
    maybe_record(out, want_grad(x), [x, out, argmax = std::move(argmax), F]() mutable {
        const auto& og = out.grad();
        auto& xg = x.grad_mut();
        for (int f = 0; f < F; ++f)
            xg[static_cast<size_t>(argmax[static_cast<size_t>(f)]) * F + f] += og[f];
    });
    return out;
}

Tensor relu(const Tensor& x) {
    require_defined("relu", x);
    Tensor out = Tensor::zeros(std::vector<int>(x.shape().begin(), x.shape().end()));
    const auto& xv = x.values();
    auto& ov = out.values_mut();
    for (size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    maybe_record(out, want_grad(x), [x, out]() mutable {
        const auto& og = out.grad();
        const auto& xv = x.values();
        auto& xg = x.grad_mut();
        for (size_t i = 0; i < og.size(); ++i)
            if (xv[i] > 0.0) xg[i] += og[i];
    });
    return out;
}

Tensor sigmoid(const Tensor& x) {
    require_defined("sigmoid", x);
    Tensor out = Tensor::zeros(std::vector<int>(x.shape().begin(), x.shape().end()));
    const auto& xv = x.values();
    auto& ov = out.values_mut();
    for (size_t i = 0; i < xv.size(); ++i) {
        // Split by sign so exp never overflows.
        const double v = xv[i];
        ov[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    maybe_record(out, want_grad(x), [x, out]() mutable {
        const auto& og = out.grad();
        const auto& ov = out.values();
        auto& xg = x.grad_mut();
        for (size_t i = 0; i < og.size(); ++i) xg[i] += og[i] * ov[i] * (1.0 - ov[i]);
    });
    return out;
}

namespace {

// Rows/cols view: 1-D input acts as a single row.
struct RowView {
    int rows;
    int cols;
};

RowView row_view(const char* op, const Tensor& x) {
    if (x.ndim() == 1) return {1, x.dim(0)};
    if (x.ndim() == 2) return {x.dim(0), x.dim(1)};
    shape_fail(op, shape_str(x.shape()));
}

}  // namespace

Tensor softmax(const Tensor& x) {
    require_defined("softmax", x);
    const auto [rows, cols] = row_view("softmax", x);
    if (cols < 1) shape_fail("softmax", shape_str(x.shape()));
    Tensor out = Tensor::zeros(std::vector<int>(x.shape().begin(), x.shape().end()));
    const auto& xv = x.values();
    auto& ov = out.values_mut();
    for (int r = 0; r < rows; ++r) {
        const double* row = xv.data() + static_cast<size_t>(r) * cols;
        double* orow = ov.data() + static_cast<size_t>(r) * cols;
        const double mx = *std::max_element(row, row + cols);
        double z = 0.0;
        for (int j = 0; j < cols; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (int j = 0; j < cols; ++j) orow[j] /= z;
    }
    maybe_record(out, want_grad(x), [x, out, rows, cols]() mutable {
        const auto& og = out.grad();
        const auto& ov = out.values();
        auto& xg = x.grad_mut();
        for (int r = 0; r < rows; ++r) {
            const double* g = og.data() + static_cast<size_t>(r) * cols;
            const double* s = ov.data() + static_cast<size_t>(r) * cols;
            double dot = 0.0;
            for (int j = 0; j < cols; ++j) dot += g[j] * s[j];
            double* xr = xg.data() + static_cast<size_t>(r) * cols;
            for (int j = 0; j < cols; ++j) xr[j] += s[j] * (g[j] - dot);
        }
    });
    return out;
}

Tensor log_softmax(const Tensor& x) {
    require_defined("log_softmax", x);
    const auto [rows, cols] = row_view("log_softmax", x);
    if (cols < 1) shape_fail("log_softmax", shape_str(x.shape()));
    Tensor out = Tensor::zeros(std::vector<int>(x.shape().begin(), x.shape().end()));
    const auto& xv = x.values();
    auto& ov = out.values_mut();
    for (int r = 0; r < rows; ++r) {
        const double* row = xv.data() + static_cast<size_t>(r) * cols;
        double* orow = ov.data() + static_cast<size_t>(r) * cols;
        const double mx = *std::max_element(row, row + cols);
        double z = 0.0;
        for (int j = 0; j < cols; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        for (int j = 0; j < cols; ++j) orow[j] = row[j] - lse;
    }
    maybe_record(out, want_grad(x), [x, out, rows, cols]() mutable {
        const auto& og = out.grad();
        const auto& ov = out.values();
        auto& xg = x.grad_mut();
        for (int r = 0; r < rows; ++r) {
            const double* g = og.data() + static_cast<size_t>(r) * cols;
            const double* ls = ov.data() + static_cast<size_t>(r) * cols;
            double gsum = 0.0;
            for (int j = 0; j < cols; ++j) gsum += g[j];
            double* xr = xg.data() + static_cast<size_t>(r) * cols;
            for (int j = 0; j < cols; ++j) xr[j] += g[j] - std::exp(ls[j]) * gsum;
        }
    });
    return out;
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
    require_defined("embedding_lookup", table);
    if (table.ndim() != 2) shape_fail("embedding_lookup", shape_str(table.shape()));
    const int V = table.dim(0), d = table.dim(1);
    const int n = static_cast<int>(ids.size());
    if (n == 0) shape_fail("embedding_lookup", "empty id list");
    for (int i = 0; i < n; ++i)
        if (ids[i] < 0 || ids[i] >= V)
            throw std::out_of_range("embedding_lookup: id " + std::to_string(ids[i]) +
                                    " outside vocab of size " + std::to_string(V));
    Tensor out = Tensor::zeros({n, d});
    const auto& tv = table.values();
    auto& ov = out.values_mut();
    std::vector<int> idv(ids.begin(), ids.end());
    for (int i = 0; i < n; ++i)
        std::copy_n(tv.data() + static_cast<size_t>(idv[static_cast<size_t>(i)]) * d, d,
                    ov.data() + static_cast<size_t>(i) * d);
    maybe_record(out, want_grad(table), [table, out, idv = std::move(idv), d]() mutable {
        const auto& og = out.grad();
        auto& tg = table.grad_mut();
        for (size_t i = 0; i < idv.size(); ++i) {
            const double* src = og.data() + i * d;
            double* dst = tg.data() + static_cast<size_t>(idv[i]) * d;
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
    return out;
}

Tensor concat(std::span<const Tensor> parts, int axis) {
    if (parts.empty()) shape_fail("concat", "no inputs");
    for (const auto& p : parts) require_defined("concat", p);
    const int nd = parts[0].ndim();
    if (axis < 0 || axis >= nd || nd > 2)
        shape_fail("concat", "axis " + std::to_string(axis) + " on " + shape_str(parts[0].shape()));
    for (const auto& p : parts) {
        if (p.ndim() != nd) shape_fail("concat", "rank mismatch " + shape_str(p.shape()));
        for (int ax = 0; ax < nd; ++ax)
            if (ax != axis && p.dim(ax) != parts[0].dim(ax))
                shape_fail("concat", shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    std::vector<int> oshape(parts[0].shape().begin(), parts[0].shape().end());
    oshape[static_cast<size_t>(axis)] = 0;
    for (const auto& p : parts) oshape[static_cast<size_t>(axis)] += p.dim(axis);
    Tensor out = Tensor::zeros(oshape);
    auto& ov = out.values_mut();
    bool any_grad = false;
    for (const auto& p : parts) any_grad = any_grad || want_grad(p);

    // offsets[i] = start of part i along the concat axis
    std::vector<int> offsets;
    offsets.reserve(parts.size());
    int run = 0;
    for (const auto& p : parts) {
        offsets.push_back(run);
        run += p.dim(axis);
    }

    const int out_cols = nd == 2 ? oshape[1] : 1;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& p = parts[pi];
        const auto& pv = p.values();
        if (nd == 1 || axis == 0) {
            const int cols = nd == 2 ? p.dim(1) : 1;
            std::copy(pv.begin(), pv.end(),
                      ov.begin() + static_cast<size_t>(offsets[pi]) * cols);
        } else {  // nd == 2, axis == 1
            const int rows = p.dim(0), cols = p.dim(1);
            for (int r = 0; r < rows; ++r)
                std::copy_n(pv.data() + static_cast<size_t>(r) * cols, cols,
                            ov.data() + static_cast<size_t>(r) * out_cols + offsets[pi]);
        }
    }
    std::vector<Tensor> held(parts.begin(), parts.end());
    maybe_record(out, any_grad,
                 [held = std::move(held), out, offsets = std::move(offsets), axis, nd, out_cols]() mutable {
                     const auto& og = out.grad();
                     for (size_t pi = 0; pi < held.size(); ++pi) {
                         auto& p = held[pi];
                         if (!p.has_grad()) continue;
                         auto& pg = p.grad_mut();
                         if (nd == 1 || axis == 0) {
                             const int cols = nd == 2 ? p.dim(1) : 1;
                             const size_t base = static_cast<size_t>(offsets[pi]) * cols;
                             for (size_t i = 0; i < pg.size(); ++i) pg[i] += og[base + i];
                         } else {
                             const int rows = p.dim(0), cols = p.dim(1);
                             for (int r = 0; r < rows; ++r)
                                 for (int c = 0; c < cols; ++c)
                                     pg[static_cast<size_t>(r) * cols + c] +=
                                         og[static_cast<size_t>(r) * out_cols + offsets[pi] + c];
                         }
                     }
                 });
    return out;
}

Tensor sum(const Tensor& x) {
    require_defined("sum", x);
    Tensor out = Tensor::zeros({1});
    const auto& xv = x.values();
    double s = 0.0;
    for (double v : xv) s += v;
    out.values_mut()[0] = s;
    maybe_record(out, want_grad(x), [x, out]() mutable {
        const double g = out.grad()[0];
        auto& xg = x.grad_mut();
        for (auto& v : xg) v += g;
    });
    return out;
}

Tensor mean(const Tensor& x) {
    require_defined("mean", x);
    const double inv = 1.0 / static_cast<double>(x.numel());
    Tensor out = Tensor::zeros({1});
    const auto& xv = x.values();
    double s = 0.0;
    for (double v : xv) s += v;
    out.values_mut()[0] = s * inv;
    maybe_record(out, want_grad(x), [x, out, inv]() mutable {
        const double g = out.grad()[0] * inv;
        auto& xg = x.grad_mut();
        for (auto& v : xg) v += g;
    });
    return out;
}

Tensor select_column(const Tensor& x, int j) {
    require_defined("select_column", x);
    if (x.ndim() != 2 || j < 0 || j >= x.dim(1))
        shape_fail("select_column",
                   shape_str(x.shape()) + " column " + std::to_string(j));
    const int m = x.dim(0), n = x.dim(1);
    Tensor out = Tensor::zeros({m});
    const auto& xv = x.values();
    auto& ov = out.values_mut();
    for (int i = 0; i < m; ++i) ov[i] = xv[static_cast<size_t>(i) * n + j];
    maybe_record(out, want_grad(x), [x, out, j, m, n]() mutable {
        const auto& og = out.grad();
        auto& xg = x.grad_mut();
        for (int i = 0; i < m; ++i) xg[static_cast<size_t>(i) * n + j] += og[i];
    });
    return out;
}

Tensor abs_val(const Tensor& x) {
    require_defined("abs_val", x);
    Tensor out = Tensor::zeros(std::vector<int>(x.shape().begin(), x.shape().end()));
    const auto& xv = x.values();
    auto& ov = out.values_mut();
    for (size_t i = 0; i < xv.size(); ++i) ov[i] = std::abs(xv[i]);
    maybe_record(out, want_grad(x), [x, out]() mutable {
        const auto& og = out.grad();
        const auto& xv = x.values();
        auto& xg = x.grad_mut();
        for (size_t i = 0; i < og.size(); ++i) {
            if (xv[i] > 0.0)
                xg[i] += og[i];
            else if (xv[i] < 0.0)
                xg[i] -= og[i];
        }
    });
    return out;
}

void sgd_step(std::span<Tensor> params, double lr, std::optional<double> clip_norm) {
    if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: learning rate must be positive");
    if (clip_norm && !(*clip_norm > 0.0))
        throw std::invalid_argument("sgd_step: clip norm must be positive");
    for (const auto& p : params)
        if (!p.defined() || !p.has_grad())
            throw std::invalid_argument("sgd_step: parameter without gradient storage");
    double scale = 1.0;
    if (clip_norm) {
        double sq = 0.0;
        for (const auto& p : params)
            for (double g : p.grad()) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > *clip_norm) scale = *clip_norm / norm;
    }
    for (auto& p : params) {
        auto& vals = p.values_mut();  // bumps version
        const auto& g = p.grad();
        for (size_t i = 0; i < vals.size(); ++i) vals[i] -= lr * scale * g[i];
        p.zero_grad();
    }
}

}  // namespace flat::ad
