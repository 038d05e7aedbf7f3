#include <algorithm>
#include <cmath>

#include "semvis/tensor.hpp"

namespace semvis {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                             " vs " + shape_string(b.shape()));
    }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
    if (a.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             ", got " + shape_string(a.shape()));
    }
}

// Elementwise unary op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
    auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = fwd(x[i]);
    }
    std::vector<double> y = out;
    return record_op(a.shape(), std::move(out), {a},
                     [a, y = std::move(y), deriv](std::span<const double> g) {
                         auto ga = grad_sink(a);
                         auto x = a.data();
                         for (std::size_t i = 0; i < g.size(); ++i) {
                             ga[i] += g[i] * deriv(x[i], y[i]);
                         }
                     });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto x = a.data();
    auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + y[i];
    }
    return record_op(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
        if (auto ga = grad_sink(a); !ga.empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (auto gb = grad_sink(b); !gb.empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto x = a.data();
    auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] - y[i];
    }
    return record_op(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
        if (auto ga = grad_sink(a); !ga.empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (auto gb = grad_sink(b); !gb.empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto x = a.data();
    auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * y[i];
    }
    return record_op(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
        if (auto ga = grad_sink(a); !ga.empty()) {
            auto y = b.data();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        }
        if (auto gb = grad_sink(b); !gb.empty()) {
            auto x = a.data();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * factor;
    }
    return record_op(a.shape(), std::move(out), {a}, [a, factor](std::span<const double> g) {
        auto ga = grad_sink(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
}

Tensor add_scalar(const Tensor& a, double offset) {
    auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + offset;
    }
    return record_op(a.shape(), std::move(out), {a}, [a](std::span<const double> g) {
        auto ga = grad_sink(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Tensor relu(const Tensor& a) {
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) {
        total += v;
    }
    return record_op(Shape{}, {total}, {a}, [a](std::span<const double> g) {
        auto ga = grad_sink(a);
        for (double& v : ga) v += g[0];
    });
}

Tensor max_reduce_scalar(const Tensor& a) {
    auto x = a.data();
    const std::size_t best = static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
    return record_op(Shape{}, {x[best]}, {a}, [a, best](std::span<const double> g) {
        grad_sink(a)[best] += g[0];
    });
}

Tensor dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    auto x = a.data();
    auto y = b.data();
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        total += x[i] * y[i];
    }
    return record_op(Shape{}, {total}, {a, b}, [a, b](std::span<const double> g) {
        if (auto ga = grad_sink(a); !ga.empty()) {
            auto y = b.data();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * y[i];
        }
        if (auto gb = grad_sink(b); !gb.empty()) {
            auto x = a.data();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[0] * x[i];
        }
    });
}

Tensor dropout(const Tensor& a, double p, const DropoutKey& key, bool training) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ContractError("dropout probability must lie in [0, 1), got " + std::to_string(p));
    }
    if (!training || p == 0.0) {
        return a;
    }
    const double keep_scale = 1.0 / (1.0 - p);
    const std::uint64_t base = hash_counters(key.seed, key.layer, key.step);
    auto x = a.data();
    std::vector<double> mask(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mask[i] = unit_double(splitmix64(base ^ (i * 0xD1B54A32D192ED03ULL))) < p ? 0.0 : keep_scale;
        out[i] = x[i] * mask[i];
    }
    return record_op(a.shape(), std::move(out), {a},
                     [a, mask = std::move(mask)](std::span<const double> g) {
                         auto ga = grad_sink(a);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) +
                             " x " + shape_string(b.shape()));
    }
    auto x = a.data();
    auto y = b.data();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = x[i * k + p];
            const double* brow = y.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return record_op(Shape{m, n}, std::move(out), {a, b}, [a, b, m, k, n](std::span<const double> g) {
        if (auto ga = grad_sink(a); !ga.empty()) {
            auto y = b.data();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * y[p * n + j];
                    ga[i * k + p] += acc;
                }
            }
        }
        if (auto gb = grad_sink(b); !gb.empty()) {
            auto x = a.data();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = x[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
                }
            }
        }
    });
}

Tensor matvec(const Tensor& m, const Tensor& x) {
    require_rank(m, 2, "matvec");
    require_rank(x, 1, "matvec");
    const std::size_t rows = m.dim(0), cols = m.dim(1);
    if (x.dim(0) != cols) {
        throw DimensionError("matvec: " + shape_string(m.shape()) + " times " +
                             shape_string(x.shape()));
    }
    auto w = m.data();
    auto v = x.data();
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += w[i * cols + j] * v[j];
        out[i] = acc;
    }
    return record_op(Shape{rows}, std::move(out), {m, x}, [m, x, rows, cols](std::span<const double> g) {
        if (auto gm = grad_sink(m); !gm.empty()) {
            auto v = x.data();
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) gm[i * cols + j] += g[i] * v[j];
            }
        }
        if (auto gx = grad_sink(x); !gx.empty()) {
            auto w = m.data();
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) gx[j] += g[i] * w[i * cols + j];
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const std::size_t r = a.dim(0), c = a.dim(1);
    auto x = a.data();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
    }
    return record_op(Shape{c, r}, std::move(out), {a}, [a, r, c](std::span<const double> g) {
        auto ga = grad_sink(a);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
        }
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                             shape_string(shape));
    }
    auto x = a.data();
    return record_op(std::move(shape), std::vector<double>(x.begin(), x.end()), {a},
                     [a](std::span<const double> g) {
                         auto ga = grad_sink(a);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     });
}

Tensor row(const Tensor& a, std::size_t index) {
    require_rank(a, 2, "row");
    const std::size_t rows = a.dim(0), cols = a.dim(1);
    if (index >= rows) {
        throw DimensionError("row " + std::to_string(index) + " out of range for " +
                             shape_string(a.shape()));
    }
    auto x = a.data().subspan(index * cols, cols);
    return record_op(Shape{cols}, std::vector<double>(x.begin(), x.end()), {a},
                     [a, index, cols](std::span<const double> g) {
                         auto ga = grad_sink(a);
                         for (std::size_t j = 0; j < cols; ++j) ga[index * cols + j] += g[j];
                     });
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t length) {
    require_rank(a, 1, "slice");
    if (length == 0 || begin + length > a.dim(0)) {
        throw DimensionError("slice [" + std::to_string(begin) + ", +" + std::to_string(length) +
                             ") out of range for " + shape_string(a.shape()));
    }
    auto x = a.data().subspan(begin, length);
    return record_op(Shape{length}, std::vector<double>(x.begin(), x.end()), {a},
                     [a, begin](std::span<const double> g) {
                         auto ga = grad_sink(a);
                         for (std::size_t j = 0; j < g.size(); ++j) ga[begin + j] += g[j];
                     });
}

Tensor stack(const std::vector<Tensor>& items) {
    if (items.empty()) {
        throw DimensionError("stack: no tensors given");
    }
    const Shape& inner = items.front().shape();
    const std::size_t n = shape_numel(inner);
    std::vector<double> out;
    out.reserve(items.size() * n);
    for (const auto& t : items) {
        if (t.shape() != inner) {
            throw DimensionError("stack: shape mismatch " + shape_string(inner) + " vs " +
                                 shape_string(t.shape()));
        }
        auto x = t.data();
        out.insert(out.end(), x.begin(), x.end());
    }
    Shape shape{items.size()};
    shape.insert(shape.end(), inner.begin(), inner.end());
    return record_op(std::move(shape), std::move(out), items, [items, n](std::span<const double> g) {
        for (std::size_t k = 0; k < items.size(); ++k) {
            if (auto gk = grad_sink(items[k]); !gk.empty()) {
                for (std::size_t i = 0; i < n; ++i) gk[i] += g[k * n + i];
            }
        }
    });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
    require_rank(table, 2, "gather_rows");
    if (indices.empty()) {
        throw DegenerateInputError("gather_rows: empty index list");
    }
    const std::size_t rows = table.dim(0), cols = table.dim(1);
    auto x = table.data();
    std::vector<double> out;
    out.reserve(indices.size() * cols);
    for (std::size_t idx : indices) {
        if (idx >= rows) {
            throw DimensionError("gather_rows: index " + std::to_string(idx) + " out of range for " +
                                 shape_string(table.shape()));
        }
        out.insert(out.end(), x.begin() + idx * cols, x.begin() + (idx + 1) * cols);
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return record_op(Shape{idx.size(), cols}, std::move(out), {table},
                     [table, idx, cols](std::span<const double> g) {
                         auto gt = grad_sink(table);
                         for (std::size_t t = 0; t < idx.size(); ++t) {
                             for (std::size_t j = 0; j < cols; ++j) gt[idx[t] * cols + j] += g[t * cols + j];
                         }
                     });
}

Tensor spatial_max_min(const Tensor& input) {
    require_rank(input, 3, "spatial_max_min");
    const std::size_t channels = input.dim(0);
    const std::size_t cells = input.dim(1) * input.dim(2);
    auto x = input.data();
    std::vector<double> out(channels);
    std::vector<std::size_t> argmax(channels), argmin(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        const double* m = x.data() + c * cells;
        std::size_t hi = 0, lo = 0;
        for (std::size_t i = 1; i < cells; ++i) {
            if (m[i] > m[hi]) hi = i;
            if (m[i] < m[lo]) lo = i;
        }
        argmax[c] = c * cells + hi;
        argmin[c] = c * cells + lo;
        out[c] = m[hi] + m[lo];
    }
    return record_op(Shape{channels}, std::move(out), {input},
                     [input, argmax = std::move(argmax), argmin = std::move(argmin)](std::span<const double> g) {
                         auto gi = grad_sink(input);
                         for (std::size_t c = 0; c < g.size(); ++c) {
                             gi[argmax[c]] += g[c];
                             gi[argmin[c]] += g[c];
                         }
                     });
}

Tensor spatial_mean(const Tensor& input) {
    require_rank(input, 3, "spatial_mean");
    const std::size_t channels = input.dim(0);
    const std::size_t cells = input.dim(1) * input.dim(2);
    auto x = input.data();
    std::vector<double> out(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < cells; ++i) total += x[c * cells + i];
        out[c] = total / static_cast<double>(cells);
    }
    return record_op(Shape{channels}, std::move(out), {input}, [input, cells](std::span<const double> g) {
        auto gi = grad_sink(input);
        const double inv = 1.0 / static_cast<double>(cells);
        for (std::size_t c = 0; c < g.size(); ++c) {
            for (std::size_t i = 0; i < cells; ++i) gi[c * cells + i] += g[c] * inv;
        }
    });
}

Tensor l2_normalize(const Tensor& input) {
    auto x = input.data();
    double sq = 0.0;
    for (double v : x) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm > kNormEpsilon)) {
        throw DegenerateInputError("l2_normalize: norm " + std::to_string(norm) +
                                   " is below the degeneracy threshold");
    }
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / norm;
    std::vector<double> y = out;
    return record_op(input.shape(), std::move(out), {input},
                     [input, y = std::move(y), norm](std::span<const double> g) {
                         auto gi = grad_sink(input);
                         double proj = 0.0;
                         for (std::size_t i = 0; i < g.size(); ++i) proj += y[i] * g[i];
                         for (std::size_t i = 0; i < g.size(); ++i) gi[i] += (g[i] - y[i] * proj) / norm;
                     });
}

}  // namespace semvis
