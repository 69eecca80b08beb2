#include "mogkan/kan.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mogkan {

KanLayer kan_layer_init(int in_dim, int out_dim, const SplineGrid& grid, std::uint64_t seed) {
    if (in_dim < 1 || out_dim < 1) {
        throw std::invalid_argument("invalid-size: layer dims must be >= 1");
    }
    KanLayer layer;
    layer.in_dim = in_dim;
    layer.out_dim = out_dim;
    layer.grid = grid;
    layer.base_weights = Matrix(out_dim, in_dim);
    layer.spline_weights = Matrix(out_dim, in_dim, 1.0);
    layer.coeffs.assign(static_cast<std::size_t>(out_dim) * in_dim * grid.num_basis(), 0.0);

    Rng rng(seed);
    const double base_scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    const double coeff_scale = 0.1 / std::sqrt(static_cast<double>(in_dim));
    for (int q = 0; q < out_dim; ++q) {
        for (int p = 0; p < in_dim; ++p) {
            layer.base_weights(q, p) = rng.normal(0.0, base_scale);
        }
    }
    for (auto& c : layer.coeffs) c = rng.normal(0.0, coeff_scale);
    return layer;
}

namespace {

void fill_basis_cache(const KanLayer& layer, const Matrix& inputs, KanLayerCache& cache) {
    const std::size_t b_count = inputs.rows();
    const std::size_t in = inputs.cols();
    const int m = layer.grid.num_basis();
    cache.inputs = inputs;
    cache.basis.resize(b_count * in * m);
    cache.basis_deriv.resize(b_count * in * m);
    for (std::size_t b = 0; b < b_count; ++b) {
        for (std::size_t p = 0; p < in; ++p) {
            const double x = inputs(b, p);
            std::vector<double> vals = basis_values(layer.grid, x);
            std::vector<double> ders = basis_derivatives(layer.grid, x);
            double* dst_v = cache.basis.data() + (b * in + p) * m;
            double* dst_d = cache.basis_deriv.data() + (b * in + p) * m;
            std::copy(vals.begin(), vals.end(), dst_v);
            std::copy(ders.begin(), ders.end(), dst_d);
        }
    }
}

Matrix forward_from_basis(const KanLayer& layer, const Matrix& inputs,
                          const std::vector<double>& basis) {
    const std::size_t b_count = inputs.rows();
    const std::size_t in = inputs.cols();
    const int m = layer.grid.num_basis();
    Matrix out(b_count, layer.out_dim);
    for (std::size_t b = 0; b < b_count; ++b) {
        for (std::size_t p = 0; p < in; ++p) {
            const double sil = silu(inputs(b, p));
            const double* bv = basis.data() + (b * in + p) * m;
            for (int q = 0; q < layer.out_dim; ++q) {
                const double* c = layer.coeffs.data() + layer.coeff_index(q, static_cast<int>(p), 0);
                double spline = 0.0;
                for (int j = 0; j < m; ++j) spline += c[j] * bv[j];
                out(b, q) += layer.base_weights(q, p) * sil + layer.spline_weights(q, p) * spline;
            }
        }
    }
    return out;
}

}  // namespace

Matrix kan_layer_forward(const KanLayer& layer, const Matrix& inputs) {
    if (static_cast<int>(inputs.cols()) != layer.in_dim) {
        throw std::invalid_argument("shape-mismatch: layer expects width " +
                                    std::to_string(layer.in_dim));
    }
    const std::size_t b_count = inputs.rows();
    const std::size_t in = inputs.cols();
    const int m = layer.grid.num_basis();
    std::vector<double> basis(b_count * in * m);
    for (std::size_t b = 0; b < b_count; ++b) {
        for (std::size_t p = 0; p < in; ++p) {
            std::vector<double> vals = basis_values(layer.grid, inputs(b, p));
            std::copy(vals.begin(), vals.end(), basis.data() + (b * in + p) * m);
        }
    }
    return forward_from_basis(layer, inputs, basis);
}

Matrix kan_layer_forward(const KanLayer& layer, const Matrix& inputs, KanLayerCache& cache) {
    if (static_cast<int>(inputs.cols()) != layer.in_dim) {
        throw std::invalid_argument("shape-mismatch: layer expects width " +
                                    std::to_string(layer.in_dim));
    }
    fill_basis_cache(layer, inputs, cache);
    return forward_from_basis(layer, inputs, cache.basis);
}

KanLayerGrads kan_layer_grads_like(const KanLayer& layer) {
    KanLayerGrads g;
    g.base_weights = Matrix(layer.out_dim, layer.in_dim);
    g.spline_weights = Matrix(layer.out_dim, layer.in_dim);
    g.coeffs.assign(layer.coeffs.size(), 0.0);
    return g;
}

Matrix kan_layer_backward(const KanLayer& layer, const KanLayerCache& cache,
                          const Matrix& grad_out, KanLayerGrads& grads) {
    const std::size_t b_count = cache.inputs.rows();
    const std::size_t in = cache.inputs.cols();
    const int m = layer.grid.num_basis();
    Matrix::check_shape(grad_out, b_count, layer.out_dim, "kan_layer_backward grad_out");
    Matrix grad_in(b_count, in);
    for (std::size_t b = 0; b < b_count; ++b) {
        for (std::size_t p = 0; p < in; ++p) {
            const double x = cache.inputs(b, p);
            const double sil = silu(x);
            const double dsil = silu_derivative(x);
            const double* bv = cache.basis.data() + (b * in + p) * m;
            const double* bd = cache.basis_deriv.data() + (b * in + p) * m;
            double gx = 0.0;
            for (int q = 0; q < layer.out_dim; ++q) {
                const double go = grad_out(b, q);
                if (go == 0.0) continue;
                const std::size_t ci = layer.coeff_index(q, static_cast<int>(p), 0);
                const double* c = layer.coeffs.data() + ci;
                double* gc = grads.coeffs.data() + ci;
                double spline = 0.0, dspline = 0.0;
                const double sw = layer.spline_weights(q, p);
                for (int j = 0; j < m; ++j) {
                    spline += c[j] * bv[j];
                    dspline += c[j] * bd[j];
                    gc[j] += go * sw * bv[j];
                }
                grads.base_weights(q, p) += go * sil;
                grads.spline_weights(q, p) += go * spline;
                gx += go * (layer.base_weights(q, p) * dsil + sw * dspline);
            }
            grad_in(b, p) = gx;
        }
    }
    return grad_in;
}

BatchNormState batch_norm_init(int dim, double momentum, double epsilon) {
    if (dim < 1) throw std::invalid_argument("invalid-size: batch norm dim must be >= 1");
    if (!(momentum > 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("invalid-size: momentum must be in (0,1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("invalid-size: epsilon must be > 0");
    BatchNormState s;
    s.dim = dim;
    s.gamma.assign(dim, 1.0);
    s.beta.assign(dim, 0.0);
    s.running_mean.assign(dim, 0.0);
    s.running_var.assign(dim, 1.0);
    s.momentum = momentum;
    s.epsilon = epsilon;
    return s;
}

Matrix batch_norm_forward(BatchNormState& state, const Matrix& inputs, Mode mode) {
    BatchNormCache cache;
    return batch_norm_forward(state, inputs, mode, cache);
}

Matrix batch_norm_forward(BatchNormState& state, const Matrix& inputs, Mode mode,
                          BatchNormCache& cache) {
    const std::size_t b_count = inputs.rows();
    const std::size_t dim = inputs.cols();
    if (static_cast<int>(dim) != state.dim) {
        throw std::invalid_argument("shape-mismatch: batch norm expects width " +
                                    std::to_string(state.dim));
    }
    Matrix out(b_count, dim);
    cache.x_hat = Matrix(b_count, dim);
    cache.inv_std.assign(dim, 0.0);
    if (mode == Mode::Train) {
        if (b_count < 2) {
            throw std::invalid_argument("batch-too-small: train mode needs batch size >= 2");
        }
        for (std::size_t j = 0; j < dim; ++j) {
            double mean = 0.0;
            for (std::size_t b = 0; b < b_count; ++b) mean += inputs(b, j);
            mean /= static_cast<double>(b_count);
            double var = 0.0;
            for (std::size_t b = 0; b < b_count; ++b) {
                double d = inputs(b, j) - mean;
                var += d * d;
            }
            var /= static_cast<double>(b_count);  // population variance
            const double inv = 1.0 / std::sqrt(var + state.epsilon);
            cache.inv_std[j] = inv;
            for (std::size_t b = 0; b < b_count; ++b) {
                double xh = (inputs(b, j) - mean) * inv;
                cache.x_hat(b, j) = xh;
                out(b, j) = state.gamma[j] * xh + state.beta[j];
            }
            state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mean;
            state.running_var[j] = (1.0 - state.momentum) * state.running_var[j] + state.momentum * var;
        }
    } else {
        for (std::size_t j = 0; j < dim; ++j) {
            const double inv = 1.0 / std::sqrt(state.running_var[j] + state.epsilon);
            cache.inv_std[j] = inv;
            for (std::size_t b = 0; b < b_count; ++b) {
                double xh = (inputs(b, j) - state.running_mean[j]) * inv;
                cache.x_hat(b, j) = xh;
                out(b, j) = state.gamma[j] * xh + state.beta[j];
            }
        }
    }
    return out;
}

Matrix batch_norm_backward(const BatchNormState& state, const BatchNormCache& cache,
                           const Matrix& grad_out, Mode mode, BatchNormGrads& grads) {
    const std::size_t b_count = grad_out.rows();
    const std::size_t dim = grad_out.cols();
    Matrix grad_in(b_count, dim);
    if (grads.gamma.size() != dim) grads.gamma.assign(dim, 0.0);
    if (grads.beta.size() != dim) grads.beta.assign(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < b_count; ++b) {
            const double dy = grad_out(b, j);
            sum_dy += dy;
            sum_dy_xhat += dy * cache.x_hat(b, j);
        }
        grads.gamma[j] += sum_dy_xhat;
        grads.beta[j] += sum_dy;
        const double inv = cache.inv_std[j];
        const double g = state.gamma[j];
        if (mode == Mode::Train) {
            const double n = static_cast<double>(b_count);
            for (std::size_t b = 0; b < b_count; ++b) {
                const double dxhat = grad_out(b, j) * g;
                grad_in(b, j) = inv / n *
                                (n * dxhat - g * sum_dy - cache.x_hat(b, j) * g * sum_dy_xhat);
            }
        } else {
            for (std::size_t b = 0; b < b_count; ++b) {
                grad_in(b, j) = grad_out(b, j) * g * inv;
            }
        }
    }
    return grad_in;
}

Matrix dropout(const Matrix& inputs, double rate, Mode mode, Rng& rng) {
    DropoutMask mask;
    return dropout(inputs, rate, mode, rng, mask);
}

Matrix dropout(const Matrix& inputs, double rate, Mode mode, Rng& rng, DropoutMask& mask) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument("invalid-rate: dropout rate must be in [0,1)");
    }
    mask.rate = rate;
    if (mode == Mode::Eval || rate == 0.0) {
        mask.kept.assign(inputs.data().size(), 1);
        return inputs;
    }
    Matrix out(inputs.rows(), inputs.cols());
    mask.kept.assign(inputs.data().size(), 0);
    const double scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < inputs.data().size(); ++i) {
        if (!rng.bernoulli(rate)) {
            mask.kept[i] = 1;
            out.data()[i] = inputs.data()[i] * scale;
        }
    }
    return out;
}

Matrix dropout_backward(const DropoutMask& mask, const Matrix& grad_out) {
    Matrix grad_in(grad_out.rows(), grad_out.cols());
    const double scale = 1.0 / (1.0 - mask.rate);
    for (std::size_t i = 0; i < grad_out.data().size(); ++i) {
        grad_in.data()[i] = mask.kept[i] ? grad_out.data()[i] * scale : 0.0;
    }
    return grad_in;
}

SoftmaxResult softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    const std::size_t b_count = logits.rows();
    const std::size_t classes = logits.cols();
    if (labels.size() != b_count) {
        throw std::invalid_argument("shape-mismatch: labels length must match batch size");
    }
    SoftmaxResult result;
    result.probabilities = Matrix(b_count, classes);
    double loss = 0.0;
    for (std::size_t b = 0; b < b_count; ++b) {
        const int label = labels[b];
        if (label < 0 || label >= static_cast<int>(classes)) {
            throw std::invalid_argument("label-out-of-range: label " + std::to_string(label) +
                                        " for " + std::to_string(classes) + " classes");
        }
        double max_logit = logits(b, 0);
        for (std::size_t c = 1; c < classes; ++c) max_logit = std::max(max_logit, logits(b, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(logits(b, c) - max_logit);
        for (std::size_t c = 0; c < classes; ++c) {
            result.probabilities(b, c) = std::exp(logits(b, c) - max_logit) / denom;
        }
        loss += -(logits(b, label) - max_logit - std::log(denom));
    }
    result.loss = loss / static_cast<double>(b_count);
    return result;
}

Matrix softmax_cross_entropy_backward(const SoftmaxResult& result, const std::vector<int>& labels) {
    const std::size_t b_count = result.probabilities.rows();
    const std::size_t classes = result.probabilities.cols();
    Matrix grad(b_count, classes);
    const double inv_b = 1.0 / static_cast<double>(b_count);
    for (std::size_t b = 0; b < b_count; ++b) {
        for (std::size_t c = 0; c < classes; ++c) {
            grad(b, c) = (result.probabilities(b, c) -
                          (static_cast<int>(c) == labels[b] ? 1.0 : 0.0)) *
                         inv_b;
        }
    }
    return grad;
}

AdamState adam_init(std::size_t num_params, double beta1, double beta2, double epsilon) {
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("invalid-size: Adam betas must be in (0,1)");
    }
    AdamState s;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    s.first_moment.assign(num_params, 0.0);
    s.second_moment.assign(num_params, 0.0);
    return s;
}

void adam_step(const std::vector<ParamView>& params, const std::vector<double>& grads,
               AdamState& state, double learning_rate, double weight_decay) {
    std::size_t total = 0;
    for (const auto& view : params) total += view.size;
    if (grads.size() != total || state.first_moment.size() != total) {
        throw std::invalid_argument("shape-mismatch: Adam buffers must match parameter count");
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bias1 = 1.0 - std::pow(state.beta1, t);
    const double bias2 = 1.0 - std::pow(state.beta2, t);
    std::size_t offset = 0;
    for (const auto& view : params) {
        for (std::size_t i = 0; i < view.size; ++i) {
            const std::size_t k = offset + i;
            double& p = view.values[i];
            const double g = grads[k];
            if (weight_decay != 0.0) p -= learning_rate * weight_decay * p;
            double& m = state.first_moment[k];
            double& v = state.second_moment[k];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g * g;
            const double m_hat = m / bias1;
            const double v_hat = v / bias2;
            p -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
        offset += view.size;
    }
}

}  // namespace mogkan
