#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mogkan/matrix.hpp"
#include "mogkan/rng.hpp"
#include "mogkan/spline.hpp"

namespace mogkan {

// A bank of learnable univariate functions phi_{q,p}, one per (output q,
// input p) pair, sharing a single knot grid:
//   phi_{q,p}(x) = base_weights(q,p)*silu(x)
//                + spline_weights(q,p) * sum_j coeffs(q,p,j)*B_j(x)
// The dense forward sums over inputs: out[b,q] = sum_p phi_{q,p}(in[b,p]).
struct KanLayer {
    int in_dim = 0;
    int out_dim = 0;
    SplineGrid grid;
    Matrix base_weights;           // out_dim x in_dim
    Matrix spline_weights;         // out_dim x in_dim
    std::vector<double> coeffs;    // out_dim * in_dim * num_basis, row-major

    std::size_t coeff_index(int q, int p, int j) const {
        return (static_cast<std::size_t>(q) * in_dim + p) * grid.num_basis() + j;
    }
};

KanLayer kan_layer_init(int in_dim, int out_dim, const SplineGrid& grid, std::uint64_t seed);

// Basis values/derivatives of every input entry, reused by the backward pass.
struct KanLayerCache {
    Matrix inputs;                       // B x in_dim
    std::vector<double> basis;           // B * in_dim * num_basis
    std::vector<double> basis_deriv;     // B * in_dim * num_basis
};

Matrix kan_layer_forward(const KanLayer& layer, const Matrix& inputs);
Matrix kan_layer_forward(const KanLayer& layer, const Matrix& inputs, KanLayerCache& cache);

// Parameter and input gradients for the dense forward. Parameter gradients
// accumulate into the given buffers (callers zero them once per batch).
struct KanLayerGrads {
    Matrix base_weights;
    Matrix spline_weights;
    std::vector<double> coeffs;
};

KanLayerGrads kan_layer_grads_like(const KanLayer& layer);

Matrix kan_layer_backward(const KanLayer& layer, const KanLayerCache& cache,
                          const Matrix& grad_out, KanLayerGrads& grads);

enum class Mode { Train, Eval };

struct BatchNormState {
    int dim = 0;
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double epsilon = 1e-5;
};

BatchNormState batch_norm_init(int dim, double momentum = 0.1, double epsilon = 1e-5);

// Train mode normalizes each column by the batch mean and population
// variance, then rescales by gamma/beta, and folds the batch statistics into
// the running ones: running <- (1-momentum)*running + momentum*batch.
// Eval mode uses the running statistics and leaves the state untouched.
struct BatchNormCache {
    Matrix x_hat;                   // normalized inputs
    std::vector<double> inv_std;    // 1/sqrt(var + eps) per column
};

Matrix batch_norm_forward(BatchNormState& state, const Matrix& inputs, Mode mode);
Matrix batch_norm_forward(BatchNormState& state, const Matrix& inputs, Mode mode,
                          BatchNormCache& cache);

struct BatchNormGrads {
    std::vector<double> gamma;
    std::vector<double> beta;
};

Matrix batch_norm_backward(const BatchNormState& state, const BatchNormCache& cache,
                           const Matrix& grad_out, Mode mode, BatchNormGrads& grads);

// Inverted dropout: kept entries are scaled by 1/(1-rate) so eval mode is the
// identity. The mask is drawn from the supplied RNG.
struct DropoutMask {
    double rate = 0.0;
    std::vector<std::uint8_t> kept;
};

Matrix dropout(const Matrix& inputs, double rate, Mode mode, Rng& rng);
Matrix dropout(const Matrix& inputs, double rate, Mode mode, Rng& rng, DropoutMask& mask);
Matrix dropout_backward(const DropoutMask& mask, const Matrix& grad_out);

struct SoftmaxResult {
    double loss = 0.0;
    Matrix probabilities;  // B x C, rows sum to 1
};

// Mean negative log-likelihood with max-subtraction for stability.
SoftmaxResult softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels);

// d(loss)/d(logits) = (prob - onehot)/B, matching the mean reduction.
Matrix softmax_cross_entropy_backward(const SoftmaxResult& result, const std::vector<int>& labels);

// Non-owning view over one parameter block and its gradient twin; the model
// exposes all trainable blocks in a stable order for the optimizer and for
// finite-difference checks.
struct ParamView {
    std::string name;
    double* values = nullptr;
    std::size_t size = 0;
};

struct AdamState {
    std::int64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
};

AdamState adam_init(std::size_t num_params, double beta1 = 0.9, double beta2 = 0.999,
                    double epsilon = 1e-8);

// One Adam step with bias correction. Weight decay is decoupled: every
// parameter is shrunk by lr*wd before the moment update is applied.
void adam_step(const std::vector<ParamView>& params, const std::vector<double>& grads,
               AdamState& state, double learning_rate, double weight_decay);

}  // namespace mogkan
