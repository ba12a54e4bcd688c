#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dfl/data.hpp"
#include "dfl/param_vector.hpp"
#include "dfl/rng.hpp"

namespace dfl::model {

// input -> (optional tanh hidden layer) -> softmax. hidden_dim == 0 selects
// the plain softmax classifier. Parameter layout is fixed: [W1 row-major,
// b1, W2 row-major, b2] for the MLP, [W, b] for softmax.
struct ModelShape {
    int input_dim = 1;
    int num_classes = 2;
    int hidden_dim = 0;

    std::size_t param_count() const;
    void validate() const;
};

enum class OptimiserKind { SGD, Adam };

struct OptimiserState {
    OptimiserKind kind = OptimiserKind::SGD;
    double learning_rate = 0.01;
    double weight_decay = 0.0;  // decoupled: applied as -lr*wd*theta in the step
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> m;  // first moment (Adam)
    std::vector<double> v;  // second moment (Adam)
    std::int64_t step = 0;

    static OptimiserState sgd(double lr, double wd = 0.0);
    static OptimiserState adam(double lr, double wd = 0.0);

    // Drops moment history; used when parameters are replaced by an aggregate.
    void reset();
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> gradient;
};

// Mean cross-entropy over the batch and its analytic gradient. l2 adds an
// optional (l2/2)*||theta||^2 penalty; the training path keeps l2 = 0 and
// applies weight decay decoupled in the optimiser step instead.
LossGrad forward_loss(const ParamVector& params, const ModelShape& shape,
                      const data::Dataset& ds, std::span<const int> batch, double l2 = 0.0);

void optimiser_step(ParamVector& params, const std::vector<double>& grad, OptimiserState& opt);

// epochs full passes of seeded mini-batch SGD/Adam over the shard; on any
// training (epochs >= 1) sample_count becomes the shard size.
void train(ParamVector& params, OptimiserState& opt, const ModelShape& shape,
           const data::DatasetView& shard, int epochs, int batch_size, Rng& rng);

struct EvalResult {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double loss = 0.0;
};

// Argmax ties resolve to the lowest class index. A class with neither
// predictions nor instances contributes F1 = 0 to the macro average.
EvalResult evaluate(const ParamVector& params, const ModelShape& shape,
                    const data::DatasetView& test_set);

}  // namespace dfl::model
