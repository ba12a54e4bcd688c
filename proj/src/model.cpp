#include "dfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dfl/errors.hpp"

namespace dfl::model {

std::size_t ModelShape::param_count() const {
    auto in = static_cast<std::size_t>(input_dim);
    auto cls = static_cast<std::size_t>(num_classes);
    auto hid = static_cast<std::size_t>(hidden_dim);
    if (hidden_dim == 0) return cls * (in + 1);
    return hid * (in + 1) + cls * (hid + 1);
}

void ModelShape::validate() const {
    if (input_dim < 1) throw std::invalid_argument("ModelShape: input_dim must be positive");
    if (num_classes < 2) throw std::invalid_argument("ModelShape: num_classes must be >= 2");
    if (hidden_dim < 0) throw std::invalid_argument("ModelShape: hidden_dim must be >= 0");
}

OptimiserState OptimiserState::sgd(double lr, double wd) {
    OptimiserState s;
    s.kind = OptimiserKind::SGD;
    s.learning_rate = lr;
    s.weight_decay = wd;
    return s;
}

OptimiserState OptimiserState::adam(double lr, double wd) {
    OptimiserState s;
    s.kind = OptimiserKind::Adam;
    s.learning_rate = lr;
    s.weight_decay = wd;
    return s;
}

void OptimiserState::reset() {
    m.clear();
    v.clear();
    step = 0;
}

namespace {

// Writes class probabilities for one sample into probs; returns log p[label].
// Layout offsets are shared with the gradient pass below.
double forward_sample(const std::vector<double>& theta, const ModelShape& shape,
                      const std::vector<double>& x, int label, std::vector<double>& hidden,
                      std::vector<double>& probs) {
    const int in = shape.input_dim;
    const int cls = shape.num_classes;
    const int hid = shape.hidden_dim;

    std::vector<double>& act = hidden;
    const double* w2;
    const double* b2;
    int logit_in;
    if (hid == 0) {
        w2 = theta.data();
        b2 = theta.data() + static_cast<std::size_t>(cls) * in;
        logit_in = in;
    } else {
        const double* w1 = theta.data();
        const double* b1 = theta.data() + static_cast<std::size_t>(hid) * in;
        act.resize(static_cast<std::size_t>(hid));
        for (int h = 0; h < hid; ++h) {
            double a = b1[h];
            const double* row = w1 + static_cast<std::size_t>(h) * in;
            for (int j = 0; j < in; ++j) a += row[j] * x[static_cast<std::size_t>(j)];
            act[static_cast<std::size_t>(h)] = std::tanh(a);
        }
        w2 = b1 + hid;
        b2 = w2 + static_cast<std::size_t>(cls) * hid;
        logit_in = hid;
    }

    const std::vector<double>& z_in = (hid == 0) ? x : act;
    probs.resize(static_cast<std::size_t>(cls));
    double zmax = -1e300;
    for (int c = 0; c < cls; ++c) {
        double z = b2[c];
        const double* row = w2 + static_cast<std::size_t>(c) * logit_in;
        for (int j = 0; j < logit_in; ++j) z += row[j] * z_in[static_cast<std::size_t>(j)];
        if (!std::isfinite(z)) throw NumericError("forward_loss: non-finite value in logits layer");
        probs[static_cast<std::size_t>(c)] = z;
        zmax = std::max(zmax, z);
    }
    double denom = 0.0;
    for (int c = 0; c < cls; ++c) {
        probs[static_cast<std::size_t>(c)] = std::exp(probs[static_cast<std::size_t>(c)] - zmax);
        denom += probs[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < cls; ++c) probs[static_cast<std::size_t>(c)] /= denom;
    double p = probs[static_cast<std::size_t>(label)];
    return std::log(std::max(p, 1e-300));
}

}  // namespace

LossGrad forward_loss(const ParamVector& params, const ModelShape& shape,
                      const data::Dataset& ds, std::span<const int> batch, double l2) {
    shape.validate();
    if (batch.empty()) throw std::invalid_argument("forward_loss: empty batch");
    if (params.size() != shape.param_count())
        throw std::invalid_argument("forward_loss: parameter count does not match model shape");
    if (ds.input_dim != shape.input_dim)
        throw std::invalid_argument("forward_loss: feature dimension does not match model shape");

    const int in = shape.input_dim;
    const int cls = shape.num_classes;
    const int hid = shape.hidden_dim;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const std::vector<double>& theta = params.values;

    LossGrad out;
    out.gradient.assign(theta.size(), 0.0);
    std::vector<double> hidden, probs;

    for (int si : batch) {
        const data::Sample& s = ds.samples[static_cast<std::size_t>(si)];
        if (static_cast<int>(s.x.size()) != in)
            throw std::invalid_argument("forward_loss: sample feature dimension mismatch");
        if (s.y < 0 || s.y >= cls) throw std::invalid_argument("forward_loss: label out of range");
        out.loss -= forward_sample(theta, shape, s.x, s.y, hidden, probs) * inv_b;

        if (hid == 0) {
            double* gw = out.gradient.data();
            double* gb = out.gradient.data() + static_cast<std::size_t>(cls) * in;
            for (int c = 0; c < cls; ++c) {
                double dz = (probs[static_cast<std::size_t>(c)] - (c == s.y ? 1.0 : 0.0)) * inv_b;
                double* row = gw + static_cast<std::size_t>(c) * in;
                for (int j = 0; j < in; ++j) row[j] += dz * s.x[static_cast<std::size_t>(j)];
                gb[c] += dz;
            }
        } else {
            const double* w2 = theta.data() + static_cast<std::size_t>(hid) * (in + 1);
            double* gw1 = out.gradient.data();
            double* gb1 = gw1 + static_cast<std::size_t>(hid) * in;
            double* gw2 = gb1 + hid;
            double* gb2 = gw2 + static_cast<std::size_t>(cls) * hid;
            // dz -> (W2, b2), then back through tanh to (W1, b1)
            for (int h = 0; h < hid; ++h) {
                double dh = 0.0;
                for (int c = 0; c < cls; ++c) {
                    double dz = (probs[static_cast<std::size_t>(c)] - (c == s.y ? 1.0 : 0.0)) * inv_b;
                    gw2[static_cast<std::size_t>(c) * hid + h] += dz * hidden[static_cast<std::size_t>(h)];
                    dh += w2[static_cast<std::size_t>(c) * hid + h] * dz;
                }
                double a = hidden[static_cast<std::size_t>(h)];
                double da = dh * (1.0 - a * a);
                if (!std::isfinite(da)) throw NumericError("forward_loss: non-finite value in hidden layer");
                double* row = gw1 + static_cast<std::size_t>(h) * in;
                for (int j = 0; j < in; ++j) row[j] += da * s.x[static_cast<std::size_t>(j)];
                gb1[h] += da;
            }
            for (int c = 0; c < cls; ++c)
                gb2[c] += (probs[static_cast<std::size_t>(c)] - (c == s.y ? 1.0 : 0.0)) * inv_b;
        }
    }

    if (l2 != 0.0) {
        double sq = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            sq += theta[i] * theta[i];
            out.gradient[i] += l2 * theta[i];
        }
        out.loss += 0.5 * l2 * sq;
    }
    if (!std::isfinite(out.loss)) throw NumericError("forward_loss: non-finite value in loss layer");
    return out;
}

void optimiser_step(ParamVector& params, const std::vector<double>& grad, OptimiserState& opt) {
    if (grad.size() != params.size())
        throw std::invalid_argument("optimiser_step: gradient length does not match parameters");
    for (double g : grad)
        if (!std::isfinite(g)) throw NumericError("optimiser_step: non-finite gradient");

    const double lr = opt.learning_rate;
    const double wd = opt.weight_decay;
    std::vector<double>& theta = params.values;

    if (opt.kind == OptimiserKind::SGD) {
        for (std::size_t i = 0; i < theta.size(); ++i)
            theta[i] -= lr * (grad[i] + wd * theta[i]);
        opt.step += 1;
        return;
    }

    if (opt.m.size() != theta.size()) {
        opt.m.assign(theta.size(), 0.0);
        opt.v.assign(theta.size(), 0.0);
    }
    opt.step += 1;
    const double b1 = opt.beta1;
    const double b2 = opt.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        opt.m[i] = b1 * opt.m[i] + (1.0 - b1) * grad[i];
        opt.v[i] = b2 * opt.v[i] + (1.0 - b2) * grad[i] * grad[i];
        double mhat = opt.m[i] / bc1;
        double vhat = opt.v[i] / bc2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + opt.epsilon) + lr * wd * theta[i];
    }
}

void train(ParamVector& params, OptimiserState& opt, const ModelShape& shape,
           const data::DatasetView& shard, int epochs, int batch_size, Rng& rng) {
    if (shard.empty()) throw std::invalid_argument("train: empty shard");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be positive");
    if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
    if (epochs == 0) return;

    std::vector<int> order = shard.idx;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(batch_size)) {
            std::size_t len = std::min(static_cast<std::size_t>(batch_size), order.size() - off);
            auto lg = forward_loss(params, shape, *shard.base,
                                   std::span<const int>(order.data() + off, len));
            optimiser_step(params, lg.gradient, opt);
        }
    }
    params.sample_count = static_cast<std::int64_t>(shard.size());
}

EvalResult evaluate(const ParamVector& params, const ModelShape& shape,
                    const data::DatasetView& test_set) {
    shape.validate();
    if (test_set.empty()) throw std::invalid_argument("evaluate: empty test set");
    if (params.size() != shape.param_count())
        throw std::invalid_argument("evaluate: parameter count does not match model shape");

    const int cls = shape.num_classes;
    std::vector<std::int64_t> tp(static_cast<std::size_t>(cls), 0);
    std::vector<std::int64_t> fp(static_cast<std::size_t>(cls), 0);
    std::vector<std::int64_t> fn(static_cast<std::size_t>(cls), 0);

    EvalResult res;
    std::vector<double> hidden, probs;
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        const data::Sample& s = test_set.sample(i);
        res.loss -= forward_sample(params.values, shape, s.x, s.y, hidden, probs);
        int pred = 0;
        for (int c = 1; c < cls; ++c)
            if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(pred)]) pred = c;
        if (pred == s.y) {
            ++correct;
            ++tp[static_cast<std::size_t>(pred)];
        } else {
            ++fp[static_cast<std::size_t>(pred)];
            ++fn[static_cast<std::size_t>(s.y)];
        }
    }
    double n = static_cast<double>(test_set.size());
    res.loss /= n;
    res.accuracy = static_cast<double>(correct) / n;
    double f1_sum = 0.0;
    for (int c = 0; c < cls; ++c) {
        double denom = static_cast<double>(2 * tp[static_cast<std::size_t>(c)] +
                                           fp[static_cast<std::size_t>(c)] +
                                           fn[static_cast<std::size_t>(c)]);
        f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[static_cast<std::size_t>(c)]) / denom : 0.0;
    }
    res.macro_f1 = f1_sum / static_cast<double>(cls);
    return res;
}

}  // namespace dfl::model
