#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedsim/rng.hpp"

namespace fedsim {

std::size_t ModelSpec::param_count() const {
    if (kind == ModelKind::linear_softmax) {
        return static_cast<std::size_t>(num_classes) * input_dim + num_classes;
    }
    return static_cast<std::size_t>(hidden_dim) * input_dim + hidden_dim +
           static_cast<std::size_t>(num_classes) * hidden_dim + num_classes;
}

std::string ModelSpec::shape_tag() const {
    if (kind == ModelKind::linear_softmax) {
        return "linear:" + std::to_string(input_dim) + "x" + std::to_string(num_classes);
    }
    return "mlp1:" + std::to_string(input_dim) + "-" + std::to_string(hidden_dim) + "-" +
           std::to_string(num_classes) + ":" +
           (activation == Activation::tanh ? "tanh" : "relu");
}

void ModelSpec::validate() const {
    if (input_dim < 1) {
        throw std::invalid_argument("ModelSpec: input_dim must be positive");
    }
    if (num_classes < 2) {
        throw std::invalid_argument("ModelSpec: num_classes must be >= 2");
    }
    if (kind == ModelKind::mlp1 && hidden_dim < 1) {
        throw std::invalid_argument("ModelSpec: hidden_dim must be positive for mlp1");
    }
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    std::vector<double> values(spec.param_count());
    for (double& v : values) {
        v = rng.uniform(-0.1, 0.1);
    }
    return ParamVector(std::move(values), spec.shape_tag());
}

namespace {

void check_theta(const ModelSpec& spec, const ParamVector& theta) {
    if (theta.size() != spec.param_count()) {
        throw std::invalid_argument("evaluate: parameter length " + std::to_string(theta.size()) +
                                    " does not match " + spec.shape_tag());
    }
}

// Stable softmax cross-entropy for one row of logits. Returns the loss and
// leaves p - onehot(y) in `logits`. sum >= 1 because the max term
// contributes exp(0), so the loss stays finite for any finite logits.
double softmax_ce_backward(std::vector<double>& logits, int label) {
    double zmax = *std::max_element(logits.begin(), logits.end());
    double zy_centered = logits[label] - zmax;
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - zmax);
        sum += z;
    }
    double loss = std::log(sum) - zy_centered;
    for (double& z : logits) {
        z /= sum;
    }
    logits[label] -= 1.0;
    return loss;
}

}  // namespace

ModelLossEvaluator::ModelLossEvaluator(ModelSpec spec, const DatasetShard* shard,
                                       Reduction reduction)
    : spec_(spec), shard_(shard), reduction_(reduction) {
    spec_.validate();
    if (shard_ == nullptr || shard_->rows() == 0) {
        throw std::invalid_argument("ModelLossEvaluator: empty shard");
    }
    if (shard_->dim != spec_.input_dim) {
        throw std::invalid_argument("ModelLossEvaluator: shard dim " +
                                    std::to_string(shard_->dim) + " != input_dim " +
                                    std::to_string(spec_.input_dim));
    }
    if (shard_->max_label() >= spec_.num_classes) {
        throw std::invalid_argument("ModelLossEvaluator: label out of range for " +
                                    spec_.shape_tag());
    }
}

Evaluation ModelLossEvaluator::evaluate(const ParamVector& theta) const {
    check_theta(spec_, theta);

    const int d = spec_.input_dim;
    const int c = spec_.num_classes;
    const int n = shard_->rows();
    const double w = reduction_ == Reduction::mean ? 1.0 / n : 1.0;
    const double* p = theta.values.data();

    Evaluation out;
    out.grad = zeros_like(theta);
    double* g = out.grad.values.data();

    if (spec_.kind == ModelKind::linear_softmax) {
        const double* W = p;            // c x d
        const double* b = p + c * d;    // c
        double* gW = g;
        double* gb = g + c * d;

        std::vector<double> z(c);
        for (int i = 0; i < n; ++i) {
            auto x = shard_->row(i);
            for (int k = 0; k < c; ++k) {
                double acc = b[k];
                const double* wk = W + static_cast<std::size_t>(k) * d;
                for (int j = 0; j < d; ++j) {
                    acc += wk[j] * x[j];
                }
                z[k] = acc;
            }
            out.loss += w * softmax_ce_backward(z, shard_->labels[i]);
            for (int k = 0; k < c; ++k) {
                double dz = w * z[k];
                double* gk = gW + static_cast<std::size_t>(k) * d;
                for (int j = 0; j < d; ++j) {
                    gk[j] += dz * x[j];
                }
                gb[k] += dz;
            }
        }
    } else {
        const int h = spec_.hidden_dim;
        const double* W1 = p;                        // h x d
        const double* b1 = p + h * d;                // h
        const double* W2 = b1 + h;                   // c x h
        const double* b2 = W2 + static_cast<std::size_t>(c) * h;  // c
        double* gW1 = g;
        double* gb1 = g + h * d;
        double* gW2 = gb1 + h;
        double* gb2 = gW2 + static_cast<std::size_t>(c) * h;

        std::vector<double> pre(h), act(h), z(c), dact(h);
        const bool use_tanh = spec_.activation == Activation::tanh;
        for (int i = 0; i < n; ++i) {
            auto x = shard_->row(i);
            for (int k = 0; k < h; ++k) {
                double acc = b1[k];
                const double* wk = W1 + static_cast<std::size_t>(k) * d;
                for (int j = 0; j < d; ++j) {
                    acc += wk[j] * x[j];
                }
                pre[k] = acc;
                act[k] = use_tanh ? std::tanh(acc) : (acc > 0.0 ? acc : 0.0);
            }
            for (int k = 0; k < c; ++k) {
                double acc = b2[k];
                const double* wk = W2 + static_cast<std::size_t>(k) * h;
                for (int j = 0; j < h; ++j) {
                    acc += wk[j] * act[j];
                }
                z[k] = acc;
            }
            out.loss += w * softmax_ce_backward(z, shard_->labels[i]);

            std::fill(dact.begin(), dact.end(), 0.0);
            for (int k = 0; k < c; ++k) {
                double dz = w * z[k];
                double* gk = gW2 + static_cast<std::size_t>(k) * h;
                const double* wk = W2 + static_cast<std::size_t>(k) * h;
                for (int j = 0; j < h; ++j) {
                    gk[j] += dz * act[j];
                    dact[j] += dz * wk[j];
                }
                gb2[k] += dz;
            }
            for (int k = 0; k < h; ++k) {
                double dpre = dact[k] * (use_tanh ? 1.0 - act[k] * act[k]
                                                  : (pre[k] > 0.0 ? 1.0 : 0.0));
                double* gk = gW1 + static_cast<std::size_t>(k) * d;
                for (int j = 0; j < d; ++j) {
                    gk[j] += dpre * x[j];
                }
                gb1[k] += dpre;
            }
        }
    }

    if (!std::isfinite(out.loss) || !all_finite(out.grad)) {
        throw std::domain_error("evaluate: non-finite loss or gradient");
    }
    return out;
}

double fd_check(const LossEvaluator& ev, const ParamVector& theta, double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("fd_check: h must be positive");
    }
    Evaluation base = ev.evaluate(theta);
    double max_rel = 0.0;
    ParamVector probe = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        probe.values[i] = theta.values[i] + h;
        double lp = ev.evaluate(probe).loss;
        probe.values[i] = theta.values[i] - h;
        double lm = ev.evaluate(probe).loss;
        probe.values[i] = theta.values[i];
        if (!std::isfinite(lp) || !std::isfinite(lm)) {
            throw std::domain_error("fd_check: non-finite loss at perturbed point");
        }
        double cd = (lp - lm) / (2.0 * h);
        double rel = std::fabs(base.grad.values[i] - cd) / (std::fabs(cd) + 1e-12);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

int predict_class(const ModelSpec& spec, const ParamVector& theta, std::span<const double> x) {
    check_theta(spec, theta);
    const int d = spec.input_dim;
    const int c = spec.num_classes;
    const double* p = theta.values.data();

    std::vector<double> z(c);
    if (spec.kind == ModelKind::linear_softmax) {
        const double* W = p;
        const double* b = p + c * d;
        for (int k = 0; k < c; ++k) {
            double acc = b[k];
            const double* wk = W + static_cast<std::size_t>(k) * d;
            for (int j = 0; j < d; ++j) {
                acc += wk[j] * x[j];
            }
            z[k] = acc;
        }
    } else {
        const int h = spec.hidden_dim;
        const double* W1 = p;
        const double* b1 = p + h * d;
        const double* W2 = b1 + h;
        const double* b2 = W2 + static_cast<std::size_t>(c) * h;
        std::vector<double> act(h);
        for (int k = 0; k < h; ++k) {
            double acc = b1[k];
            const double* wk = W1 + static_cast<std::size_t>(k) * d;
            for (int j = 0; j < d; ++j) {
                acc += wk[j] * x[j];
            }
            act[k] = spec.activation == Activation::tanh ? std::tanh(acc)
                                                         : (acc > 0.0 ? acc : 0.0);
        }
        for (int k = 0; k < c; ++k) {
            double acc = b2[k];
            const double* wk = W2 + static_cast<std::size_t>(k) * h;
            for (int j = 0; j < h; ++j) {
                acc += wk[j] * act[j];
            }
            z[k] = acc;
        }
    }

    int best = 0;
    for (int k = 1; k < c; ++k) {
        if (z[k] > z[best]) {  // strict: ties keep the lowest index
            best = k;
        }
    }
    return best;
}

ShardMetrics eval_metrics(const ModelSpec& spec, const DatasetShard& shard,
                          const ParamVector& theta) {
    ModelLossEvaluator ev(spec, &shard, Reduction::mean);
    ShardMetrics m;
    m.loss = ev.evaluate(theta).loss;
    int correct = 0;
    for (int i = 0; i < shard.rows(); ++i) {
        if (predict_class(spec, theta, shard.row(i)) == shard.labels[i]) {
            ++correct;
        }
    }
    m.accuracy_pct = 100.0 * correct / shard.rows();
    return m;
}

}  // namespace fedsim
