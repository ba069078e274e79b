#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "fedsim/dataset.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

enum class ModelKind { linear_softmax, mlp1 };
enum class Activation { tanh, relu };
enum class Reduction { mean, sum };

// Architecture description. Two equal specs always produce the same
// parameter layout: [W (c x d), b (c)] for linear_softmax and
// [W1 (h x d), b1 (h), W2 (c x h), b2 (c)] for mlp1, all row-major.
struct ModelSpec {
    ModelKind kind = ModelKind::linear_softmax;
    int input_dim = 0;
    int hidden_dim = 0;  // mlp1 only
    int num_classes = 0;
    Activation activation = Activation::tanh;  // mlp1 only

    std::size_t param_count() const;
    std::string shape_tag() const;
    void validate() const;  // throws std::invalid_argument naming the field

    bool operator==(const ModelSpec&) const = default;
};

// Entries i.i.d. uniform on [-0.1, 0.1] from the portable generator; the
// same seed gives a bit-identical vector everywhere.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

struct Evaluation {
    double loss = 0.0;
    ParamVector grad;
};

// Pure loss + gradient source. Same input vector, bitwise-same output.
class LossEvaluator {
public:
    virtual ~LossEvaluator() = default;
    virtual std::size_t dim() const = 0;
    virtual std::string shape_tag() const = 0;
    virtual Evaluation evaluate(const ParamVector& theta) const = 0;
};

// Cross-entropy of a fixed model on a fixed shard with exact analytic
// gradients. The shard is borrowed, not owned; it must outlive the
// evaluator and stay unmodified (evaluators are shareable across threads
// because nothing here mutates).
class ModelLossEvaluator final : public LossEvaluator {
public:
    ModelLossEvaluator(ModelSpec spec, const DatasetShard* shard, Reduction reduction);

    std::size_t dim() const override { return spec_.param_count(); }
    std::string shape_tag() const override { return spec_.shape_tag(); }
    Evaluation evaluate(const ParamVector& theta) const override;

    const ModelSpec& spec() const { return spec_; }
    const DatasetShard& shard() const { return *shard_; }

private:
    ModelSpec spec_;
    const DatasetShard* shard_;
    Reduction reduction_;
};

// Max over coordinates of |analytic - central difference| / (|cd| + 1e-12).
double fd_check(const LossEvaluator& ev, const ParamVector& theta, double h);

// Argmax class for one input row; ties resolve to the lowest class index.
int predict_class(const ModelSpec& spec, const ParamVector& theta, std::span<const double> x);

struct ShardMetrics {
    double loss = 0.0;          // mean cross-entropy
    double accuracy_pct = 0.0;  // argmax match percentage in [0, 100]
};

ShardMetrics eval_metrics(const ModelSpec& spec, const DatasetShard& shard,
                          const ParamVector& theta);

}  // namespace fedsim
