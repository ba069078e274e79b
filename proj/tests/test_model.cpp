#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "test_support.hpp"

using namespace fedsim;
using fedsim::test::make_vec;

namespace {

ModelSpec linear_spec(int d, int c) {
    ModelSpec s;
    s.kind = ModelKind::linear_softmax;
    s.input_dim = d;
    s.num_classes = c;
    return s;
}

ModelSpec mlp_spec(int d, int h, int c, Activation act = Activation::tanh) {
    ModelSpec s;
    s.kind = ModelKind::mlp1;
    s.input_dim = d;
    s.hidden_dim = h;
    s.num_classes = c;
    s.activation = act;
    return s;
}

DatasetShard random_shard(int rows, int dim, int classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> feats(static_cast<std::size_t>(rows) * dim);
    std::vector<int> labels(rows);
    for (double& f : feats) {
        f = rng.normal();
    }
    for (int& l : labels) {
        l = static_cast<int>(rng.next_u64() % classes);
    }
    return DatasetShard::create(std::move(feats), std::move(labels), dim);
}

ParamVector random_theta(const ModelSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(spec.param_count());
    for (double& x : v) {
        x = rng.uniform(-0.5, 0.5);
    }
    return ParamVector(std::move(v), spec.shape_tag());
}

}  // namespace

TEST_CASE("param counts follow the layout") {
    CHECK(linear_spec(16, 10).param_count() == 16 * 10 + 10);
    CHECK(mlp_spec(16, 24, 10).param_count() == 24 * 16 + 24 + 10 * 24 + 10);
}

TEST_CASE("spec validation rejects bad dimensions") {
    CHECK_THROWS_AS(linear_spec(0, 2).validate(), std::invalid_argument);
    CHECK_THROWS_AS(linear_spec(3, 1).validate(), std::invalid_argument);
    CHECK_THROWS_AS(mlp_spec(3, 0, 2).validate(), std::invalid_argument);
    CHECK_THROWS_AS(init_params(linear_spec(0, 2), 1), std::invalid_argument);
}

TEST_CASE("init_params is deterministic and in range") {
    ModelSpec spec = linear_spec(2, 2);
    ParamVector a = init_params(spec, 42);
    ParamVector b = init_params(spec, 42);
    CHECK(a.values == b.values);
    CHECK(a.size() == spec.param_count());
    ParamVector c = init_params(spec, 7);
    for (double v : c.values) {
        CHECK(v >= -0.1);
        CHECK(v <= 0.1);
    }
    CHECK(init_params(spec, 7).values != a.values);
}

TEST_CASE("all-zero linear model on a balanced two-class shard has loss ln 2") {
    // Uniform softmax regardless of the input.
    DatasetShard shard = DatasetShard::create({1.0, 2.0, -1.0, 0.5}, {0, 1}, 2);
    ModelSpec spec = linear_spec(2, 2);
    ParamVector zeros(std::vector<double>(spec.param_count(), 0.0), spec.shape_tag());
    ModelLossEvaluator ev(spec, &shard, Reduction::mean);
    CHECK(ev.evaluate(zeros).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("duplicated rows with mean reduction match the single-row gradient") {
    DatasetShard one = DatasetShard::create({0.3, -1.2, 0.7}, {1}, 3);
    DatasetShard four = DatasetShard::create(
        {0.3, -1.2, 0.7, 0.3, -1.2, 0.7, 0.3, -1.2, 0.7, 0.3, -1.2, 0.7}, {1, 1, 1, 1}, 3);
    ModelSpec spec = linear_spec(3, 2);
    ParamVector theta = random_theta(spec, 5);
    Evaluation ea = ModelLossEvaluator(spec, &one, Reduction::mean).evaluate(theta);
    Evaluation eb = ModelLossEvaluator(spec, &four, Reduction::mean).evaluate(theta);
    CHECK(ea.loss == doctest::Approx(eb.loss).epsilon(1e-14));
    for (std::size_t i = 0; i < ea.grad.size(); ++i) {
        CHECK(ea.grad.values[i] == doctest::Approx(eb.grad.values[i]).epsilon(1e-13));
    }
}

TEST_CASE("evaluate is pure: identical inputs give bitwise identical outputs") {
    DatasetShard shard = random_shard(20, 4, 3, 11);
    ModelSpec spec = mlp_spec(4, 6, 3);
    ModelLossEvaluator ev(spec, &shard, Reduction::mean);
    ParamVector theta = random_theta(spec, 3);
    Evaluation a = ev.evaluate(theta);
    Evaluation b = ev.evaluate(theta);
    CHECK(a.loss == b.loss);
    CHECK(a.grad.values == b.grad.values);
}

TEST_CASE("evaluate rejects dimension mismatch and bad labels") {
    DatasetShard shard = random_shard(5, 4, 3, 1);
    ModelSpec spec = mlp_spec(4, 6, 3);
    ModelLossEvaluator ev(spec, &shard, Reduction::mean);
    CHECK_THROWS_AS(ev.evaluate(make_vec({1.0, 2.0})), std::invalid_argument);

    DatasetShard bad_labels = random_shard(5, 4, 7, 2);
    CHECK_THROWS_AS(ModelLossEvaluator(spec, &bad_labels, Reduction::mean),
                    std::invalid_argument);
    DatasetShard wrong_dim = random_shard(5, 3, 2, 3);
    CHECK_THROWS_AS(ModelLossEvaluator(spec, &wrong_dim, Reduction::mean),
                    std::invalid_argument);
}

TEST_CASE("sum reduction is mean times row count") {
    DatasetShard shard = random_shard(8, 3, 2, 21);
    ModelSpec spec = linear_spec(3, 2);
    ParamVector theta = random_theta(spec, 9);
    Evaluation mean = ModelLossEvaluator(spec, &shard, Reduction::mean).evaluate(theta);
    Evaluation sum = ModelLossEvaluator(spec, &shard, Reduction::sum).evaluate(theta);
    CHECK(sum.loss == doctest::Approx(8.0 * mean.loss).epsilon(1e-12));
}

TEST_CASE("fd_check is exact for a linear loss") {
    test::LinearLoss lin(make_vec({0.5, -2.0, 3.25}));
    CHECK(fd_check(lin, make_vec({1.0, 1.0, 1.0}), 1e-5) <= 1e-10);
}

TEST_CASE("fd_check is zero for a constant loss") {
    test::ConstantLoss konst(3, 4.0, "test");
    CHECK(fd_check(konst, make_vec({1.0, 2.0, 3.0}, "test"), 1e-5) == 0.0);
}

TEST_CASE("fd_check validates h") {
    test::ConstantLoss konst(1, 0.0, "test");
    CHECK_THROWS_AS(fd_check(konst, make_vec({0.0}, "test"), 0.0), std::invalid_argument);
}

TEST_CASE("random logistic instance matches central differences") {
    DatasetShard shard = random_shard(8, 3, 2, 77);
    ModelSpec spec = linear_spec(3, 2);
    ModelLossEvaluator ev(spec, &shard, Reduction::mean);
    CHECK(fd_check(ev, random_theta(spec, 78), 1e-5) <= 1e-6);
}

TEST_CASE("gradient correctness: 20 random instances per model kind stay under 1e-5") {
    for (int k = 0; k < 20; ++k) {
        {
            DatasetShard shard = random_shard(12, 5, 4, 1000 + k);
            ModelSpec spec = linear_spec(5, 4);
            ModelLossEvaluator ev(spec, &shard, Reduction::mean);
            CHECK(fd_check(ev, random_theta(spec, 2000 + k), 1e-5) <= 1e-5);
        }
        {
            DatasetShard shard = random_shard(10, 4, 3, 3000 + k);
            ModelSpec spec = mlp_spec(4, 6, 3, k % 2 == 0 ? Activation::tanh : Activation::relu);
            ModelLossEvaluator ev(spec, &shard, Reduction::mean);
            CHECK(fd_check(ev, random_theta(spec, 4000 + k), 1e-5) <= 1e-5);
        }
    }
}

TEST_CASE("predict_class breaks ties toward the lowest class index") {
    ModelSpec spec = linear_spec(1, 3);
    // Zero weights and equal biases: all logits tie.
    ParamVector theta(std::vector<double>(spec.param_count(), 0.0), spec.shape_tag());
    double x = 1.0;
    CHECK(predict_class(spec, theta, std::span<const double>(&x, 1)) == 0);
    // Raise class 2's bias above the rest.
    theta.values[spec.param_count() - 1] = 1.0;
    CHECK(predict_class(spec, theta, std::span<const double>(&x, 1)) == 2);
}

TEST_CASE("eval_metrics reports accuracy as a percentage") {
    DatasetShard shard = DatasetShard::create({2.0, -2.0, 2.0, -2.0}, {0, 1, 0, 1}, 1);
    ModelSpec spec = linear_spec(1, 2);
    // W = [[1],[-1]], b = 0: class 0 for positive inputs, 1 for negative.
    ParamVector theta(std::vector<double>{1.0, -1.0, 0.0, 0.0}, spec.shape_tag());
    ShardMetrics m = eval_metrics(spec, shard, theta);
    CHECK(m.accuracy_pct == 100.0);
    CHECK(m.loss > 0.0);
}
