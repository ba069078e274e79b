#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/vec.hpp"

namespace fedsim::test {

inline ParamVector make_vec(std::vector<double> values, std::string tag = "test") {
    return ParamVector(std::move(values), std::move(tag));
}

inline ParamVector make_scalar(double x) {
    return make_vec({x}, "quad:1");
}

// L(theta) = weight/2 * |theta - center|^2, grad = weight * (theta - center).
class QuadraticLoss final : public LossEvaluator {
public:
    QuadraticLoss(ParamVector center, double weight = 1.0)
        : center_(std::move(center)), weight_(weight) {}

    explicit QuadraticLoss(double scalar_center, double weight = 1.0)
        : center_(make_scalar(scalar_center)), weight_(weight) {}

    std::size_t dim() const override { return center_.size(); }
    std::string shape_tag() const override { return center_.shape_tag; }

    Evaluation evaluate(const ParamVector& theta) const override {
        require_same_shape(theta, center_, "QuadraticLoss");
        Evaluation out;
        out.grad = scale(weight_, sub(theta, center_));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            double d = theta.values[i] - center_.values[i];
            out.loss += 0.5 * weight_ * d * d;
        }
        return out;
    }

private:
    ParamVector center_;
    double weight_;
};

// L(theta) = dot(c, theta); central differences are exact for this.
class LinearLoss final : public LossEvaluator {
public:
    explicit LinearLoss(ParamVector coefficients) : c_(std::move(coefficients)) {}

    std::size_t dim() const override { return c_.size(); }
    std::string shape_tag() const override { return c_.shape_tag; }

    Evaluation evaluate(const ParamVector& theta) const override {
        require_same_shape(theta, c_, "LinearLoss");
        Evaluation out;
        out.grad = c_;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            out.loss += c_.values[i] * theta.values[i];
        }
        return out;
    }

private:
    ParamVector c_;
};

// Constant loss, zero gradient.
class ConstantLoss final : public LossEvaluator {
public:
    ConstantLoss(std::size_t dim, double value, std::string tag = "quad:1")
        : dim_(dim), value_(value), tag_(std::move(tag)) {}

    std::size_t dim() const override { return dim_; }
    std::string shape_tag() const override { return tag_; }

    Evaluation evaluate(const ParamVector& theta) const override {
        Evaluation out;
        out.loss = value_;
        out.grad = zeros_like(theta);
        return out;
    }

private:
    std::size_t dim_;
    double value_;
    std::string tag_;
};

}  // namespace fedsim::test
