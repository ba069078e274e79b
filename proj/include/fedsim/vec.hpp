#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fedsim {

// Flat vector of model parameters, the currency every protocol message and
// shadow model is made of. `shape_tag` names the parameter layout that
// produced the vector so that vectors from incompatible architectures fail
// loudly instead of being silently combined.
struct ParamVector {
    std::vector<double> values;
    std::string shape_tag;

    ParamVector() = default;
    ParamVector(std::vector<double> v, std::string tag)
        : values(std::move(v)), shape_tag(std::move(tag)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    bool operator==(const ParamVector& other) const {
        return shape_tag == other.shape_tag && values == other.values;
    }
};

ParamVector zeros_like(const ParamVector& v);
ParamVector constant_like(const ParamVector& v, double value);

// y + alpha * x. All arithmetic is plain IEEE-754 double; results are
// checked for NaN/Inf and a std::domain_error is raised on violation.
ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y);
ParamVector add(const ParamVector& a, const ParamVector& b);
ParamVector sub(const ParamVector& a, const ParamVector& b);
ParamVector scale(double alpha, const ParamVector& v);

// Left-to-right accumulation in the order given. Callers that need the
// canonical client order (ascending id) must sort before calling; the
// function itself never reorders.
ParamVector sum_of(std::span<const ParamVector* const> terms);

double inf_norm(const ParamVector& v);
bool all_finite(const ParamVector& v);

// Throws std::invalid_argument mentioning `op` when lengths or tags differ.
void require_same_shape(const ParamVector& a, const ParamVector& b, const char* op);

// FNV-1a over the raw value bytes; used to detect desynchronized replicas.
std::uint64_t fingerprint(const ParamVector& v);

}  // namespace fedsim
