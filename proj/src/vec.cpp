#include "fedsim/vec.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>

namespace fedsim {

namespace {

void require_finite(const ParamVector& v, const char* op) {
    for (double x : v.values) {
        if (!std::isfinite(x)) {
            throw std::domain_error(std::string(op) + ": non-finite entry in result");
        }
    }
}

}  // namespace

ParamVector zeros_like(const ParamVector& v) {
    return ParamVector(std::vector<double>(v.size(), 0.0), v.shape_tag);
}

ParamVector constant_like(const ParamVector& v, double value) {
    ParamVector out(std::vector<double>(v.size(), value), v.shape_tag);
    require_finite(out, "constant_like");
    return out;
}

void require_same_shape(const ParamVector& a, const ParamVector& b, const char* op) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(op) + ": length mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
    if (!a.shape_tag.empty() && !b.shape_tag.empty() && a.shape_tag != b.shape_tag) {
        throw std::invalid_argument(std::string(op) + ": shape tag mismatch (" + a.shape_tag +
                                    " vs " + b.shape_tag + ")");
    }
}

ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y) {
    require_same_shape(x, y, "axpy");
    ParamVector out = y;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values[i] += alpha * x.values[i];
    }
    require_finite(out, "axpy");
    return out;
}

ParamVector add(const ParamVector& a, const ParamVector& b) {
    return axpy(1.0, b, a);
}

ParamVector sub(const ParamVector& a, const ParamVector& b) {
    require_same_shape(a, b, "sub");
    ParamVector out = a;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values[i] -= b.values[i];
    }
    require_finite(out, "sub");
    return out;
}

ParamVector scale(double alpha, const ParamVector& v) {
    ParamVector out = v;
    for (double& x : out.values) {
        x *= alpha;
    }
    require_finite(out, "scale");
    return out;
}

ParamVector sum_of(std::span<const ParamVector* const> terms) {
    if (terms.empty()) {
        throw std::invalid_argument("sum_of: empty term list");
    }
    ParamVector out = *terms[0];
    for (std::size_t k = 1; k < terms.size(); ++k) {
        require_same_shape(out, *terms[k], "sum_of");
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.values[i] += terms[k]->values[i];
        }
    }
    require_finite(out, "sum_of");
    return out;
}

double inf_norm(const ParamVector& v) {
    double m = 0.0;
    for (double x : v.values) {
        double a = std::fabs(x);
        if (a > m) {
            m = a;
        }
    }
    return m;
}

bool all_finite(const ParamVector& v) {
    for (double x : v.values) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

std::uint64_t fingerprint(const ParamVector& v) {
    std::uint64_t h = 1469598103934665603ull;  // FNV offset basis
    for (double x : v.values) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;  // FNV prime
        }
    }
    return h;
}

}  // namespace fedsim
