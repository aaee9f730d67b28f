#pragma once

// JSON encoding of operators and states: nested arrays, entry = [re, im], row-major.

#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "linalg.hpp"

namespace qgeom {

using json = nlohmann::json;

inline json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) {
            row.push_back(complex_to_json(m(r, c)));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json state_to_json(const PureState& psi) {
    json out = json::array();
    for (Index k = 0; k < psi.dim(); ++k) {
        out.push_back(complex_to_json(psi[k]));
    }
    return out;
}

inline double number_from_json(const json& j, const std::string& path) {
    if (!j.is_number()) {
        throw ConfigError(path, "expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw ConfigError(path, "number must be finite");
    }
    return v;
}

inline Complex complex_from_json(const json& j, const std::string& path) {
    if (j.is_number()) {
        return {number_from_json(j, path), 0.0};
    }
    if (!j.is_array() || j.size() != 2) {
        throw ConfigError(path, "expected [re, im]");
    }
    return {number_from_json(j[0], path + "[0]"), number_from_json(j[1], path + "[1]")};
}

/// Parses a dim x dim matrix; throws ConfigError naming the offending path.
inline Matrix matrix_from_json(const json& j, Index dim, const std::string& path) {
    if (!j.is_array() || static_cast<Index>(j.size()) != dim) {
        throw ConfigError(path, "expected " + std::to_string(dim) + " rows");
    }
    Matrix m(dim, dim);
    for (Index r = 0; r < dim; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        const std::string row_path = path + "[" + std::to_string(r) + "]";
        if (!row.is_array() || static_cast<Index>(row.size()) != dim) {
            throw ConfigError(row_path, "expected " + std::to_string(dim) + " entries");
        }
        for (Index c = 0; c < dim; ++c) {
            m(r, c) = complex_from_json(row[static_cast<std::size_t>(c)], row_path + "[" + std::to_string(c) + "]");
        }
    }
    return m;
}

/// Hermitian matrix; rejects inputs whose skew exceeds `max_skew`, then symmetrizes.
inline HermitianOperator hermitian_from_json(const json& j, Index dim, const std::string& path,
                                             double max_skew = 1e-9) {
    const Matrix m = matrix_from_json(j, dim, path);
    const double skew = HermitianOperator::skew(m);
    if (skew > max_skew) {
        throw ConfigError(path, "matrix is not Hermitian (skew " + std::to_string(skew) + ")");
    }
    return HermitianOperator(m);
}

inline PureState state_from_json(const json& j, Index dim, const std::string& path) {
    if (!j.is_array() || static_cast<Index>(j.size()) != dim) {
        throw ConfigError(path, "expected " + std::to_string(dim) + " amplitudes");
    }
    Vector v(dim);
    for (Index k = 0; k < dim; ++k) {
        v(k) = complex_from_json(j[static_cast<std::size_t>(k)], path + "[" + std::to_string(k) + "]");
    }
    if (!(v.norm() > 0.0)) {
        throw ConfigError(path, "state vector is zero");
    }
    return PureState(std::move(v));
}

} // namespace qgeom
