#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace relabel {

// Dense row-major matrix of doubles. Plain storage; all heavy arithmetic
// goes through the kernels backend.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    std::span<double> row_span(std::size_t i) { return {row(i), cols}; }
    std::span<const double> row_span(std::size_t i) const { return {row(i), cols}; }

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }

    bool operator==(const Matrix&) const = default;
};

// Tri-state annotation storage: +1 true, -1 false, 0 undefined.
struct AnnotationMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int8_t> values;

    AnnotationMatrix() = default;
    AnnotationMatrix(std::size_t r, std::size_t c, std::int8_t fill = 0)
        : rows(r), cols(c), values(r * c, fill) {}

    std::int8_t at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    void set(std::size_t i, std::size_t j, std::int8_t v) { values[i * cols + j] = v; }

    std::span<const std::int8_t> row_span(std::size_t i) const { return {values.data() + i * cols, cols}; }

    bool operator==(const AnnotationMatrix&) const = default;
};

inline bool is_tristate(int v) { return v == -1 || v == 0 || v == 1; }

}  // namespace relabel
