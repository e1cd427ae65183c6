#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ar {

// Error hierarchy shared by every module.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> d);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

// y = m v
Vector matvec(const Matrix& m, const Vector& v);
// y = m^T v, without materializing the transpose
Vector matvec_transposed(const Matrix& m, const Vector& v);
// u v^T
Matrix outer(const Vector& u, const Vector& v);
Matrix explicit_transpose(const Matrix& m);

Vector relu(const Vector& v);
// relu'(0) := 0
Vector relu_prime(const Vector& v);

// 1/2 sum (y_i - t_i)^2
double mse_loss(const Vector& y, const Vector& t);
// y - t
Vector mse_grad(const Vector& y, const Vector& t);

// Dense products for the batched training path (columns = minibatch items).
Matrix matmul(const Matrix& a, const Matrix& b);        // a b
Matrix matmul_at_b(const Matrix& a, const Matrix& b);   // a^T b
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);   // a b^T

Vector hadamard(const Vector& a, const Vector& b);
void axpy(double a, const Vector& x, Vector& y);  // y += a*x

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

double dot(const Vector& a, const Vector& b);
double norm_inf(const Vector& v);

}  // namespace ar
