#include "ar/linalg.hpp"

#include <cmath>
#include <utility>

namespace ar {

namespace {
std::string shape_str(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}
}  // namespace

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d)
    : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != rows * cols) {
        throw ShapeError("matrix data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(rows, cols));
    }
}

Vector matvec(const Matrix& m, const Vector& v) {
    if (m.cols != v.size()) {
        throw ShapeError("matvec: matrix " + shape_str(m.rows, m.cols) +
                         " incompatible with vector of dim " + std::to_string(v.size()));
    }
    Vector out(m.rows, 0.0);
    const double* row = m.data.data();
    for (std::size_t i = 0; i < m.rows; ++i, row += m.cols) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * v[j];
        out[i] = acc;
    }
    return out;
}

Vector matvec_transposed(const Matrix& m, const Vector& v) {
    if (m.rows != v.size()) {
        throw ShapeError("matvec_transposed: matrix " + shape_str(m.rows, m.cols) +
                         " incompatible with vector of dim " + std::to_string(v.size()));
    }
    Vector out(m.cols, 0.0);
    const double* row = m.data.data();
    // Stream the matrix row-wise; accumulating into out keeps accesses contiguous.
    for (std::size_t i = 0; i < m.rows; ++i, row += m.cols) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += row[j] * vi;
    }
    return out;
}

Matrix outer(const Vector& u, const Vector& v) {
    Matrix out(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double ui = u[i];
        double* row = out.data.data() + i * out.cols;
        for (std::size_t j = 0; j < v.size(); ++j) row[j] = ui * v[j];
    }
    return out;
}

Matrix explicit_transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
    return out;
}

Vector relu(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
    return out;
}

Vector relu_prime(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? 1.0 : 0.0;
    return out;
}

double mse_loss(const Vector& y, const Vector& t) {
    if (y.size() != t.size()) {
        throw ShapeError("mse_loss: dim " + std::to_string(y.size()) + " vs " +
                         std::to_string(t.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - t[i];
        acc += d * d;
    }
    return 0.5 * acc;
}

Vector mse_grad(const Vector& y, const Vector& t) {
    if (y.size() != t.size()) {
        throw ShapeError("mse_grad: dim " + std::to_string(y.size()) + " vs " +
                         std::to_string(t.size()));
    }
    Vector out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] - t[i];
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: " + shape_str(a.rows, a.cols) + " times " +
                         shape_str(b.rows, b.cols));
    }
    Matrix out(a.rows, b.cols);
    // i-k-j order keeps the inner loop streaming over contiguous rows.
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* dst = out.data.data() + i * out.cols;
        const double* arow = a.data.data() + i * a.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) dst[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) {
        throw ShapeError("matmul_at_b: " + shape_str(a.rows, a.cols) + " vs " +
                         shape_str(b.rows, b.cols));
    }
    Matrix out(a.cols, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        const double* brow = b.data.data() + i * b.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            double* dst = out.data.data() + k * out.cols;
            for (std::size_t j = 0; j < b.cols; ++j) dst[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) {
        throw ShapeError("matmul_a_bt: " + shape_str(a.rows, a.cols) + " vs " +
                         shape_str(b.rows, b.cols));
    }
    Matrix out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        double* dst = out.data.data() + i * out.cols;
        for (std::size_t r = 0; r < b.rows; ++r) {
            const double* brow = b.data.data() + r * b.cols;
            double acc = 0.0;
            for (std::size_t j = 0; j < a.cols; ++j) acc += arow[j] * brow[j];
            dst[r] = acc;
        }
    }
    return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        throw ShapeError("hadamard: dim " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

void axpy(double a, const Vector& x, Vector& y) {
    if (x.size() != y.size()) {
        throw ShapeError("axpy: dim " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
    }
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

bool all_finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Matrix& m) {
    for (double x : m.data)
        if (!std::isfinite(x)) return false;
    return true;
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: dim " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm_inf(const Vector& v) {
    double m = 0.0;
    for (double x : v) {
        const double a = std::fabs(x);
        if (a > m) m = a;
    }
    return m;
}

}  // namespace ar
