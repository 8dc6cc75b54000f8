#include "smcsynth/matkernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "smcsynth/errors.hpp"

namespace smcsynth {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidInput(std::string("matrix shape mismatch in ") + op + ": " +
                           std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                           std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

void require_finite(const SymMatrix& S) {
    if (!S.matrix().all_finite()) throw InvalidInput("matrix has non-finite entries");
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw InvalidInput("ragged matrix initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix I(n, n);
    for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix D(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) D(i, i) = d[i];
    return D;
}

Matrix Matrix::column(std::span<const double> v) {
    Matrix c(v.size(), 1);
    std::copy(v.begin(), v.end(), c.data_.begin());
    return c;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double Matrix::trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
}

double Matrix::frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Vector Matrix::diag() const {
    Vector d(std::min(rows_, cols_));
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (*this)(i, i);
    return d;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw InvalidInput("block out of range");
    Matrix b(nr, nc);
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c) b(r, c) = (*this)(r0 + r, c0 + c);
    return b;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
    if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_) throw InvalidInput("block out of range");
    for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c) (*this)(r0 + r, c0 + c) = b(r, c);
}

Matrix& Matrix::operator+=(const Matrix& o) {
    require_same_shape(*this, o, "+");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    require_same_shape(*this, o, "-");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator-(Matrix a) { return a *= -1.0; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw InvalidInput("matrix product shape mismatch: " + std::to_string(a.rows()) + "x" +
                           std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                           std::to_string(b.cols()));
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Vector operator*(const Matrix& a, std::span<const double> v) {
    if (a.cols() != v.size()) throw InvalidInput("matrix-vector shape mismatch");
    Vector out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

// ---------------------------------------------------------------------------

SymMatrix::SymMatrix(std::size_t order) : m_(order, order) {}

SymMatrix::SymMatrix(const Matrix& a) : m_(a) {
    if (!a.square()) throw InvalidInput("symmetric matrix must be square");
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            m_(i, j) = v;
            m_(j, i) = v;
        }
}

SymMatrix::SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : SymMatrix(Matrix(rows)) {}

void SymMatrix::set(std::size_t r, std::size_t c, double v) {
    m_(r, c) = v;
    m_(c, r) = v;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
    m_ += o.m_;
    return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
    m_ *= s;
    return *this;
}

SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

// ---------------------------------------------------------------------------

namespace {

double offdiag_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

// Cyclic Jacobi: sweeps over all (p, q) pairs, annihilating each off-diagonal
// entry with a plane rotation, until the off-diagonal mass is negligible.
SymEigen jacobi(const SymMatrix& S, bool want_vectors) {
    require_finite(S);
    const std::size_t n = S.order();
    Matrix a = S.matrix();
    Matrix v = want_vectors ? Matrix::identity(n) : Matrix();
    const double scale = a.frobenius_norm();
    const double threshold = tolerance::jacobi_offdiag * scale;

    for (int sweep = 0; sweep < tolerance::jacobi_max_sweeps; ++sweep) {
        if (offdiag_norm(a) <= threshold) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                if (want_vectors) {
                    for (std::size_t k = 0; k < n; ++k) {
                        const double vkp = v(k, p);
                        const double vkq = v(k, q);
                        v(k, p) = c * vkp - s * vkq;
                        v(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    SymEigen out;
    out.values.resize(n);
    if (want_vectors) out.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        if (want_vectors)
            for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    return out;
}

}  // namespace

Vector sym_eigenvalues(const SymMatrix& S) { return jacobi(S, false).values; }

SymEigen sym_eigen(const SymMatrix& S) { return jacobi(S, true); }

double lambda_min(const SymMatrix& S) { return sym_eigenvalues(S).front(); }

double lambda_max(const SymMatrix& S) { return sym_eigenvalues(S).back(); }

bool try_cholesky(const SymMatrix& S, Matrix& L) {
    const std::size_t n = S.order();
    L = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = S(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        L(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = S(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / ljj;
        }
    }
    return true;
}

Matrix cholesky(const SymMatrix& S) {
    require_finite(S);
    Matrix L;
    if (!try_cholesky(S, L)) throw NotPositiveDefinite("Cholesky factorization broke down");
    return L;
}

bool is_positive_definite(const SymMatrix& S, double margin) {
    require_finite(S);
    if (margin < 0.0) throw InvalidInput("definiteness margin must be nonnegative");
    Matrix shifted = S.matrix();
    for (std::size_t i = 0; i < S.order(); ++i) shifted(i, i) -= margin;
    Matrix L;
    return try_cholesky(SymMatrix(shifted), L);
}

Matrix solve_lower(const Matrix& L, const Matrix& B) {
    const std::size_t n = L.rows();
    if (B.rows() != n) throw InvalidInput("triangular solve shape mismatch");
    Matrix Y = B;
    for (std::size_t c = 0; c < B.cols(); ++c)
        for (std::size_t i = 0; i < n; ++i) {
            double s = Y(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * Y(k, c);
            Y(i, c) = s / L(i, i);
        }
    return Y;
}

Matrix solve_lower_transpose(const Matrix& L, const Matrix& B) {
    const std::size_t n = L.rows();
    if (B.rows() != n) throw InvalidInput("triangular solve shape mismatch");
    Matrix Y = B;
    for (std::size_t c = 0; c < B.cols(); ++c)
        for (std::size_t ii = n; ii-- > 0;) {
            double s = Y(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * Y(k, c);
            Y(ii, c) = s / L(ii, ii);
        }
    return Y;
}

Matrix solve_spd(const SymMatrix& S, const Matrix& rhs) {
    if (rhs.rows() != S.order()) throw InvalidInput("solve_spd: rhs row count does not match");
    const Matrix L = cholesky(S);
    return solve_lower_transpose(L, solve_lower(L, rhs));
}

SymMatrix inverse_spd(const SymMatrix& S) {
    return SymMatrix(solve_spd(S, Matrix::identity(S.order())));
}

SymMatrix congruence(const SymMatrix& S, const Matrix& T) {
    if (T.rows() != S.order()) throw InvalidInput("congruence: T rows must equal order of S");
    return SymMatrix(T.transpose() * S.matrix() * T);
}

}  // namespace smcsynth
