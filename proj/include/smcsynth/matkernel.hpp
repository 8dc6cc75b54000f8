#pragma once

/**
 * Dense linear algebra for the small matrices that appear in LMI synthesis
 * (orders up to about a dozen). Storage is row-major; nothing here allocates
 * beyond the owning std::vector of each matrix.
 */

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace smcsynth {

using Vector = std::vector<double>;

/// Default tolerances shared by every module.
namespace tolerance {
/// Jacobi stops once the off-diagonal Frobenius norm drops below this times ||S||_F.
inline constexpr double jacobi_offdiag = 1e-12;
inline constexpr int jacobi_max_sweeps = 100;
/// Strict LMI "< 0" is enforced as "<= -strict_margin * I".
inline constexpr double strict_margin = 1e-6;
/// Simplex weights must sum to one within this.
inline constexpr double simplex_sum = 1e-12;
/// Certificates are accepted down to this eigenvalue.
inline constexpr double certificate_floor = -1e-8;
}  // namespace tolerance

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);
    /// Single column built from a vector.
    static Matrix column(std::span<const double> v);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    Matrix transpose() const;
    double trace() const;
    double frobenius_norm() const;
    double max_abs() const;
    bool all_finite() const;
    Vector diag() const;

    Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
    void set_block(std::size_t r0, std::size_t c0, const Matrix& b);

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator-(Matrix a);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> v);

/**
 * Symmetric matrix stored as a full square. Any input is replaced by
 * (A + A^T) / 2 on construction, so entries (i, j) and (j, i) are always
 * bit-identical.
 */
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t order);
    explicit SymMatrix(const Matrix& a);
    SymMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static SymMatrix identity(std::size_t n) { return SymMatrix(Matrix::identity(n)); }

    std::size_t order() const noexcept { return m_.rows(); }
    double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
    /// Writes both (r, c) and (c, r).
    void set(std::size_t r, std::size_t c, double v);

    const Matrix& matrix() const noexcept { return m_; }
    operator const Matrix&() const noexcept { return m_; }

    SymMatrix& operator+=(const SymMatrix& o);
    SymMatrix& operator*=(double s);

    friend bool operator==(const SymMatrix& a, const SymMatrix& b) = default;

private:
    Matrix m_;
};

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(double s, SymMatrix a);

/// Eigenvalues of S in ascending order (cyclic Jacobi).
Vector sym_eigenvalues(const SymMatrix& S);

struct SymEigen {
    Vector values;   ///< ascending
    Matrix vectors;  ///< column k pairs with values[k]
};
SymEigen sym_eigen(const SymMatrix& S);

double lambda_min(const SymMatrix& S);
double lambda_max(const SymMatrix& S);

/// True iff lambda_min(S) > margin. Decided by a Cholesky attempt on S - margin*I.
bool is_positive_definite(const SymMatrix& S, double margin = 0.0);

/// Lower-triangular L with S = L L^T; throws NotPositiveDefinite on breakdown.
Matrix cholesky(const SymMatrix& S);
/// Same as cholesky() but reports breakdown through the return value.
bool try_cholesky(const SymMatrix& S, Matrix& L);

/// Solves L Y = B (forward substitution) for lower-triangular L.
Matrix solve_lower(const Matrix& L, const Matrix& B);
/// Solves L^T Y = B (back substitution) for lower-triangular L.
Matrix solve_lower_transpose(const Matrix& L, const Matrix& B);

/// X with S X = rhs for positive definite S.
Matrix solve_spd(const SymMatrix& S, const Matrix& rhs);
SymMatrix inverse_spd(const SymMatrix& S);

/// T^T S T.
SymMatrix congruence(const SymMatrix& S, const Matrix& T);

}  // namespace smcsynth
