#pragma once

/**
 * Matrix inequalities affine in a flat vector of scalar decision variables,
 * and the builders for the sliding-mode synthesis conditions.
 *
 * Matrix variables are declared in a VariableLayout; each contributes a run
 * of scalars to the flat vector x. AffineMatrix is a small expression type
 * (constant + sum_j x_j * A_j) that supports the handful of operations the
 * block conditions need: sums, scaling, constant left/right products and
 * transposition.
 */

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smcsynth/matkernel.hpp"
#include "smcsynth/polytope.hpp"

namespace smcsynth {

enum class Structure { Diagonal, Symmetric, Full, Scalar };

const char* to_string(Structure s);

struct VariableBlock {
    std::string name;
    Structure structure;
    std::size_t rows;
    std::size_t cols;
    std::size_t offset;  ///< first scalar index in the flat vector
    std::size_t size;    ///< number of scalars
};

class VariableLayout {
public:
    /// Appends a block. Square structures ignore `cols`. Returns its offset.
    std::size_t add(std::string name, Structure structure, std::size_t rows, std::size_t cols = 0);

    bool contains(std::string_view name) const;
    const VariableBlock& block(std::string_view name) const;
    const std::vector<VariableBlock>& blocks() const noexcept { return blocks_; }
    std::size_t total_scalars() const noexcept { return total_; }

    /// Matrix value of a block at x (diagonal/symmetric blocks are expanded).
    Matrix unpack(std::span<const double> x, std::string_view name) const;
    double unpack_scalar(std::span<const double> x, std::string_view name) const;
    /// Writes the free entries of `value` into x. Symmetric blocks read the upper triangle.
    void pack(std::string_view name, const Matrix& value, std::span<double> x) const;

private:
    std::vector<VariableBlock> blocks_;
    std::size_t total_ = 0;
};

class AffineMatrix {
public:
    AffineMatrix() = default;
    AffineMatrix(std::size_t rows, std::size_t cols) : constant_(rows, cols) {}
    explicit AffineMatrix(Matrix constant) : constant_(std::move(constant)) {}
    AffineMatrix(Matrix constant, std::map<std::size_t, Matrix> coeffs);

    /// The matrix variable `name`, one basis coefficient per scalar.
    static AffineMatrix variable(const VariableLayout& layout, std::string_view name);

    std::size_t rows() const noexcept { return constant_.rows(); }
    std::size_t cols() const noexcept { return constant_.cols(); }
    const Matrix& constant() const noexcept { return constant_; }
    const std::map<std::size_t, Matrix>& coeffs() const noexcept { return coeffs_; }

    AffineMatrix transpose() const;
    Matrix evaluate(std::span<const double> x) const;

    AffineMatrix& operator+=(const AffineMatrix& o);
    AffineMatrix& operator-=(const AffineMatrix& o);
    AffineMatrix& operator*=(double s);

    friend AffineMatrix operator*(const Matrix& left, const AffineMatrix& a);
    friend AffineMatrix operator*(const AffineMatrix& a, const Matrix& right);

private:
    void drop_zeros();

    Matrix constant_;
    std::map<std::size_t, Matrix> coeffs_;
};

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator*(double s, AffineMatrix a);
AffineMatrix operator*(const Matrix& left, const AffineMatrix& a);
AffineMatrix operator*(const AffineMatrix& a, const Matrix& right);

/// [[a, b], [c, d]].
AffineMatrix block2x2(const AffineMatrix& a, const AffineMatrix& b, const AffineMatrix& c,
                      const AffineMatrix& d);

enum class Sense { NegativeDefinite, PositiveSemidefinite };

const char* to_string(Sense s);

/**
 * constant + sum_j x_j coeffs[j] compared against zero.
 *
 * With margin m: NegativeDefinite means M <= -m I, PositiveSemidefinite means
 * M >= m I. Standard form is PositiveSemidefinite with margin zero.
 */
struct AffineMatrixInequality {
    std::string label;
    std::size_t order = 0;
    std::size_t num_scalars = 0;
    SymMatrix constant;
    std::map<std::size_t, SymMatrix> coeffs;
    Sense sense = Sense::PositiveSemidefinite;
    double strictness_margin = 0.0;

    /// Requires a square, symmetric expression.
    static AffineMatrixInequality from(const AffineMatrix& expr, Sense sense, double margin,
                                       std::string label, std::size_t num_scalars);

    bool is_standard() const noexcept {
        return sense == Sense::PositiveSemidefinite && strictness_margin == 0.0;
    }
};

SymMatrix evaluate(const AffineMatrixInequality& ami, std::span<const double> x);

struct SdpProblem {
    VariableLayout layout;
    Vector objective;  ///< minimized, one entry per scalar
    std::vector<AffineMatrixInequality> constraints;

    bool is_standard_form() const;
};

/// Folds senses and strictness margins into constants: every constraint becomes M' >= 0.
SdpProblem to_standard_form(SdpProblem p);

struct LmiOptions {
    /// Adds the decay-rate block [R X; X rho I] >= 0 and the initial-set block.
    bool include_opt = false;
    /// Size parameter of the guaranteed initial-condition set.
    double phi = 0.0;
    /// Uses this constant for rho instead of minimizing it (only with include_opt).
    std::optional<double> rho_fixed;
    double strict_margin = tolerance::strict_margin;
};

/**
 * Relay (VSC) synthesis conditions. Variables W, X (diagonal n x n), R
 * (symmetric n x n), Z (m x n) and, when rho is minimized, the scalar rho.
 * Per distinct vertex B_i:
 *
 *   [ B_i Z + Z^T B_i^T + R        W - X + xi Z^T B_i^T ]
 *   [ W - X + xi B_i Z             -2 xi X              ]  < 0
 *
 * plus W > 0, R > 0, and with include_opt
 * [R X; X rho I] >= 0 and [phi I, I; I, 2X - W] >= 0.
 */
SdpProblem assemble_vsc(const PolytopicSystem& sys, double xi, const LmiOptions& opts = {});

/**
 * Unit-vector (UVC) synthesis conditions. Variables X, R (symmetric n x n),
 * Z (m x n), optional rho. Per distinct vertex:
 *
 *   [ B_i Z + Z^T B_i^T + (mu/4) I + R    Z^T B_i^T ]
 *   [ B_i Z                                -mu I    ]  < 0
 *
 * plus X > 0, R > 0, and with include_opt
 * [R X; X rho I] >= 0 and [phi I, I; I, X] >= 0.
 */
SdpProblem assemble_uvc(const PolytopicSystem& sys, double mu, const LmiOptions& opts = {});

/// VSC conditions with the gain fixed: Z is replaced by K X, leaving W, X, R free.
SdpProblem assemble_vsc_fixed_gain(const PolytopicSystem& sys, const Matrix& K, double xi,
                                   double strict_margin = tolerance::strict_margin);

/// UVC conditions with the gain fixed: Z is replaced by K X, leaving X, R free.
SdpProblem assemble_uvc_fixed_gain(const PolytopicSystem& sys, const Matrix& K, double mu,
                                   double strict_margin = tolerance::strict_margin);

/// Vertices with exact duplicates removed, first occurrence kept.
std::vector<Matrix> distinct_vertices(const PolytopicSystem& sys);

}  // namespace smcsynth
