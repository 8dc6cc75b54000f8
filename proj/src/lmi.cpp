#include "smcsynth/lmi.hpp"

#include <algorithm>
#include <cmath>

#include "smcsynth/errors.hpp"

namespace smcsynth {

const char* to_string(Structure s) {
    switch (s) {
        case Structure::Diagonal: return "diagonal";
        case Structure::Symmetric: return "symmetric";
        case Structure::Full: return "full";
        case Structure::Scalar: return "scalar";
    }
    return "?";
}

const char* to_string(Sense s) {
    return s == Sense::NegativeDefinite ? "negative_definite" : "positive_semidefinite";
}

// ---------------------------------------------------------------------------
// VariableLayout

std::size_t VariableLayout::add(std::string name, Structure structure, std::size_t rows,
                                std::size_t cols) {
    if (contains(name)) throw InvalidInput("duplicate variable name '" + name + "'");
    VariableBlock b{std::move(name), structure, rows, cols, total_, 0};
    switch (structure) {
        case Structure::Diagonal:
            b.cols = rows;
            b.size = rows;
            break;
        case Structure::Symmetric:
            b.cols = rows;
            b.size = rows * (rows + 1) / 2;
            break;
        case Structure::Full:
            b.size = rows * cols;
            break;
        case Structure::Scalar:
            b.rows = b.cols = 1;
            b.size = 1;
            break;
    }
    if (b.size == 0) throw InvalidInput("variable '" + b.name + "' has no scalars");
    total_ += b.size;
    blocks_.push_back(std::move(b));
    return blocks_.back().offset;
}

bool VariableLayout::contains(std::string_view name) const {
    return std::any_of(blocks_.begin(), blocks_.end(),
                       [&](const VariableBlock& b) { return b.name == name; });
}

const VariableBlock& VariableLayout::block(std::string_view name) const {
    for (const auto& b : blocks_)
        if (b.name == name) return b;
    throw InvalidInput("no variable named '" + std::string(name) + "'");
}

namespace {

// Visits (row, col, scalar index) for each free entry of a block. For
// symmetric blocks both (i, j) and (j, i) are visited with the same index.
template <typename F>
void for_each_entry(const VariableBlock& b, F&& f) {
    std::size_t k = b.offset;
    switch (b.structure) {
        case Structure::Diagonal:
            for (std::size_t i = 0; i < b.rows; ++i) f(i, i, k++);
            break;
        case Structure::Symmetric:
            for (std::size_t i = 0; i < b.rows; ++i)
                for (std::size_t j = i; j < b.rows; ++j) {
                    f(i, j, k);
                    if (i != j) f(j, i, k);
                    ++k;
                }
            break;
        case Structure::Full:
            for (std::size_t i = 0; i < b.rows; ++i)
                for (std::size_t j = 0; j < b.cols; ++j) f(i, j, k++);
            break;
        case Structure::Scalar:
            f(0, 0, k);
            break;
    }
}

void require_length(std::span<const double> x, std::size_t n) {
    if (x.size() != n)
        throw InvalidInput("decision vector has length " + std::to_string(x.size()) +
                           ", expected " + std::to_string(n));
}

}  // namespace

Matrix VariableLayout::unpack(std::span<const double> x, std::string_view name) const {
    require_length(x, total_);
    const VariableBlock& b = block(name);
    Matrix m(b.rows, b.cols);
    for_each_entry(b, [&](std::size_t i, std::size_t j, std::size_t k) { m(i, j) = x[k]; });
    return m;
}

double VariableLayout::unpack_scalar(std::span<const double> x, std::string_view name) const {
    require_length(x, total_);
    return x[block(name).offset];
}

void VariableLayout::pack(std::string_view name, const Matrix& value, std::span<double> x) const {
    if (x.size() != total_) throw InvalidInput("decision vector length does not match layout");
    const VariableBlock& b = block(name);
    if (value.rows() != b.rows || value.cols() != b.cols)
        throw InvalidInput("value shape does not match variable '" + b.name + "'");
    for_each_entry(b, [&](std::size_t i, std::size_t j, std::size_t k) {
        if (i <= j || b.structure == Structure::Full) x[k] = value(i, j);
    });
}

// ---------------------------------------------------------------------------
// AffineMatrix

AffineMatrix::AffineMatrix(Matrix constant, std::map<std::size_t, Matrix> coeffs)
    : constant_(std::move(constant)), coeffs_(std::move(coeffs)) {
    for (const auto& [k, c] : coeffs_)
        if (c.rows() != constant_.rows() || c.cols() != constant_.cols())
            throw InvalidInput("affine coefficient shape does not match its constant");
    drop_zeros();
}

AffineMatrix AffineMatrix::variable(const VariableLayout& layout, std::string_view name) {
    const VariableBlock& b = layout.block(name);
    AffineMatrix a(b.rows, b.cols);
    for_each_entry(b, [&](std::size_t i, std::size_t j, std::size_t k) {
        auto [it, inserted] = a.coeffs_.try_emplace(k, b.rows, b.cols);
        it->second(i, j) = 1.0;
    });
    return a;
}

AffineMatrix AffineMatrix::transpose() const {
    AffineMatrix t(constant_.transpose());
    for (const auto& [k, c] : coeffs_) t.coeffs_.emplace(k, c.transpose());
    return t;
}

Matrix AffineMatrix::evaluate(std::span<const double> x) const {
    Matrix m = constant_;
    for (const auto& [k, c] : coeffs_) {
        if (k >= x.size()) throw InvalidInput("decision vector too short for expression");
        if (x[k] != 0.0) m += x[k] * c;
    }
    return m;
}

void AffineMatrix::drop_zeros() {
    std::erase_if(coeffs_, [](const auto& kv) { return kv.second.max_abs() == 0.0; });
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& o) {
    constant_ += o.constant_;
    for (const auto& [k, c] : o.coeffs_) {
        auto it = coeffs_.find(k);
        if (it == coeffs_.end())
            coeffs_.emplace(k, c);
        else
            it->second += c;
    }
    drop_zeros();
    return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& o) {
    AffineMatrix neg = o;
    neg *= -1.0;
    return *this += neg;
}

AffineMatrix& AffineMatrix::operator*=(double s) {
    constant_ *= s;
    for (auto& [k, c] : coeffs_) c *= s;
    if (s == 0.0) coeffs_.clear();
    return *this;
}

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }

AffineMatrix operator*(const Matrix& left, const AffineMatrix& a) {
    AffineMatrix out(left * a.constant_);
    for (const auto& [k, c] : a.coeffs_) out.coeffs_.emplace(k, left * c);
    out.drop_zeros();
    return out;
}

AffineMatrix operator*(const AffineMatrix& a, const Matrix& right) {
    AffineMatrix out(a.constant_ * right);
    for (const auto& [k, c] : a.coeffs_) out.coeffs_.emplace(k, c * right);
    out.drop_zeros();
    return out;
}

AffineMatrix block2x2(const AffineMatrix& a, const AffineMatrix& b, const AffineMatrix& c,
                      const AffineMatrix& d) {
    if (a.rows() != b.rows() || c.rows() != d.rows() || a.cols() != c.cols() ||
        b.cols() != d.cols())
        throw InvalidInput("block2x2: incompatible block shapes");
    const std::size_t r0 = a.rows();
    const std::size_t c0 = a.cols();
    const std::size_t rows = r0 + c.rows();
    const std::size_t cols = c0 + b.cols();

    auto place = [&](const AffineMatrix& part, std::size_t ro, std::size_t co, Matrix& constant,
                     std::map<std::size_t, Matrix>& coeffs) {
        constant.set_block(ro, co, part.constant());
        for (const auto& [k, m] : part.coeffs()) {
            auto [it, inserted] = coeffs.try_emplace(k, rows, cols);
            it->second.set_block(ro, co, m);
        }
    };

    Matrix constant(rows, cols);
    std::map<std::size_t, Matrix> coeffs;
    place(a, 0, 0, constant, coeffs);
    place(b, 0, c0, constant, coeffs);
    place(c, r0, 0, constant, coeffs);
    place(d, r0, c0, constant, coeffs);

    return AffineMatrix(std::move(constant), std::move(coeffs));
}

// ---------------------------------------------------------------------------
// AffineMatrixInequality

AffineMatrixInequality AffineMatrixInequality::from(const AffineMatrix& expr, Sense sense,
                                                    double margin, std::string label,
                                                    std::size_t num_scalars) {
    if (expr.rows() != expr.cols())
        throw InvalidInput("matrix inequality '" + label + "' is not square");
    if (!(margin >= 0.0)) throw InvalidParameter("strictness margin must be nonnegative");

    auto check_symmetric = [&](const Matrix& m) {
        const double scale = std::max(1.0, m.max_abs());
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = i + 1; j < m.cols(); ++j)
                if (std::abs(m(i, j) - m(j, i)) > 1e-12 * scale)
                    throw InvalidInput("matrix inequality '" + label + "' is not symmetric");
    };

    AffineMatrixInequality ami;
    ami.label = std::move(label);
    ami.order = expr.rows();
    ami.num_scalars = num_scalars;
    ami.sense = sense;
    ami.strictness_margin = margin;
    check_symmetric(expr.constant());
    ami.constant = SymMatrix(expr.constant());
    for (const auto& [k, c] : expr.coeffs()) {
        if (k >= num_scalars) throw InvalidInput("coefficient index beyond the variable layout");
        check_symmetric(c);
        ami.coeffs.emplace(k, SymMatrix(c));
    }
    return ami;
}

SymMatrix evaluate(const AffineMatrixInequality& ami, std::span<const double> x) {
    require_length(x, ami.num_scalars);
    Matrix m = ami.constant.matrix();
    for (const auto& [k, c] : ami.coeffs)
        if (x[k] != 0.0) m += x[k] * c.matrix();
    return SymMatrix(m);
}

bool SdpProblem::is_standard_form() const {
    return std::all_of(constraints.begin(), constraints.end(),
                       [](const AffineMatrixInequality& c) { return c.is_standard(); });
}

SdpProblem to_standard_form(SdpProblem p) {
    for (auto& c : p.constraints) {
        if (c.is_standard()) continue;
        Matrix constant = c.constant.matrix();
        if (c.sense == Sense::NegativeDefinite) {
            constant *= -1.0;
            for (auto& [k, a] : c.coeffs) a *= -1.0;
        }
        for (std::size_t i = 0; i < c.order; ++i) constant(i, i) -= c.strictness_margin;
        c.constant = SymMatrix(constant);
        c.sense = Sense::PositiveSemidefinite;
        c.strictness_margin = 0.0;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Synthesis conditions

std::vector<Matrix> distinct_vertices(const PolytopicSystem& sys) {
    std::vector<Matrix> out;
    for (const Matrix& B : sys.vertices())
        if (std::find(out.begin(), out.end(), B) == out.end()) out.push_back(B);
    return out;
}

namespace {

void require_positive(double v, const char* name) {
    if (!std::isfinite(v) || !(v > 0.0))
        throw InvalidParameter(std::string(name) + " must be positive");
}

AffineMatrix identity_expr(std::size_t n, double scale = 1.0) {
    return AffineMatrix(scale * Matrix::identity(n));
}

// rho * I_n for the scalar variable rho, or the constant rho_fixed * I_n.
AffineMatrix rho_identity(const VariableLayout& layout, const LmiOptions& opts, std::size_t n) {
    if (opts.rho_fixed) return identity_expr(n, *opts.rho_fixed);
    std::map<std::size_t, Matrix> coeffs;
    coeffs.emplace(layout.block("rho").offset, Matrix::identity(n));
    return AffineMatrix(Matrix(n, n), std::move(coeffs));
}

void validate_opts(const LmiOptions& opts) {
    if (!(opts.strict_margin >= 0.0)) throw InvalidParameter("strict margin must be nonnegative");
    if (!opts.include_opt) {
        if (opts.rho_fixed) throw InvalidParameter("rho_fixed requires the optimization blocks");
        return;
    }
    require_positive(opts.phi, "phi");
    if (opts.rho_fixed) require_positive(*opts.rho_fixed, "rho");
}

void finish_layout_objective(SdpProblem& p, const LmiOptions& opts) {
    p.objective.assign(p.layout.total_scalars(), 0.0);
    if (opts.include_opt && !opts.rho_fixed) p.objective[p.layout.block("rho").offset] = 1.0;
}

void add(SdpProblem& p, const AffineMatrix& expr, Sense sense, double margin, std::string label) {
    p.constraints.push_back(AffineMatrixInequality::from(expr, sense, margin, std::move(label),
                                                         p.layout.total_scalars()));
}

// The shared tail of both laws: [R X; X rho I] >= 0.
void add_decay_block(SdpProblem& p, const LmiOptions& opts, const AffineMatrix& R,
                     const AffineMatrix& X, std::size_t n) {
    add(p, block2x2(R, X, X.transpose(), rho_identity(p.layout, opts, n)),
        Sense::PositiveSemidefinite, 0.0, "decay rate [R X; X rho I]");
}

struct VscBlocks {
    AffineMatrix W, X, R;
};

// Per-vertex block shared by free-gain and fixed-gain VSC problems. BZ is B_i Z.
AffineMatrix vsc_vertex_block(const VscBlocks& v, const AffineMatrix& BZ, double xi) {
    const AffineMatrix upper_left = BZ + BZ.transpose() + v.R;
    const AffineMatrix off = v.W - v.X + xi * BZ.transpose();
    return block2x2(upper_left, off, off.transpose(), -2.0 * xi * v.X);
}

AffineMatrix uvc_vertex_block(const AffineMatrix& R, const AffineMatrix& BZ, double mu,
                              std::size_t n) {
    const AffineMatrix upper_left = BZ + BZ.transpose() + identity_expr(n, mu / 4.0) + R;
    return block2x2(upper_left, BZ.transpose(), BZ, identity_expr(n, -mu));
}

}  // namespace

SdpProblem assemble_vsc(const PolytopicSystem& sys, double xi, const LmiOptions& opts) {
    require_positive(xi, "xi");
    validate_opts(opts);
    const std::size_t n = sys.state_dim();
    const std::size_t m = sys.input_dim();

    SdpProblem p;
    p.layout.add("W", Structure::Diagonal, n);
    p.layout.add("X", Structure::Diagonal, n);
    p.layout.add("R", Structure::Symmetric, n);
    p.layout.add("Z", Structure::Full, m, n);
    if (opts.include_opt && !opts.rho_fixed) p.layout.add("rho", Structure::Scalar, 1);
    finish_layout_objective(p, opts);

    const VscBlocks v{AffineMatrix::variable(p.layout, "W"), AffineMatrix::variable(p.layout, "X"),
                      AffineMatrix::variable(p.layout, "R")};
    const AffineMatrix Z = AffineMatrix::variable(p.layout, "Z");

    add(p, v.W, Sense::PositiveSemidefinite, opts.strict_margin, "W > 0");
    add(p, v.R, Sense::PositiveSemidefinite, opts.strict_margin, "R > 0");
    const auto vertices = distinct_vertices(sys);
    for (std::size_t i = 0; i < vertices.size(); ++i)
        add(p, vsc_vertex_block(v, vertices[i] * Z, xi), Sense::NegativeDefinite,
            opts.strict_margin, "vertex " + std::to_string(i + 1));

    if (opts.include_opt) {
        add_decay_block(p, opts, v.R, v.X, n);
        add(p,
            block2x2(identity_expr(n, opts.phi), identity_expr(n), identity_expr(n),
                     2.0 * v.X - v.W),
            Sense::PositiveSemidefinite, 0.0, "initial set [phi I, I; I, 2X - W]");
    }
    return p;
}

SdpProblem assemble_uvc(const PolytopicSystem& sys, double mu, const LmiOptions& opts) {
    require_positive(mu, "mu");
    validate_opts(opts);
    const std::size_t n = sys.state_dim();
    const std::size_t m = sys.input_dim();

    SdpProblem p;
    p.layout.add("X", Structure::Symmetric, n);
    p.layout.add("R", Structure::Symmetric, n);
    p.layout.add("Z", Structure::Full, m, n);
    if (opts.include_opt && !opts.rho_fixed) p.layout.add("rho", Structure::Scalar, 1);
    finish_layout_objective(p, opts);

    const AffineMatrix X = AffineMatrix::variable(p.layout, "X");
    const AffineMatrix R = AffineMatrix::variable(p.layout, "R");
    const AffineMatrix Z = AffineMatrix::variable(p.layout, "Z");

    add(p, X, Sense::PositiveSemidefinite, opts.strict_margin, "X > 0");
    add(p, R, Sense::PositiveSemidefinite, opts.strict_margin, "R > 0");
    const auto vertices = distinct_vertices(sys);
    for (std::size_t i = 0; i < vertices.size(); ++i)
        add(p, uvc_vertex_block(R, vertices[i] * Z, mu, n), Sense::NegativeDefinite,
            opts.strict_margin, "vertex " + std::to_string(i + 1));

    if (opts.include_opt) {
        add_decay_block(p, opts, R, X, n);
        add(p, block2x2(identity_expr(n, opts.phi), identity_expr(n), identity_expr(n), X),
            Sense::PositiveSemidefinite, 0.0, "initial set [phi I, I; I, X]");
    }
    return p;
}

namespace {

void require_gain_shape(const PolytopicSystem& sys, const Matrix& K) {
    if (K.rows() != sys.input_dim() || K.cols() != sys.state_dim())
        throw InvalidInput("gain must be " + std::to_string(sys.input_dim()) + "x" +
                           std::to_string(sys.state_dim()));
    if (!K.all_finite()) throw InvalidInput("gain has non-finite entries");
}

}  // namespace

SdpProblem assemble_vsc_fixed_gain(const PolytopicSystem& sys, const Matrix& K, double xi,
                                   double strict_margin) {
    require_positive(xi, "xi");
    require_gain_shape(sys, K);
    const std::size_t n = sys.state_dim();

    SdpProblem p;
    p.layout.add("W", Structure::Diagonal, n);
    p.layout.add("X", Structure::Diagonal, n);
    p.layout.add("R", Structure::Symmetric, n);
    p.objective.assign(p.layout.total_scalars(), 0.0);

    const VscBlocks v{AffineMatrix::variable(p.layout, "W"), AffineMatrix::variable(p.layout, "X"),
                      AffineMatrix::variable(p.layout, "R")};
    const AffineMatrix Z = K * v.X;

    add(p, v.W, Sense::PositiveSemidefinite, strict_margin, "W > 0");
    add(p, v.R, Sense::PositiveSemidefinite, strict_margin, "R > 0");
    const auto vertices = distinct_vertices(sys);
    for (std::size_t i = 0; i < vertices.size(); ++i)
        add(p, vsc_vertex_block(v, vertices[i] * Z, xi), Sense::NegativeDefinite, strict_margin,
            "vertex " + std::to_string(i + 1));
    return p;
}

SdpProblem assemble_uvc_fixed_gain(const PolytopicSystem& sys, const Matrix& K, double mu,
                                   double strict_margin) {
    require_positive(mu, "mu");
    require_gain_shape(sys, K);
    const std::size_t n = sys.state_dim();

    SdpProblem p;
    p.layout.add("X", Structure::Symmetric, n);
    p.layout.add("R", Structure::Symmetric, n);
    p.objective.assign(p.layout.total_scalars(), 0.0);

    const AffineMatrix X = AffineMatrix::variable(p.layout, "X");
    const AffineMatrix R = AffineMatrix::variable(p.layout, "R");
    const AffineMatrix Z = K * X;

    add(p, X, Sense::PositiveSemidefinite, strict_margin, "X > 0");
    add(p, R, Sense::PositiveSemidefinite, strict_margin, "R > 0");
    const auto vertices = distinct_vertices(sys);
    for (std::size_t i = 0; i < vertices.size(); ++i)
        add(p, uvc_vertex_block(R, vertices[i] * Z, mu, n), Sense::NegativeDefinite,
            strict_margin, "vertex " + std::to_string(i + 1));
    return p;
}

}  // namespace smcsynth
