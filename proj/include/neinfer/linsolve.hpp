#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Sparse>

namespace neinfer {

struct Triplet {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Square sparse system A x = b in compressed row form.
///
/// Construction checks the structural invariants: no duplicate entries,
/// symmetric sparsity pattern and a strictly positive diagonal.
class SparseSystem {
public:
    SparseSystem(std::size_t n, std::span<const Triplet> entries, std::vector<double> rhs);

    std::size_t size() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
    const SparseMatrix& matrix() const noexcept { return matrix_; }
    const std::vector<double>& rhs() const noexcept { return rhs_; }
    void set_rhs(std::vector<double> rhs);

    std::vector<double> multiply(std::span<const double> x) const;

    /// ||A x - b||_2 / ||b||_2 (or ||A x||_2 when b = 0).
    double relative_residual(std::span<const double> x) const;

    /// |a_ii| >= sum_{j != i} |a_ij| for every row.
    bool diagonally_dominant() const;

private:
    SparseMatrix matrix_;
    std::vector<double> rhs_;
};

struct SolveOptions {
    double tol = 1e-10;
    std::size_t max_iter = 0;  // 0 selects 10 * n
};

/// Jacobi-preconditioned conjugate gradients for an SPD system.
///
/// The preconditioner is built once, so repeated solves against the same
/// matrix with different right-hand sides are cheap. Not thread-safe; use one
/// instance per thread.
class SpdSolver {
public:
    explicit SpdSolver(const SparseMatrix& matrix, SolveOptions options = {});
    ~SpdSolver();
    SpdSolver(SpdSolver&&) noexcept;
    SpdSolver& operator=(SpdSolver&&) noexcept;

    /// Returns x with relative residual <= tol, verified by recomputing
    /// A x - b. Throws SolverFailure otherwise.
    std::vector<double> solve(std::span<const double> rhs) const;

    std::size_t last_iterations() const noexcept { return last_iterations_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    SolveOptions options_;
    mutable std::size_t last_iterations_ = 0;
};

std::vector<double> solve_spd(const SparseSystem& system, SolveOptions options = {});

}  // namespace neinfer
