#include "neinfer/linsolve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/IterativeLinearSolvers>

#include "neinfer/error.hpp"

namespace neinfer {

namespace {

using Vec = Eigen::VectorXd;
using ConstMap = Eigen::Map<const Vec>;

double norm2(std::span<const double> v) { return ConstMap(v.data(), Eigen::Index(v.size())).norm(); }

}  // namespace

SparseSystem::SparseSystem(std::size_t n, std::span<const Triplet> entries,
                           std::vector<double> rhs)
    : matrix_(Eigen::Index(n), Eigen::Index(n)), rhs_(std::move(rhs)) {
    if (n == 0) throw InvalidArgument("sparse system: dimension must be >= 1");
    if (rhs_.size() != n) throw InvalidArgument("sparse system: rhs length does not match n");

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(entries.size());
    for (const Triplet& t : entries) {
        if (t.row >= n || t.col >= n) throw InvalidArgument("sparse system: entry out of range");
        trips.emplace_back(Eigen::Index(t.row), Eigen::Index(t.col), t.value);
    }
    matrix_.setFromTriplets(trips.begin(), trips.end(),
                            [](const double&, const double&) -> double {
                                throw InvalidArgument("sparse system: duplicate (row, col) entry");
                            });
    matrix_.makeCompressed();

    const auto has_entry = [this](Eigen::Index r, Eigen::Index c) {
        const auto* begin = matrix_.innerIndexPtr() + matrix_.outerIndexPtr()[r];
        const auto* end = matrix_.innerIndexPtr() + matrix_.outerIndexPtr()[r + 1];
        return std::binary_search(begin, end, static_cast<SparseMatrix::StorageIndex>(c));
    };
    for (Eigen::Index r = 0; r < matrix_.outerSize(); ++r) {
        bool has_diag = false;
        for (SparseMatrix::InnerIterator it(matrix_, r); it; ++it) {
            if (it.col() == r) {
                has_diag = true;
                if (!(it.value() > 0.0)) {
                    throw InvalidArgument("sparse system: diagonal entry " + std::to_string(r) +
                                          " is not strictly positive");
                }
            } else if (!has_entry(it.col(), r)) {
                throw InvalidArgument("sparse system: pattern is not symmetric at (" +
                                      std::to_string(r) + "," + std::to_string(it.col()) + ")");
            }
        }
        if (!has_diag) {
            throw InvalidArgument("sparse system: missing diagonal entry " + std::to_string(r));
        }
    }
}

void SparseSystem::set_rhs(std::vector<double> rhs) {
    if (rhs.size() != size()) throw InvalidArgument("sparse system: rhs length does not match n");
    rhs_ = std::move(rhs);
}

std::vector<double> SparseSystem::multiply(std::span<const double> x) const {
    std::vector<double> y(size());
    Eigen::Map<Vec>(y.data(), Eigen::Index(y.size())) =
        matrix_ * ConstMap(x.data(), Eigen::Index(x.size()));
    return y;
}

double SparseSystem::relative_residual(std::span<const double> x) const {
    std::vector<double> ax = multiply(x);
    double r2 = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) r2 += (ax[i] - rhs_[i]) * (ax[i] - rhs_[i]);
    const double bn = norm2(rhs_);
    return bn > 0.0 ? std::sqrt(r2) / bn : std::sqrt(r2);
}

bool SparseSystem::diagonally_dominant() const {
    for (Eigen::Index r = 0; r < matrix_.outerSize(); ++r) {
        double diag = 0.0, off = 0.0;
        for (SparseMatrix::InnerIterator it(matrix_, r); it; ++it) {
            if (it.col() == r) diag = std::abs(it.value());
            else off += std::abs(it.value());
        }
        // Relative slack for round-off in assembled rows.
        if (diag < off * (1.0 - 1e-12)) return false;
    }
    return true;
}

struct SpdSolver::Impl {
    const SparseMatrix* matrix;
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
};

SpdSolver::SpdSolver(const SparseMatrix& matrix, SolveOptions options)
    : impl_(std::make_unique<Impl>()), options_(options) {
    if (!(options_.tol > 0.0)) throw InvalidArgument("solve_spd: tol must be > 0");
    if (options_.max_iter == 0) options_.max_iter = 10 * std::size_t(matrix.rows());
    impl_->matrix = &matrix;
    impl_->cg.setTolerance(options_.tol);
    impl_->cg.setMaxIterations(Eigen::Index(options_.max_iter));
    impl_->cg.compute(matrix);
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

std::vector<double> SpdSolver::solve(std::span<const double> rhs) const {
    const SparseMatrix& a = *impl_->matrix;
    const auto n = a.rows();
    if (Eigen::Index(rhs.size()) != n) throw InvalidArgument("solve_spd: rhs length mismatch");
    std::vector<double> x(rhs.size(), 0.0);
    last_iterations_ = 0;
    const ConstMap b(rhs.data(), n);
    const double bn = b.norm();
    if (bn == 0.0) return x;

    Eigen::Map<Vec> xv(x.data(), n);
    std::size_t used = 0;
    double rel = 0.0;
    // The recursive CG residual can drift from the true one; restart from the
    // current iterate until the explicitly recomputed residual meets tol.
    for (int attempt = 0; attempt < 4; ++attempt) {
        if (attempt == 0) xv = impl_->cg.solve(b);
        else xv = impl_->cg.solveWithGuess(b, Vec(xv));
        used += std::size_t(impl_->cg.iterations());
        rel = (a * xv - b).norm() / bn;
        if (rel <= options_.tol) {
            last_iterations_ = used;
            return x;
        }
        if (used >= options_.max_iter) break;
    }
    last_iterations_ = used;
    throw SolverFailure("solve_spd: no convergence, relative residual " + std::to_string(rel) +
                            " after " + std::to_string(used) + " iterations",
                        rel, used);
}

std::vector<double> solve_spd(const SparseSystem& system, SolveOptions options) {
    SpdSolver solver(system.matrix(), options);
    return solver.solve(system.rhs());
}

}  // namespace neinfer
