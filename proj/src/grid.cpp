#include "neinfer/grid.hpp"

#include <cmath>
#include <string>

#include "neinfer/error.hpp"
#include "neinfer/units.hpp"

namespace neinfer {

Grid::Grid(std::array<int, 3> dims, std::array<double, 3> spacing)
    : dims_(dims), spacing_(spacing) {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) {
            throw InvalidArgument("grid: cell count along axis " + std::to_string(a) +
                                  " must be >= 1, got " + std::to_string(dims[a]));
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw InvalidArgument("grid: cell size along axis " + std::to_string(a) +
                                  " must be > 0");
        }
    }

    const std::size_t n = num_cells();
    faces_.reserve(expected_face_count(dims));
    cell_faces_.resize(n);

    // Face areas normal to x, y and z.
    const std::array<double, 3> area{spacing[1] * spacing[2], spacing[0] * spacing[2],
                                     spacing[0] * spacing[1]};
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) {
                const CellIndex here{i, j, k};
                const std::size_t c = index(here);
                const std::array<CellIndex, 3> next{CellIndex{i + 1, j, k}, CellIndex{i, j + 1, k},
                                                    CellIndex{i, j, k + 1}};
                for (int a = 0; a < 3; ++a) {
                    if (!contains(next[a])) continue;
                    const std::size_t nb = index(next[a]);
                    cell_faces_[c].push_back(faces_.size());
                    cell_faces_[nb].push_back(faces_.size());
                    faces_.push_back(Face{c, nb, area[a], 0.5 * spacing[a], 0.5 * spacing[a]});
                }
            }
        }
    }
}

std::size_t Grid::num_cells() const noexcept {
    return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) *
           static_cast<std::size_t>(dims_[2]);
}

std::array<double, 3> Grid::extent() const noexcept {
    return {dims_[0] * spacing_[0], dims_[1] * spacing_[1], dims_[2] * spacing_[2]};
}

bool Grid::contains(const CellIndex& c) const noexcept {
    return c.i >= 0 && c.j >= 0 && c.k >= 0 && c.i < dims_[0] && c.j < dims_[1] && c.k < dims_[2];
}

std::size_t Grid::index(const CellIndex& c) const {
    if (!contains(c)) {
        throw InvalidArgument("grid: cell (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                              "," + std::to_string(c.k) + ") lies outside the grid");
    }
    return static_cast<std::size_t>(c.i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(c.j) +
                static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(c.k));
}

CellIndex Grid::cell(std::size_t index) const {
    if (index >= num_cells()) throw InvalidArgument("grid: cell index out of range");
    const auto nx = static_cast<std::size_t>(dims_[0]);
    const auto ny = static_cast<std::size_t>(dims_[1]);
    return CellIndex{static_cast<int>(index % nx), static_cast<int>((index / nx) % ny),
                     static_cast<int>(index / (nx * ny))};
}

std::size_t Grid::expected_face_count(std::array<int, 3> d) noexcept {
    const auto x = static_cast<std::size_t>(d[0]);
    const auto y = static_cast<std::size_t>(d[1]);
    const auto z = static_cast<std::size_t>(d[2]);
    return (x - 1) * y * z + x * (y - 1) * z + x * y * (z - 1);
}

Grid build_grid(std::array<int, 3> dims, std::array<double, 3> spacing) {
    return Grid(dims, spacing);
}

void RockRealization::validate(std::size_t num_cells) const {
    if (perm_md.size() != num_cells || porosity.size() != num_cells) {
        throw InvalidArgument("rock: expected " + std::to_string(num_cells) +
                              " cells, got perm=" + std::to_string(perm_md.size()) +
                              " porosity=" + std::to_string(porosity.size()));
    }
    for (std::size_t c = 0; c < num_cells; ++c) {
        if (!(perm_md[c] > 0.0) || !std::isfinite(perm_md[c])) {
            throw InvalidArgument("rock: permeability must be positive at cell " +
                                  std::to_string(c));
        }
        if (!(porosity[c] > 0.0 && porosity[c] <= 1.0)) {
            throw InvalidArgument("rock: porosity must lie in (0,1] at cell " + std::to_string(c));
        }
    }
}

double harmonic_transmissibility(double k_i, double k_j, double area, double d_i, double d_j,
                                 double viscosity) {
    const double t_i = k_i * area / (viscosity * d_i);
    const double t_j = k_j * area / (viscosity * d_j);
    if (t_i <= 0.0 || t_j <= 0.0) return 0.0;
    return 1.0 / (1.0 / t_i + 1.0 / t_j);
}

double face_transmissibility(const Grid& /*grid*/, const RockRealization& rock, double viscosity,
                             const Face& face) {
    return harmonic_transmissibility(units::md_to_m2(rock.perm_md[face.cell_i]),
                                     units::md_to_m2(rock.perm_md[face.cell_j]), face.area,
                                     face.half_dist_i, face.half_dist_j, viscosity);
}

std::vector<double> face_transmissibilities(const Grid& grid, const RockRealization& rock,
                                            double viscosity) {
    std::vector<double> t;
    t.reserve(grid.faces().size());
    for (const Face& f : grid.faces()) t.push_back(face_transmissibility(grid, rock, viscosity, f));
    return t;
}

}  // namespace neinfer
