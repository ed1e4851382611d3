#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace neinfer {

/// Zero-based (i, j, k) cell coordinate.
struct CellIndex {
    int i = 0;
    int j = 0;
    int k = 0;

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Connection between two axis-adjacent cells. `cell_i < cell_j` always.
struct Face {
    std::size_t cell_i = 0;
    std::size_t cell_j = 0;
    double area = 0.0;        // m^2
    double half_dist_i = 0.0; // cell_i centre to face centre, m
    double half_dist_j = 0.0; // cell_j centre to face centre, m
};

/// Structured Cartesian grid with no-flow outer boundaries. Cells are stored
/// row-major with x fastest: index = i + nx * (j + ny * k).
class Grid {
public:
    Grid(std::array<int, 3> dims, std::array<double, 3> spacing);

    int nx() const noexcept { return dims_[0]; }
    int ny() const noexcept { return dims_[1]; }
    int nz() const noexcept { return dims_[2]; }
    double dx() const noexcept { return spacing_[0]; }
    double dy() const noexcept { return spacing_[1]; }
    double dz() const noexcept { return spacing_[2]; }
    const std::array<int, 3>& dims() const noexcept { return dims_; }
    const std::array<double, 3>& spacing() const noexcept { return spacing_; }

    std::size_t num_cells() const noexcept;
    double cell_volume() const noexcept { return spacing_[0] * spacing_[1] * spacing_[2]; }
    std::array<double, 3> extent() const noexcept;

    bool contains(const CellIndex& c) const noexcept;
    std::size_t index(const CellIndex& c) const;
    CellIndex cell(std::size_t index) const;

    const std::vector<Face>& faces() const noexcept { return faces_; }

    /// Faces touching each cell, as indices into faces().
    const std::vector<std::vector<std::size_t>>& cell_faces() const noexcept { return cell_faces_; }

    /// Number of interior faces for the given dimensions.
    static std::size_t expected_face_count(std::array<int, 3> dims) noexcept;

private:
    std::array<int, 3> dims_;
    std::array<double, 3> spacing_;
    std::vector<Face> faces_;
    std::vector<std::vector<std::size_t>> cell_faces_;
};

/// Throws InvalidArgument on non-positive counts or sizes.
Grid build_grid(std::array<int, 3> dims, std::array<double, 3> spacing);

/// Per-cell rock properties. Permeability in mD, porosity as a fraction.
struct RockRealization {
    std::vector<double> perm_md;
    std::vector<double> porosity;

    std::size_t size() const noexcept { return perm_md.size(); }

    /// Throws InvalidArgument unless sizes match `num_cells`, every
    /// permeability is positive and every porosity lies in (0, 1].
    void validate(std::size_t num_cells) const;
};

/// Harmonic two-point transmissibility in consistent units:
/// (T_i^-1 + T_j^-1)^-1 with T_i = k_i * area / (viscosity * d_i).
double harmonic_transmissibility(double k_i, double k_j, double area, double d_i, double d_j,
                                 double viscosity);

/// Face transmissibility in m^3 s^-1 Pa^-1; permeability is converted from mD
/// to m^2. Pass viscosity = 1 for the geometric part used with mobilities.
double face_transmissibility(const Grid& grid, const RockRealization& rock, double viscosity,
                             const Face& face);

/// All face transmissibilities in faces() order.
std::vector<double> face_transmissibilities(const Grid& grid, const RockRealization& rock,
                                            double viscosity);

}  // namespace neinfer
