#include "neinfer/priors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <fftw3.h>

#include "neinfer/error.hpp"
#include "neinfer/field_io.hpp"

namespace neinfer {

namespace fs = std::filesystem;

void VariogramSpec::validate() const {
    for (double r : range) {
        if (!(r > 0.0)) throw InvalidArgument("variogram: ranges must be > 0");
    }
    if (!(sill >= 0.0)) throw InvalidArgument("variogram: sill must be >= 0");
    if (!std::isfinite(mean_h)) throw InvalidArgument("variogram: mean_h must be finite");
}

double VariogramSpec::covariance(double lx, double ly, double lz) const {
    const double a = lx / range[0], b = ly / range[1], c = lz / range[2];
    const double h = std::sqrt(a * a + b * b + c * c);
    switch (model) {
        case VariogramModel::Spherical:
            return h < 1.0 ? sill * (1.0 - 1.5 * h + 0.5 * h * h * h) : 0.0;
        case VariogramModel::Exponential:
            return sill * std::exp(-3.0 * h);
        case VariogramModel::Gaussian:
            return sill * std::exp(-3.0 * h * h);
    }
    return 0.0;
}

VariogramSpec VariogramSpec::defaults_for(const Grid& grid) {
    VariogramSpec spec;
    const auto ext = grid.extent();
    spec.range = {0.3 * ext[0], 0.3 * ext[1], 0.3 * ext[2]};
    return spec;
}

VariogramModel parse_variogram_model(const std::string& name) {
    if (name == "spherical") return VariogramModel::Spherical;
    if (name == "exponential") return VariogramModel::Exponential;
    if (name == "gaussian") return VariogramModel::Gaussian;
    throw InvalidArgument("unknown variogram model '" + name + "'");
}

std::string to_string(VariogramModel model) {
    switch (model) {
        case VariogramModel::Spherical: return "spherical";
        case VariogramModel::Exponential: return "exponential";
        case VariogramModel::Gaussian: return "gaussian";
    }
    return "?";
}

std::uint64_t realization_seed(std::uint64_t seed, std::size_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

constexpr double kNuggetFraction = 1e-10;

std::vector<std::vector<double>> sample_dense(const Grid& grid, const VariogramSpec& spec,
                                              std::uint64_t seed, std::size_t count,
                                              std::size_t first_index) {
    const auto n = Eigen::Index(grid.num_cells());
    std::vector<std::array<double, 3>> centre(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < n; ++c) {
        const CellIndex ijk = grid.cell(std::size_t(c));
        centre[std::size_t(c)] = {(ijk.i + 0.5) * grid.dx(), (ijk.j + 0.5) * grid.dy(),
                                  (ijk.k + 0.5) * grid.dz()};
    }
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b <= a; ++b) {
            const auto& p = centre[std::size_t(a)];
            const auto& q = centre[std::size_t(b)];
            cov(a, b) = cov(b, a) = spec.covariance(p[0] - q[0], p[1] - q[1], p[2] - q[2]);
        }
        cov(a, a) += kNuggetFraction * spec.sill;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw GenerationFailure("gaussian field: covariance is not positive definite after nugget");
    }
    const Eigen::MatrixXd lower = llt.matrixL();

    std::vector<std::vector<double>> fields(count);
    Eigen::VectorXd z(n);
    for (std::size_t r = 0; r < count; ++r) {
        std::mt19937_64 rng(realization_seed(seed, first_index + r));
        std::normal_distribution<double> normal;
        for (Eigen::Index c = 0; c < n; ++c) z(c) = normal(rng);
        const Eigen::VectorXd h = lower * z;
        fields[r].resize(std::size_t(n));
        for (Eigen::Index c = 0; c < n; ++c) fields[r][std::size_t(c)] = spec.mean_h + h(c);
    }
    return fields;
}

struct FftwPlan {
    fftw_plan plan = nullptr;
    ~FftwPlan() {
        if (plan) fftw_destroy_plan(plan);
    }
};

struct FftwBuffer {
    fftw_complex* data = nullptr;
    explicit FftwBuffer(std::size_t n)
        : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
        if (!data) throw GenerationFailure("gaussian field: FFT buffer allocation failed");
    }
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

std::vector<std::vector<double>> sample_circulant(const Grid& grid, const VariogramSpec& spec,
                                                  std::uint64_t seed, std::size_t count,
                                                  std::size_t first_index) {
    const auto dims = grid.dims();
    const auto step = grid.spacing();
    std::array<int, 3> m{};
    for (int a = 0; a < 3; ++a) m[a] = dims[a] == 1 ? 1 : 2 * dims[a];

    std::vector<double> eig;
    // Grow the embedding until its spectrum is (numerically) non-negative.
    for (int attempt = 0;; ++attempt) {
        const std::size_t total = std::size_t(m[0]) * std::size_t(m[1]) * std::size_t(m[2]);
        FftwBuffer buf(total);
        for (int kz = 0; kz < m[2]; ++kz) {
            for (int ky = 0; ky < m[1]; ++ky) {
                for (int kx = 0; kx < m[0]; ++kx) {
                    const double lx = std::min(kx, m[0] - kx) * step[0];
                    const double ly = std::min(ky, m[1] - ky) * step[1];
                    const double lz = std::min(kz, m[2] - kz) * step[2];
                    const std::size_t idx =
                        std::size_t(kx) + std::size_t(m[0]) * (std::size_t(ky) + std::size_t(m[1]) * std::size_t(kz));
                    buf.data[idx][0] = spec.covariance(lx, ly, lz);
                    buf.data[idx][1] = 0.0;
                }
            }
        }
        buf.data[0][0] += kNuggetFraction * spec.sill;
        FftwPlan plan;
        plan.plan = fftw_plan_dft_3d(m[2], m[1], m[0], buf.data, buf.data, FFTW_FORWARD,
                                     FFTW_ESTIMATE);
        fftw_execute(plan.plan);
        eig.resize(total);
        double max_eig = 0.0, min_eig = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            eig[i] = buf.data[i][0];
            max_eig = std::max(max_eig, eig[i]);
            min_eig = std::min(min_eig, eig[i]);
        }
        if (min_eig >= -1e-8 * max_eig) {
            for (double& e : eig) e = std::max(e, 0.0);
            break;
        }
        if (attempt == 3) {
            throw GenerationFailure("gaussian field: circulant embedding is not non-negative definite");
        }
        for (int a = 0; a < 3; ++a) {
            if (dims[a] > 1) m[a] *= 2;
        }
    }

    const std::size_t total = eig.size();
    const double inv_total = 1.0 / double(total);
    FftwBuffer buf(total);
    FftwPlan plan;
    plan.plan = fftw_plan_dft_3d(m[2], m[1], m[0], buf.data, buf.data, FFTW_FORWARD, FFTW_ESTIMATE);

    std::vector<std::vector<double>> fields(count);
    for (std::size_t r = 0; r < count; ++r) {
        std::mt19937_64 rng(realization_seed(seed, first_index + r));
        std::normal_distribution<double> normal;
        for (std::size_t i = 0; i < total; ++i) {
            const double s = std::sqrt(eig[i] * inv_total);
            buf.data[i][0] = s * normal(rng);
            buf.data[i][1] = s * normal(rng);
        }
        fftw_execute(plan.plan);
        auto& f = fields[r];
        f.resize(grid.num_cells());
        for (int k = 0; k < dims[2]; ++k) {
            for (int j = 0; j < dims[1]; ++j) {
                for (int i = 0; i < dims[0]; ++i) {
                    const std::size_t src =
                        std::size_t(i) + std::size_t(m[0]) * (std::size_t(j) + std::size_t(m[1]) * std::size_t(k));
                    f[grid.index({i, j, k})] = spec.mean_h + buf.data[src][0];
                }
            }
        }
    }
    return fields;
}

}  // namespace

std::vector<std::vector<double>> sample_gaussian_field(const Grid& grid, const VariogramSpec& spec,
                                                       std::uint64_t seed, std::size_t count,
                                                       SamplerMethod method,
                                                       std::size_t first_index) {
    spec.validate();
    if (count < 1) throw InvalidArgument("sample_gaussian_field: count must be >= 1");
    if (spec.sill == 0.0) {
        return std::vector<std::vector<double>>(count,
                                                std::vector<double>(grid.num_cells(), spec.mean_h));
    }
    if (method == SamplerMethod::Auto) {
        method = grid.num_cells() <= kDenseCellLimit ? SamplerMethod::Dense : SamplerMethod::Circulant;
    }
    return method == SamplerMethod::Dense ? sample_dense(grid, spec, seed, count, first_index)
                                          : sample_circulant(grid, spec, seed, count, first_index);
}

RockRealization h_to_perm(std::span<const double> h, double porosity) {
    RockRealization rock;
    rock.perm_md.reserve(h.size());
    for (double v : h) rock.perm_md.push_back(perm_md_from_h(v));
    rock.porosity.assign(h.size(), porosity);
    return rock;
}

std::vector<double> perm_to_h(const RockRealization& rock) {
    std::vector<double> h;
    h.reserve(rock.perm_md.size());
    for (double k : rock.perm_md) h.push_back(h_from_perm_md(k));
    return h;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

RockRealization load_member(const fs::path& file, const Grid& grid, double porosity) {
    const CellField field = read_field(file);
    if (field.dims != grid.dims()) {
        std::ostringstream msg;
        msg << "shape mismatch: file is " << field.dims[0] << "x" << field.dims[1] << "x"
            << field.dims[2] << ", grid is " << grid.nx() << "x" << grid.ny() << "x" << grid.nz();
        throw IngestionError(file.string(), 1, msg.str());
    }
    const bool is_h = field.name == "h";
    if (!is_h && field.name != "perm" && field.name != "permeability" && field.name != "permx") {
        throw IngestionError(file.string(), 1, "unsupported field name '" + field.name + "'");
    }
    RockRealization rock;
    rock.perm_md.resize(field.values.size());
    rock.porosity.assign(field.values.size(), porosity);
    for (std::size_t c = 0; c < field.values.size(); ++c) {
        const double k = is_h ? perm_md_from_h(field.values[c]) : field.values[c];
        if (!(k > 0.0) || !std::isfinite(k)) {
            throw IngestionError(file.string(), field.value_lines[c], "non-positive permeability");
        }
        rock.perm_md[c] = k;
    }
    return rock;
}

}  // namespace

Ensemble load_realizations(const fs::path& path, const Grid& grid, double porosity) {
    if (!(porosity > 0.0 && porosity <= 1.0)) {
        throw InvalidArgument("load_realizations: porosity must lie in (0,1]");
    }
    std::vector<fs::path> members;
    std::optional<fs::path> truth;

    fs::path manifest;
    if (fs::is_directory(path)) {
        if (fs::exists(path / "manifest.txt")) {
            manifest = path / "manifest.txt";
        } else {
            for (const auto& entry : fs::directory_iterator(path)) {
                const auto ext = entry.path().extension();
                if (entry.is_regular_file() && (ext == ".txt" || ext == ".dat" || ext == ".field")) {
                    members.push_back(entry.path());
                }
            }
            std::sort(members.begin(), members.end());
        }
    } else if (fs::exists(path)) {
        // A lone field file is a one-member ensemble; anything else is a manifest.
        std::ifstream probe(path);
        std::string first;
        std::getline(probe, first);
        if (trim(first).rfind("# field", 0) == 0) members.push_back(path);
        else manifest = path;
    } else {
        throw IngestionError(path.string(), 0, "no such file or directory");
    }

    if (!manifest.empty()) {
        std::ifstream in(manifest);
        if (!in) throw IngestionError(manifest.string(), 0, "cannot open manifest");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string entry = trim(line.substr(0, line.find('#')));
            if (entry.empty()) continue;
            if (entry.rfind("truth:", 0) == 0) {
                if (truth) throw IngestionError(manifest.string(), line_no, "second truth entry");
                entry = trim(entry.substr(6));
                if (entry.empty()) throw IngestionError(manifest.string(), line_no, "empty truth entry");
                truth = manifest.parent_path() / entry;
            } else {
                members.push_back(manifest.parent_path() / entry);
            }
        }
    }

    for (const auto& m : members) {
        if (!fs::exists(m)) throw IngestionError(m.string(), 0, "missing member file");
    }
    if (truth && !fs::exists(*truth)) throw IngestionError(truth->string(), 0, "missing truth file");

    Ensemble ens;
    ens.provenance = "ingested(" + path.string() + ")";
    for (const auto& m : members) {
        ens.realizations.push_back(load_member(m, grid, porosity));
        ens.names.push_back(m.filename().string());
    }
    if (truth) ens.truth = load_member(*truth, grid, porosity);
    if (ens.realizations.empty()) {
        throw IngestionError(path.string(), 0, "ensemble has no prior members");
    }
    return ens;
}

void write_realizations(const fs::path& dir, const Grid& grid,
                        const std::vector<RockRealization>& realizations,
                        const RockRealization* truth) {
    fs::create_directories(dir);
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw Error("cannot write " + (dir / "manifest.txt").string());
    manifest << "# ensemble manifest: one member per line, 'truth:' marks the ground truth\n";
    char name[64];
    for (std::size_t r = 0; r < realizations.size(); ++r) {
        std::snprintf(name, sizeof name, "perm_%04zu.txt", r);
        write_field(dir / name, CellField{"perm", grid.dims(), realizations[r].perm_md, {}});
        manifest << name << '\n';
    }
    if (truth) {
        write_field(dir / "truth.txt", CellField{"perm", grid.dims(), truth->perm_md, {}});
        manifest << "truth: truth.txt\n";
    }
}

}  // namespace neinfer
