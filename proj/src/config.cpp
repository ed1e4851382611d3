#include "neinfer/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "neinfer/error.hpp"
#include "neinfer/units.hpp"

namespace neinfer {

namespace {

using nlohmann::json;

// Reads fields from one JSON object and rejects keys that were never asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& at(const std::string& key) {
        if (!has(key)) throw ConfigError(path_ + "." + key + ": missing");
        return j_.at(key);
    }

    template <typename T>
    T get(const std::string& key) {
        const json& v = at(key);
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + "." + key + ": wrong type");
        }
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        return has(key) ? get<T>(key) : fallback;
    }

    Section child(const std::string& key) { return Section(at(key), path_ + "." + key); }

    std::string where(const std::string& key) const { return path_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!it.key().empty() && it.key()[0] == '_') continue;
            if (!seen_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename T>
std::array<T, 3> triple(Section& s, const std::string& key) {
    const auto v = s.get<std::vector<T>>(key);
    if (v.size() != 3) throw ConfigError(s.where(key) + ": expected 3 values");
    return {v[0], v[1], v[2]};
}

RateQuantity parse_quantity(const std::string& q) {
    if (q == "total") return RateQuantity::Total;
    if (q == "water") return RateQuantity::Water;
    if (q == "oil") return RateQuantity::Oil;
    throw ConfigError("fluid.observed: unknown quantity '" + q + "'");
}

SamplerMethod parse_sampler(const std::string& s) {
    if (s == "auto") return SamplerMethod::Auto;
    if (s == "dense") return SamplerMethod::Dense;
    if (s == "circulant") return SamplerMethod::Circulant;
    throw ConfigError("rock.sampler: unknown method '" + s + "'");
}

}  // namespace

CaseConfig parse_case_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    CaseConfig c;
    Section top(root, "config");
    c.name = top.get<std::string>("name", c.name);
    c.seed = top.get<std::uint64_t>("seed", 0);
    c.workers = top.get<std::size_t>("workers", 1);
    c.initial_pressure = units::mpa_to_pa(top.get<double>("initial_pressure_mpa"));
    c.implicit_wells = top.get<bool>("implicit_wells", false);

    {
        Section g = top.child("grid");
        c.dims = triple<std::size_t>(g, "dims");
        if (g.has("spacing_m")) {
            c.spacing = triple<double>(g, "spacing_m");
        } else {
            const auto size = triple<double>(g, "size_m");
            for (int a = 0; a < 3; ++a) {
                if (c.dims[a] == 0) throw ConfigError("config.grid.dims: must be >= 1");
                c.spacing[a] = size[a] / double(c.dims[a]);
            }
        }
        g.finish();
    }

    {
        Section r = top.child("rock");
        const auto source = r.get<std::string>("source");
        c.porosity = r.get<double>("porosity");
        if (source == "generate") {
            c.rock_source = CaseConfig::RockSource::Generate;
            c.prior_count = r.get<std::size_t>("count");
            c.generate_truth = r.get<bool>("held_out_truth", true);
            c.sampler = parse_sampler(r.get<std::string>("sampler", "auto"));
            c.variogram = VariogramSpec::defaults_for(c.grid());
            if (r.has("variogram")) {
                Section v = r.child("variogram");
                if (v.has("model")) {
                    try {
                        c.variogram.model = parse_variogram_model(v.get<std::string>("model"));
                    } catch (const InvalidArgument& e) {
                        throw ConfigError(std::string("config.rock.variogram.model: ") + e.what());
                    }
                }
                if (v.has("range_m")) c.variogram.range = triple<double>(v, "range_m");
                c.variogram.sill = v.get<double>("sill", c.variogram.sill);
                if (v.has("median_perm_md")) {
                    c.variogram.mean_h = h_from_perm_md(v.get<double>("median_perm_md"));
                }
                c.variogram.mean_h = v.get<double>("mean_h", c.variogram.mean_h);
                v.finish();
            }
        } else if (source == "ingest") {
            c.rock_source = CaseConfig::RockSource::Ingest;
            std::filesystem::path p = r.get<std::string>("path");
            c.ingest_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        } else {
            throw ConfigError("config.rock.source: expected 'generate' or 'ingest'");
        }
        r.finish();
    }

    {
        Section f = top.child("fluid");
        const auto kind = f.get<std::string>("type");
        if (kind == "single") {
            c.fluid_kind = CaseConfig::FluidKind::Single;
            c.single.viscosity = f.get<double>("viscosity_pa_s");
            c.single.compressibility = f.get<double>("compressibility_per_pa");
        } else if (kind == "two_phase") {
            c.fluid_kind = CaseConfig::FluidKind::TwoPhase;
            c.two.mu_w = f.get<double>("mu_w_pa_s");
            c.two.mu_o = f.get<double>("mu_o_pa_s");
            c.two.c_w = f.get<double>("c_w_per_pa");
            c.two.c_o = f.get<double>("c_o_per_pa");
            c.two.c_r = f.get<double>("c_r_per_pa", 0.0);
            c.two.s_iw = f.get<double>("s_iw");
            c.two.beta = f.get<double>("beta", 2.0);
            c.initial_sw = f.get<double>("initial_sw", c.two.s_iw);
            if (f.has("observed")) {
                c.observed.clear();
                for (const auto& q : f.get<std::vector<std::string>>("observed")) {
                    c.observed.push_back(parse_quantity(q));
                }
            }
            if (f.has("peaceman")) {
                Section p = f.child("peaceman");
                c.peaceman.r_eq = p.get<double>("r_eq_m", c.peaceman.r_eq);
                c.peaceman.r_w = p.get<double>("r_w_m", c.peaceman.r_w);
                p.finish();
            }
        } else {
            throw ConfigError("config.fluid.type: expected 'single' or 'two_phase'");
        }
        f.finish();
    }

    {
        const json& wl = top.at("wells");
        if (!wl.is_array()) throw ConfigError("config.wells: expected an array");
        for (std::size_t i = 0; i < wl.size(); ++i) {
            Section w(wl[i], "config.wells[" + std::to_string(i) + "]");
            CaseConfig::WellSpec spec;
            spec.name = w.get<std::string>("name");
            const auto type = w.get<std::string>("type");
            if (type != "producer" && type != "injector") {
                throw ConfigError(w.where("type") + ": expected 'producer' or 'injector'");
            }
            spec.injector = type == "injector";
            for (const auto& cell : w.get<std::vector<std::vector<long long>>>("cells")) {
                if (cell.size() != 3) throw ConfigError(w.where("cells") + ": expected [i, j, k]");
                for (long long v : cell) {
                    if (v < 1) throw ConfigError(w.where("cells") + ": indices are 1-based");
                }
                spec.cells.push_back({int(cell[0] - 1), int(cell[1] - 1), int(cell[2] - 1)});
            }
            if (spec.injector) {
                spec.rate = w.get<double>("rate_m3_s");
            } else {
                spec.bhp = units::mpa_to_pa(w.get<double>("bhp_mpa"));
            }
            if (w.has("pi_m3_s_mpa")) spec.pi = w.get<double>("pi_m3_s_mpa") / units::kMegaPascal;
            if (w.has("geometric_index_m3")) spec.geometric_index = w.get<double>("geometric_index_m3");
            w.finish();
            c.wells.push_back(std::move(spec));
        }
    }

    {
        Section t = top.child("time");
        c.dt = t.get<double>("dt_s");
        c.history_steps = t.get<std::size_t>("history_steps");
        c.prediction_steps = t.get<std::size_t>("prediction_steps", 0);
        t.finish();
    }

    if (top.has("noise")) {
        Section n = top.child("noise");
        c.relative_noise = n.get<double>("relative_std", c.relative_noise);
        c.band_width = n.get<double>("band_width", c.band_width);
        if (n.has("per_well")) c.well_noise = n.get<std::map<std::string, double>>("per_well");
        n.finish();
    }

    {
        Section n = top.child("nei");
        c.k_max = n.get<std::size_t>("k_max");
        if (n.has("sigma")) {
            const json& s = n.at("sigma");
            if (s.is_string()) {
                if (s.get<std::string>() != "auto") throw ConfigError("config.nei.sigma: number or 'auto'");
            } else if (s.is_number()) {
                c.sigma = s.get<double>();
            } else {
                throw ConfigError("config.nei.sigma: number or 'auto'");
            }
        }
        c.coverage_target = n.get<double>("coverage_target", c.coverage_target);
        c.gate_threshold = n.get<double>("gate_threshold", c.coverage_target);
        c.stride = n.get<std::size_t>("stride", 1);
        c.sigma_grid_points = n.get<std::size_t>("sigma_grid_points", 64);
        n.finish();
    }

    if (top.has("esmda") && !top.at("esmda").is_null()) {
        Section e = top.child("esmda");
        EsmdaConfig ec;
        ec.assimilations = e.get<std::size_t>("assimilations");
        if (e.has("alphas")) ec.alphas = e.get<std::vector<double>>("alphas");
        ec.jitter = e.get<double>("jitter", ec.jitter);
        e.finish();
        c.esmda = ec;
    }

    top.finish();
    c.validate();
    return c;
}

CaseConfig load_case_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case_config(ss.str(), path.parent_path());
}

void CaseConfig::validate() const {
    const auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    for (int a = 0; a < 3; ++a) {
        if (dims[a] == 0) fail("grid dims must be >= 1");
        if (!(spacing[a] > 0.0)) fail("grid spacing must be > 0");
    }
    if (!(porosity > 0.0 && porosity <= 1.0)) fail("porosity must lie in (0, 1]");
    if (rock_source == RockSource::Generate && prior_count < 2) fail("need at least 2 priors");
    if (!(dt > 0.0)) fail("dt must be > 0");
    if (history_steps < 1) fail("history horizon must be >= 1 step");
    if (wells.empty()) fail("no wells");
    std::set<std::string> names;
    bool producer = false;
    for (const auto& w : wells) {
        if (!names.insert(w.name).second) fail("duplicate well name '" + w.name + "'");
        if (w.cells.empty()) fail("well '" + w.name + "' has no cells");
        for (const auto& cell : w.cells) {
            if (std::size_t(cell.i) >= dims[0] || std::size_t(cell.j) >= dims[1] ||
                std::size_t(cell.k) >= dims[2]) {
                fail("well '" + w.name + "' cell outside the grid");
            }
        }
        producer = producer || !w.injector;
        if (w.injector && !(w.rate > 0.0)) fail("injector '" + w.name + "' needs a rate > 0");
        if (fluid_kind == FluidKind::Single) {
            if (w.injector) fail("single-phase cases support producers only");
            if (!(w.pi > 0.0)) fail("well '" + w.name + "' needs pi_m3_s_mpa > 0");
        }
    }
    if (!producer) fail("no producing well to observe");
    for (const auto& [well, v] : well_noise) {
        if (!names.count(well)) fail("noise.per_well names unknown well '" + well + "'");
        if (!(v >= 0.0)) fail("noise must be >= 0");
    }
    if (!(relative_noise >= 0.0)) fail("noise must be >= 0");
    if (!(band_width >= 0.0)) fail("band_width must be >= 0");
    if (k_max < 1) fail("k_max must be >= 1");
    if (rock_source == RockSource::Generate && k_max > prior_count) fail("k_max exceeds the prior count");
    if (sigma && !(*sigma > 0.0)) fail("sigma must be > 0");
    if (!(coverage_target > 0.0 && coverage_target <= 1.0)) fail("coverage_target must lie in (0, 1]");
    if (!(gate_threshold >= 0.0 && gate_threshold <= 1.0)) fail("gate_threshold must lie in [0, 1]");
    if (stride < 1) fail("stride must be >= 1");
    if (sigma_grid_points < 2) fail("sigma_grid_points must be >= 2");
    if (workers < 1) fail("workers must be >= 1");
    if (esmda) {
        try {
            esmda->validate();
        } catch (const InvalidArgument& e) {
            fail(e.what());
        }
    }
    try {
        if (fluid_kind == FluidKind::Single) single.validate();
        else two.validate();
        if (rock_source == RockSource::Generate) variogram.validate();
    } catch (const InvalidArgument& e) {
        fail(e.what());
    }
    if (fluid_kind == FluidKind::TwoPhase && !(initial_sw >= two.s_iw && initial_sw <= 1.0)) {
        fail("initial_sw must lie in [s_iw, 1]");
    }
}

Grid CaseConfig::grid() const {
    return Grid({int(dims[0]), int(dims[1]), int(dims[2])}, spacing);
}

std::unique_ptr<ForwardModel> CaseConfig::forward_model() const {
    if (fluid_kind == FluidKind::Single) {
        SinglePhaseProblem p{grid(), single, {}, {}};
        p.options.implicit_wells = implicit_wells;
        for (const auto& w : wells) {
            Well well;
            well.name = w.name;
            well.perforations = w.cells;
            well.mode = WellMode::BhpProducer;
            well.pi = w.pi / double(w.cells.size());
            well.bhp = w.bhp;
            p.wells.push_back(std::move(well));
        }
        return std::make_unique<SinglePhaseForward>(std::move(p), dt, initial_pressure);
    }
    TwoPhaseProblem p{grid(), two, {}, peaceman, {}};
    p.options.implicit_wells = implicit_wells;
    for (const auto& w : wells) {
        TwoPhaseWell well;
        well.name = w.name;
        well.perforations = w.cells;
        well.mode = w.injector ? WellMode::RateInjector : WellMode::BhpProducer;
        well.bhp = w.bhp;
        well.rate = w.rate;
        well.geometric_index = w.geometric_index;
        p.wells.push_back(std::move(well));
    }
    return std::make_unique<TwoPhaseForward>(std::move(p), dt, initial_pressure, initial_sw, observed);
}

std::vector<double> CaseConfig::series_noise(const std::vector<std::string>& series_names) const {
    std::vector<double> out;
    for (const auto& s : series_names) {
        const std::string well = s.substr(0, s.find(':'));
        const auto it = well_noise.find(well);
        out.push_back(it == well_noise.end() ? relative_noise : it->second);
    }
    return out;
}

}  // namespace neinfer
