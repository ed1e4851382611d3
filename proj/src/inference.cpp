#include "neinfer/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "neinfer/error.hpp"
#include "neinfer/parallel.hpp"

namespace neinfer {

ResponseEnsemble::ResponseEnsemble(std::size_t n_rows, std::size_t n_series, std::size_t n_steps,
                                   std::vector<double> data, std::vector<std::string> series_names)
    : rows_(n_rows), n_series_(n_series), n_steps_(n_steps), data_(std::move(data)),
      names_(std::move(series_names)) {
    if (data_.size() != rows_ * cols()) throw InvalidArgument("response ensemble: data size mismatch");
    if (!names_.empty() && names_.size() != n_series_) {
        throw InvalidArgument("response ensemble: series name count mismatch");
    }
    for (double v : data_) {
        if (!std::isfinite(v)) throw InvalidArgument("response ensemble: non-finite response");
    }
}

ResponseEnsemble ResponseEnsemble::from_runs(const std::vector<ForwardRun>& runs,
                                             std::vector<std::string> series_names) {
    if (runs.empty()) throw InvalidArgument("response ensemble: no runs");
    const std::size_t steps = runs.front().n_steps;
    const std::size_t width = series_names.size() * steps;
    std::vector<double> data;
    data.reserve(runs.size() * width);
    for (const ForwardRun& r : runs) {
        if (r.n_steps != steps || r.series.size() != width) {
            throw InvalidArgument("response ensemble: runs have inconsistent shapes");
        }
        data.insert(data.end(), r.series.begin(), r.series.end());
    }
    const std::size_t n_series = series_names.size();
    return ResponseEnsemble(runs.size(), n_series, steps, std::move(data), std::move(series_names));
}

Observation Observation::with_band(std::vector<double> d_obs, std::vector<double> noise_scale,
                                   double band_width, std::size_t n_steps) {
    if (noise_scale.size() != d_obs.size()) throw InvalidArgument("observation: noise size mismatch");
    if (!(band_width >= 0.0)) throw InvalidArgument("observation: band width must be >= 0");
    Observation obs;
    obs.band_lower.resize(d_obs.size());
    obs.band_upper.resize(d_obs.size());
    for (std::size_t c = 0; c < d_obs.size(); ++c) {
        obs.band_lower[c] = d_obs[c] - band_width * noise_scale[c];
        obs.band_upper[c] = d_obs[c] + band_width * noise_scale[c];
    }
    obs.d_obs = std::move(d_obs);
    obs.noise_scale = std::move(noise_scale);
    obs.n_steps = n_steps;
    obs.validate();
    return obs;
}

void Observation::validate() const {
    const std::size_t n = d_obs.size();
    if (noise_scale.size() != n || band_lower.size() != n || band_upper.size() != n) {
        throw InvalidArgument("observation: vector sizes differ");
    }
    if (n_steps != 0 && n % n_steps != 0) {
        throw InvalidArgument("observation: length is not a multiple of n_steps");
    }
    for (std::size_t c = 0; c < n; ++c) {
        if (!std::isfinite(d_obs[c])) throw InvalidArgument("observation: non-finite value");
        if (!(noise_scale[c] >= 0.0)) throw InvalidArgument("observation: negative noise scale");
        if (!(band_lower[c] <= d_obs[c] && d_obs[c] <= band_upper[c])) {
            throw InvalidArgument("observation: band does not bracket d_obs at column " +
                                  std::to_string(c));
        }
    }
}

std::vector<double> subset_expectation(const ResponseEnsemble& responses, const SubsetId& subset) {
    const auto members = subset.members();
    if (members.empty()) throw InvalidArgument("subset_expectation: empty subset");
    for (auto m : members) {
        if (m >= responses.rows()) throw InvalidArgument("subset_expectation: member out of range");
    }
    const std::size_t cols = responses.cols();
    auto first = responses.row(members[0]);
    std::vector<double> sum(first.begin(), first.end());
    for (std::size_t i = 1; i < members.size(); ++i) {
        auto r = responses.row(members[i]);
        for (std::size_t c = 0; c < cols; ++c) sum[c] += r[c];
    }
    const double k = double(members.size());
    for (double& v : sum) v = v / k;
    return sum;
}

Envelope prior_envelope(const ResponseEnsemble& responses, std::size_t k_max) {
    if (responses.rows() == 0) throw InvalidArgument("prior_envelope: empty ensemble");
    if (k_max < 1 || k_max > responses.rows()) throw InvalidArgument("prior_envelope: bad k_max");
    auto r0 = responses.row(0);
    Envelope env{{r0.begin(), r0.end()}, {r0.begin(), r0.end()}};
    for (std::size_t r = 1; r < responses.rows(); ++r) {
        auto row = responses.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            env.lower[c] = std::min(env.lower[c], row[c]);
            env.upper[c] = std::max(env.upper[c], row[c]);
        }
    }
    return env;
}

double coverage_check(const Envelope& envelope, const Observation& obs) {
    const std::size_t n = obs.size();
    if (envelope.lower.size() != n || envelope.upper.size() != n) {
        throw InvalidArgument("coverage_check: shape mismatch");
    }
    if (n == 0) return 1.0;
    std::size_t covered = 0;
    for (std::size_t c = 0; c < n; ++c) {
        const bool intersects = obs.band_lower[c] <= envelope.upper[c] &&
                                obs.band_upper[c] >= envelope.lower[c];
        const bool inside = envelope.lower[c] <= obs.d_obs[c] && obs.d_obs[c] <= envelope.upper[c];
        if (intersects && inside) ++covered;
    }
    return double(covered) / double(n);
}

double band_coverage(const Envelope& envelope, const Observation& obs) {
    const std::size_t n = obs.size();
    if (envelope.lower.size() != n || envelope.upper.size() != n) {
        throw InvalidArgument("band_coverage: shape mismatch");
    }
    if (n == 0) return 1.0;
    std::size_t covered = 0;
    for (std::size_t c = 0; c < n; ++c) {
        if (envelope.lower[c] <= obs.band_lower[c] && obs.band_upper[c] <= envelope.upper[c]) {
            ++covered;
        }
    }
    return double(covered) / double(n);
}

LossFunction::LossFunction(const Observation& obs, std::size_t stride) {
    obs.validate();
    if (stride < 1) throw InvalidArgument("loss: stride must be >= 1");
    const std::size_t n = obs.size();
    const std::size_t steps = obs.n_steps == 0 ? n : obs.n_steps;
    for (std::size_t start = 0; start < n; start += steps) {
        double ss = 0.0;
        for (std::size_t c = start; c < start + steps; ++c) ss += obs.d_obs[c] * obs.d_obs[c];
        const double rms = std::max(std::sqrt(ss / double(steps)), 1e-12);
        for (std::size_t t = 0; t < steps; t += stride) {
            const std::size_t c = start + t;
            columns_.push_back(c);
            targets_.push_back(obs.d_obs[c]);
            scales_.push_back(obs.noise_scale[c] > 0.0 ? obs.noise_scale[c] : rms);
        }
    }
}

double LossFunction::operator()(std::span<const double> e) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        const double t = (e[columns_[i]] - targets_[i]) / scales_[i];
        acc += t * t;
    }
    return columns_.empty() ? 0.0 : std::sqrt(acc / double(columns_.size()));
}

double loss(std::span<const double> expectation, const Observation& obs) {
    if (expectation.size() != obs.size()) throw InvalidArgument("loss: shape mismatch");
    return LossFunction(obs)(expectation);
}

namespace {

/// Loss columns of every realisation gathered into a dense n x m block.
struct LossKernel {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<double> rows;  // n * m
    const LossFunction* fn = nullptr;

    LossKernel(const ResponseEnsemble& responses, const LossFunction& f)
        : n(responses.rows()), m(f.columns().size()), rows(n * m), fn(&f) {
        for (std::size_t r = 0; r < n; ++r) {
            auto row = responses.row(r);
            for (std::size_t i = 0; i < m; ++i) rows[r * m + i] = row[f.columns()[i]];
        }
    }
};

constexpr double kNoCutoff = std::numeric_limits<double>::infinity();

/// Streams [begin, end) and calls visit(members, index, loss) for each subset
/// with loss < cutoff. Sums run left to right over members, matching
/// subset_expectation bit for bit.
template <typename Visit>
void stream_losses(const LossKernel& kernel, std::size_t k_max, SubsetCount begin, SubsetCount end,
                   double cutoff, Visit&& visit) {
    const std::size_t m = kernel.m;
    const double* targets = kernel.fn->targets().data();
    const double* scales = kernel.fn->scales().data();
    std::vector<double> partial(k_max * m);
    SubsetEnumerator e(kernel.n, k_max, begin, end);
    while (e.next()) {
        const auto members = e.current();
        const std::size_t k = members.size();
        for (std::size_t d = e.changed_from(); d < k; ++d) {
            double* dst = partial.data() + d * m;
            const double* row = kernel.rows.data() + std::size_t(members[d]) * m;
            if (d == 0) {
                std::copy(row, row + m, dst);
            } else {
                const double* prev = dst - m;
                for (std::size_t c = 0; c < m; ++c) dst[c] = prev[c] + row[c];
            }
        }
        const double* sum = partial.data() + (k - 1) * m;
        const double kd = double(k);
        double acc = 0.0;
        bool rejected = false;
        for (std::size_t c = 0; c < m; ++c) {
            const double t = (sum[c] / kd - targets[c]) / scales[c];
            acc += t * t;
            // acc only grows, so a partial loss at or above the cutoff is final.
            if ((c & 255) == 255 && std::sqrt(acc / double(m)) >= cutoff) {
                rejected = true;
                break;
            }
        }
        if (rejected) continue;
        const double l = m == 0 ? 0.0 : std::sqrt(acc / double(m));
        if (l < cutoff) visit(members, e.index(), l);
    }
}

std::size_t chunk_count(std::size_t workers, SubsetCount total) {
    if (workers <= 1) return 1;
    return std::size_t(std::min<SubsetCount>(total, SubsetCount(workers) * 8));
}

void check_shapes(const ResponseEnsemble& responses, const Observation& obs, std::size_t k_max) {
    obs.validate();
    if (obs.size() != responses.cols()) throw InvalidArgument("observation/response width mismatch");
    if (responses.rows() == 0) throw InvalidArgument("empty response ensemble");
    if (k_max < 1 || k_max > responses.rows()) throw InvalidArgument("k_max must lie in [1, n]");
}

}  // namespace

SubsetSelection select_posterior(const ResponseEnsemble& responses, const Observation& obs,
                                 double sigma, std::size_t k_max, const SelectOptions& options) {
    check_shapes(responses, obs, k_max);
    if (!(sigma > 0.0)) throw InvalidArgument("select_posterior: sigma must be > 0");
    const LossFunction fn(obs, options.stride);
    const LossKernel kernel(responses, fn);
    const SubsetCount total = count_subsets(responses.rows(), k_max);
    const auto chunks = partition_range(total, chunk_count(options.workers, total));

    struct Hit {
        std::vector<std::uint32_t> members;
        double loss;
    };
    std::vector<std::vector<Hit>> found(chunks.size());
    parallel_for(chunks.size(), options.workers, [&](std::size_t i) {
        stream_losses(kernel, k_max, chunks[i].first, chunks[i].second, sigma,
                      [&](std::span<const std::uint32_t> mem, SubsetCount, double l) {
                          found[i].push_back({{mem.begin(), mem.end()}, l});
                      });
    });

    SubsetSelection sel;
    sel.sigma = sigma;
    sel.k_max = k_max;
    sel.evaluated = total;
    for (auto& chunk : found) {
        for (auto& hit : chunk) sel.entries.push_back({SubsetId(std::move(hit.members)), hit.loss});
    }
    // Chunks concatenate in stream order; stable sort keeps it for ties.
    std::stable_sort(sel.entries.begin(), sel.entries.end(),
                     [](const SelectedSubset& a, const SelectedSubset& b) { return a.loss < b.loss; });
    return sel;
}

Envelope posterior_envelope(const ResponseEnsemble& responses, const SubsetSelection& selection) {
    if (selection.empty()) throw InvalidArgument("posterior_envelope: empty selection");
    std::vector<double> e = subset_expectation(responses, selection.entries.front().subset);
    Envelope env{e, e};
    for (std::size_t s = 1; s < selection.size(); ++s) {
        e = subset_expectation(responses, selection.entries[s].subset);
        for (std::size_t c = 0; c < e.size(); ++c) {
            env.lower[c] = std::min(env.lower[c], e[c]);
            env.upper[c] = std::max(env.upper[c], e[c]);
        }
    }
    return env;
}

std::vector<std::uint32_t> posterior_union(const SubsetSelection& selection) {
    std::vector<std::uint32_t> u;
    for (const auto& entry : selection.entries) {
        u.insert(u.end(), entry.subset.members().begin(), entry.subset.members().end());
    }
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

AutoSigmaResult auto_sigma(const ResponseEnsemble& responses, const Observation& obs,
                           std::size_t k_max, double coverage_target,
                           const SigmaSearchOptions& options) {
    check_shapes(responses, obs, k_max);
    if (!(coverage_target >= 0.0 && coverage_target <= 1.0)) {
        throw InvalidArgument("auto_sigma: coverage target must lie in [0, 1]");
    }
    if (options.grid_points < 1) throw InvalidArgument("auto_sigma: need at least one grid point");
    const SubsetCount total = count_subsets(responses.rows(), k_max);
    if (total > options.max_subsets) {
        throw InvalidArgument("auto_sigma: " + std::to_string(total) +
                              " subsets exceed the in-memory limit");
    }

    const LossFunction fn(obs, options.select.stride);
    const LossKernel kernel(responses, fn);
    const auto chunks = partition_range(total, chunk_count(options.select.workers, total));
    std::vector<std::vector<std::pair<double, SubsetCount>>> found(chunks.size());
    parallel_for(chunks.size(), options.select.workers, [&](std::size_t i) {
        found[i].reserve(std::size_t(chunks[i].second - chunks[i].first));
        stream_losses(kernel, k_max, chunks[i].first, chunks[i].second, kNoCutoff,
                      [&](std::span<const std::uint32_t>, SubsetCount index, double l) {
                          found[i].emplace_back(l, index);
                      });
    });
    std::vector<std::pair<double, SubsetCount>> losses;
    losses.reserve(std::size_t(total));
    for (auto& chunk : found) {
        losses.insert(losses.end(), chunk.begin(), chunk.end());
        chunk = {};
    }
    std::sort(losses.begin(), losses.end());

    AutoSigmaResult result;
    result.min_loss = losses.front().first;
    result.max_loss = losses.back().first;

    // Strict "< sigma" selection: both grid ends sit just above the extremes.
    const double hi = std::max(result.max_loss * (1.0 + 1e-9), std::numeric_limits<double>::min());
    double lo = result.min_loss > 0.0 ? result.min_loss * (1.0 + 1e-9) : hi * 1e-9;
    lo = std::min(lo, hi);
    const std::size_t g = options.grid_points;
    result.grid.resize(g);
    for (std::size_t i = 0; i < g; ++i) {
        result.grid[i] = g == 1 ? hi : lo * std::pow(hi / lo, double(i) / double(g - 1));
    }
    result.grid.back() = hi;

    const std::size_t cols = responses.cols();
    std::vector<double> lower(cols, std::numeric_limits<double>::infinity());
    std::vector<double> upper(cols, -std::numeric_limits<double>::infinity());
    std::vector<char> covered(cols, 0);
    std::size_t n_covered = 0;
    std::size_t taken = 0;
    double best_cov = -1.0, best_sigma = hi;
    const std::size_t n = responses.rows();

    for (double sigma : result.grid) {
        while (taken < losses.size() && losses[taken].first < sigma) {
            const SubsetCursor cur = cursor_at(n, k_max, losses[taken].second);
            const SubsetId id(unrank_combination(n, cur.size, cur.rank));
            const std::vector<double> e = subset_expectation(responses, id);
            for (std::size_t c = 0; c < cols; ++c) {
                if (e[c] >= lower[c] && e[c] <= upper[c]) continue;
                lower[c] = std::min(lower[c], e[c]);
                upper[c] = std::max(upper[c], e[c]);
                const char now = lower[c] <= obs.band_lower[c] && obs.band_upper[c] <= upper[c];
                n_covered += std::size_t(now) - std::size_t(covered[c]);
                covered[c] = now;
            }
            ++taken;
        }
        if (taken == 0) continue;
        const double cov = cols == 0 ? 1.0 : double(n_covered) / double(cols);
        if (cov > best_cov) {
            best_cov = cov;
            best_sigma = sigma;
        }
        if (cov >= coverage_target) {
            result.sigma = sigma;
            result.coverage = cov;
            result.selected = taken;
            return result;
        }
    }
    throw SigmaSearchFailure("auto_sigma: no sigma on the grid reaches coverage " +
                                 std::to_string(coverage_target) + " (best " +
                                 std::to_string(best_cov) + ")",
                             best_cov, best_sigma);
}

PredictionResult predict(const SubsetSelection& selection, const ResponseEnsemble& history,
                         const std::vector<RockRealization>& priors,
                         const std::vector<ModelState>& history_states, const ForwardModel& model,
                         std::size_t extension_steps, std::size_t workers, RunCounter* counter) {
    if (selection.empty()) throw InvalidArgument("predict: empty selection");
    if (priors.size() != history.rows() || history_states.size() != history.rows()) {
        throw InvalidArgument("predict: priors/states do not match the history ensemble");
    }
    PredictionResult out;
    out.members = posterior_union(selection);
    out.history_steps = history.n_steps();
    out.extension_steps = extension_steps;

    std::vector<RockRealization> rocks;
    std::vector<ModelState> starts;
    for (auto m : out.members) {
        rocks.push_back(priors[m]);
        starts.push_back(history_states[m]);
    }
    std::vector<ForwardRun> ext;
    if (extension_steps > 0) ext = run_ensemble(model, rocks, starts, extension_steps, workers, counter);

    const std::size_t ns = history.n_series();
    const std::size_t h = history.n_steps();
    const std::size_t steps = h + extension_steps;
    std::vector<double> data(out.members.size() * ns * steps);
    for (std::size_t r = 0; r < out.members.size(); ++r) {
        auto past = history.row(out.members[r]);
        double* dst = data.data() + r * ns * steps;
        for (std::size_t s = 0; s < ns; ++s) {
            std::copy(past.begin() + std::ptrdiff_t(s * h), past.begin() + std::ptrdiff_t((s + 1) * h),
                      dst + s * steps);
            if (extension_steps > 0) {
                if (ext[r].series.size() != ns * extension_steps) {
                    throw Error("predict: extension run has unexpected width");
                }
                std::copy(ext[r].series.begin() + std::ptrdiff_t(s * extension_steps),
                          ext[r].series.begin() + std::ptrdiff_t((s + 1) * extension_steps),
                          dst + s * steps + h);
            }
        }
    }
    out.responses = ResponseEnsemble(out.members.size(), ns, steps, std::move(data),
                                     history.series_names());

    // Re-index each subset into rows of the union ensemble.
    for (const auto& entry : selection.entries) {
        std::vector<std::uint32_t> local;
        for (auto m : entry.subset.members()) {
            local.push_back(std::uint32_t(
                std::lower_bound(out.members.begin(), out.members.end(), m) - out.members.begin()));
        }
        out.expectations.push_back(subset_expectation(out.responses, SubsetId(std::move(local))));
    }
    out.envelope = {out.expectations.front(), out.expectations.front()};
    for (const auto& e : out.expectations) {
        for (std::size_t c = 0; c < e.size(); ++c) {
            out.envelope.lower[c] = std::min(out.envelope.lower[c], e[c]);
            out.envelope.upper[c] = std::max(out.envelope.upper[c], e[c]);
        }
    }
    return out;
}

}  // namespace neinfer
