#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "neinfer/error.hpp"
#include "neinfer/inference.hpp"

using namespace neinfer;

namespace {

ResponseEnsemble scalar_rows(std::vector<double> v) {
    const std::size_t n = v.size();
    return ResponseEnsemble(n, 1, 1, std::move(v));
}

Observation scalar_obs(double d, double s, double band_width = 2.0) {
    return Observation::with_band({d}, {s}, band_width);
}

std::vector<std::uint32_t> ids(const SubsetId& s) { return {s.members().begin(), s.members().end()}; }

// Fake model: one series, value at global step t is perm[0] * (t + 1).
class RampModel final : public ForwardModel {
public:
    std::vector<std::string> series_names() const override { return {"P"}; }
    ModelState initial_state() const override { return {{0.0}, {}}; }
    double dt() const override { return 1.0; }
    ForwardRun run(const RockRealization& rock, const ModelState& start,
                   std::size_t n_steps) const override {
        ForwardRun r;
        r.n_steps = n_steps;
        const double t0 = start.pressure.at(0);
        for (std::size_t t = 0; t < n_steps; ++t) r.series.push_back(rock.perm_md[0] * (t0 + double(t) + 1.0));
        r.final_state.pressure = {t0 + double(n_steps)};
        return r;
    }
};

struct RandomCase {
    ResponseEnsemble responses;
    Observation obs;
};

RandomCase random_case(std::mt19937_64& rng, std::size_t n, std::size_t series, std::size_t steps) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> data(n * series * steps);
    for (double& v : data) v = 10.0 + g(rng);
    std::vector<double> d(series * steps), s(series * steps);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    for (std::size_t c = 0; c < d.size(); ++c) {
        d[c] = 10.0 + 0.5 * g(rng);
        s[c] = (c % 5 == 0) ? 0.0 : u(rng);
    }
    return {ResponseEnsemble(n, series, steps, std::move(data)),
            Observation::with_band(std::move(d), std::move(s), 2.0, steps)};
}

// Naive oracle: every subset by bitmask, expectation and loss from scratch.
std::map<std::vector<std::uint32_t>, double> naive_selection(const RandomCase& rc, double sigma,
                                                             std::size_t k_max) {
    const std::size_t n = rc.responses.rows();
    const std::size_t cols = rc.responses.cols();
    const std::size_t steps = rc.obs.n_steps;
    std::vector<double> scale(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        if (rc.obs.noise_scale[c] > 0.0) {
            scale[c] = rc.obs.noise_scale[c];
        } else {
            const std::size_t s0 = (c / steps) * steps;
            double ss = 0.0;
            for (std::size_t t = s0; t < s0 + steps; ++t) ss += rc.obs.d_obs[t] * rc.obs.d_obs[t];
            scale[c] = std::max(std::sqrt(ss / double(steps)), 1e-12);
        }
    }
    std::map<std::vector<std::uint32_t>, double> out;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<std::uint32_t> m;
        for (std::uint32_t i = 0; i < n; ++i) {
            if (mask >> i & 1u) m.push_back(i);
        }
        if (m.size() > k_max) continue;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            double sum = rc.responses(m[0], c);
            for (std::size_t i = 1; i < m.size(); ++i) sum += rc.responses(m[i], c);
            const double t = (sum / double(m.size()) - rc.obs.d_obs[c]) / scale[c];
            acc += t * t;
        }
        const double l = std::sqrt(acc / double(cols));
        if (l < sigma) out[m] = l;
    }
    return out;
}

}  // namespace

TEST_SUITE("nei-engine") {

TEST_CASE("subset expectation") {
    const ResponseEnsemble r(2, 1, 2, {1, 2, 3, 4});
    CHECK(subset_expectation(r, SubsetId({0, 1})) == std::vector<double>{2, 3});
    CHECK(subset_expectation(r, SubsetId({1})) == std::vector<double>{3, 4});
    CHECK_THROWS_AS(subset_expectation(r, SubsetId({2})), InvalidArgument);
}

TEST_CASE("subset expectations lie in the member hull") {
    std::mt19937_64 rng(3);
    const auto rc = random_case(rng, 7, 2, 4);
    SubsetEnumerator e(7, 7);
    while (e.next()) {
        const SubsetId id({e.current().begin(), e.current().end()});
        const auto ex = subset_expectation(rc.responses, id);
        for (std::size_t c = 0; c < ex.size(); ++c) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (auto m : id.members()) {
                lo = std::min(lo, rc.responses(m, c));
                hi = std::max(hi, rc.responses(m, c));
            }
            CHECK(ex[c] >= lo);
            CHECK(ex[c] <= hi);
        }
    }
}

TEST_CASE("prior envelope") {
    const auto r = scalar_rows({1, 2, 4});
    const Envelope env = prior_envelope(r, 3);
    CHECK(env.lower == std::vector<double>{1});
    CHECK(env.upper == std::vector<double>{4});

    const auto one = scalar_rows({5});
    const Envelope e1 = prior_envelope(one, 1);
    CHECK(e1.lower == e1.upper);

    std::mt19937_64 rng(8);
    const auto rc = random_case(rng, 8, 2, 5);
    const Envelope a = prior_envelope(rc.responses, 1);
    const Envelope b = prior_envelope(rc.responses, 8);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);

    // Envelope of every subset mean equals the row envelope.
    std::vector<double> lo(rc.responses.cols(), std::numeric_limits<double>::infinity());
    std::vector<double> hi(rc.responses.cols(), -std::numeric_limits<double>::infinity());
    SubsetEnumerator e(8, 8);
    while (e.next()) {
        const auto ex = subset_expectation(rc.responses, SubsetId({e.current().begin(), e.current().end()}));
        for (std::size_t c = 0; c < ex.size(); ++c) {
            lo[c] = std::min(lo[c], ex[c]);
            hi[c] = std::max(hi[c], ex[c]);
        }
    }
    CHECK(lo == a.lower);
    CHECK(hi == a.upper);
    CHECK_THROWS_AS(prior_envelope(r, 0), InvalidArgument);
}

TEST_CASE("coverage check") {
    const Envelope env{{0, 0, 0, 0}, {10, 10, 10, 10}};
    const auto inside = Observation::with_band({5, 5, 5, 5}, {1, 1, 1, 1}, 2.0);
    CHECK(coverage_check(env, inside) == 1.0);
    const auto above = Observation::with_band({20, 20, 20, 20}, {1, 1, 1, 1}, 2.0);
    CHECK(coverage_check(env, above) == 0.0);
    const auto half = Observation::with_band({5, 20, 5, 20}, {1, 1, 1, 1}, 2.0);
    CHECK(coverage_check(env, half) == 0.5);
    // d_obs just outside while the band still intersects: not covered.
    const auto edge = Observation::with_band({10.5}, {1}, 2.0);
    CHECK(coverage_check(Envelope{{0}, {10}}, edge) == 0.0);
    CHECK(band_coverage(Envelope{{0}, {10}}, scalar_obs(5, 1)) == 1.0);
    CHECK(band_coverage(Envelope{{0}, {10}}, scalar_obs(9, 1)) == 0.0);
}

TEST_CASE("observation validation") {
    CHECK_THROWS_AS(Observation::with_band({1, 2}, {1}, 2.0), InvalidArgument);
    CHECK_THROWS_AS(Observation::with_band({1}, {-1}, 2.0), InvalidArgument);
    Observation bad = scalar_obs(1, 1);
    bad.band_lower[0] = 2.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    CHECK_THROWS_AS(ResponseEnsemble(1, 1, 1, {std::nan("")}), InvalidArgument);
}

TEST_CASE("loss") {
    const auto obs = Observation::with_band({1, 2, 3}, {0.5, 0.5, 0.5}, 2.0);
    CHECK(loss(std::vector<double>{1, 2, 3}, obs) == 0.0);
    CHECK(loss(std::vector<double>{2, 3, 4}, obs) == doctest::Approx(2.0).epsilon(1e-15));

    // Joint rescaling leaves the loss unchanged.
    const auto scaled = Observation::with_band({7, 14, 21}, {3.5, 3.5, 3.5}, 2.0);
    CHECK(loss(std::vector<double>{10.5, 9.1, 22}, scaled) ==
          doctest::Approx(loss(std::vector<double>{1.5, 1.3, 22.0 / 7.0}, obs)).epsilon(1e-13));

    // Zero noise falls back to the series RMS of d_obs.
    const auto zero = Observation::with_band({3, 4}, {0, 0}, 2.0, 2);
    const double rms = std::sqrt((9.0 + 16.0) / 2.0);
    CHECK(loss(std::vector<double>{3 + rms, 4 + rms}, zero) == doctest::Approx(1.0).epsilon(1e-14));
    const auto all_zero = Observation::with_band({0.0}, {0.0}, 2.0);
    CHECK(std::isfinite(loss(std::vector<double>{1e-13}, all_zero)));
    CHECK_THROWS_AS(loss(std::vector<double>{1, 2}, obs), InvalidArgument);
}

TEST_CASE("scalar selection example") {
    const auto r = scalar_rows({1, 2, 4});
    const auto obs = scalar_obs(2.4, 1.0);
    const auto sel = select_posterior(r, obs, 0.2, 3);
    REQUIRE(sel.size() == 2);
    CHECK(ids(sel.entries[0].subset) == std::vector<std::uint32_t>{0, 1, 2});
    CHECK(sel.entries[0].loss == doctest::Approx(0.2 / 3.0).epsilon(1e-12));
    CHECK(ids(sel.entries[1].subset) == std::vector<std::uint32_t>{0, 2});
    CHECK(sel.entries[1].loss == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(sel.evaluated == 7);

    const Envelope post = posterior_envelope(r, sel);
    CHECK(post.upper[0] == doctest::Approx(2.5));
    CHECK(post.lower[0] == doctest::Approx(7.0 / 3.0));
    CHECK(posterior_union(sel) == std::vector<std::uint32_t>{0, 1, 2});

    CHECK(select_posterior(r, obs, 1e300, 3).size() == 7);
    CHECK(select_posterior(r, obs, 0.2 / 3.0 - 1e-12, 3).empty());
    CHECK_THROWS_AS(select_posterior(r, obs, 0.0, 3), InvalidArgument);
    CHECK_THROWS_AS(posterior_envelope(r, SubsetSelection{}), InvalidArgument);

    SubsetSelection single;
    single.entries.push_back({SubsetId({1, 2}), 0.0});
    const Envelope e1 = posterior_envelope(r, single);
    CHECK(e1.lower == std::vector<double>{3});
    CHECK(e1.upper == std::vector<double>{3});
}

TEST_CASE("streaming selection equals naive enumeration") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + rng() % 9;
        const std::size_t k = 1 + rng() % n;
        const auto rc = random_case(rng, n, 1 + rng() % 2, 1 + rng() % 6);
        const auto all = naive_selection(rc, std::numeric_limits<double>::infinity(), k);
        std::vector<double> losses;
        for (const auto& [m, l] : all) losses.push_back(l);
        std::sort(losses.begin(), losses.end());
        const double sigma = losses[losses.size() / 3] * 1.0000001;
        const auto expect = naive_selection(rc, sigma, k);
        const auto sel = select_posterior(rc.responses, rc.obs, sigma, k, {1, 1 + std::size_t(trial % 4)});
        REQUIRE(sel.size() == expect.size());
        for (std::size_t i = 0; i < sel.size(); ++i) {
            const auto it = expect.find(ids(sel.entries[i].subset));
            REQUIRE(it != expect.end());
            CHECK(sel.entries[i].loss == it->second);
            if (i > 0) CHECK(sel.entries[i - 1].loss <= sel.entries[i].loss);
        }
    }
}

TEST_CASE("selection is independent of the worker count") {
    std::mt19937_64 rng(5);
    const auto rc = random_case(rng, 12, 2, 6);
    const auto base = select_posterior(rc.responses, rc.obs, 1.5, 4, {1, 1});
    REQUIRE(!base.empty());
    for (std::size_t w : {2, 3, 8}) {
        const auto other = select_posterior(rc.responses, rc.obs, 1.5, 4, {1, w});
        REQUIRE(other.size() == base.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(other.entries[i].subset == base.entries[i].subset);
            CHECK(other.entries[i].loss == base.entries[i].loss);
        }
    }
}

TEST_CASE("selections nest and posterior lies inside the prior") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const auto rc = random_case(rng, 9, 1, 5);
        const Envelope prior = prior_envelope(rc.responses, 3);
        SubsetSelection prev;
        Envelope prev_env;
        for (double sigma : {0.8, 1.0, 1.3, 2.0, 5.0}) {
            const auto sel = select_posterior(rc.responses, rc.obs, sigma, 3);
            for (const auto& e : prev.entries) {
                CHECK(std::any_of(sel.entries.begin(), sel.entries.end(),
                                  [&](const SelectedSubset& s) { return s.subset == e.subset; }));
            }
            if (!sel.empty()) {
                const Envelope env = posterior_envelope(rc.responses, sel);
                for (std::size_t c = 0; c < env.lower.size(); ++c) {
                    CHECK(prior.lower[c] <= env.lower[c]);
                    CHECK(env.lower[c] <= env.upper[c]);
                    CHECK(env.upper[c] <= prior.upper[c]);
                    if (!prev.empty()) {
                        CHECK(env.lower[c] <= prev_env.lower[c]);
                        CHECK(env.upper[c] >= prev_env.upper[c]);
                    }
                }
                prev_env = env;
            }
            prev = sel;
        }
    }
}

TEST_CASE("stride decimates the loss") {
    const ResponseEnsemble r(2, 1, 4, {1, 100, 1, 100, 0, 0, 0, 0});
    const auto obs = Observation::with_band({1, 1, 1, 1}, {1, 1, 1, 1}, 2.0, 4);
    const auto sel = select_posterior(r, obs, 0.5, 1, {2, 1});
    REQUIRE(sel.size() == 1);
    CHECK(ids(sel.entries[0].subset) == std::vector<std::uint32_t>{0});
    CHECK(sel.entries[0].loss == 0.0);
    CHECK(select_posterior(r, obs, 0.5, 1, {1, 1}).empty());
}

TEST_CASE("auto sigma with an exact-match realisation") {
    const ResponseEnsemble r(3, 1, 3, {1, 2, 3, 2, 3, 4, 5, 5, 5});
    const auto obs = Observation::with_band({2, 3, 4}, {0, 0, 0}, 2.0, 3);
    const auto res = auto_sigma(r, obs, 2, 1.0);
    CHECK(res.coverage == 1.0);
    CHECK(res.selected >= 1);
    CHECK(res.min_loss == 0.0);
    const auto sel = select_posterior(r, obs, res.sigma, 2);
    CHECK(ids(sel.entries.front().subset) == std::vector<std::uint32_t>{1});
}

TEST_CASE("auto sigma on the scalar example") {
    const auto r = scalar_rows({1, 2, 4});
    // Band [2.35, 2.45] fits in [7/3, 2.5] only once both subsets are in.
    const auto obs = scalar_obs(2.4, 1.0, 0.05);
    const auto res = auto_sigma(r, obs, 3, 1.0);
    CHECK(res.coverage == 1.0);
    CHECK(res.selected == 2);
    CHECK(res.sigma > 0.1);
    const auto sel = select_posterior(r, obs, res.sigma, 3);
    CHECK(sel.size() == 2);
    // The previous grid point admits at most one subset.
    auto it = std::find(res.grid.begin(), res.grid.end(), res.sigma);
    REQUIRE(it != res.grid.begin());
    CHECK(select_posterior(r, obs, *(it - 1), 3).size() < 2);
}

TEST_CASE("auto sigma is monotone in the coverage target") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const auto rc = random_case(rng, 10, 1, 8);
        double prev = 0.0;
        for (double target : {0.0, 0.1, 0.25, 0.5, 0.75}) {
            try {
                const auto res = auto_sigma(rc.responses, rc.obs, 3, target);
                CHECK(res.sigma >= prev);
                CHECK(res.coverage >= target);
                prev = res.sigma;
            } catch (const SigmaSearchFailure& e) {
                CHECK(e.best_coverage() < target);
                break;
            }
        }
    }
}

TEST_CASE("auto sigma reports unreachable coverage") {
    const auto r = scalar_rows({1, 2});
    const auto obs = scalar_obs(1.5, 1.0);
    CHECK_THROWS_AS(auto_sigma(r, obs, 2, 1.0), SigmaSearchFailure);
    SigmaSearchOptions opt;
    opt.max_subsets = 2;
    CHECK_THROWS_AS(auto_sigma(r, obs, 2, 0.0, opt), InvalidArgument);
}

TEST_CASE("prediction runs only the union") {
    const RampModel model;
    std::vector<RockRealization> priors;
    for (double k : {1.0, 2.0, 4.0, 8.0}) priors.push_back({{k}, {0.1}});
    const std::size_t h = 3, ext = 2;
    const auto hist = run_ensemble(model, priors, h, 1);
    const auto responses = ResponseEnsemble::from_runs(hist, model.series_names());
    std::vector<ModelState> states;
    for (const auto& run : hist) states.push_back(run.final_state);

    SubsetSelection sel;
    sel.entries.push_back({SubsetId({0, 2}), 0.1});
    sel.entries.push_back({SubsetId({0, 1, 2}), 0.2});
    RunCounter counter;
    const auto pred = predict(sel, responses, priors, states, model, ext, 2, &counter);
    CHECK(pred.members == std::vector<std::uint32_t>{0, 1, 2});
    CHECK(counter.value() == 3);
    REQUIRE(pred.expectations.size() == 2);
    // Restarted extension equals one uninterrupted run.
    for (std::size_t t = 0; t < h + ext; ++t) {
        CHECK(pred.expectations[0][t] == doctest::Approx(2.5 * double(t + 1)));
        CHECK(pred.expectations[1][t] == doctest::Approx(7.0 / 3.0 * double(t + 1)));
        CHECK(pred.envelope.lower[t] == doctest::Approx(7.0 / 3.0 * double(t + 1)));
        CHECK(pred.envelope.upper[t] == doctest::Approx(2.5 * double(t + 1)));
    }

    SubsetSelection singles;
    for (std::uint32_t i = 0; i < 4; ++i) singles.entries.push_back({SubsetId({i}), 0.0});
    const auto all = predict(singles, responses, priors, states, model, ext);
    CHECK(all.members.size() == 4);
    const auto full = run_ensemble(model, priors, h + ext, 1);
    for (std::size_t i = 0; i < 4; ++i) CHECK(all.expectations[i] == full[i].series);

    const auto none = predict(sel, responses, priors, states, model, 0);
    CHECK(none.expectations[0] == subset_expectation(responses, SubsetId({0, 2})));
    CHECK(none.expectations[1] == subset_expectation(responses, SubsetId({0, 1, 2})));
    CHECK_THROWS_AS(predict(SubsetSelection{}, responses, priors, states, model, 1), InvalidArgument);
}

}
