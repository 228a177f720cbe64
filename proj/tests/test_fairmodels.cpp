// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairprice/fairmodels.hpp"
#include "fairprice/synth.hpp"
#include "fixtures.hpp"

using namespace fairprice;
using namespace fairprice::fair;
using fairprice::data::Dataset;

namespace {

model::EngineConfig glm_gaussian() {
    model::EngineConfig cfg;
    cfg.kind = model::EngineKind::Glm;
    cfg.objective = model::Family::Gaussian;
    return cfg;
}

Dataset flip_sensitive(const Dataset& ds) {
    Dataset out = ds;
    auto& s = out.column(out.schema.sensitive);
    for (int& c : s.codes) c = 1 - c;
    return out;
}

double rmse_between(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

double group_mean_ratio(const std::vector<double>& yhat, const std::vector<double>& mask) {
    double sa = 0.0, sb = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < yhat.size(); ++i) {
        if (mask[i] > 0.5) {
            sa += yhat[i];
            na += 1.0;
        } else {
            sb += yhat[i];
            nb += 1.0;
        }
    }
    return (sa / na) / (sb / nb);
}

// Hand-built MB-style model over (x1 numeric, gender) with chosen GLM betas.
FairModel hand_mb(double intercept, double beta_x, double beta_d, double prop_a) {
    data::Schema s;
    s.columns = {{"x1", data::FeatureKind::Numeric},
                 {"gender", data::FeatureKind::Categorical},
                 {"claim", data::FeatureKind::Numeric}};
    s.sensitive = "gender";
    s.target = "claim";
    // tiny dataset only to seed the encoder levels
    std::vector<std::vector<std::string>> rows{{"0", "F", "1"}, {"1", "M", "2"}};
    const Dataset seed_ds = data::detail::finalize_rows(s, rows, 0);
    FairModel m;
    m.kind = FairModelKind::MB;
    m.encoder = data::make_full_encoder(seed_ds);
    m.sensitive_col = "gender";
    m.level_a = "F";
    m.level_b = "M";
    m.prop_a = prop_a;
    m.d_col = 1;             // columns: x1, gender=M
    m.d_value_for_a = 0.0;   // indicator encodes M
    m.engine.kind = model::EngineKind::Glm;
    m.engine.glm.family = model::Family::Gaussian;
    m.engine.glm.coefficients = {intercept, beta_x, beta_d};
    m.engine.glm.column_names = {"x1", "gender=M"};
    return m;
}

Dataset tiny_xd(const std::vector<double>& x, const std::vector<std::string>& gender) {
    data::Schema s;
    s.columns = {{"x1", data::FeatureKind::Numeric},
                 {"gender", data::FeatureKind::Categorical},
                 {"claim", data::FeatureKind::Numeric}};
    s.sensitive = "gender";
    s.target = "claim";
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < x.size(); ++i)
        rows.push_back({fairprice::fmt_double(x[i]), gender[i], "1"});
    return data::detail::finalize_rows(s, rows, 0);
}

}  // namespace

// ------------------------------------------------------------------------ MB

TEST_CASE("MB separates the groups when tau is nonzero") {
    const auto ds = data::synth_generate(fixtures::independent(3000, 8.0), 1);
    const auto mb = fit_mb(glm_gaussian(), ds);
    const auto pa = mb.predict_with_level(ds, true);
    const auto pb = mb.predict_with_level(ds, false);
    double mean_gap = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) mean_gap += pa[i] - pb[i];
    mean_gap /= static_cast<double>(pa.size());
    CHECK(mean_gap > 6.0);  // generator tau = 8
}

TEST_CASE("MB sensitive coefficient vanishes when tau is zero") {
    const auto ds = data::synth_generate(fixtures::independent(20000, 0.0, 2.0), 2);
    const auto mb = fit_mb(glm_gaussian(), ds);
    // last design column is the sensitive indicator
    CHECK(std::abs(mb.engine.glm.coefficients.back()) < 0.05);
}

TEST_CASE("MB training fit dominates MU under nested GLM designs") {
    const auto ds = data::synth_generate(fixtures::independent(2000, 5.0), 3);
    const auto mb = fit_mb(glm_gaussian(), ds);
    const auto mu = fit_mu(glm_gaussian(), ds);
    const auto rb = rmse_between(mb.predict(ds), ds.target());
    const auto ru = rmse_between(mu.predict(ds), ds.target());
    CHECK(rb <= ru + 1e-9);
}

// ------------------------------------------------------------------------ MU

TEST_CASE("MU is exactly invariant to flipping the sensitive attribute") {
    const auto ds = data::synth_generate(fixtures::confounded(500, 5.0), 4);
    const auto mu = fit_mu(glm_gaussian(), ds);
    CHECK(mu.predict(ds) == mu.predict(flip_sensitive(ds)));
}

TEST_CASE("MU approaches MB when X is independent of D and tau = 0") {
    const auto ds = data::synth_generate(fixtures::independent(20000, 0.0), 5);
    const auto mb = fit_mb(glm_gaussian(), ds);
    const auto mu = fit_mu(glm_gaussian(), ds);
    const double mean_premium = mean(ds.target());
    CHECK(rmse_between(mb.predict(ds), mu.predict(ds)) < 0.02 * mean_premium);
}

TEST_CASE("MU ignores the sensitive column entirely") {
    const auto ds = data::synth_generate(fixtures::independent(300, 5.0), 6);
    // same rows with the sensitive column removed from the data entirely
    Dataset blind = ds;
    blind.schema.sensitive = "";
    blind.schema.sensitive_level_a.reset();
    std::erase_if(blind.schema.columns,
                  [](const auto& c) { return c.name == "gender"; });
    std::erase_if(blind.columns, [](const auto& c) { return c.name == "gender"; });
    const auto mu_with = fit_mu(glm_gaussian(), ds);
    const auto mu_without = fit_mu(glm_gaussian(), blind);
    CHECK(mu_with.predict(ds) == mu_without.predict(blind));
}

// --------------------------------------------------------------- orthogonalize

TEST_CASE("orthogonalize zeroes a column that is affine in d") {
    const std::size_t n = 10;
    data::ModelMatrix mm;
    mm.design = Matrix(n, 1);
    mm.column_names = {"c"};
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = i % 2 ? 1.0 : 0.0;
        mm.design(i, 0) = 2.0 * d[i] + 1.0;
    }
    const auto orth = orthogonalize(mm, d);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(orth.design.design(i, 0)) < 1e-12);
    CHECK(orth.b0[0] == Catch::Approx(1.0));
    CHECK(orth.b1[0] == Catch::Approx(2.0));
}

TEST_CASE("orthogonalize centers a balanced column when group means agree") {
    data::ModelMatrix mm;
    mm.design = Matrix(4, 1);
    mm.column_names = {"c"};
    // groups {0,1}: values (3,7) in each group -> equal means, b1 = 0
    const std::vector<double> vals{3, 7, 3, 7};
    const std::vector<double> d{0, 0, 1, 1};
    for (std::size_t i = 0; i < 4; ++i) mm.design(i, 0) = vals[i];
    const auto orth = orthogonalize(mm, d);
    CHECK(orth.b1[0] == Catch::Approx(0.0).margin(1e-12));
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(orth.design.design(i, 0) == Catch::Approx(vals[i] - 5.0));
}

TEST_CASE("orthogonalized columns have zero covariance with d") {
    const auto ds = data::synth_generate(fixtures::confounded(800, 5.0), 7);
    const auto enc = data::make_feature_encoder(ds);
    const auto mm = enc.encode(ds);
    const auto d = ds.group_a_mask();
    const auto orth = orthogonalize(mm, d);
    const double d_mean = mean(d);
    for (std::size_t j = 0; j < orth.design.design.cols(); ++j) {
        double cov = 0.0, col_mean = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) col_mean += orth.design.design(i, j);
        col_mean /= static_cast<double>(d.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            cov += (orth.design.design(i, j) - col_mean) * (d[i] - d_mean);
        cov /= static_cast<double>(d.size());
        CHECK(std::abs(cov) < 1e-10);
    }
}

TEST_CASE("orthogonalize rejects single-group data") {
    data::ModelMatrix mm;
    mm.design = Matrix(3, 1);
    mm.column_names = {"c"};
    CHECK_THROWS_AS(orthogonalize(mm, std::vector<double>{1, 1, 1}), DomainError);
}

// ------------------------------------------------------------------------ MO

TEST_CASE("MO pulls the group ratio toward 1 on the confounded fixture") {
    const auto ds = data::synth_generate(fixtures::confounded(4000, 6.0, 2.0), 8);
    const auto mb = fit_mb(glm_gaussian(), ds);
    const auto mo = fit_mo(glm_gaussian(), ds);
    const auto mask = ds.group_a_mask();
    const double dir_mb = group_mean_ratio(mb.predict(ds), mask);
    const double dir_mo = group_mean_ratio(mo.predict(ds), mask);
    CHECK(std::abs(dir_mo - 1.0) < std::abs(dir_mb - 1.0));
}

TEST_CASE("MO equals MU when features are already orthogonal to D") {
    // deterministic balanced design: every x value appears once per group
    std::vector<double> x;
    std::vector<std::string> g;
    std::vector<std::string> rows;
    data::Schema s;
    s.columns = {{"x1", data::FeatureKind::Numeric},
                 {"gender", data::FeatureKind::Categorical},
                 {"claim", data::FeatureKind::Numeric}};
    s.sensitive = "gender";
    s.target = "claim";
    std::vector<std::vector<std::string>> raw;
    for (int i = 0; i < 40; ++i) {
        const double xv = static_cast<double>(i % 20);
        raw.push_back({fairprice::fmt_double(xv), i < 20 ? "F" : "M",
                       fairprice::fmt_double(3.0 * xv + 7.0)});
    }
    const auto ds = data::detail::finalize_rows(s, raw, 0);
    const auto mo = fit_mo(glm_gaussian(), ds);
    const auto mu = fit_mu(glm_gaussian(), ds);
    const auto pm = mo.predict(ds);
    const auto pu = mu.predict(ds);
    for (std::size_t i = 0; i < pm.size(); ++i)
        CHECK(std::abs(pm[i] - pu[i]) < 1e-9);
}

TEST_CASE("MO betas serialize and reproduce identical predictions") {
    const auto ds = data::synth_generate(fixtures::confounded(600, 4.0), 9);
    const auto mo = fit_mo(glm_gaussian(), ds);
    const auto mo2 = FairModel::from_json(mo.to_json());
    CHECK(mo.predict(ds) == mo2.predict(ds));
}

TEST_CASE("MO prediction path is exactly residualize-then-predict") {
    const auto ds = data::synth_generate(fixtures::confounded(400, 4.0), 10);
    const auto mo = fit_mo(glm_gaussian(), ds);
    const auto flipped = flip_sensitive(ds);
    // the flipped row re-residualized by hand must match the pipeline output
    auto mm = mo.encoder.encode(flipped);
    mo.residualize(mm, flipped.group_a_mask());
    CHECK(mo.predict(flipped) == mo.engine.predict(mm));
}

// ----------------------------------------------------------------------- MDF

TEST_CASE("MDF is the proportion-weighted average of level predictions") {
    const auto mb = hand_mb(10.0, 0.0, 10.0, 0.4);  // mu(x,F)=10, mu(x,M)=20
    const auto ds = tiny_xd({0.0, 1.0, 2.0}, {"F", "M", "F"});
    const auto p = predict_mdf(mb, ds);
    for (double v : p) CHECK(v == Catch::Approx(16.0));  // 0.4*10 + 0.6*20

    auto mb_all_a = hand_mb(10.0, 0.0, 10.0, 1.0);
    for (double v : predict_mdf(mb_all_a, ds)) CHECK(v == Catch::Approx(10.0));

    auto mb_flat = hand_mb(7.0, 0.0, 0.0, 0.3);  // both levels give 7
    for (double v : predict_mdf(mb_flat, ds)) CHECK(v == Catch::Approx(7.0));
}

TEST_CASE("MDF output lies between the two level predictions") {
    const auto ds = data::synth_generate(fixtures::confounded(800, 6.0), 11);
    const auto mdf = fit_mdf(glm_gaussian(), ds);
    const auto p = mdf.predict(ds);
    const auto pa = mdf.predict_with_level(ds, true);
    const auto pb = mdf.predict_with_level(ds, false);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i] >= std::min(pa[i], pb[i]) - 1e-12);
        CHECK(p[i] <= std::max(pa[i], pb[i]) + 1e-12);
    }
}

TEST_CASE("MDF is exactly invariant to flipping D") {
    const auto ds = data::synth_generate(fixtures::confounded(500, 6.0), 12);
    const auto mdf = fit_mdf(glm_gaussian(), ds);
    CHECK(mdf.predict(ds) == mdf.predict(flip_sensitive(ds)));
}

// ----------------------------------------------------------------------- MBC

TEST_CASE("MBC hand case: transport across {10,20} -> {30,40}") {
    FairModel m = hand_mb(10.0, 0.0, 10.0, 0.5);
    m.kind = FairModelKind::MBC;
    m.bary_a = {10.0, 20.0};
    m.bary_b = {30.0, 40.0};
    // the F row predicts s = 10; F_A(10) -> first grid point; F_B^{-1} -> 30
    const auto ds = tiny_xd({0.0, 0.0}, {"F", "M"});
    const auto p = m.predict(ds);
    REQUIRE(p.size() == 2);
    CHECK(p[0] == Catch::Approx(20.0));  // 0.5*10 + 0.5*30
}

TEST_CASE("MBC identity transport leaves predictions unchanged") {
    FairModel m = hand_mb(10.0, 2.0, 0.0, 0.5);  // predictions independent of D
    m.kind = FairModelKind::MBC;
    m.bary_a = {8.0, 10.0, 12.0, 14.0};
    m.bary_b = m.bary_a;
    const auto ds = tiny_xd({0.0, 1.0, 2.0}, {"F", "M", "F"});
    const auto p = m.predict(ds);
    // s = 10 + 2x, in-sample values map to themselves
    CHECK(p[0] == Catch::Approx(10.0));
    CHECK(p[1] == Catch::Approx(12.0));
    CHECK(p[2] == Catch::Approx(14.0));
}

TEST_CASE("MBC preserves within-group prediction ranks") {
    const auto ds = data::synth_generate(fixtures::confounded(1500, 6.0), 13);
    const auto mbc = fit_mbc(glm_gaussian(), ds);
    const auto s = mbc.engine.predict(mbc.encoder.encode(ds));
    const auto p = mbc.predict(ds);
    const auto mask = ds.group_a_mask();
    for (int g = 0; g < 2; ++g) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < mask.size(); ++i)
            if ((mask[i] > 0.5) == (g == 0)) rows.push_back(i);
        for (std::size_t u = 0; u + 1 < rows.size(); ++u) {
            // strictly increasing s must not produce decreasing transformed values
            const auto i = rows[u], j = rows[u + 1];
            if (s[i] < s[j]) CHECK(p[i] <= p[j] + 1e-12);
            if (s[i] > s[j]) CHECK(p[i] >= p[j] - 1e-12);
        }
    }
}

TEST_CASE("MBC aligns the two group distributions (KS on fixture)") {
    const auto ds = data::synth_generate(fixtures::confounded(5000, 8.0, 2.0), 14);
    const auto mbc = fit_mbc(glm_gaussian(), ds);
    const auto p = mbc.predict(ds);
    const auto mask = ds.group_a_mask();
    std::vector<double> a, b;
    for (std::size_t i = 0; i < p.size(); ++i) (mask[i] > 0.5 ? a : b).push_back(p[i]);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // two-sample KS statistic
    double ks = 0.0;
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] <= b[ib]) ++ia; else ++ib;
        const double fa = static_cast<double>(ia) / static_cast<double>(a.size());
        const double fb = static_cast<double>(ib) / static_cast<double>(b.size());
        ks = std::max(ks, std::abs(fa - fb));
    }
    CHECK(ks < 0.05);
}

TEST_CASE("MBC group-symmetric maps give equal population means on symmetric fixtures") {
    FairModel m = hand_mb(10.0, 2.0, 0.0, 0.5);
    m.kind = FairModelKind::MBC;
    m.bary_a = {8.0, 10.0, 12.0, 14.0, 16.0};
    m.bary_b = m.bary_a;
    // the same x grid observed under both groups: the two group formulas must
    // produce equal population means
    const auto ds = tiny_xd({0.0, 1.0, 2.0, 3.0, 0.0, 1.0, 2.0, 3.0},
                            {"F", "F", "F", "F", "M", "M", "M", "M"});
    const auto p = m.predict(ds);
    const double mean_a = (p[0] + p[1] + p[2] + p[3]) / 4.0;
    const double mean_b = (p[4] + p[5] + p[6] + p[7]) / 4.0;
    CHECK(std::abs(mean_a - mean_b) < 1e-6);
}

// ----------------------------------------------------------------------- SCM

TEST_CASE("scm_weights returns a zero-objective vertex for an exact donor copy") {
    std::vector<double> x0{1.0, 2.0, 3.0};
    Matrix donors(3, 3);
    donors(0, 0) = 9;  donors(0, 1) = 9;  donors(0, 2) = 9;
    donors(1, 0) = 1;  donors(1, 1) = 2;  donors(1, 2) = 3;  // exact copy
    donors(2, 0) = 0;  donors(2, 1) = 0;  donors(2, 2) = 0;
    const std::vector<double> v{0.5, 0.25, 0.25};
    const auto sol = scm_weights(x0, donors, v);
    CHECK(sol.objective < 1e-8);
    CHECK(sol.weights[1] == Catch::Approx(1.0));
}

TEST_CASE("scm_weights solves the 1-D two-donor hand case") {
    std::vector<double> x0{5.0};
    Matrix donors(2, 1);
    donors(0, 0) = 4.0;
    donors(1, 0) = 6.0;
    const auto sol = scm_weights(x0, donors, {1.0});
    CHECK(std::abs(sol.weights[0] - 0.5) < 5e-5);
    CHECK(std::abs(sol.weights[1] - 0.5) < 5e-5);
    CHECK(sol.objective < 1e-4);
}

TEST_CASE("scm_weights always lands on the simplex") {
    Rng rng = make_rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 2 + rng() % 8;
        const std::size_t p = 1 + rng() % 5;
        Matrix donors(k, p);
        std::vector<double> x0(p);
        for (std::size_t j = 0; j < p; ++j) {
            x0[j] = data::sample::normal(rng, 0, 1);
            for (std::size_t i = 0; i < k; ++i) donors(i, j) = data::sample::normal(rng, 0, 1);
        }
        std::vector<double> v(p, 1.0 / static_cast<double>(p));
        const auto sol = scm_weights(x0, donors, v);
        double s = 0.0;
        for (double w : sol.weights) {
            CHECK(w >= 0.0);
            s += w;
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("scm_weights rejects an empty donor pool") {
    CHECK_THROWS_AS(scm_weights({1.0}, Matrix(0, 1), {1.0}), DomainError);
}

TEST_CASE("scm_adjust keeps Y' near Y0 when groups are exchangeable") {
    // deterministic Y in X and identical group feature laws
    auto cfg = fixtures::independent(1200, 0.0, 0.0);  // no noise, no tau
    const auto ds = data::synth_generate(cfg, 15);
    const auto enc = data::make_feature_encoder(ds);
    const std::size_t p = enc.width();
    const auto adj = scm_adjust(ds, enc, std::vector<double>(p, 1.0 / static_cast<double>(p)));
    const auto& y = ds.target();
    double dev = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dev += std::abs(adj.rows[i].y_prime - y[i]);
    dev /= static_cast<double>(y.size());
    CHECK(dev < 0.01 * mean(y));
}

TEST_CASE("scm_adjust shrinks the group gap of the adjusted target") {
    auto cfg = fixtures::independent(1500, 10.0, 0.0);  // tau = 10, exact counterfactuals
    const auto ds = data::synth_generate(cfg, 16);
    const auto enc = data::make_feature_encoder(ds);
    const std::size_t p = enc.width();
    const auto adj = scm_adjust(ds, enc, std::vector<double>(p, 1.0 / static_cast<double>(p)));
    const auto mask = ds.group_a_mask();
    const auto gap = [&](const std::vector<double>& y) {
        double sa = 0, sb = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (mask[i] > 0.5) { sa += y[i]; na += 1; } else { sb += y[i]; nb += 1; }
        }
        return sa / na - sb / nb;
    };
    const double raw_gap = gap(ds.target());
    const double adj_gap = gap(adj.adjusted_targets());
    CHECK(std::abs(adj_gap) <= 0.55 * std::abs(raw_gap));
}

TEST_CASE("scm_adjust exact arithmetic and donor-pool clamping") {
    auto cfg = fixtures::independent(60, 3.0);
    const auto ds = data::synth_generate(cfg, 17);
    const auto enc = data::make_feature_encoder(ds);
    const std::size_t p = enc.width();
    ScmParams params;
    params.donor_k = 100000;  // far beyond the pool size: must clamp, not throw
    const auto adj = scm_adjust(ds, enc, std::vector<double>(p, 1.0 / static_cast<double>(p)),
                                params);
    const auto& y = ds.target();
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(adj.rows[i].y_prime == 0.5 * (y[i] + adj.rows[i].y_counterfactual));
        double s = 0.0;
        for (const auto& [row, w] : adj.rows[i].weights) {
            CHECK(w >= 0.0);
            s += w;
        }
        CHECK(std::abs(s - 1.0) < 1e-9);  // sparse storage drops ~1e-12 dust
    }
}

// ---------------------------------------------------------------------- MSCM

TEST_CASE("MSCM deployed predictor ignores D") {
    const auto ds = data::synth_generate(fixtures::confounded(400, 6.0), 18);
    const auto mscm = fit_mscm(glm_gaussian(), ds);
    CHECK(mscm.predict(ds) == mscm.predict(flip_sensitive(ds)));
}

TEST_CASE("MSCM approaches MU on a tau = 0 fixture") {
    const auto ds = data::synth_generate(fixtures::independent(2000, 0.0, 1.0), 19);
    const auto mscm = fit_mscm(glm_gaussian(), ds);
    const auto mu = fit_mu(glm_gaussian(), ds);
    CHECK(rmse_between(mscm.predict(ds), mu.predict(ds)) < 0.02 * mean(ds.target()));
}

TEST_CASE("MSCM serialization round-trips predictions") {
    const auto ds = data::synth_generate(fixtures::independent(300, 4.0), 20);
    const auto mscm = fit_mscm(glm_gaussian(), ds);
    const auto mscm2 = FairModel::from_json(mscm.to_json());
    CHECK(mscm.predict(ds) == mscm2.predict(ds));
}

// ----------------------------------------------------------------------- MNN

TEST_CASE("MNN composite loss arithmetic on a single pair") {
    // heads forced to f_real = 1, f_cf = 0; y = 2; lambda = 1 -> L = 1 + 1 = 2
    model::MlpModel mlp;
    mlp.layer_sizes = {1};
    mlp.head_count = 2;
    mlp.weights = {0.0, 1.0, 0.0, 0.0};  // head0: w=0,b=1; head1: w=0,b=0
    Matrix x(1, 1);
    x(0, 0) = 0.5;
    MnnParams params;
    params.epochs = 1;
    params.step_size = 0.0;
    const auto history = fair::detail::train_mnn(mlp, x, x, {2.0}, 1.0, params);
    CHECK(history[0].total == Catch::Approx(2.0));
    CHECK(history[0].accuracy == Catch::Approx(1.0));
    CHECK(history[0].fairness == Catch::Approx(1.0));
}

TEST_CASE("MNN with lambda = 0 never updates the counterfactual head") {
    const auto ds = data::synth_generate(fixtures::confounded(300, 5.0), 21);
    MnnParams params;
    params.lambda = 0.0;
    params.epochs = 20;
    params.seed = 3;
    const auto fit = fit_mnn(ds, params);
    // rebuild the untouched initial network
    const auto enc = data::make_feature_encoder(ds);
    std::vector<int> layers{static_cast<int>(enc.width()) + 1};
    for (int h : params.hidden) layers.push_back(h);
    const auto init = model::mlp_init(layers, 2, model::OutputActivation::Identity, params.seed);
    const std::size_t head_w = static_cast<std::size_t>(layers.back() + 1);
    const std::size_t trunk_w = init.trunk_weight_count();
    // head 1 block (the counterfactual head) must be bit-identical to the init
    for (std::size_t k = trunk_w + head_w; k < trunk_w + 2 * head_w; ++k)
        CHECK(fit.model.mlp.weights[k] == init.weights[k]);
    // while the real head must have moved
    bool moved = false;
    for (std::size_t k = trunk_w; k < trunk_w + head_w; ++k)
        if (fit.model.mlp.weights[k] != init.weights[k]) moved = true;
    CHECK(moved);
}

TEST_CASE("MNN training reduces the composite loss") {
    const auto ds = data::synth_generate(fixtures::confounded(600, 5.0), 22);
    MnnParams params;
    params.lambda = 1.0;
    params.epochs = 40;
    params.seed = 4;
    const auto fit = fit_mnn(ds, params);
    CHECK(fit.history.back().total < fit.history.front().total);
}

TEST_CASE("MNN penalty crushes the counterfactual gap") {
    const auto ds = data::synth_generate(fixtures::confounded(800, 8.0, 1.5, 2.0), 23);
    MnnParams params;
    params.epochs = 60;
    params.seed = 5;
    params.lambda = 0.0;
    const auto base = fit_mnn(ds, params);
    params.lambda = 100.0;
    const auto tight = fit_mnn(ds, params);
    const double d0 = mnn_disparity(base.model, ds);
    const double d100 = mnn_disparity(tight.model, ds);
    CHECK(d100 < 0.10 * d0);
}

TEST_CASE("MNN deployed predictor is exactly invariant to flipping D") {
    const auto ds = data::synth_generate(fixtures::confounded(300, 5.0), 24);
    MnnParams params;
    params.epochs = 10;
    const auto fit = fit_mnn(ds, params);
    CHECK(fit.model.predict(ds) == fit.model.predict(flip_sensitive(ds)));
}

TEST_CASE("MNN rejects a negative lambda") {
    const auto ds = data::synth_generate(fixtures::independent(100, 0.0), 25);
    MnnParams params;
    params.lambda = -1.0;
    CHECK_THROWS_AS(fit_mnn(ds, params), DomainError);
}

TEST_CASE("MNN serialization round-trips predictions") {
    const auto ds = data::synth_generate(fixtures::confounded(200, 5.0), 26);
    MnnParams params;
    params.epochs = 5;
    const auto fit = fit_mnn(ds, params);
    const auto m2 = FairModel::from_json(fit.model.to_json());
    CHECK(fit.model.predict(ds) == m2.predict(ds));
}

// --------------------------------------------------------------- tune_lambda

TEST_CASE("tune_lambda on a singleton grid returns it") {
    const auto ds = data::synth_generate(fixtures::confounded(250, 5.0), 27);
    MnnParams params;
    params.epochs = 5;
    const auto tuning = tune_lambda(ds, {0.0}, 5, 1, params);
    CHECK(tuning.lambda_star == 0.0);
}

TEST_CASE("tune_lambda disparity is non-increasing along the grid") {
    const auto ds = data::synth_generate(fixtures::confounded(500, 8.0, 1.5, 2.0), 28);
    MnnParams params;
    params.epochs = 30;
    params.seed = 6;
    const auto tuning = tune_lambda(ds, {0.0, 1.0, 10.0, 100.0}, 5, 2, params);
    for (std::size_t i = 1; i < tuning.disparity.size(); ++i)
        CHECK(tuning.disparity[i] <= tuning.disparity[i - 1] * 1.05 + 1e-9);
}

TEST_CASE("tune_lambda is deterministic under a fixed seed") {
    const auto ds = data::synth_generate(fixtures::confounded(250, 5.0), 29);
    MnnParams params;
    params.epochs = 5;
    const auto a = tune_lambda(ds, {0.0, 1.0}, 5, 3, params);
    const auto b = tune_lambda(ds, {0.0, 1.0}, 5, 3, params);
    CHECK(a.lambda_star == b.lambda_star);
    CHECK(a.val_loss == b.val_loss);
    CHECK(a.disparity == b.disparity);
}
