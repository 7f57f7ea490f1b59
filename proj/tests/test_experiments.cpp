#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "hazfit/experiments.hpp"
#include "hazfit/io.hpp"

using namespace hazfit;

namespace {

// Independent reference agglomeration: rebuilds every cluster mean from the
// leaf rows at each step and scans the full pair list.
struct RefMerge {
    int left, right;
    double height;
};

std::vector<RefMerge> reference_cluster(
    const std::vector<std::vector<double>>& rows) {
    const int n = static_cast<int>(rows.size());
    struct C {
        int id;
        std::set<int> leaves;
    };
    std::vector<C> cs;
    for (int i = 0; i < n; ++i) cs.push_back({i, {i}});
    int next = n;
    std::vector<RefMerge> merges;
    while (cs.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < cs.size(); ++i)
            for (std::size_t j = i + 1; j < cs.size(); ++j) {
                double d2 = 0.0;
                for (std::size_t c = 0; c < rows[0].size(); ++c) {
                    double mi = 0.0, mj = 0.0;
                    for (int l : cs[i].leaves) mi += rows[static_cast<std::size_t>(l)][c];
                    for (int l : cs[j].leaves) mj += rows[static_cast<std::size_t>(l)][c];
                    mi /= static_cast<double>(cs[i].leaves.size());
                    mj /= static_cast<double>(cs[j].leaves.size());
                    d2 += (mi - mj) * (mi - mj);
                }
                if (std::sqrt(d2) < best) {
                    best = std::sqrt(d2);
                    bi = i;
                    bj = j;
                }
            }
        merges.push_back({cs[bi].id, cs[bj].id, best});
        C merged{next++, cs[bi].leaves};
        merged.leaves.insert(cs[bj].leaves.begin(), cs[bj].leaves.end());
        cs.erase(cs.begin() + static_cast<std::ptrdiff_t>(bj));
        cs.erase(cs.begin() + static_cast<std::ptrdiff_t>(bi));
        cs.push_back(merged);
    }
    return merges;
}

}  // namespace

TEST_CASE("simulated cohorts are valid and deterministic") {
    const std::vector<double> nat = {0.05, 0.11};
    auto d1 = simulate_cohort(Model::gompertz, nat, 10000, 80, 104, 42);
    auto d2 = simulate_cohort(Model::gompertz, nat, 10000, 80, 104, 42);
    REQUIRE(d1.rows.size() == 25);
    CHECK(d1.initial_size() == 10000);
    for (std::size_t i = 0; i < d1.rows.size(); ++i)
        CHECK(d1.rows[i].deaths == d2.rows[i].deaths);
    auto d3 = simulate_cohort(Model::gompertz, nat, 10000, 80, 104, 43);
    bool differs = false;
    for (std::size_t i = 0; i < d1.rows.size(); ++i)
        if (d1.rows[i].deaths != d3.rows[i].deaths) differs = true;
    CHECK(differs);
    CHECK_THROWS_AS(simulate_cohort(Model::gompertz, nat, 0, 80, 104, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        simulate_cohort(Model::gompertz, std::vector<double>{-1.0, 0.1},
                        10000, 80, 104, 1),
        std::domain_error);
}

TEST_CASE("study table rejects duplicate keys") {
    StudyTable t;
    t.add("c", "m", "x", 1.0);
    CHECK_THROWS_AS(t.add("c", "m", "x", 2.0), std::logic_error);
    t.add("c", "m", "y", 2.0);
    CHECK(t.records.size() == 2);
}

TEST_CASE("batch fit produces a comparison per cohort") {
    std::vector<CohortDataset> ds = {
        simulate_cohort(Model::gompertz, std::vector<double>{0.05, 0.11},
                        20000, 80, 104, 1, "aland", Sex::male, 1900),
        simulate_cohort(Model::gompertz, std::vector<double>{0.04, 0.12},
                        20000, 80, 104, 2, "bland", Sex::female, 1901),
    };
    const std::vector<Model> models = {Model::gompertz, Model::kannisto,
                                       Model::weibull};
    FitConfig cfg;
    cfg.seed = 5;
    auto batch = batch_fit(ds, models, cfg);
    CHECK(batch.failures.empty());
    REQUIRE(batch.comparisons.size() == 2);
    CHECK(batch.comparisons[0].cohort == "aland_m_1900");
    // 3 models x 8 metrics x 2 cohorts
    CHECK(batch.table.records.size() == 48);

    SECTION("independent of worker count") {
        auto batch4 = batch_fit(ds, models, cfg, 4);
        REQUIRE(batch4.table.records.size() == batch.table.records.size());
        for (std::size_t i = 0; i < batch.table.records.size(); ++i) {
            CHECK(batch4.table.records[i].cohort ==
                  batch.table.records[i].cohort);
            CHECK(batch4.table.records[i].value ==
                  batch.table.records[i].value);
        }
    }
}

TEST_CASE("cross-validation ranks are a permutation") {
    auto d = simulate_cohort(Model::gompertz, std::vector<double>{0.05, 0.11},
                             30000, 80, 104, 7, "cland", Sex::total, 1890);
    FitConfig cfg;
    cfg.seed = 3;
    std::vector<CVResult> results;
    for (Model m : {Model::gompertz, Model::kannisto, Model::weibull})
        results.push_back(cross_validate(m, d, 5, 13, cfg));
    assign_cv_ranks(results);
    std::set<int> ranks;
    for (const auto& r : results) {
        CHECK(r.k == 5);
        CHECK(r.fold_errors.size() == 5);
        for (double e : r.fold_errors) CHECK(std::isfinite(e));
        ranks.insert(r.rank);
    }
    CHECK(ranks == std::set<int>{1, 2, 3});
    // the generating family should beat weibull out of sample
    double g_err = 0, w_err = 0;
    for (const auto& r : results) {
        if (r.model == Model::gompertz) g_err = r.mean_error;
        if (r.model == Model::weibull) w_err = r.mean_error;
    }
    CHECK(g_err < w_err);
}

TEST_CASE("good/bad summary fractions") {
    ModelComparison a;
    a.cohort = "x_m_1900";
    a.entries = {{Model::gompertz, 0, 0, 0, 0, 0.0, 0, 1, 1, 1,
                  Support::substantial},
                 {Model::weibull, 0, 0, 0, 0, 50.0, 0, 2, 2, 2,
                  Support::none}};
    ModelComparison b = a;
    b.cohort = "x_f_1900";
    b.entries[0].support = Support::intermediate;
    b.entries[0].delta_aic = 5.0;

    auto all = good_bad_summary({a, b}, Grouping::all);
    double frac_sub = -1, frac_none = -1;
    for (const auto& r : all.records) {
        if (r.model == "gompertz" && r.metric == "frac_substantial")
            frac_sub = r.value;
        if (r.model == "weibull" && r.metric == "frac_no_support")
            frac_none = r.value;
    }
    CHECK(frac_sub == 0.5);
    CHECK(frac_none == 1.0);

    auto by_sex = good_bad_summary({a, b}, Grouping::by_sex);
    std::set<std::string> groups;
    for (const auto& r : by_sex.records) groups.insert(r.cohort);
    CHECK(groups == std::set<std::string>{"m", "f"});
    auto by_country = good_bad_summary({a, b}, Grouping::by_country);
    groups.clear();
    for (const auto& r : by_country.records) groups.insert(r.cohort);
    CHECK(groups == std::set<std::string>{"x"});
}

TEST_CASE("clustering matches the reference agglomeration") {
    Stream rng(2026);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = 3 + rng.next_below(4);  // 3..6 models
        const std::size_t cols = 2 + rng.next_below(5);
        std::vector<std::vector<double>> rows(n, std::vector<double>(cols));
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) {
            names.push_back("m" + std::to_string(i));
            for (auto& v : rows[i]) v = rng.next_double(0.0, 100.0);
        }
        auto dend = cluster_models(rows, names);
        auto ref = reference_cluster(rows);
        REQUIRE(dend.merges.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(dend.merges[i].left == ref[i].left);
            CHECK(dend.merges[i].right == ref[i].right);
            CHECK(dend.merges[i].height ==
                  Catch::Approx(ref[i].height).epsilon(1e-12));
        }
    }
}

TEST_CASE("identical rows merge at height zero and newick lists all leaves") {
    std::vector<std::vector<double>> rows = {
        {1.0, 2.0}, {1.0, 2.0}, {50.0, 60.0}};
    auto dend = cluster_models(rows, {"a", "b", "c"});
    REQUIRE(dend.merges.size() == 2);
    CHECK(dend.merges[0].left == 0);
    CHECK(dend.merges[0].right == 1);
    CHECK(dend.merges[0].height == 0.0);
    const std::string newick = to_newick(dend);
    for (const char* leaf : {"a", "b", "c"})
        CHECK(newick.find(leaf) != std::string::npos);
    CHECK(newick.back() == ';');
    CHECK(newick.find(":0") != std::string::npos);

    auto j = dendrogram_to_json(dend);
    CHECK(j["leaves"].size() == 3);
    CHECK(j["merges"].size() == 2);
    CHECK(j["newick"] == newick);

    CHECK_THROWS_AS(cluster_models({{1.0}}, {"a"}), std::invalid_argument);
    CHECK_THROWS_AS(cluster_models({{1.0}, {1.0, 2.0}}, {"a", "b"}),
                    std::invalid_argument);
}

TEST_CASE("downsample study shape and identity at fraction 1") {
    auto d = simulate_cohort(Model::gompertz, std::vector<double>{0.05, 0.11},
                             20000, 80, 104, 77, "dland", Sex::male, 1880);
    const std::vector<Model> models = {Model::gompertz, Model::kannisto};
    FitConfig cfg;
    cfg.seed = 9;
    auto table = downsample_study(d, {1.0, 0.5}, models, 31, 2, cfg);
    // fractions x replicates x models
    CHECK(table.records.size() == 2 * 2 * 2);

    // fraction 1.0 replicates are identical to fitting the source cohort
    auto batch = batch_fit({d}, models, cfg);
    REQUIRE(batch.comparisons.size() == 1);
    for (const auto& e : batch.comparisons[0].entries) {
        for (const auto& r : table.records) {
            if (r.model == name(e.model) &&
                r.cohort.find(":f=1:") != std::string::npos)
                CHECK(r.value == e.delta_aic);
        }
    }
    CHECK_THROWS_AS(downsample_study(d, {0.0}, models, 1, 1, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(downsample_study(d, {0.5}, models, 1, 0, cfg),
                    std::invalid_argument);
}
