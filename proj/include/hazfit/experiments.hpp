#pragma once

// Batch fitting, K-fold cross-validation, downsampling studies, delta-AIC
// clustering, good/bad support summaries, and synthetic-cohort simulation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hazfit/cohort.hpp"
#include "hazfit/inference.hpp"
#include "hazfit/models.hpp"
#include "hazfit/rng.hpp"
#include "hazfit/selection.hpp"

namespace hazfit {

// ---------------------------------------------------------------------------
// Long-format study output

struct StudyTable {
    struct Record {
        std::string cohort;
        std::string model;
        std::string metric;
        double value = 0.0;
    };
    std::vector<Record> records;

    void add(std::string cohort, std::string model, std::string metric,
             double value) {
        for (const auto& r : records)
            if (r.cohort == cohort && r.model == model && r.metric == metric)
                throw std::logic_error("duplicate study key: " + cohort + "/" +
                                       model + "/" + metric);
        records.push_back(
            {std::move(cohort), std::move(model), std::move(metric), value});
    }
};

/// Deterministic per-task seed derived from the master seed and a label.
inline std::uint64_t task_seed(std::uint64_t master, const std::string& label,
                               std::uint64_t extra = 0) {
    std::uint64_t s = master;
    splitmix64(s);
    for (char c : label) s ^= splitmix64(s) + static_cast<unsigned char>(c);
    s ^= splitmix64(s) + extra;
    splitmix64(s);
    return s;
}

namespace detail {

/// Index-parallel map; results land by index, so the outcome does not
/// depend on the worker count.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, const F& body) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t per = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t lo = t * per, hi = std::min(n, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Simulation

/// Sequential binomial simulation: D_z ~ Binomial(N_z, q_z),
/// N_{z+1} = N_z - D_z.
inline CohortDataset simulate_cohort(Model m, std::span<const double> nat,
                                     long long n0, int first_age,
                                     int last_age, std::uint64_t seed,
                                     const std::string& country = "simulated",
                                     Sex sex = Sex::total,
                                     int cohort_year = 0) {
    if (n0 <= 0) throw std::invalid_argument("initial cohort size must be > 0");
    if (!in_domain(m, nat))
        throw std::domain_error("simulation parameters out of domain");
    CohortDataset d;
    d.country = country;
    d.sex = sex;
    d.cohort_year = cohort_year;
    Stream rng = derive_stream(seed, 0x51Beu);
    long long n = n0;
    for (int age = first_age; age <= last_age; ++age) {
        const double q = death_prob(m, nat, age - d.age_offset);
        if (std::isnan(q))
            throw std::domain_error(
                "death probability evaluation failed during simulation");
        CohortRow r;
        r.age = age;
        r.survivors = n;
        r.deaths = rng.next_binomial(n, q);
        d.rows.push_back(r);
        n -= r.deaths;
    }
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// Batch fitting

struct BatchResult {
    StudyTable table;
    std::vector<ModelComparison> comparisons;
    std::vector<std::string> failures;  // "cohort/model: reason"
};

inline BatchResult batch_fit(const std::vector<CohortDataset>& datasets,
                             const std::vector<Model>& models,
                             const FitConfig& cfg, unsigned threads = 1) {
    if (datasets.empty() || models.empty())
        throw std::invalid_argument("batch_fit needs datasets and models");
    BatchResult out;

    struct Task {
        std::size_t cohort;
        Model model;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < datasets.size(); ++c)
        for (Model m : models) tasks.push_back({c, m});

    std::vector<FitResult> results(tasks.size());
    std::vector<std::string> errors(tasks.size());
    detail::parallel_for(tasks.size(), threads, [&](std::size_t i) {
        const auto& t = tasks[i];
        FitConfig c = cfg;
        c.seed = task_seed(cfg.seed, datasets[t.cohort].label(),
                           static_cast<std::uint64_t>(t.model));
        try {
            results[i] = fit(t.model, datasets[t.cohort], c);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    for (std::size_t c = 0; c < datasets.size(); ++c) {
        const std::string label = datasets[c].label();
        std::vector<FitResult> fits;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (tasks[i].cohort != c) continue;
            if (!errors[i].empty()) {
                out.failures.push_back(label + "/" + name(tasks[i].model) +
                                       ": " + errors[i]);
                out.table.add(label, name(tasks[i].model), "fit_failed", 1.0);
            } else if (!results[i].success) {
                out.failures.push_back(label + "/" + name(tasks[i].model) +
                                       ": all starts failed");
                out.table.add(label, name(tasks[i].model), "fit_failed", 1.0);
            } else {
                fits.push_back(results[i]);
            }
        }
        if (fits.size() < 2) continue;
        ModelComparison cmp = compare(fits, label, datasets[c].initial_size());
        for (const auto& e : cmp.entries) {
            const std::string mn = name(e.model);
            out.table.add(label, mn, "loglik", e.loglik);
            out.table.add(label, mn, "aic", e.aic);
            out.table.add(label, mn, "bic", e.bic);
            out.table.add(label, mn, "sse", e.sse);
            out.table.add(label, mn, "delta_aic", e.delta_aic);
            out.table.add(label, mn, "delta_bic", e.delta_bic);
            out.table.add(label, mn, "aic_rank", e.aic_rank);
            out.table.add(label, mn, "sse_rank", e.sse_rank);
        }
        out.comparisons.push_back(std::move(cmp));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CVResult {
    Model model = Model::gompertz;
    int k = 0;
    std::vector<double> fold_errors;  // mean per-individual held-out -ll
    double mean_error = 0.0;
    int rank = 0;  // assigned across models, 1 = best
};

struct CVError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fit on K-1 folds, score the held-out fold by its mean per-individual
/// negative log-likelihood (binomial constant included), average over folds.
inline CVResult cross_validate(Model m, const CohortDataset& d, int K,
                               std::uint64_t seed, const FitConfig& cfg) {
    const Lifelines lifelines = reconstruct_lifelines(d);
    const auto folds = split_folds(lifelines, K, seed);
    CVResult out;
    out.model = m;
    out.k = K;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        const CohortDataset training = merge_folds(folds, k);
        FitConfig c = cfg;
        c.seed = task_seed(cfg.seed, d.label(),
                           (static_cast<std::uint64_t>(m) << 8) + k);
        FitResult f;
        try {
            f = fit(m, training, c);
        } catch (const std::exception& e) {
            throw CVError("fold " + std::to_string(k) + ": " + e.what());
        }
        if (!f.success)
            throw CVError("fold " + std::to_string(k) +
                          ": all optimizer starts failed");
        const auto held = log_likelihood(m, f.theta_nat, folds[k], true);
        const double n_ind =
            static_cast<double>(folds[k].initial_size());
        out.fold_errors.push_back(n_ind > 0.0 ? -held.total / n_ind : 0.0);
    }
    double s = 0.0;
    for (double e : out.fold_errors) s += e;
    out.mean_error = s / static_cast<double>(out.fold_errors.size());
    return out;
}

/// Rank CV results across models by ascending mean error (ties by model
/// order).  Ranks form a permutation of 1..#models.
inline void assign_cv_ranks(std::vector<CVResult>& results) {
    std::vector<std::size_t> idx(results.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (results[a].mean_error != results[b].mean_error)
            return results[a].mean_error < results[b].mean_error;
        return static_cast<int>(results[a].model) <
               static_cast<int>(results[b].model);
    });
    for (std::size_t r = 0; r < idx.size(); ++r)
        results[idx[r]].rank = static_cast<int>(r) + 1;
}

// ---------------------------------------------------------------------------
// Good/bad support summaries

enum class Grouping { all, by_sex, by_country };

/// Fractions of cohorts with substantial (delta <= 2) and no (delta > 10)
/// support, per model and group.  Cohort labels follow
/// {country}_{sex}_{year}.
inline StudyTable good_bad_summary(
    const std::vector<ModelComparison>& comparisons, Grouping grouping) {
    if (comparisons.empty())
        throw std::invalid_argument("no comparisons to summarize");

    auto group_of = [&](const std::string& label) -> std::string {
        if (grouping == Grouping::all) return "all";
        const auto first = label.find('_');
        if (grouping == Grouping::by_country)
            return first == std::string::npos ? label
                                              : label.substr(0, first);
        const auto second = label.find('_', first + 1);
        if (first == std::string::npos) return "?";
        return label.substr(first + 1, second - first - 1);
    };

    struct Tally {
        int total = 0, substantial = 0, none = 0;
    };
    std::map<std::pair<std::string, std::string>, Tally> tallies;
    for (const auto& cmp : comparisons) {
        const std::string group = group_of(cmp.cohort);
        for (const auto& e : cmp.entries) {
            auto& t = tallies[{group, name(e.model)}];
            ++t.total;
            if (e.support == Support::substantial) ++t.substantial;
            if (e.support == Support::none) ++t.none;
        }
    }
    StudyTable out;
    for (const auto& [key, t] : tallies) {
        out.add(key.first, key.second, "frac_substantial",
                static_cast<double>(t.substantial) / t.total);
        out.add(key.first, key.second, "frac_no_support",
                static_cast<double>(t.none) / t.total);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Hierarchical clustering of delta-AIC patterns

struct Dendrogram {
    struct Merge {
        int left = 0;   // node id: leaves are 0..n-1, internal nodes n, n+1, ...
        int right = 0;
        double height = 0.0;
    };
    std::vector<std::string> leaves;
    std::vector<Merge> merges;
};

/// Agglomerative clustering: at each step merge the pair of clusters whose
/// mean delta-AIC vectors are closest in Euclidean distance (ties broken by
/// lowest node-id pair).
inline Dendrogram cluster_models(
    const std::vector<std::vector<double>>& delta_matrix,
    const std::vector<std::string>& model_names) {
    const std::size_t n = delta_matrix.size();
    if (n < 2 || model_names.size() != n)
        throw std::invalid_argument("need >= 2 models with names to cluster");
    const std::size_t cols = delta_matrix.front().size();
    for (const auto& row : delta_matrix) {
        if (row.size() != cols)
            throw std::invalid_argument("delta-AIC matrix is ragged");
        for (double v : row)
            if (!std::isfinite(v))
                throw std::invalid_argument("delta-AIC matrix has missing entries");
    }

    Dendrogram dend;
    dend.leaves = model_names;

    struct Cluster {
        int id;
        std::vector<std::size_t> members;  // leaf indices
    };
    std::vector<Cluster> active;
    for (std::size_t i = 0; i < n; ++i)
        active.push_back({static_cast<int>(i), {i}});
    int next_id = static_cast<int>(n);

    auto mean_vector = [&](const Cluster& c) {
        std::vector<double> mu(cols, 0.0);
        for (std::size_t leaf : c.members)
            for (std::size_t j = 0; j < cols; ++j)
                mu[j] += delta_matrix[leaf][j];
        for (double& v : mu) v /= static_cast<double>(c.members.size());
        return mu;
    };

    while (active.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < active.size(); ++i) {
            const auto mi = mean_vector(active[i]);
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                const auto mj = mean_vector(active[j]);
                double d2 = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    const double e = mi[c] - mj[c];
                    d2 += e * e;
                }
                const double dist = std::sqrt(d2);
                if (dist < best) {
                    best = dist;
                    bi = i;
                    bj = j;
                }
            }
        }
        dend.merges.push_back({active[bi].id, active[bj].id, best});
        Cluster merged;
        merged.id = next_id++;
        merged.members = active[bi].members;
        merged.members.insert(merged.members.end(),
                              active[bj].members.begin(),
                              active[bj].members.end());
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bi));
        active.push_back(std::move(merged));
    }
    return dend;
}

inline std::string to_newick(const Dendrogram& d) {
    const int n_leaves = static_cast<int>(d.leaves.size());
    std::vector<std::string> node_text(d.leaves.begin(), d.leaves.end());
    node_text.resize(d.leaves.size() + d.merges.size());
    char buf[64];
    for (std::size_t i = 0; i < d.merges.size(); ++i) {
        const auto& m = d.merges[i];
        std::snprintf(buf, sizeof(buf), "%.17g", m.height);
        node_text[static_cast<std::size_t>(n_leaves) + i] =
            "(" + node_text[static_cast<std::size_t>(m.left)] + "," +
            node_text[static_cast<std::size_t>(m.right)] + "):" + buf;
    }
    return node_text.back() + ";";
}

// ---------------------------------------------------------------------------
// Downsampling study

/// For each fraction x replicate: Bernoulli-thin the cohort, refit every
/// model, and record delta-AIC.  fraction = 1.0 reproduces the source
/// cohort exactly.
inline StudyTable downsample_study(const CohortDataset& d,
                                   const std::vector<double>& fractions,
                                   const std::vector<Model>& models,
                                   std::uint64_t seed, int replicates,
                                   const FitConfig& cfg,
                                   unsigned threads = 1) {
    if (replicates < 1)
        throw std::invalid_argument("replicates must be >= 1");
    for (double f : fractions)
        if (!(f > 0.0 && f <= 1.0))
            throw std::invalid_argument("fractions must lie in (0, 1]");

    const Lifelines lifelines = reconstruct_lifelines(d);
    StudyTable out;
    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        for (int rep = 0; rep < replicates; ++rep) {
            const std::uint64_t thin_seed = task_seed(
                seed, d.label(),
                (static_cast<std::uint64_t>(fi) << 20) +
                    static_cast<std::uint64_t>(rep));
            CohortDataset reduced = thin(lifelines, fractions[fi], thin_seed);
            char tag[64];
            std::snprintf(tag, sizeof(tag), ":f=%g:rep=%d", fractions[fi],
                          rep);
            reduced.country = d.country;  // label keeps the cohort identity
            FitConfig c = cfg;
            BatchResult batch = batch_fit({reduced}, models, c, threads);
            const std::string cohort_key = d.label() + tag;
            if (batch.comparisons.empty()) {
                for (Model m : models)
                    out.add(cohort_key, name(m), "fit_failed", 1.0);
                continue;
            }
            for (const auto& e : batch.comparisons.front().entries)
                out.add(cohort_key, name(e.model), "delta_aic", e.delta_aic);
        }
    }
    return out;
}

}  // namespace hazfit
