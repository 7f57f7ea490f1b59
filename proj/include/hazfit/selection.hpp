#pragma once

// Information criteria, delta-AIC/BIC, ranks, and support categories.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hazfit/inference.hpp"
#include "hazfit/models.hpp"

namespace hazfit {

enum class Support { substantial, intermediate, none };

inline const char* to_string(Support s) {
    switch (s) {
        case Support::substantial: return "substantial";
        case Support::intermediate: return "intermediate";
        default: return "none";
    }
}

/// Burnham-Anderson rules of thumb: delta <= 2 substantial, delta > 10 none.
inline Support support_category(double delta) {
    if (delta < 0.0)
        throw std::invalid_argument("delta criterion must be >= 0");
    if (delta <= 2.0) return Support::substantial;
    if (delta > 10.0) return Support::none;
    return Support::intermediate;
}

struct ModelComparison {
    struct Entry {
        Model model = Model::gompertz;
        double loglik = 0.0;
        double aic = 0.0;
        double bic = 0.0;
        double sse = 0.0;
        double delta_aic = 0.0;
        double delta_bic = 0.0;
        int aic_rank = 0;
        int bic_rank = 0;
        int sse_rank = 0;
        Support support = Support::none;
    };
    std::string cohort;
    long long n = 0;  // cohort size used for BIC
    bool aic_tie = false;
    std::vector<Entry> entries;  // ordered by ascending AIC

    const Entry& best() const { return entries.front(); }
};

namespace detail {

template <typename Key>
void assign_ranks(std::vector<ModelComparison::Entry>& entries, Key key,
                  int ModelComparison::Entry::*rank_field) {
    std::vector<std::size_t> idx(entries.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (key(entries[a]) != key(entries[b]))
            return key(entries[a]) < key(entries[b]);
        return static_cast<int>(entries[a].model) <
               static_cast<int>(entries[b].model);
    });
    for (std::size_t r = 0; r < idx.size(); ++r)
        entries[idx[r]].*rank_field = static_cast<int>(r) + 1;
}

}  // namespace detail

/// Build the per-cohort comparison table from successful fits of >= 2
/// models.  Ties in AIC are broken by model order and flagged.
inline ModelComparison compare(const std::vector<FitResult>& fits,
                               const std::string& cohort_label,
                               long long n) {
    std::vector<const FitResult*> ok;
    for (const auto& f : fits)
        if (f.success) ok.push_back(&f);
    if (ok.size() < 2)
        throw std::invalid_argument(
            "need at least 2 successful fits to compare");

    ModelComparison cmp;
    cmp.cohort = cohort_label;
    cmp.n = n;
    for (const auto* f : ok) {
        ModelComparison::Entry e;
        e.model = f->model;
        e.loglik = f->loglik.total;
        e.aic = f->aic;
        e.bic = f->bic;
        e.sse = f->sse;
        cmp.entries.push_back(e);
    }
    double min_aic = cmp.entries.front().aic;
    double min_bic = cmp.entries.front().bic;
    for (const auto& e : cmp.entries) {
        min_aic = std::min(min_aic, e.aic);
        min_bic = std::min(min_bic, e.bic);
    }
    for (auto& e : cmp.entries) {
        e.delta_aic = e.aic - min_aic;
        e.delta_bic = e.bic - min_bic;
        e.support = support_category(e.delta_aic);
    }
    std::vector<double> aics;
    for (const auto& e : cmp.entries) aics.push_back(e.aic);
    std::sort(aics.begin(), aics.end());
    cmp.aic_tie =
        std::adjacent_find(aics.begin(), aics.end()) != aics.end();

    detail::assign_ranks(
        cmp.entries, [](const auto& e) { return e.aic; },
        &ModelComparison::Entry::aic_rank);
    detail::assign_ranks(
        cmp.entries, [](const auto& e) { return e.bic; },
        &ModelComparison::Entry::bic_rank);
    detail::assign_ranks(
        cmp.entries, [](const auto& e) { return e.sse; },
        &ModelComparison::Entry::sse_rank);

    std::sort(cmp.entries.begin(), cmp.entries.end(),
              [](const auto& a, const auto& b) {
                  return a.aic_rank < b.aic_rank;
              });
    return cmp;
}

}  // namespace hazfit
