#pragma once

// JSON/CSV serialization for fit results, comparison tables, study tables,
// and dendrograms.  Floats are written with 17 significant digits so that
// reruns are byte-identical and round-trips are exact.

#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "hazfit/experiments.hpp"
#include "hazfit/inference.hpp"
#include "hazfit/models.hpp"
#include "hazfit/selection.hpp"

namespace hazfit {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline nlohmann::json fit_result_to_json(const FitResult& f) {
    nlohmann::json j;
    j["model"] = name(f.model);
    j["success"] = f.success;
    nlohmann::json params = nlohmann::json::object();
    const auto& names = param_names(f.model);
    for (std::size_t i = 0; i < f.theta_nat.size(); ++i)
        params[names[i]] = f.theta_nat[i];
    j["parameters"] = params;
    j["loglik"] = f.loglik.total;
    j["includes_constant"] = f.loglik.includes_constant;
    j["aic"] = f.aic;
    j["bic"] = f.bic;
    j["sse"] = f.sse;
    j["n_for_bic"] = f.n_for_bic;
    j["predicted_deaths"] = f.predicted;
    j["best_start"] = f.best_start;
    nlohmann::json starts = nlohmann::json::array();
    for (const auto& s : f.starts) {
        nlohmann::json js;
        js["start_theta"] = s.start_theta;
        js["converged"] = s.converged;
        js["final_ll"] = s.final_ll;
        js["iterations"] = s.iterations;
        starts.push_back(js);
    }
    j["starts"] = starts;
    return j;
}

inline void write_comparison_csv(std::ostream& out,
                                 const ModelComparison& cmp) {
    out << "model,loglik,sse,sse_rank,aic,aic_rank,delta_aic,"
           "bic,delta_bic,support\n";
    for (const auto& e : cmp.entries) {
        out << name(e.model) << ',' << format_double(e.loglik) << ','
            << format_double(e.sse) << ',' << e.sse_rank << ','
            << format_double(e.aic) << ',' << e.aic_rank << ','
            << format_double(e.delta_aic) << ',' << format_double(e.bic)
            << ',' << format_double(e.delta_bic) << ','
            << to_string(e.support) << '\n';
    }
}

inline void write_study_csv(std::ostream& out, const StudyTable& t) {
    out << "cohort,model,metric,value\n";
    for (const auto& r : t.records)
        out << r.cohort << ',' << r.model << ',' << r.metric << ','
            << format_double(r.value) << '\n';
}

inline void write_cv_csv(std::ostream& out,
                         const std::vector<CVResult>& results) {
    out << "model,k,mean_error,rank";
    int max_folds = 0;
    for (const auto& r : results)
        max_folds = std::max<int>(max_folds,
                                  static_cast<int>(r.fold_errors.size()));
    for (int k = 0; k < max_folds; ++k) out << ",fold" << k;
    out << '\n';
    for (const auto& r : results) {
        out << name(r.model) << ',' << r.k << ','
            << format_double(r.mean_error) << ',' << r.rank;
        for (double e : r.fold_errors) out << ',' << format_double(e);
        out << '\n';
    }
}

inline nlohmann::json dendrogram_to_json(const Dendrogram& d) {
    nlohmann::json j;
    j["leaves"] = d.leaves;
    nlohmann::json merges = nlohmann::json::array();
    for (const auto& m : d.merges) {
        nlohmann::json jm;
        jm["left"] = m.left;
        jm["right"] = m.right;
        jm["height"] = m.height;
        merges.push_back(jm);
    }
    j["merges"] = merges;
    j["newick"] = to_newick(d);
    return j;
}

}  // namespace hazfit
