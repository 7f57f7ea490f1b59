// Command-line front end: fit, cv, study (batch/downsample/cluster/summary),
// and simulate.  Exit codes: 0 success, 2 usage or validation error,
// 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hazfit/hazfit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "hazfit 0.1.0";
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

unsigned default_threads() {
    if (const char* env = std::getenv("HAZFIT_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return 1;
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path.string());
    out << text;
}

void write_manifest(const fs::path& out_dir, json manifest) {
    manifest["tool_version"] = kVersion;
    manifest["timestamp"] = iso_timestamp();
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

/// Parse {country}_{sex}_{cohort} from a filename stem; falls back to
/// treating the whole stem as the country.
hazfit::CohortDataset load_cohort_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path.string());
    std::string country = path.stem().string();
    hazfit::Sex sex = hazfit::Sex::total;
    int year = 0;
    const std::string stem = path.stem().string();
    const auto last = stem.rfind('_');
    const auto mid = last == std::string::npos ? std::string::npos
                                               : stem.rfind('_', last - 1);
    if (mid != std::string::npos && last != std::string::npos && mid < last) {
        try {
            sex = hazfit::sex_from_string(stem.substr(mid + 1, last - mid - 1));
            year = std::stoi(stem.substr(last + 1));
            country = stem.substr(0, mid);
        } catch (const std::exception&) {
            country = stem;
            sex = hazfit::Sex::total;
            year = 0;
        }
    }
    try {
        return hazfit::parse_cohort_csv(in, country, sex, year);
    } catch (const hazfit::CohortError& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

std::vector<hazfit::CohortDataset> load_cohort_dir(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw UsageError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    // sorted so results never depend on directory iteration order
    std::sort(files.begin(), files.end());
    std::vector<hazfit::CohortDataset> out;
    for (const auto& f : files) out.push_back(load_cohort_file(f));
    if (out.empty())
        throw UsageError("no .csv cohort files in " + dir.string());
    return out;
}

std::vector<hazfit::Model> parse_model_list(const std::string& spec) {
    std::vector<hazfit::Model> models;
    if (spec == "all") {
        models.assign(hazfit::kAllModels.begin(), hazfit::kAllModels.end());
        return models;
    }
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            models.push_back(hazfit::model_from_name(tok));
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    if (models.empty()) throw UsageError("no models given");
    return models;
}

void write_curves_csv(const fs::path& path, const hazfit::CohortDataset& d,
                      const std::vector<std::pair<hazfit::Model,
                                                  std::vector<double>>>& fits) {
    const auto rates = hazfit::central_death_rates(d);
    std::ostringstream out;
    out << "cohort,model,age,metric,value\n";
    const std::string label = d.label();
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        out << label << ",observed," << d.rows[i].age << ",central_rate,"
            << hazfit::format_double(rates.rows[i].rate) << '\n';
        out << label << ",observed," << d.rows[i].age << ",deaths,"
            << d.rows[i].deaths << '\n';
    }
    for (const auto& [m, nat] : fits) {
        for (const auto& r : d.rows) {
            const int z = d.z_of(r.age);
            out << label << ',' << hazfit::name(m) << ',' << r.age
                << ",hazard,"
                << hazfit::format_double(hazfit::hazard(m, nat, z)) << '\n';
            out << label << ',' << hazfit::name(m) << ',' << r.age
                << ",predicted_deaths,"
                << hazfit::format_double(
                       static_cast<double>(r.survivors) *
                       hazfit::death_prob(m, nat, z))
                << '\n';
        }
    }
    write_text(path, out.str());
}

// ---------------------------------------------------------------------------

int cmd_fit(const std::string& data, const std::string& model_spec,
            bool all_models, std::uint64_t seed, const std::string& out_dir,
            bool curves) {
    const auto d = load_cohort_file(data);
    const auto models =
        parse_model_list(all_models ? "all" : model_spec);
    fs::create_directories(out_dir);

    hazfit::FitConfig cfg;
    cfg.seed = seed;
    std::vector<hazfit::FitResult> fits;
    std::vector<std::pair<hazfit::Model, std::vector<double>>> curve_fits;
    bool any_failed = false;
    for (hazfit::Model m : models) {
        hazfit::FitConfig c = cfg;
        c.seed = hazfit::task_seed(seed, d.label(),
                                   static_cast<std::uint64_t>(m));
        const auto f = hazfit::fit(m, d, c);
        write_text(fs::path(out_dir) /
                       (std::string("fit_") + hazfit::name(m) + ".json"),
                   hazfit::fit_result_to_json(f).dump(2) + "\n");
        if (!f.success) {
            std::cerr << "fit failed for " << hazfit::name(m)
                      << ": no optimizer start reached a finite optimum\n";
            any_failed = true;
            continue;
        }
        curve_fits.emplace_back(m, f.theta_nat);
        fits.push_back(f);
    }
    if (fits.size() >= 2) {
        const auto cmp = hazfit::compare(fits, d.label(), d.initial_size());
        std::ostringstream cs;
        hazfit::write_comparison_csv(cs, cmp);
        write_text(fs::path(out_dir) / "comparison.csv", cs.str());
    }
    if (curves)
        write_curves_csv(fs::path(out_dir) / "curves.csv", d, curve_fits);

    json manifest;
    manifest["command"] = "fit";
    manifest["data"] = data;
    json mnames = json::array();
    for (auto m : models) mnames.push_back(hazfit::name(m));
    manifest["models"] = mnames;
    manifest["seed"] = seed;
    write_manifest(out_dir, manifest);
    if (any_failed) return kExitNumerical;
    return 0;
}

int cmd_cv(const std::string& data, int folds, std::uint64_t seed,
           const std::vector<std::string>& exclude,
           const std::string& out_dir) {
    if (folds < 2) throw UsageError("K must be >= 2");
    const auto d = load_cohort_file(data);
    std::vector<hazfit::Model> models;
    for (hazfit::Model m : hazfit::kAllModels) {
        bool skip = false;
        for (const auto& e : exclude)
            if (hazfit::model_from_name(e) == m) skip = true;
        if (!skip) models.push_back(m);
    }
    if (models.empty()) throw UsageError("all models excluded");
    fs::create_directories(out_dir);

    hazfit::FitConfig cfg;
    cfg.seed = seed;
    std::vector<hazfit::CVResult> results;
    for (hazfit::Model m : models) {
        try {
            results.push_back(
                hazfit::cross_validate(m, d, folds, seed, cfg));
        } catch (const hazfit::CVError& e) {
            throw NumericalError(std::string(hazfit::name(m)) + ": " +
                                 e.what());
        }
    }
    hazfit::assign_cv_ranks(results);
    std::ostringstream cs;
    hazfit::write_cv_csv(cs, results);
    write_text(fs::path(out_dir) / "cv.csv", cs.str());

    json manifest;
    manifest["command"] = "cv";
    manifest["data"] = data;
    manifest["folds"] = folds;
    manifest["seed"] = seed;
    manifest["exclude"] = exclude;
    write_manifest(out_dir, manifest);
    return 0;
}

int cmd_study_batch(const std::string& dir, const std::string& model_spec,
                    std::uint64_t seed, const std::string& out_dir,
                    unsigned threads) {
    const auto datasets = load_cohort_dir(dir);
    const auto models = parse_model_list(model_spec);
    fs::create_directories(out_dir);

    hazfit::FitConfig cfg;
    cfg.seed = seed;
    const auto batch = hazfit::batch_fit(datasets, models, cfg, threads);
    for (const auto& msg : batch.failures)
        std::cerr << "fit failure (continuing): " << msg << '\n';

    std::ostringstream ts;
    hazfit::write_study_csv(ts, batch.table);
    write_text(fs::path(out_dir) / "study_batch.csv", ts.str());
    for (const auto& cmp : batch.comparisons) {
        std::ostringstream cs;
        hazfit::write_comparison_csv(cs, cmp);
        write_text(fs::path(out_dir) / ("comparison_" + cmp.cohort + ".csv"),
                   cs.str());
    }
    if (!batch.comparisons.empty()) {
        std::ostringstream ss;
        hazfit::write_study_csv(
            ss, hazfit::good_bad_summary(batch.comparisons,
                                         hazfit::Grouping::all));
        write_text(fs::path(out_dir) / "summary_all.csv", ss.str());
    }

    json manifest;
    manifest["command"] = "study batch";
    manifest["dir"] = dir;
    manifest["models"] = model_spec;
    manifest["seed"] = seed;
    write_manifest(out_dir, manifest);
    return 0;
}

int cmd_study_downsample(const std::string& data,
                         const std::string& fractions_spec,
                         const std::string& model_spec, int replicates,
                         std::uint64_t seed, const std::string& out_dir,
                         unsigned threads) {
    const auto d = load_cohort_file(data);
    const auto models = parse_model_list(model_spec);
    std::vector<double> fractions;
    std::stringstream ss(fractions_spec);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) fractions.push_back(std::stod(tok));
    if (fractions.empty()) throw UsageError("no fractions given");
    fs::create_directories(out_dir);

    hazfit::FitConfig cfg;
    cfg.seed = seed;
    const auto table = hazfit::downsample_study(d, fractions, models, seed,
                                                replicates, cfg, threads);
    std::ostringstream ts;
    hazfit::write_study_csv(ts, table);
    write_text(fs::path(out_dir) / "study_downsample.csv", ts.str());

    json manifest;
    manifest["command"] = "study downsample";
    manifest["data"] = data;
    manifest["fractions"] = fractions;
    manifest["models"] = model_spec;
    manifest["replicates"] = replicates;
    manifest["seed"] = seed;
    write_manifest(out_dir, manifest);
    return 0;
}

int cmd_study_cluster(const std::string& dir, const std::string& model_spec,
                      std::uint64_t seed, const std::string& out_dir,
                      unsigned threads) {
    const auto datasets = load_cohort_dir(dir);
    const auto models = parse_model_list(model_spec);
    if (models.size() < 2) throw UsageError("clustering needs >= 2 models");
    fs::create_directories(out_dir);

    hazfit::FitConfig cfg;
    cfg.seed = seed;
    const auto batch = hazfit::batch_fit(datasets, models, cfg, threads);
    for (const auto& msg : batch.failures)
        std::cerr << "fit failure (continuing): " << msg << '\n';
    if (batch.comparisons.size() != datasets.size())
        throw NumericalError(
            "clustering requires a complete delta-AIC matrix; some cohorts "
            "had too few successful fits");

    // rows = models, columns = cohorts
    std::vector<std::vector<double>> matrix(
        models.size(), std::vector<double>(batch.comparisons.size(),
                                           std::numeric_limits<double>::quiet_NaN()));
    std::vector<std::string> names;
    for (auto m : models) names.push_back(hazfit::name(m));
    for (std::size_t c = 0; c < batch.comparisons.size(); ++c)
        for (const auto& e : batch.comparisons[c].entries) {
            const auto it = std::find(models.begin(), models.end(), e.model);
            matrix[static_cast<std::size_t>(it - models.begin())][c] =
                e.delta_aic;
        }
    hazfit::Dendrogram dend;
    try {
        dend = hazfit::cluster_models(matrix, names);
    } catch (const std::invalid_argument& e) {
        throw NumericalError(e.what());
    }
    write_text(fs::path(out_dir) / "dendrogram.json",
               hazfit::dendrogram_to_json(dend).dump(2) + "\n");
    write_text(fs::path(out_dir) / "dendrogram.newick",
               hazfit::to_newick(dend) + "\n");

    json manifest;
    manifest["command"] = "study cluster";
    manifest["dir"] = dir;
    manifest["models"] = model_spec;
    manifest["seed"] = seed;
    write_manifest(out_dir, manifest);
    return 0;
}

int cmd_study_summary(const std::string& dir, const std::string& model_spec,
                      std::uint64_t seed, const std::string& out_dir,
                      unsigned threads) {
    const auto datasets = load_cohort_dir(dir);
    const auto models = parse_model_list(model_spec);
    fs::create_directories(out_dir);

    hazfit::FitConfig cfg;
    cfg.seed = seed;
    const auto batch = hazfit::batch_fit(datasets, models, cfg, threads);
    for (const auto& msg : batch.failures)
        std::cerr << "fit failure (continuing): " << msg << '\n';
    if (batch.comparisons.empty())
        throw NumericalError("no cohort produced >= 2 successful fits");

    const struct {
        hazfit::Grouping g;
        const char* file;
    } groupings[] = {
        {hazfit::Grouping::all, "summary_all.csv"},
        {hazfit::Grouping::by_sex, "summary_by_sex.csv"},
        {hazfit::Grouping::by_country, "summary_by_country.csv"},
    };
    for (const auto& gr : groupings) {
        std::ostringstream ss;
        hazfit::write_study_csv(
            ss, hazfit::good_bad_summary(batch.comparisons, gr.g));
        write_text(fs::path(out_dir) / gr.file, ss.str());
    }

    json manifest;
    manifest["command"] = "study summary";
    manifest["dir"] = dir;
    manifest["models"] = model_spec;
    manifest["seed"] = seed;
    write_manifest(out_dir, manifest);
    return 0;
}

int cmd_simulate(const std::string& model_name, const std::string& params,
                 long long n0, std::uint64_t seed, int first_age,
                 int last_age, const std::string& out_file) {
    hazfit::Model m;
    try {
        m = hazfit::model_from_name(model_name);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    json jp;
    try {
        jp = json::parse(params);
    } catch (const json::exception& e) {
        throw UsageError(std::string("bad --params JSON: ") + e.what());
    }
    std::vector<double> nat;
    const auto& names = hazfit::param_names(m);
    if (jp.is_array()) {
        nat = jp.get<std::vector<double>>();
    } else if (jp.is_object()) {
        for (const auto& n : names) {
            if (!jp.contains(n))
                throw UsageError("missing parameter '" + n + "' for " +
                                 hazfit::name(m));
            nat.push_back(jp[n].get<double>());
        }
    } else {
        throw UsageError("--params must be a JSON array or object");
    }
    if (static_cast<int>(nat.size()) != hazfit::param_count(m))
        throw UsageError("expected " +
                         std::to_string(hazfit::param_count(m)) +
                         " parameters for " + hazfit::name(m));
    if (n0 <= 0) throw UsageError("--n0 must be positive");
    if (last_age < first_age) throw UsageError("age range is empty");

    hazfit::CohortDataset d;
    try {
        d = hazfit::simulate_cohort(m, nat, n0, first_age, last_age, seed);
    } catch (const std::domain_error& e) {
        throw UsageError(e.what());
    }
    if (out_file.empty() || out_file == "-") {
        hazfit::write_cohort_csv(std::cout, d);
    } else {
        std::ofstream out(out_file, std::ios::binary);
        if (!out) throw UsageError("cannot write " + out_file);
        hazfit::write_cohort_csv(out, d);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Old-age cohort mortality model fitting and comparison"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    const unsigned threads_default = default_threads();

    // fit
    std::string fit_data, fit_model, fit_out = ".";
    bool fit_all = false, fit_curves = false;
    std::uint64_t fit_seed = 0;
    auto* fit = app.add_subcommand("fit", "Fit models to one cohort");
    fit->add_option("--data", fit_data, "cohort CSV file")->required();
    fit->add_option("--model", fit_model, "model name (comma-separated list)");
    fit->add_flag("--all-models", fit_all, "fit all nine models");
    fit->add_option("--seed", fit_seed, "master seed");
    fit->add_option("--out", fit_out, "output directory");
    fit->add_flag("--curves", fit_curves, "also write plot-ready curves CSV");

    // cv
    std::string cv_data, cv_out = ".";
    int cv_folds = 5;
    std::uint64_t cv_seed = 0;
    std::vector<std::string> cv_exclude;
    auto* cv = app.add_subcommand("cv", "K-fold cross-validation");
    cv->add_option("--data", cv_data, "cohort CSV file")->required();
    cv->add_option("--folds", cv_folds, "number of folds (default 5)");
    cv->add_option("--seed", cv_seed, "master seed");
    cv->add_option("--exclude", cv_exclude, "model names to skip");
    cv->add_option("--out", cv_out, "output directory");

    // study
    auto* study = app.add_subcommand("study", "Multi-cohort studies");
    study->require_subcommand(1);

    std::string sb_dir, sb_models = "all", sb_out = ".";
    std::uint64_t sb_seed = 0;
    unsigned sb_threads = threads_default;
    auto* sbatch = study->add_subcommand("batch", "Fit a cohort directory");
    sbatch->add_option("--dir", sb_dir, "directory of cohort CSVs")
        ->required();
    sbatch->add_option("--models", sb_models, "'all' or comma-separated");
    sbatch->add_option("--seed", sb_seed, "master seed");
    sbatch->add_option("--out", sb_out, "output directory");
    sbatch->add_option("--threads", sb_threads, "worker threads");

    std::string sd_data, sd_fractions = "1.0,0.5,0.3,0.1",
                sd_models = "all", sd_out = ".";
    int sd_reps = 1;
    std::uint64_t sd_seed = 0;
    unsigned sd_threads = threads_default;
    auto* sdown = study->add_subcommand("downsample", "Thin and refit");
    sdown->add_option("--data", sd_data, "cohort CSV file")->required();
    sdown->add_option("--fractions", sd_fractions, "comma-separated in (0,1]");
    sdown->add_option("--models", sd_models, "'all' or comma-separated");
    sdown->add_option("--replicates", sd_reps, "replicates per fraction");
    sdown->add_option("--seed", sd_seed, "master seed");
    sdown->add_option("--out", sd_out, "output directory");
    sdown->add_option("--threads", sd_threads, "worker threads");

    std::string sc_dir, sc_models = "all", sc_out = ".";
    std::uint64_t sc_seed = 0;
    unsigned sc_threads = threads_default;
    auto* scluster =
        study->add_subcommand("cluster", "Cluster delta-AIC patterns");
    scluster->add_option("--dir", sc_dir, "directory of cohort CSVs")
        ->required();
    scluster->add_option("--models", sc_models, "'all' or comma-separated");
    scluster->add_option("--seed", sc_seed, "master seed");
    scluster->add_option("--out", sc_out, "output directory");
    scluster->add_option("--threads", sc_threads, "worker threads");

    std::string ss_dir, ss_models = "all", ss_out = ".";
    std::uint64_t ss_seed = 0;
    unsigned ss_threads = threads_default;
    auto* ssummary =
        study->add_subcommand("summary", "Good/bad support summaries");
    ssummary->add_option("--dir", ss_dir, "directory of cohort CSVs")
        ->required();
    ssummary->add_option("--models", ss_models, "'all' or comma-separated");
    ssummary->add_option("--seed", ss_seed, "master seed");
    ssummary->add_option("--out", ss_out, "output directory");
    ssummary->add_option("--threads", ss_threads, "worker threads");

    // simulate
    std::string sim_model, sim_params, sim_out;
    long long sim_n0 = 0;
    std::uint64_t sim_seed = 0;
    int sim_first = 80, sim_last = 104;
    auto* sim = app.add_subcommand("simulate", "Simulate a synthetic cohort");
    sim->add_option("--model", sim_model, "model name")->required();
    sim->add_option("--params", sim_params,
                    "natural parameters as JSON array or object")
        ->required();
    sim->add_option("--n0", sim_n0, "initial cohort size")->required();
    sim->add_option("--seed", sim_seed, "master seed");
    sim->add_option("--first-age", sim_first, "first age (default 80)");
    sim->add_option("--last-age", sim_last, "last age (default 104)");
    sim->add_option("--out", sim_out, "output CSV file ('-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help/--version
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (fit->parsed()) {
            if (!fit_all && fit_model.empty())
                throw UsageError("give --model or --all-models");
            return cmd_fit(fit_data, fit_model, fit_all, fit_seed, fit_out,
                           fit_curves);
        }
        if (cv->parsed())
            return cmd_cv(cv_data, cv_folds, cv_seed, cv_exclude, cv_out);
        if (sbatch->parsed())
            return cmd_study_batch(sb_dir, sb_models, sb_seed, sb_out,
                                   sb_threads);
        if (sdown->parsed())
            return cmd_study_downsample(sd_data, sd_fractions, sd_models,
                                        sd_reps, sd_seed, sd_out, sd_threads);
        if (scluster->parsed())
            return cmd_study_cluster(sc_dir, sc_models, sc_seed, sc_out,
                                     sc_threads);
        if (ssummary->parsed())
            return cmd_study_summary(ss_dir, ss_models, ss_seed, ss_out,
                                     ss_threads);
        if (sim->parsed())
            return cmd_simulate(sim_model, sim_params, sim_n0, sim_seed,
                                sim_first, sim_last, sim_out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const hazfit::CohortError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitUsage;
}
