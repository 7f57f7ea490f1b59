#pragma once

// Cohort death-count data: ingestion, validation, central death rates,
// lifeline reconstruction, fold splitting, and binomial thinning.

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hazfit/rng.hpp"

namespace hazfit {

enum class Sex { female, male, total };

inline const char* to_string(Sex s) {
    switch (s) {
        case Sex::female: return "f";
        case Sex::male: return "m";
        default: return "t";
    }
}

inline Sex sex_from_string(const std::string& s) {
    if (s == "f" || s == "female") return Sex::female;
    if (s == "m" || s == "male") return Sex::male;
    if (s == "t" || s == "total") return Sex::total;
    throw std::invalid_argument("unknown sex label: " + s);
}

struct CohortError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CohortRow {
    int age = 0;
    long long survivors = 0;  // N_z, alive at exact age
    long long deaths = 0;     // D_z, deaths in [age, age+1)
};

struct CohortDataset {
    std::string country;
    Sex sex = Sex::total;
    int cohort_year = 0;
    int age_offset = 79;  // model age z = age - age_offset, so 80 -> z = 1
    std::vector<CohortRow> rows;

    int z_of(int age) const { return age - age_offset; }
    int first_age() const { return rows.front().age; }
    int last_age() const { return rows.back().age; }
    long long initial_size() const { return rows.front().survivors; }

    std::string label() const {
        return country + "_" + to_string(sex) + "_" +
               std::to_string(cohort_year);
    }

    void validate() const {
        if (rows.empty()) throw CohortError("dataset has no rows");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (r.survivors < 0 || r.deaths < 0)
                throw CohortError("negative count at age " +
                                  std::to_string(r.age));
            if (r.deaths > r.survivors)
                throw CohortError("deaths exceed survivors at age " +
                                  std::to_string(r.age));
            if (i > 0) {
                int prev = rows[i - 1].age;
                if (r.age == prev)
                    throw CohortError("duplicate age " + std::to_string(r.age));
                if (r.age != prev + 1)
                    throw CohortError("age gap between " +
                                      std::to_string(prev) + " and " +
                                      std::to_string(r.age));
            }
        }
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline long long parse_count(const std::string& s, int line_no,
                             const char* what) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw CohortError("row " + std::to_string(line_no) + ": malformed " +
                          what + " '" + s + "'");
    }
}

}  // namespace detail

/// Parse `age,survivors,deaths` CSV.  Rows are sorted by age and the
/// resulting dataset is validated; errors carry the offending row number.
inline CohortDataset parse_cohort_csv(std::istream& in,
                                      std::string country = "unknown",
                                      Sex sex = Sex::total,
                                      int cohort_year = 0) {
    CohortDataset d;
    d.country = std::move(country);
    d.sex = sex;
    d.cohort_year = cohort_year;

    std::string line;
    int line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (!have_header) {
            if (fields.size() != 3 || fields[0] != "age" ||
                fields[1] != "survivors" || fields[2] != "deaths")
                throw CohortError(
                    "expected header 'age,survivors,deaths', got '" + line +
                    "'");
            have_header = true;
            continue;
        }
        if (fields.size() != 3)
            throw CohortError("row " + std::to_string(line_no) +
                              ": expected 3 fields, got " +
                              std::to_string(fields.size()));
        CohortRow r;
        r.age = static_cast<int>(
            detail::parse_count(fields[0], line_no, "age"));
        r.survivors = detail::parse_count(fields[1], line_no, "survivors");
        r.deaths = detail::parse_count(fields[2], line_no, "deaths");
        d.rows.push_back(r);
    }
    if (!have_header) throw CohortError("empty input, no header found");

    std::stable_sort(d.rows.begin(), d.rows.end(),
                     [](const CohortRow& a, const CohortRow& b) {
                         return a.age < b.age;
                     });
    d.validate();
    return d;
}

inline void write_cohort_csv(std::ostream& out, const CohortDataset& d) {
    out << "age,survivors,deaths\n";
    for (const auto& r : d.rows)
        out << r.age << ',' << r.survivors << ',' << r.deaths << '\n';
}

// ---------------------------------------------------------------------------
// Central death rates

struct CentralRates {
    struct Row {
        int age = 0;
        double rate = 0.0;  // M_z = D_z / (N_z - 0.5 D_z)
        bool undefined = false;  // N_z = 0 or denominator <= 0
        bool extreme = false;    // rate > 1
    };
    std::vector<Row> rows;
};

inline CentralRates central_death_rates(const CohortDataset& d) {
    CentralRates out;
    out.rows.reserve(d.rows.size());
    for (const auto& r : d.rows) {
        CentralRates::Row cr;
        cr.age = r.age;
        const double denom =
            static_cast<double>(r.survivors) - 0.5 * static_cast<double>(r.deaths);
        if (r.survivors == 0 || denom <= 0.0) {
            cr.undefined = true;
            cr.rate = 0.0;
        } else {
            cr.rate = static_cast<double>(r.deaths) / denom;
            cr.extreme = cr.rate > 1.0;
        }
        out.rows.push_back(cr);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lifelines

/// Individual-level view of a cohort.  Every cohort member either dies at a
/// recorded age or is censored: alive through `exit_age - 1` and absent from
/// the dataset at `exit_age`.
struct Lifelines {
    struct Individual {
        int exit_age = 0;  // age at death, or age of exit if censored
        bool died = false;
    };
    std::string country;
    Sex sex = Sex::total;
    int cohort_year = 0;
    int age_offset = 79;
    int first_age = 0;
    int last_age = 0;
    std::vector<Individual> individuals;

    long long censored_count() const {
        long long c = 0;
        for (const auto& i : individuals)
            if (!i.died) ++c;
        return c;
    }
};

/// Expand a cohort dataset into individual lifelines.  Requires a closed or
/// leaking cohort: N_{z+1} <= N_z - D_z.  Deficits become right-censoring.
inline Lifelines reconstruct_lifelines(const CohortDataset& d) {
    d.validate();
    Lifelines l;
    l.country = d.country;
    l.sex = d.sex;
    l.cohort_year = d.cohort_year;
    l.age_offset = d.age_offset;
    l.first_age = d.first_age();
    l.last_age = d.last_age();
    l.individuals.reserve(static_cast<std::size_t>(d.initial_size()));

    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        const auto& r = d.rows[i];
        for (long long k = 0; k < r.deaths; ++k)
            l.individuals.push_back({r.age, true});
        const long long remaining = r.survivors - r.deaths;
        const long long next =
            (i + 1 < d.rows.size()) ? d.rows[i + 1].survivors : 0;
        if (i + 1 < d.rows.size()) {
            if (next > remaining)
                throw CohortError("cohort gains unsupported between ages " +
                                  std::to_string(r.age) + " and " +
                                  std::to_string(r.age + 1));
            for (long long k = 0; k < remaining - next; ++k)
                l.individuals.push_back({r.age + 1, false});
        } else {
            // survivors past the last observed age
            for (long long k = 0; k < remaining; ++k)
                l.individuals.push_back({r.age + 1, false});
        }
    }
    return l;
}

/// Re-aggregate lifelines into (N_z, D_z) over the source age span.
inline CohortDataset aggregate_lifelines(const Lifelines& l) {
    CohortDataset d;
    d.country = l.country;
    d.sex = l.sex;
    d.cohort_year = l.cohort_year;
    d.age_offset = l.age_offset;
    for (int age = l.first_age; age <= l.last_age; ++age) {
        CohortRow r;
        r.age = age;
        for (const auto& ind : l.individuals) {
            const bool alive_at_age =
                ind.died ? ind.exit_age >= age : ind.exit_age > age;
            if (alive_at_age) ++r.survivors;
            if (ind.died && ind.exit_age == age) ++r.deaths;
        }
        d.rows.push_back(r);
    }
    d.validate();
    return d;
}

/// Shuffle individuals with a seeded stream and deal them into K folds whose
/// sizes differ by at most one, then re-aggregate each fold.
inline std::vector<CohortDataset> split_folds(const Lifelines& l, int K,
                                              std::uint64_t seed) {
    if (K < 2) throw std::invalid_argument("K must be >= 2");
    if (static_cast<std::size_t>(K) > l.individuals.size())
        throw std::invalid_argument("K exceeds the number of individuals");

    std::vector<std::size_t> order(l.individuals.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Stream rng = derive_stream(seed, 0xF01Du);
    rng.shuffle(order);

    std::vector<CohortDataset> folds;
    folds.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        Lifelines part;
        part.country = l.country;
        part.sex = l.sex;
        part.cohort_year = l.cohort_year;
        part.age_offset = l.age_offset;
        part.first_age = l.first_age;
        part.last_age = l.last_age;
        for (std::size_t j = static_cast<std::size_t>(k); j < order.size();
             j += static_cast<std::size_t>(K))
            part.individuals.push_back(l.individuals[order[j]]);
        folds.push_back(aggregate_lifelines(part));
    }
    return folds;
}

/// Merge lifelines from several folds back into one cohort (used for the
/// K-1 training folds in cross-validation).
inline CohortDataset merge_folds(const std::vector<CohortDataset>& folds,
                                 std::size_t skip_index) {
    Lifelines merged;
    bool first = true;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        if (i == skip_index) continue;
        Lifelines li = reconstruct_lifelines(folds[i]);
        if (first) {
            merged = std::move(li);
            first = false;
        } else {
            merged.individuals.insert(merged.individuals.end(),
                                      li.individuals.begin(),
                                      li.individuals.end());
        }
    }
    return aggregate_lifelines(merged);
}

/// Keep each individual independently with probability `fraction`
/// (Bernoulli thinning), then re-aggregate.
inline CohortDataset thin(const Lifelines& l, double fraction,
                          std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("fraction must be in (0, 1]");
    Lifelines kept;
    kept.country = l.country;
    kept.sex = l.sex;
    kept.cohort_year = l.cohort_year;
    kept.age_offset = l.age_offset;
    kept.first_age = l.first_age;
    kept.last_age = l.last_age;
    if (fraction == 1.0) {
        kept.individuals = l.individuals;
    } else {
        Stream rng = derive_stream(seed, 0x7417u);
        for (const auto& ind : l.individuals)
            if (rng.next_bernoulli(fraction)) kept.individuals.push_back(ind);
    }
    return aggregate_lifelines(kept);
}

}  // namespace hazfit
