#pragma once

// Material records: manifest ingestion, filtering, deduplication,
// descriptor computation, standardization and train/test splitting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "albench/elements.hpp"
#include "albench/error.hpp"
#include "albench/formula.hpp"
#include "albench/matrix.hpp"
#include "albench/random.hpp"

namespace albench {

inline constexpr std::size_t kNumFeatures = 17;

enum class Source { MP, OQMD };

inline std::string to_string(Source s) { return s == Source::MP ? "MP" : "OQMD"; }

inline Source parse_source(std::string_view s)
{
    if (s == "MP")
        return Source::MP;
    if (s == "OQMD")
        return Source::OQMD;
    throw ValidationError("unknown source '" + std::string(s) + "' (expected MP or OQMD)");
}

/// One database entry. Numeric fields absent from the manifest are NaN
/// unless they have a documented default.
struct MaterialRecord {
    static constexpr double missing = std::numeric_limits<double>::quiet_NaN();

    std::string id;
    Source source = Source::MP;
    std::string formula;
    int n_atoms = 0;
    double formation_energy_per_atom = missing; // eV/atom, regression target
    double band_gap = missing;                  // eV
    double density = missing;                   // g/cm^3
    double volume_per_atom = missing;           // A^3
    double energy_above_hull = 0.0;             // eV/atom
    bool is_stable = false;
    double magnetization_per_atom = 0.0;        // mu_B/atom
    int spacegroup_number = 0;
    double energy_per_atom = missing;           // eV/atom
};

struct Manifest {
    std::string system;
    std::vector<MaterialRecord> records;
};

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

/// Numbers may be given as JSON numbers, null, or the strings "nan", "inf", "-inf".
inline double json_real(const nlohmann::json& v)
{
    if (v.is_null())
        return std::numeric_limits<double>::quiet_NaN();
    if (v.is_number())
        return v.get<double>();
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        if (s == "nan")
            return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf" || s == "+inf" || s == "infinity")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf" || s == "-infinity")
            return -std::numeric_limits<double>::infinity();
    }
    throw ValidationError("expected a number, got " + v.dump());
}

inline nlohmann::json real_to_json(double x)
{
    if (std::isnan(x))
        return nullptr;
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    return x;
}

} // namespace detail

inline MaterialRecord record_from_json(const nlohmann::json& j)
{
    MaterialRecord r;
    r.id = j.at("id").get<std::string>();
    r.source = parse_source(j.at("source").get<std::string>());
    r.formula = j.at("formula").get<std::string>();
    r.n_atoms = j.at("n_atoms").get<int>();
    auto real = [&](const char* key, double fallback) {
        return j.contains(key) ? detail::json_real(j[key]) : fallback;
    };
    r.formation_energy_per_atom = real("formation_energy_per_atom", MaterialRecord::missing);
    r.band_gap = real("band_gap", MaterialRecord::missing);
    r.density = real("density", MaterialRecord::missing);
    r.volume_per_atom = real("volume_per_atom", MaterialRecord::missing);
    r.energy_above_hull = real("energy_above_hull", 0.0);
    r.magnetization_per_atom = real("magnetization_per_atom", 0.0);
    r.energy_per_atom = real("energy_per_atom", MaterialRecord::missing);
    r.is_stable = j.contains("is_stable") && !j["is_stable"].is_null() ? j["is_stable"].get<bool>() : false;
    r.spacegroup_number = j.contains("spacegroup_number") && !j["spacegroup_number"].is_null()
                              ? j["spacegroup_number"].get<int>()
                              : 0;
    return r;
}

inline nlohmann::json record_to_json(const MaterialRecord& r)
{
    return {
        {"id", r.id},
        {"source", to_string(r.source)},
        {"formula", r.formula},
        {"n_atoms", r.n_atoms},
        {"formation_energy_per_atom", detail::real_to_json(r.formation_energy_per_atom)},
        {"band_gap", detail::real_to_json(r.band_gap)},
        {"density", detail::real_to_json(r.density)},
        {"volume_per_atom", detail::real_to_json(r.volume_per_atom)},
        {"energy_above_hull", detail::real_to_json(r.energy_above_hull)},
        {"is_stable", r.is_stable},
        {"magnetization_per_atom", detail::real_to_json(r.magnetization_per_atom)},
        {"spacegroup_number", r.spacegroup_number},
        {"energy_per_atom", detail::real_to_json(r.energy_per_atom)},
    };
}

/// Parse manifest text. Errors carry the line (syntax) or record index (content).
inline Manifest parse_manifest(const std::string& text, const std::string& origin = "<manifest>")
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError(origin + ":" + std::to_string(detail::line_of_offset(text, ex.byte)) +
                         ": malformed JSON: " + ex.what());
    }
    if (!doc.is_object() || !doc.contains("records") || !doc["records"].is_array())
        throw ParseError(origin + ": expected an object with a \"records\" array");

    Manifest m;
    m.system = doc.value("system", std::string{});
    const auto& recs = doc["records"];
    m.records.reserve(recs.size());
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        try {
            m.records.push_back(record_from_json(recs[i]));
        } catch (const std::exception& ex) {
            throw ParseError(origin + ": record " + std::to_string(i) + ": " + ex.what());
        }
        if (!seen.insert(m.records.back().id).second)
            throw ValidationError(origin + ": record " + std::to_string(i) + ": duplicate id '" +
                                  m.records.back().id + "'");
    }
    return m;
}

inline Manifest load_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open manifest " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), path.string());
}

inline nlohmann::json manifest_to_json(const Manifest& m)
{
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : m.records)
        recs.push_back(record_to_json(r));
    return {{"system", m.system}, {"records", std::move(recs)}};
}

/// Keep records with 2 <= n_atoms <= 50 and finite formation energy and band gap.
inline std::vector<MaterialRecord> filter_records(std::span<const MaterialRecord> records)
{
    std::vector<MaterialRecord> out;
    for (const auto& r : records) {
        if (r.n_atoms < 2 || r.n_atoms > 50)
            continue;
        if (!std::isfinite(r.formation_energy_per_atom) || !std::isfinite(r.band_gap))
            continue;
        out.push_back(r);
    }
    return out;
}

/// Greedy earlier-wins deduplication: a record is dropped when a retained
/// record with the same reduced formula lies within `energy_tol` (eV/atom)
/// in formation energy.
inline std::vector<MaterialRecord> deduplicate(std::span<const MaterialRecord> records, double energy_tol = 0.001)
{
    if (!(energy_tol > 0.0))
        throw ValidationError("deduplicate: energy_tol must be positive");
    std::map<std::string, std::vector<double>> kept_energies;
    std::vector<MaterialRecord> out;
    for (const auto& r : records) {
        std::string key;
        try {
            key = reduced_formula(r.formula);
        } catch (const ValidationError& ex) {
            throw ValidationError("record '" + r.id + "': " + ex.what());
        }
        auto& energies = kept_energies[key];
        const bool dup = std::any_of(energies.begin(), energies.end(), [&](double e) {
            return std::abs(e - r.formation_energy_per_atom) < energy_tol;
        });
        if (dup)
            continue;
        energies.push_back(r.formation_energy_per_atom);
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Descriptors

struct FeatureSchema {
    std::array<std::string, kNumFeatures> names;
    std::array<bool, kNumFeatures> compositional{};
    bool leakage_guard = false;

    /// Eight composition statistics followed by nine record properties.
    /// With the leakage guard the last slot (energy_per_atom) becomes the
    /// composition-weighted mean covalent radius.
    static FeatureSchema standard(bool leakage_guard = false)
    {
        FeatureSchema s;
        s.names = {"mean_atomic_number", "std_atomic_number", "mean_atomic_mass",
                   "mean_electronegativity", "min_electronegativity", "max_electronegativity",
                   "electronegativity_range", "n_distinct_elements",
                   "band_gap", "density", "volume_per_atom", "n_atoms", "energy_above_hull",
                   "is_stable", "magnetization_per_atom", "spacegroup_number",
                   leakage_guard ? "mean_covalent_radius" : "energy_per_atom"};
        for (std::size_t i = 0; i < 8; ++i)
            s.compositional[i] = true;
        s.leakage_guard = leakage_guard;
        return s;
    }

    std::size_t count_compositional() const
    {
        return static_cast<std::size_t>(std::count(compositional.begin(), compositional.end(), true));
    }
};

struct FeatureVector {
    std::array<double, kNumFeatures> values{};
    bool standardized = false;
};

inline FeatureVector featurize(const MaterialRecord& record, const FeatureSchema& schema,
                               const ElementTable& elements = ElementTable::builtin())
{
    const auto fail = [&](const std::string& what) -> ValidationError {
        return ValidationError("record '" + record.id + "': " + what);
    };

    Composition comp;
    try {
        comp = parse_formula(record.formula);
    } catch (const ValidationError& ex) {
        throw fail(ex.what());
    }

    double total = 0.0;
    for (const auto& [el, n] : comp)
        total += n;

    double mean_z = 0.0, mean_mass = 0.0, mean_en = 0.0, mean_radius = 0.0;
    double min_en = std::numeric_limits<double>::infinity();
    double max_en = -std::numeric_limits<double>::infinity();
    for (const auto& [el, n] : comp) {
        const ElementData* e = elements.find(el);
        if (!e)
            throw fail("unknown element symbol '" + el + "'");
        if (!e->electronegativity)
            throw fail("element '" + el + "' has no electronegativity in the element table");
        if (schema.leakage_guard && !e->covalent_radius)
            throw fail("element '" + el + "' has no covalent radius in the element table");
        const double f = n / total;
        mean_z += f * e->atomic_number;
        mean_mass += f * e->atomic_mass;
        mean_en += f * *e->electronegativity;
        if (schema.leakage_guard)
            mean_radius += f * *e->covalent_radius;
        min_en = std::min(min_en, *e->electronegativity);
        max_en = std::max(max_en, *e->electronegativity);
    }
    double var_z = 0.0;
    for (const auto& [el, n] : comp) {
        const double d = elements.at(el).atomic_number - mean_z;
        var_z += (n / total) * d * d;
    }

    FeatureVector fv;
    fv.values = {mean_z,
                 std::sqrt(var_z),
                 mean_mass,
                 mean_en,
                 min_en,
                 max_en,
                 max_en - min_en,
                 static_cast<double>(comp.size()),
                 record.band_gap,
                 record.density,
                 record.volume_per_atom,
                 static_cast<double>(record.n_atoms),
                 record.energy_above_hull,
                 record.is_stable ? 1.0 : 0.0,
                 record.magnetization_per_atom,
                 static_cast<double>(record.spacegroup_number),
                 schema.leakage_guard ? mean_radius : record.energy_per_atom};
    for (std::size_t i = 0; i < kNumFeatures; ++i)
        if (!std::isfinite(fv.values[i]))
            throw fail("feature '" + schema.names[i] + "' is missing or non-finite");
    return fv;
}

/// Features (unstandardized) and formation-energy targets for a record list.
struct Dataset {
    Matrix features;
    std::vector<double> targets;
    std::vector<std::string> ids;

    std::size_t size() const noexcept { return targets.size(); }
};

inline Dataset build_dataset(std::span<const MaterialRecord> records, const FeatureSchema& schema,
                             const ElementTable& elements = ElementTable::builtin())
{
    Dataset d;
    d.features = Matrix(0, kNumFeatures);
    for (const auto& r : records) {
        const FeatureVector fv = featurize(r, schema, elements);
        d.features.append_row(fv.values);
        d.targets.push_back(r.formation_energy_per_atom);
        d.ids.push_back(r.id);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Standardization

struct StandardizationParams {
    static constexpr double constant_threshold = 1e-12;

    std::vector<double> means;
    std::vector<double> std_devs; // population standard deviation

    std::size_t dims() const noexcept { return means.size(); }
    bool is_constant(std::size_t col) const noexcept { return std_devs[col] < constant_threshold; }

    friend bool operator==(const StandardizationParams&, const StandardizationParams&) = default;
};

inline StandardizationParams fit_standardization(const Matrix& features)
{
    const std::size_t n = features.rows();
    if (n < 2)
        throw InsufficientDataError("fit_standardization: need at least 2 rows, got " + std::to_string(n));
    const std::size_t d = features.cols();
    StandardizationParams p;
    p.means.assign(d, 0.0);
    p.std_devs.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c)
            p.means[c] += features(i, c);
    for (auto& m : p.means)
        m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) {
            const double dev = features(i, c) - p.means[c];
            p.std_devs[c] += dev * dev;
        }
    for (auto& s : p.std_devs)
        s = std::sqrt(s / static_cast<double>(n));
    return p;
}

inline void apply_standardization_inplace(std::span<double> row, const StandardizationParams& params)
{
    if (row.size() != params.dims())
        throw ValidationError("apply_standardization: expected " + std::to_string(params.dims()) +
                              " columns, got " + std::to_string(row.size()));
    for (std::size_t c = 0; c < row.size(); ++c)
        row[c] = params.is_constant(c) ? 0.0 : (row[c] - params.means[c]) / params.std_devs[c];
}

inline Matrix apply_standardization(const Matrix& features, const StandardizationParams& params)
{
    if (features.cols() != params.dims())
        throw ValidationError("apply_standardization: expected " + std::to_string(params.dims()) +
                              " columns, got " + std::to_string(features.cols()));
    Matrix out = features;
    for (std::size_t i = 0; i < out.rows(); ++i)
        apply_standardization_inplace(out.row(i), params);
    return out;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitDataset {
    std::vector<std::size_t> pool_indices; // ascending
    std::vector<std::size_t> test_indices; // ascending
    std::uint64_t seed = 0;
};

/// Seeded Fisher-Yates shuffle of 0..n-1; the last round((1-ratio)n)
/// positions become the test set.
inline SplitDataset split(std::size_t n_records, double ratio, std::uint64_t seed)
{
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ValidationError("split: ratio must lie in (0, 1)");
    if (n_records < 5)
        throw InsufficientDataError("split: need at least 5 records, got " + std::to_string(n_records));
    const auto n_test = static_cast<std::size_t>(std::llround((1.0 - ratio) * static_cast<double>(n_records)));
    if (n_test == 0 || n_test >= n_records)
        throw InsufficientDataError("split: ratio leaves an empty pool or test set");

    std::vector<std::size_t> order(n_records);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x5B117));
    rng.shuffle(order);

    SplitDataset s;
    s.seed = seed;
    s.pool_indices.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
    s.test_indices.assign(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(s.pool_indices.begin(), s.pool_indices.end());
    std::sort(s.test_indices.begin(), s.test_indices.end());
    return s;
}

} // namespace albench
