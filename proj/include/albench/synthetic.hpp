#pragma once

// Seeded synthetic data: a clustered 17-dimensional regression benchmark and
// manifests with the per-system record counts of the published datasets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "albench/dataset.hpp"
#include "albench/error.hpp"
#include "albench/formula.hpp"
#include "albench/random.hpp"

namespace albench {

/// Cluster sizes of the default benchmark: 15 clusters, 600 points, a 60:1 ratio
/// between the largest and smallest.
inline constexpr std::array<std::size_t, 15> kBenchmarkClusterSizes{180, 120, 80, 55, 40, 30, 24, 18,
                                                                     14,  11,  9,  7,  5,  4,  3};

struct ClusterBenchmark {
    Dataset data;
    std::vector<std::size_t> cluster_of; // generating cluster per row
};

/// Gaussian clusters in 17 dimensions. The target is a per-cluster offset
/// plus a weak within-cluster linear trend and small noise.
inline ClusterBenchmark make_cluster_benchmark(std::uint64_t seed,
                                               std::span<const std::size_t> sizes = kBenchmarkClusterSizes)
{
    Rng rng(derive_seed(seed, 0xB3C4));
    const std::size_t k = sizes.size();
    Matrix centers(k, kNumFeatures);
    std::vector<double> offsets(k);
    Matrix slopes(k, kNumFeatures);
    for (std::size_t c = 0; c < k; ++c) {
        for (auto& v : centers.row(c))
            v = 4.0 * rng.normal();
        offsets[c] = 1.5 * rng.normal();
        for (auto& v : slopes.row(c))
            v = 0.05 * rng.normal();
    }

    ClusterBenchmark out;
    out.data.features = Matrix(0, kNumFeatures);
    std::vector<double> x(kNumFeatures);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < sizes[c]; ++i) {
            double y = offsets[c];
            for (std::size_t j = 0; j < kNumFeatures; ++j) {
                const double dev = 0.6 * rng.normal();
                x[j] = centers(c, j) + dev;
                y += slopes(c, j) * dev;
            }
            y += 0.02 * rng.normal();
            out.data.features.append_row(x);
            out.data.targets.push_back(y);
            out.data.ids.push_back("c" + std::to_string(c) + "-" + std::to_string(i));
            out.cluster_of.push_back(c);
        }
    }
    // Interleave clusters so that record order carries no cluster information.
    std::vector<std::size_t> order(out.data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    ClusterBenchmark shuffled;
    shuffled.data.features = out.data.features.select_rows(order);
    for (const auto i : order) {
        shuffled.data.targets.push_back(out.data.targets[i]);
        shuffled.data.ids.push_back(out.data.ids[i]);
        shuffled.cluster_of.push_back(out.cluster_of[i]);
    }
    return shuffled;
}

/// Record counts and formation-energy statistics of one chemical system.
struct SystemShape {
    std::string name;
    std::size_t mp_count = 0;
    std::size_t oqmd_count = 0;
    double mean_formation_energy = 0.0; // eV/atom
    double std_formation_energy = 1.0;  // eV/atom
    std::vector<std::string> formulas;  // drawn uniformly per record
    double elemental_energy = -5.0;     // offset between formation and total energy, eV/atom
};

inline SystemShape system_shape(std::string_view system)
{
    if (system == "carbon")
        return {"carbon", 500, 100, -1.23, 0.89, {"C", "C2", "C4", "C6", "C8", "C12", "C16"}, -9.22};
    if (system == "silicon")
        return {"silicon", 500, 71, -0.81, 0.74, {"Si", "Si2", "Si4", "Si8", "Si16", "Si24"}, -5.42};
    if (system == "iron")
        return {"iron", 500, 32, -0.45, 0.62, {"Fe", "Fe2", "Fe4", "Fe8", "Fe16"}, -8.47};
    if (system == "ti-o")
        return {"ti-o", 480, 29, -2.15, 1.31, {"TiO2", "Ti2O3", "TiO", "Ti3O5", "Ti4O7", "Ti2O", "Ti3O"}, -7.9};
    throw ValidationError("unknown system '" + std::string(system) + "' (expected carbon, silicon, iron or ti-o)");
}

/// A manifest with the shape's record counts. Formation energies sharing a
/// reduced formula are kept at least 1.5 meV apart, so deduplication keeps
/// every record; all records pass the size and finiteness filters.
inline Manifest make_synthetic_manifest(const SystemShape& shape, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, 0x3A41F));
    const std::size_t n = shape.mp_count + shape.oqmd_count;
    Manifest m;
    m.system = shape.name;

    std::vector<double> z(n);
    for (auto& v : z)
        v = rng.normal();

    std::map<std::string, std::vector<std::size_t>> by_formula;
    for (std::size_t i = 0; i < n; ++i) {
        MaterialRecord r;
        r.source = i < shape.mp_count ? Source::MP : Source::OQMD;
        r.id = (r.source == Source::MP ? "mp-" : "oqmd-") + std::to_string(i < shape.mp_count ? 1000 + i : 5000 + i);
        r.formula = shape.formulas[rng.index(shape.formulas.size())];
        const Composition comp = parse_formula(r.formula);
        double atoms_per_fu = 0.0;
        for (const auto& [el, cnt] : comp)
            atoms_per_fu += cnt;
        const int max_units = std::max(1, static_cast<int>(50.0 / atoms_per_fu));
        const int units = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(std::min(max_units, 6))));
        r.n_atoms = std::max(2, static_cast<int>(std::lround(atoms_per_fu * units)));
        r.formation_energy_per_atom = shape.mean_formation_energy + shape.std_formation_energy * z[i];
        r.band_gap = std::max(0.0, 1.0 + 0.8 * z[i] + 0.5 * rng.normal());
        r.density = std::max(0.5, 3.0 - 0.4 * z[i] + 0.3 * rng.normal());
        r.volume_per_atom = std::max(2.0, 12.0 + 1.5 * z[i] + 1.0 * rng.normal());
        r.energy_above_hull = std::abs(0.15 * rng.normal());
        r.is_stable = r.energy_above_hull < 0.02;
        r.magnetization_per_atom = std::abs(0.2 * rng.normal());
        r.spacegroup_number = 1 + static_cast<int>(rng.index(230));
        m.records.push_back(r);
        by_formula[reduced_formula(comp)].push_back(i);
    }

    // Enforce the minimum energy spacing within each reduced formula.
    for (auto& [formula, members] : by_formula) {
        std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return m.records[a].formation_energy_per_atom < m.records[b].formation_energy_per_atom;
        });
        for (std::size_t k = 1; k < members.size(); ++k) {
            auto& prev = m.records[members[k - 1]].formation_energy_per_atom;
            auto& cur = m.records[members[k]].formation_energy_per_atom;
            if (cur - prev < 0.0015)
                cur = prev + 0.0015;
        }
    }
    for (auto& r : m.records)
        r.energy_per_atom = r.formation_energy_per_atom + shape.elemental_energy + 0.05 * rng.normal();
    return m;
}

/// Subset of a manifest by source database.
inline Manifest manifest_subset(const Manifest& m, Source source)
{
    Manifest out;
    out.system = m.system + "-" + to_string(source);
    for (const auto& r : m.records)
        if (r.source == source)
            out.records.push_back(r);
    return out;
}

} // namespace albench
