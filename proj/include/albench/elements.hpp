#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "albench/element_table.hpp"
#include "albench/error.hpp"

namespace albench {

struct ElementData {
    int atomic_number = 0;
    double atomic_mass = 0.0;
    std::optional<double> electronegativity; // Pauling; absent for some noble gases
    std::optional<double> covalent_radius;   // Angstrom

    friend bool operator==(const ElementData&, const ElementData&) = default;
};

/// Symbol-keyed element properties (H through Rn).
class ElementTable {
public:
    ElementTable() = default;

    static const ElementTable& builtin()
    {
        static const ElementTable table = [] {
            ElementTable t;
            for (const auto& row : detail::builtin_elements)
                t.elements_.emplace(std::string(row.symbol),
                                    ElementData{row.atomic_number, row.atomic_mass,
                                                row.electronegativity, row.covalent_radius});
            t.version_ = detail::element_table_version;
            return t;
        }();
        return table;
    }

    /// Parse either `{"version": n, "elements": {...}}` or a bare symbol map.
    static ElementTable from_json(const nlohmann::json& doc)
    {
        const nlohmann::json* map = &doc;
        ElementTable t;
        if (doc.contains("elements")) {
            map = &doc.at("elements");
            t.version_ = doc.value("version", 0);
        }
        if (!map->is_object())
            throw ParseError("element table: expected an object keyed by element symbol");
        for (const auto& [symbol, entry] : map->items()) {
            try {
                ElementData e;
                e.atomic_number = entry.at("atomic_number").get<int>();
                e.atomic_mass = entry.at("atomic_mass").get<double>();
                if (entry.contains("electronegativity") && !entry["electronegativity"].is_null())
                    e.electronegativity = entry["electronegativity"].get<double>();
                if (entry.contains("covalent_radius") && !entry["covalent_radius"].is_null())
                    e.covalent_radius = entry["covalent_radius"].get<double>();
                t.elements_.emplace(symbol, e);
            } catch (const nlohmann::json::exception& ex) {
                throw ParseError("element table: bad entry for '" + symbol + "': " + ex.what());
            }
        }
        return t;
    }

    static ElementTable load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw ParseError("element table: cannot open " + path.string());
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& ex) {
            throw ParseError("element table " + path.string() + ": " + ex.what());
        }
        return from_json(doc);
    }

    const ElementData* find(std::string_view symbol) const
    {
        const auto it = elements_.find(std::string(symbol));
        return it == elements_.end() ? nullptr : &it->second;
    }

    const ElementData& at(std::string_view symbol) const
    {
        if (const auto* e = find(symbol))
            return *e;
        throw ValidationError("unknown element symbol '" + std::string(symbol) + "'");
    }

    std::size_t size() const noexcept { return elements_.size(); }
    int version() const noexcept { return version_; }
    const std::map<std::string, ElementData, std::less<>>& entries() const noexcept { return elements_; }

private:
    std::map<std::string, ElementData, std::less<>> elements_;
    int version_ = 0;
};

} // namespace albench
