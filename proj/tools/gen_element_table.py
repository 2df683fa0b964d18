#!/usr/bin/env python3
"""Regenerate data/elements.json and include/albench/element_table.hpp.

Source: the element database shipped with the `mendeleev` package
(Pauling electronegativity, standard atomic weight, Cordero covalent radius).

    python3 tools/gen_element_table.py path/to/mendeleev/elements.db
"""
import json
import sqlite3
import sys
from pathlib import Path

VERSION = 1
ROOT = Path(__file__).resolve().parent.parent


def main(db_path):
    con = sqlite3.connect(db_path)
    rows = con.execute(
        "select symbol, atomic_number, atomic_weight, en_pauling, covalent_radius_cordero "
        "from elements where atomic_number between 1 and 86 order by atomic_number"
    ).fetchall()
    table = {}
    for sym, z, mass, en, rad in rows:
        table[sym] = {
            "atomic_number": z,
            "atomic_mass": round(mass, 6),
            "electronegativity": None if en is None else round(en, 2),
            "covalent_radius": None if rad is None else round(rad / 100.0, 2),
        }
    doc = {"version": VERSION, "elements": table}
    (ROOT / "data" / "elements.json").write_text(json.dumps(doc, indent=1) + "\n")

    def fmt(v):
        return "std::nullopt" if v is None else repr(float(v))

    lines = [
        "#pragma once",
        "",
        "// Generated by tools/gen_element_table.py; keep in sync with data/elements.json.",
        "",
        "#include <array>",
        "#include <optional>",
        "#include <string_view>",
        "",
        "namespace albench::detail {",
        "",
        "struct ElementRow {",
        "    std::string_view symbol;",
        "    int atomic_number;",
        "    double atomic_mass;",
        "    std::optional<double> electronegativity;",
        "    std::optional<double> covalent_radius;",
        "};",
        "",
        f"inline constexpr int element_table_version = {VERSION};",
        "",
        f"inline constexpr std::array<ElementRow, {len(table)}> builtin_elements{{{{",
    ]
    for sym, e in table.items():
        lines.append(
            f'    {{"{sym}", {e["atomic_number"]}, {fmt(e["atomic_mass"])}, '
            f'{fmt(e["electronegativity"])}, {fmt(e["covalent_radius"])}}},'
        )
    lines += ["}};", "", "} // namespace albench::detail", ""]
    (ROOT / "include" / "albench" / "element_table.hpp").write_text("\n".join(lines))


if __name__ == "__main__":
    main(sys.argv[1])
