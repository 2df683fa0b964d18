#pragma once

// Generated by tools/gen_element_table.py; keep in sync with data/elements.json.

#include <array>
#include <optional>
#include <string_view>

namespace albench::detail {

struct ElementRow {
    std::string_view symbol;
    int atomic_number;
    double atomic_mass;
    std::optional<double> electronegativity;
    std::optional<double> covalent_radius;
};

inline constexpr int element_table_version = 1;

inline constexpr std::array<ElementRow, 86> builtin_elements{{
    {"H", 1, 1.008, 2.2, 0.31},
    {"He", 2, 4.002602, std::nullopt, 0.28},
    {"Li", 3, 6.94, 0.98, 1.28},
    {"Be", 4, 9.012183, 1.57, 0.96},
    {"B", 5, 10.81, 2.04, 0.84},
    {"C", 6, 12.011, 2.55, 0.73},
    {"N", 7, 14.007, 3.04, 0.71},
    {"O", 8, 15.999, 3.44, 0.66},
    {"F", 9, 18.998403, 3.98, 0.57},
    {"Ne", 10, 20.1797, std::nullopt, 0.58},
    {"Na", 11, 22.989769, 0.93, 1.66},
    {"Mg", 12, 24.305, 1.31, 1.41},
    {"Al", 13, 26.981538, 1.61, 1.21},
    {"Si", 14, 28.085, 1.9, 1.11},
    {"P", 15, 30.973762, 2.19, 1.07},
    {"S", 16, 32.06, 2.58, 1.05},
    {"Cl", 17, 35.45, 3.16, 1.02},
    {"Ar", 18, 39.948, std::nullopt, 1.06},
    {"K", 19, 39.0983, 0.82, 2.03},
    {"Ca", 20, 40.078, 1.0, 1.76},
    {"Sc", 21, 44.955908, 1.36, 1.7},
    {"Ti", 22, 47.867, 1.54, 1.6},
    {"V", 23, 50.9415, 1.63, 1.53},
    {"Cr", 24, 51.9961, 1.66, 1.39},
    {"Mn", 25, 54.938044, 1.55, 1.5},
    {"Fe", 26, 55.845, 1.83, 1.42},
    {"Co", 27, 58.933194, 1.88, 1.38},
    {"Ni", 28, 58.6934, 1.91, 1.24},
    {"Cu", 29, 63.546, 1.9, 1.32},
    {"Zn", 30, 65.38, 1.65, 1.22},
    {"Ga", 31, 69.723, 1.81, 1.22},
    {"Ge", 32, 72.63, 2.01, 1.2},
    {"As", 33, 74.921595, 2.18, 1.19},
    {"Se", 34, 78.971, 2.55, 1.2},
    {"Br", 35, 79.904, 2.96, 1.2},
    {"Kr", 36, 83.798, std::nullopt, 1.16},
    {"Rb", 37, 85.4678, 0.82, 2.2},
    {"Sr", 38, 87.62, 0.95, 1.95},
    {"Y", 39, 88.90584, 1.22, 1.9},
    {"Zr", 40, 91.224, 1.33, 1.75},
    {"Nb", 41, 92.90637, 1.6, 1.64},
    {"Mo", 42, 95.95, 2.16, 1.54},
    {"Tc", 43, 97.90721, 2.1, 1.47},
    {"Ru", 44, 101.07, 2.2, 1.46},
    {"Rh", 45, 102.9055, 2.28, 1.42},
    {"Pd", 46, 106.42, 2.2, 1.39},
    {"Ag", 47, 107.8682, 1.93, 1.45},
    {"Cd", 48, 112.414, 1.69, 1.44},
    {"In", 49, 114.818, 1.78, 1.42},
    {"Sn", 50, 118.71, 1.96, 1.39},
    {"Sb", 51, 121.76, 2.05, 1.39},
    {"Te", 52, 127.6, 2.1, 1.38},
    {"I", 53, 126.90447, 2.66, 1.39},
    {"Xe", 54, 131.293, 2.6, 1.4},
    {"Cs", 55, 132.905452, 0.79, 2.44},
    {"Ba", 56, 137.327, 0.89, 2.15},
    {"La", 57, 138.90547, 1.1, 2.07},
    {"Ce", 58, 140.116, 1.12, 2.04},
    {"Pr", 59, 140.90766, 1.13, 2.03},
    {"Nd", 60, 144.242, 1.14, 2.01},
    {"Pm", 61, 144.91276, std::nullopt, 1.99},
    {"Sm", 62, 150.36, 1.17, 1.98},
    {"Eu", 63, 151.964, std::nullopt, 1.98},
    {"Gd", 64, 157.25, 1.2, 1.96},
    {"Tb", 65, 158.92535, std::nullopt, 1.94},
    {"Dy", 66, 162.5, 1.22, 1.92},
    {"Ho", 67, 164.93033, 1.23, 1.92},
    {"Er", 68, 167.259, 1.24, 1.89},
    {"Tm", 69, 168.93422, 1.25, 1.9},
    {"Yb", 70, 173.045, std::nullopt, 1.87},
    {"Lu", 71, 174.9668, 1.0, 1.87},
    {"Hf", 72, 178.49, 1.3, 1.75},
    {"Ta", 73, 180.94788, 1.5, 1.7},
    {"W", 74, 183.84, 1.7, 1.62},
    {"Re", 75, 186.207, 1.9, 1.51},
    {"Os", 76, 190.23, 2.2, 1.44},
    {"Ir", 77, 192.217, 2.2, 1.41},
    {"Pt", 78, 195.084, 2.2, 1.36},
    {"Au", 79, 196.966569, 2.4, 1.36},
    {"Hg", 80, 200.592, 1.9, 1.32},
    {"Tl", 81, 204.38, 1.8, 1.45},
    {"Pb", 82, 207.2, 1.8, 1.46},
    {"Bi", 83, 208.9804, 1.9, 1.48},
    {"Po", 84, 209.0, 2.0, 1.4},
    {"At", 85, 210.0, 2.2, 1.5},
    {"Rn", 86, 222.0, std::nullopt, 1.5},
}};

} // namespace albench::detail
