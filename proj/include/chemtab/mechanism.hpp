#pragma once

// Chemistry data model and kinetics: species properties, Arrhenius
// reactions, net production rates, source energy and mixture fraction.

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chemtab/errors.hpp"
#include "chemtab/text_io.hpp"
#include "chemtab/types.hpp"

namespace chemtab::mech {

inline constexpr double kGasConstant = 8.314462618; // J/(mol K)

// Atomic masses for the elements the shipped mechanisms use, kg/mol.
// Integer-gram values keep species molar masses exact sums of their atoms.
inline const std::map<std::string, double>& builtin_atomic_masses() {
    static const std::map<std::string, double> table = {
        {"C", 0.012}, {"H", 0.001}, {"O", 0.016}, {"N", 0.014},
    };
    return table;
}

struct Species {
    std::string name;
    double molar_mass = 0.0;        // kg/mol
    double heat_of_formation = 0.0; // J/kg
    double diffusivity = 0.0;       // m^2/s
    std::map<std::string, int> elements; // element symbol -> atom count
};

struct Reaction {
    std::map<int, int> reactant_stoich; // species index -> nu'
    std::map<int, int> product_stoich;  // species index -> nu''
    double pre_exponential = 0.0;       // SI rate units for the reaction order
    double temperature_exponent = 0.0;
    double activation_energy = 0.0;     // J/mol
};

class Mechanism {
public:
    std::vector<Species> species;
    std::vector<Reaction> reactions;
    double thermal_conductivity = 0.0; // W/(m K)
    double heat_capacity = 0.0;        // J/(kg K)
    double pressure = 101325.0;        // Pa
    Vector fuel_composition;           // mass fractions, length s
    Vector oxidizer_composition;
    // Per-element coupling coefficients of the conserved scalar
    // beta(Y) = sum_e gamma_e * z_e(Y); Bilger-style defaults are filled for
    // C/H/O when absent.
    std::map<std::string, double> z_coupling;
    std::map<std::string, double> atomic_masses = builtin_atomic_masses();

    Index n_species() const { return static_cast<Index>(species.size()); }
    Index n_reactions() const { return static_cast<Index>(reactions.size()); }

    int species_index(const std::string& name) const {
        for (std::size_t i = 0; i < species.size(); ++i)
            if (species[i].name == name)
                return static_cast<int>(i);
        return -1;
    }

    std::vector<std::string> species_names() const {
        std::vector<std::string> names;
        names.reserve(species.size());
        for (const auto& sp : species)
            names.push_back(sp.name);
        return names;
    }

    // Species whose mass fraction is closed as 1 - sum(others) by the
    // flamelet solver: N2 when present, else the last species.
    int closure_species() const {
        int i = species_index("N2");
        return i >= 0 ? i : static_cast<int>(species.size()) - 1;
    }

    // Finalizes derived data and checks every invariant. Must be called
    // after the fields are filled; the parser and builders do this.
    void validate() {
        if (species.size() < 2)
            throw ConfigError("mechanism needs at least 2 species");
        for (std::size_t i = 0; i < species.size(); ++i) {
            const Species& sp = species[i];
            if (sp.molar_mass <= 0)
                throw ConfigError("species " + sp.name + ": molar_mass must be > 0");
            if (sp.diffusivity <= 0)
                throw ConfigError("species " + sp.name + ": diffusivity must be > 0");
            for (std::size_t j = i + 1; j < species.size(); ++j)
                if (species[j].name == sp.name)
                    throw ConfigError("duplicate species name: " + sp.name);
        }
        if (thermal_conductivity <= 0)
            throw ConfigError("kappa must be > 0");
        if (heat_capacity <= 0)
            throw ConfigError("cp must be > 0");
        if (pressure <= 0)
            throw ConfigError("pressure must be > 0");
        check_composition(fuel_composition, "fuel");
        check_composition(oxidizer_composition, "oxidizer");
        for (std::size_t r = 0; r < reactions.size(); ++r)
            check_reaction_balance(reactions[r], static_cast<int>(r));
        fill_default_coupling();
        compute_species_coupling();
    }

    // ---- kinetics ------------------------------------------------------

    // Net production rates S_i in kg/(m^3 s): law-of-mass-action progress
    // rates q_r = A T^beta exp(-Ea/(R T)) prod_j [C_j]^nu'_jr converted to
    // mass units via nu_ir * M_i. Concentrations are floored at 0.
    Vector production_rates(const Vector& Y, double T, double rho) const {
        const Index s = n_species();
        if (Y.size() != s)
            throw DimensionError("production_rates: Y has length " + std::to_string(Y.size()) +
                                 ", mechanism has " + std::to_string(s) + " species");
        if (!(T > 0))
            throw DomainError("production_rates: T must be > 0");
        if (!(rho > 0))
            throw DomainError("production_rates: rho must be > 0");
        for (Index i = 0; i < s; ++i)
            if (Y[i] < -kYTolerance)
                throw DomainError("production_rates: Y[" + species[i].name + "] = " +
                                  io::format_g17(Y[i]) + " below tolerance");
        if (std::abs(Y.sum() - 1.0) > kYTolerance)
            throw DomainError("production_rates: mass fractions sum to " + io::format_g17(Y.sum()));

        Vector conc(s); // mol/m^3, floored at 0
        for (Index i = 0; i < s; ++i)
            conc[i] = std::max(Y[i], 0.0) * rho / species[i].molar_mass;

        Vector sdot = Vector::Zero(s);
        for (std::size_t r = 0; r < reactions.size(); ++r) {
            const Reaction& rx = reactions[r];
            double q = rx.pre_exponential * std::pow(T, rx.temperature_exponent) *
                       std::exp(-rx.activation_energy / (kGasConstant * T));
            for (const auto& [i, nu] : rx.reactant_stoich)
                for (int e = 0; e < nu; ++e)
                    q *= conc[i];
            if (!std::isfinite(q))
                throw NumericError("production_rates: non-finite rate in reaction " +
                                   std::to_string(r) + " (" + describe_reaction(rx) + ")");
            for (const auto& [i, nu] : rx.reactant_stoich)
                sdot[i] -= nu * q * species[i].molar_mass;
            for (const auto& [i, nu] : rx.product_stoich)
                sdot[i] += nu * q * species[i].molar_mass;
        }
        return sdot;
    }

    // S_energy = -sum_i h0f_i * S_i, J/(m^3 s)
    double source_energy(const Vector& sdot) const {
        if (sdot.size() != n_species())
            throw DimensionError("source_energy: vector length " + std::to_string(sdot.size()) +
                                 " != species count " + std::to_string(n_species()));
        double e = 0.0;
        for (Index i = 0; i < n_species(); ++i)
            e -= species[i].heat_of_formation * sdot[i];
        return e;
    }

    // Conserved scalar from the element coupling function, 1 at the fuel
    // composition and 0 at the oxidizer composition. Values within 1e-9
    // outside [0,1] are clipped; larger excursions pass through unchanged.
    double mixture_fraction(const Vector& Y) const {
        if (Y.size() != n_species())
            throw DimensionError("mixture_fraction: bad length");
        if (std::abs(beta_fuel_ - beta_ox_) < 1e-300)
            throw ConfigError("mixture_fraction: coupling function does not separate "
                              "fuel and oxidizer boundaries");
        double z = (species_coupling_.dot(Y) - beta_ox_) / (beta_fuel_ - beta_ox_);
        if (z < 0.0 && z > -1e-9)
            z = 0.0;
        if (z > 1.0 && z < 1.0 + 1e-9)
            z = 1.0;
        return z;
    }

    // Mixture fraction of the stoichiometric surface (beta = 0); falls back
    // to 0.5 when it lands outside (0,1).
    double stoichiometric_mixture_fraction() const {
        double denom = beta_fuel_ - beta_ox_;
        if (std::abs(denom) < 1e-300)
            return 0.5;
        double z = -beta_ox_ / denom;
        return (z > 0.0 && z < 1.0) ? z : 0.5;
    }

    // Ideal-gas density at the mechanism's fixed pressure.
    double density(const Vector& Y, double T) const {
        double inv_mbar = 0.0;
        for (Index i = 0; i < n_species(); ++i)
            inv_mbar += std::max(Y[i], 0.0) / species[i].molar_mass;
        return pressure / (kGasConstant * T * inv_mbar);
    }

    double mean_diffusivity() const {
        double d = 0.0;
        for (const Species& sp : species)
            d += sp.diffusivity;
        return d / static_cast<double>(species.size());
    }

    std::string describe_reaction(const Reaction& rx) const {
        std::ostringstream ss;
        bool first = true;
        for (const auto& [i, nu] : rx.reactant_stoich) {
            if (!first)
                ss << " + ";
            ss << nu << "*" << species[i].name;
            first = false;
        }
        ss << " -> ";
        first = true;
        for (const auto& [i, nu] : rx.product_stoich) {
            if (!first)
                ss << " + ";
            ss << nu << "*" << species[i].name;
            first = false;
        }
        return ss.str();
    }

    // Fingerprint used by dataset metadata sidecars.
    std::uint64_t fingerprint() const {
        std::ostringstream ss;
        for (const Species& sp : species) {
            ss << sp.name << ' ' << io::format_g17(sp.molar_mass) << ' '
               << io::format_g17(sp.heat_of_formation) << ' ' << io::format_g17(sp.diffusivity);
            for (const auto& [el, cnt] : sp.elements)
                ss << ' ' << el << cnt;
            ss << '\n';
        }
        for (const Reaction& rx : reactions)
            ss << describe_reaction(rx) << ' ' << io::format_g17(rx.pre_exponential) << ' '
               << io::format_g17(rx.temperature_exponent) << ' '
               << io::format_g17(rx.activation_energy) << '\n';
        ss << io::format_g17(thermal_conductivity) << ' ' << io::format_g17(heat_capacity) << ' '
           << io::format_g17(pressure) << '\n';
        for (Index i = 0; i < fuel_composition.size(); ++i)
            ss << io::format_g17(fuel_composition[i]) << ' ' << io::format_g17(oxidizer_composition[i]) << ' ';
        return io::fnv1a(ss.str());
    }

private:
    static constexpr double kYTolerance = 1e-6;

    Vector species_coupling_; // c_i such that beta(Y) = c . Y
    double beta_fuel_ = 0.0;
    double beta_ox_ = 0.0;

    void check_composition(const Vector& comp, const std::string& label) const {
        if (comp.size() != n_species())
            throw ConfigError(label + " composition has length " + std::to_string(comp.size()) +
                              ", expected " + std::to_string(n_species()));
        double sum = 0.0;
        for (Index i = 0; i < comp.size(); ++i) {
            if (comp[i] < 0)
                throw ConfigError(label + " composition has negative entry for " + species[i].name);
            sum += comp[i];
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw ConfigError(label + " composition sums to " + io::format_g17(sum) + ", expected 1");
    }

    void check_reaction_balance(const Reaction& rx, int index) const {
        if (rx.reactant_stoich.empty())
            throw ConfigError("reaction " + std::to_string(index) + " has no reactants");
        if (!(rx.pre_exponential > 0))
            throw ConfigError("reaction " + std::to_string(index) + ": A must be > 0");
        std::map<std::string, int> atoms; // net product minus reactant atoms
        auto tally = [&](const std::map<int, int>& stoich, int sign) {
            for (const auto& [i, nu] : stoich) {
                if (i < 0 || i >= static_cast<int>(species.size()))
                    throw ConfigError("reaction " + std::to_string(index) + ": bad species index");
                if (nu < 0)
                    throw ConfigError("reaction " + std::to_string(index) + ": negative stoichiometry");
                for (const auto& [el, cnt] : species[i].elements)
                    atoms[el] += sign * nu * cnt;
            }
        };
        tally(rx.reactant_stoich, -1);
        tally(rx.product_stoich, +1);
        for (const auto& [el, net] : atoms)
            if (net != 0)
                throw ConfigError("reaction " + std::to_string(index) + " (" + describe_reaction(rx) +
                                  ") unbalanced in element " + el);
        // Mass balance follows from element balance only when molar masses
        // are consistent with the atomic composition; enforce it so that
        // sum_i S_i = 0 holds to rounding.
        double net_mass = 0.0, gross = 0.0;
        for (const auto& [i, nu] : rx.reactant_stoich) {
            net_mass -= nu * species[i].molar_mass;
            gross += nu * species[i].molar_mass;
        }
        for (const auto& [i, nu] : rx.product_stoich) {
            net_mass += nu * species[i].molar_mass;
            gross += nu * species[i].molar_mass;
        }
        if (std::abs(net_mass) > 1e-9 * gross)
            throw ConfigError("reaction " + std::to_string(index) + " (" + describe_reaction(rx) +
                              ") has inconsistent molar masses: net " + io::format_g17(net_mass) +
                              " kg/mol");
    }

    // Bilger coupling: gamma_C = 2/A_C, gamma_H = 1/(2 A_H), gamma_O = -1/A_O.
    void fill_default_coupling() {
        bool any_known = false;
        for (const Species& sp : species)
            for (const auto& [el, cnt] : sp.elements)
                if (el == "C" || el == "H" || el == "O")
                    any_known = true;
        if (z_coupling.empty() && any_known) {
            z_coupling["C"] = 2.0 / atomic_mass("C");
            z_coupling["H"] = 0.5 / atomic_mass("H");
            z_coupling["O"] = -1.0 / atomic_mass("O");
        }
    }

    double atomic_mass(const std::string& el) const {
        auto it = atomic_masses.find(el);
        if (it == atomic_masses.end())
            throw ConfigError("no atomic mass for element " + el +
                              " (add an atom: line to the [mixture] section)");
        return it->second;
    }

    void compute_species_coupling() {
        const Index s = n_species();
        species_coupling_ = Vector::Zero(s);
        for (Index i = 0; i < s; ++i) {
            double c = 0.0;
            for (const auto& [el, cnt] : species[i].elements) {
                auto g = z_coupling.find(el);
                if (g == z_coupling.end())
                    continue;
                // elemental mass fraction contribution: cnt * A_el / M_i
                c += g->second * cnt * atomic_mass(el) / species[i].molar_mass;
            }
            species_coupling_[i] = c;
        }
        beta_fuel_ = species_coupling_.dot(fuel_composition);
        beta_ox_ = species_coupling_.dot(oxidizer_composition);
    }
};

// ---- mechanism file parsing ---------------------------------------------
//
// [species]
//   name molar_mass h0f diffusivity elem:C=1 elem:H=4
// [reactions]
//   1*CH4 + 1*O2 -> 1*CO + 1*H2 + 1*H2O | A=6e5 beta=0 Ea=1.3e5
// [mixture]
//   fuel: CH4=1.0
//   oxidizer: O2=0.233,N2=0.767
//   kappa=0.09
//   cp=1300
//   pressure=101325
//   atom: X=0.010         (optional, extra element masses)
//   zcoef: C=166.67,...   (optional, overrides the Bilger defaults)

namespace detail {

inline std::map<int, int> parse_reaction_side(const std::string& side, const Mechanism& m,
                                              int lineno) {
    std::map<int, int> stoich;
    for (std::string term : io::split(side, '+')) {
        term = io::trim(term);
        if (term.empty())
            throw ParseError("line " + std::to_string(lineno) + ": empty reaction term");
        int count = 1;
        std::string name = term;
        std::size_t star = term.find('*');
        if (star != std::string::npos) {
            count = static_cast<int>(io::parse_long(io::trim(term.substr(0, star)),
                                                    "line " + std::to_string(lineno)));
            name = io::trim(term.substr(star + 1));
        }
        int idx = m.species_index(name);
        if (idx < 0)
            throw ParseError("line " + std::to_string(lineno) + ": unknown species '" + name + "'");
        if (count <= 0)
            throw ParseError("line " + std::to_string(lineno) + ": stoichiometric count must be >= 1");
        stoich[idx] += count;
    }
    return stoich;
}

inline void parse_composition(const std::string& list, const Mechanism& m, Vector& out,
                              int lineno) {
    out = Vector::Zero(m.n_species());
    for (std::string item : io::split(list, ',')) {
        item = io::trim(item);
        if (item.empty())
            continue;
        std::size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(lineno) + ": expected name=fraction in '" +
                             item + "'");
        int idx = m.species_index(io::trim(item.substr(0, eq)));
        if (idx < 0)
            throw ParseError("line " + std::to_string(lineno) + ": unknown species in composition");
        out[idx] = io::parse_double(io::trim(item.substr(eq + 1)), "line " + std::to_string(lineno));
    }
}

} // namespace detail

inline Mechanism parse_mechanism(const std::string& text, const std::string& origin = "<string>") {
    Mechanism m;
    enum class Section { None, Species, Reactions, Mixture } section = Section::None;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool have_fuel = false, have_ox = false;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            std::string t = io::trim(line);
            if (t.empty() || t[0] == '#')
                continue;
            if (t == "[species]") {
                section = Section::Species;
                continue;
            }
            if (t == "[reactions]") {
                section = Section::Reactions;
                continue;
            }
            if (t == "[mixture]") {
                section = Section::Mixture;
                continue;
            }
            if (t[0] == '[')
                throw ParseError("line " + std::to_string(lineno) + ": unknown section " + t);

            switch (section) {
            case Section::None:
                throw ParseError("line " + std::to_string(lineno) + ": content before any section");
            case Section::Species: {
                auto tok = io::split_ws(t);
                if (tok.size() < 4)
                    throw ParseError("line " + std::to_string(lineno) +
                                     ": species needs name molar_mass h0f diffusivity");
                Species sp;
                sp.name = tok[0];
                const std::string where = "line " + std::to_string(lineno);
                sp.molar_mass = io::parse_double(tok[1], where);
                sp.heat_of_formation = io::parse_double(tok[2], where);
                sp.diffusivity = io::parse_double(tok[3], where);
                for (std::size_t k = 4; k < tok.size(); ++k) {
                    if (tok[k].rfind("elem:", 0) != 0)
                        throw ParseError(where + ": expected elem:El=count, got '" + tok[k] + "'");
                    std::string body = tok[k].substr(5);
                    std::size_t eq = body.find('=');
                    if (eq == std::string::npos)
                        throw ParseError(where + ": expected elem:El=count");
                    sp.elements[body.substr(0, eq)] =
                        static_cast<int>(io::parse_long(body.substr(eq + 1), where));
                }
                m.species.push_back(std::move(sp));
                break;
            }
            case Section::Reactions: {
                std::size_t bar = t.find('|');
                if (bar == std::string::npos)
                    throw ParseError("line " + std::to_string(lineno) +
                                     ": reaction needs '| A=... beta=... Ea=...'");
                std::string eqn = io::trim(t.substr(0, bar));
                std::size_t arrow = eqn.find("->");
                if (arrow == std::string::npos)
                    throw ParseError("line " + std::to_string(lineno) + ": reaction needs '->'");
                Reaction rx;
                rx.reactant_stoich =
                    detail::parse_reaction_side(eqn.substr(0, arrow), m, lineno);
                rx.product_stoich =
                    detail::parse_reaction_side(eqn.substr(arrow + 2), m, lineno);
                bool haveA = false, haveBeta = false, haveEa = false;
                for (const std::string& kvtok : io::split_ws(io::trim(t.substr(bar + 1)))) {
                    std::size_t eq = kvtok.find('=');
                    if (eq == std::string::npos)
                        throw ParseError("line " + std::to_string(lineno) +
                                         ": expected key=value after '|'");
                    std::string key = kvtok.substr(0, eq);
                    double val = io::parse_double(kvtok.substr(eq + 1),
                                                  "line " + std::to_string(lineno));
                    if (key == "A") {
                        rx.pre_exponential = val;
                        haveA = true;
                    } else if (key == "beta") {
                        rx.temperature_exponent = val;
                        haveBeta = true;
                    } else if (key == "Ea") {
                        rx.activation_energy = val;
                        haveEa = true;
                    } else {
                        throw ParseError("line " + std::to_string(lineno) +
                                         ": unknown rate parameter '" + key + "'");
                    }
                }
                if (!haveA || !haveBeta || !haveEa)
                    throw ParseError("line " + std::to_string(lineno) +
                                     ": reaction needs A=, beta= and Ea=");
                m.reactions.push_back(std::move(rx));
                break;
            }
            case Section::Mixture: {
                if (t.rfind("fuel:", 0) == 0) {
                    detail::parse_composition(t.substr(5), m, m.fuel_composition, lineno);
                    have_fuel = true;
                } else if (t.rfind("oxidizer:", 0) == 0) {
                    detail::parse_composition(t.substr(9), m, m.oxidizer_composition, lineno);
                    have_ox = true;
                } else if (t.rfind("atom:", 0) == 0) {
                    for (std::string item : io::split(t.substr(5), ',')) {
                        item = io::trim(item);
                        std::size_t eq = item.find('=');
                        if (eq == std::string::npos)
                            throw ParseError("line " + std::to_string(lineno) +
                                             ": expected atom: El=mass");
                        m.atomic_masses[io::trim(item.substr(0, eq))] = io::parse_double(
                            io::trim(item.substr(eq + 1)), "line " + std::to_string(lineno));
                    }
                } else if (t.rfind("zcoef:", 0) == 0) {
                    for (std::string item : io::split(t.substr(6), ',')) {
                        item = io::trim(item);
                        std::size_t eq = item.find('=');
                        if (eq == std::string::npos)
                            throw ParseError("line " + std::to_string(lineno) +
                                             ": expected zcoef: El=coef");
                        m.z_coupling[io::trim(item.substr(0, eq))] = io::parse_double(
                            io::trim(item.substr(eq + 1)), "line " + std::to_string(lineno));
                    }
                } else {
                    std::size_t eq = t.find('=');
                    if (eq == std::string::npos)
                        throw ParseError("line " + std::to_string(lineno) +
                                         ": expected key=value in [mixture]");
                    std::string key = io::trim(t.substr(0, eq));
                    double val =
                        io::parse_double(io::trim(t.substr(eq + 1)), "line " + std::to_string(lineno));
                    if (key == "kappa")
                        m.thermal_conductivity = val;
                    else if (key == "cp")
                        m.heat_capacity = val;
                    else if (key == "pressure")
                        m.pressure = val;
                    else
                        throw ParseError("line " + std::to_string(lineno) + ": unknown key '" +
                                         key + "'");
                }
                break;
            }
            }
        }
        if (!have_fuel || !have_ox)
            throw ParseError("mechanism is missing fuel: or oxidizer: line");
        m.validate();
    } catch (ParseError&) {
        throw;
    } catch (Error& e) {
        // invariant violations from validate() get the file name attached
        throw ParseError(origin + ": " + e.what());
    }
    return m;
}

inline Mechanism load_mechanism(const std::string& path) {
    return parse_mechanism(io::read_file(path), path);
}

// The shipped 8-species / 5-reaction methane-like mechanism. Stoichiometry
// is element balanced. The streams are nitrogen-diluted fuel against an
// enriched oxidizer so the flame sits away from the cold walls, and the rate
// constants are tuned so the default 2.9 mm flamelet burns near 1850 K,
// weakens as the domain shrinks, and extinguishes after roughly 90 steps of
// a 0.99 shrink sweep.
inline std::string builtin_mechanism_text() {
    return R"([species]
# name  molar_mass  h0f        diffusivity  composition
CH4  0.016  -4.675e6    2.1e-4  elem:C=1 elem:H=4
O2   0.032   0.0        1.9e-4  elem:O=2
CO2  0.044  -8.9432e6   1.7e-4  elem:C=1 elem:O=2
H2O  0.018  -1.3433e7   2.2e-4  elem:H=2 elem:O=1
CO   0.028  -3.9464e6   1.9e-4  elem:C=1 elem:O=1
H2   0.002   0.0        2.6e-4  elem:H=2
OH   0.017   2.294e6    2.3e-4  elem:H=1 elem:O=1
N2   0.028   0.0        1.9e-4  elem:N=2

[reactions]
1*CH4 + 1*O2 -> 1*CO + 1*H2 + 1*H2O | A=2.0e9 beta=0 Ea=1.3e5
1*H2 + 1*O2 -> 2*OH                 | A=3.0e8 beta=0 Ea=1.2e5
1*H2 + 2*OH -> 2*H2O                | A=1.0e6 beta=0 Ea=5.0e4
1*CO + 2*OH -> 1*CO2 + 1*H2O       | A=5.0e5 beta=0 Ea=5.5e4
2*CO + 1*O2 -> 2*CO2               | A=1.0e6 beta=0 Ea=1.0e5

[mixture]
fuel: CH4=0.45,N2=0.55
oxidizer: O2=0.40,N2=0.60
kappa=0.22
cp=1300.0
pressure=101325.0
)";
}

inline Mechanism builtin_mechanism() {
    return parse_mechanism(builtin_mechanism_text(), "<builtin>");
}

} // namespace chemtab::mech
