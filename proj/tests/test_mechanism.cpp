#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "chemtab/mechanism.hpp"
#include "chemtab/rng.hpp"

using namespace chemtab;
using mech::Mechanism;
using mech::Reaction;
using mech::Species;

namespace {

// 3-species, 2-reaction toy: A -> B, B -> 2X, everything built from a
// fictitious element Q so the books balance exactly.
Mechanism toy3() {
    Mechanism m;
    m.atomic_masses["Q"] = 0.010;
    m.species = {
        {"A", 0.020, 1.0e6, 1e-4, {{"Q", 2}}},
        {"B", 0.020, -2.0e6, 1e-4, {{"Q", 2}}},
        {"X", 0.010, 5.0e5, 2e-4, {{"Q", 1}}},
    };
    Reaction r1;
    r1.reactant_stoich = {{0, 1}};
    r1.product_stoich = {{1, 1}};
    r1.pre_exponential = 2.0;
    r1.temperature_exponent = 0.5;
    r1.activation_energy = 5.0e4;
    Reaction r2;
    r2.reactant_stoich = {{1, 1}};
    r2.product_stoich = {{2, 2}};
    r2.pre_exponential = 7.5;
    r2.temperature_exponent = -0.25;
    r2.activation_energy = 2.0e4;
    m.reactions = {r1, r2};
    m.thermal_conductivity = 0.05;
    m.heat_capacity = 1200.0;
    m.fuel_composition = Eigen::Vector3d(1.0, 0.0, 0.0);
    m.oxidizer_composition = Eigen::Vector3d(0.0, 1.0, 0.0);
    m.validate();
    return m;
}

Mechanism single_reaction(double A, double beta, double Ea) {
    Mechanism m;
    m.atomic_masses["Q"] = 0.015;
    m.species = {
        {"A", 0.015, 0.0, 1e-4, {{"Q", 1}}},
        {"B", 0.015, 0.0, 1e-4, {{"Q", 1}}},
    };
    Reaction r;
    r.reactant_stoich = {{0, 1}};
    r.product_stoich = {{1, 1}};
    r.pre_exponential = A;
    r.temperature_exponent = beta;
    r.activation_energy = Ea;
    m.reactions = {r};
    m.thermal_conductivity = 0.05;
    m.heat_capacity = 1000.0;
    m.fuel_composition = Eigen::Vector2d(1.0, 0.0);
    m.oxidizer_composition = Eigen::Vector2d(0.0, 1.0);
    m.validate();
    return m;
}

Vector random_mass_fractions(rng::Stream& rs, Index s) {
    Vector y(s);
    for (Index i = 0; i < s; ++i)
        y[i] = rs.uniform(0.05, 1.0);
    return y / y.sum();
}

} // namespace

TEST_CASE("production_rates: zero reactant gives zero source") {
    Mechanism m = single_reaction(3.0, 0.0, 1e4);
    Vector y = Eigen::Vector2d(0.0, 1.0);
    Vector sdot = m.production_rates(y, 1200.0, 0.8);
    CHECK(sdot.norm() == 0.0);
}

TEST_CASE("production_rates: bare Arrhenius factor") {
    const double k = 4.25;
    Mechanism m = single_reaction(k, 0.0, 0.0);
    const double T = 900.0, rho = 1.3;
    Vector y = Eigen::Vector2d(0.7, 0.3);
    double cA = rho * 0.7 / 0.015;
    Vector sdot = m.production_rates(y, T, rho);
    CHECK_THAT(sdot[0], Catch::Matchers::WithinRel(-k * cA * 0.015, 1e-14));
    CHECK_THAT(sdot[1], Catch::Matchers::WithinRel(+k * cA * 0.015, 1e-14));
}

TEST_CASE("production_rates: toy mechanism matches symbolic oracle") {
    Mechanism m = toy3();
    const double T = 1500.0, rho = 1.0;
    Vector y = Eigen::Vector3d(0.5, 0.3, 0.2);

    // oracle: every reaction term written out by hand
    const double R = 8.314462618;
    double cA = rho * 0.5 / 0.020;
    double cB = rho * 0.3 / 0.020;
    double q1 = 2.0 * std::pow(T, 0.5) * std::exp(-5.0e4 / (R * T)) * cA;
    double q2 = 7.5 * std::pow(T, -0.25) * std::exp(-2.0e4 / (R * T)) * cB;
    double sA = -q1 * 0.020;
    double sB = q1 * 0.020 - q2 * 0.020;
    double sX = 2.0 * q2 * 0.010;

    Vector sdot = m.production_rates(y, T, rho);
    CHECK_THAT(sdot[0], Catch::Matchers::WithinRel(sA, 1e-13));
    CHECK_THAT(sdot[1], Catch::Matchers::WithinRel(sB, 1e-13));
    CHECK_THAT(sdot[2], Catch::Matchers::WithinRel(sX, 1e-13));
}

TEST_CASE("production_rates: mass conservation on random states") {
    Mechanism m = mech::builtin_mechanism();
    rng::Stream rs(101);
    for (int trial = 0; trial < 200; ++trial) {
        Vector y = random_mass_fractions(rs, m.n_species());
        double T = rs.uniform(350.0, 2600.0);
        double rho = rs.uniform(0.1, 2.0);
        Vector sdot = m.production_rates(y, T, rho);
        double scale = sdot.cwiseAbs().maxCoeff();
        if (scale > 0)
            CHECK(std::abs(sdot.sum()) <= 1e-10 * scale);
    }
}

TEST_CASE("production_rates: element conservation on random states") {
    Mechanism m = mech::builtin_mechanism();
    rng::Stream rs(77);
    for (int trial = 0; trial < 50; ++trial) {
        Vector y = random_mass_fractions(rs, m.n_species());
        Vector sdot = m.production_rates(y, rs.uniform(400.0, 2500.0), rs.uniform(0.2, 1.5));
        double scale = std::max(sdot.cwiseAbs().maxCoeff(), 1e-300);
        for (const std::string el : {"C", "H", "O", "N"}) {
            double rate = 0.0, amass = m.atomic_masses.at(el);
            for (Index i = 0; i < m.n_species(); ++i) {
                auto it = m.species[i].elements.find(el);
                if (it != m.species[i].elements.end())
                    rate += sdot[i] * it->second * amass / m.species[i].molar_mass;
            }
            CHECK(std::abs(rate) <= 1e-10 * scale);
        }
    }
}

TEST_CASE("production_rates: rate increases with T for Ea>0, beta=0") {
    Mechanism m = single_reaction(5.0, 0.0, 8.0e4);
    Vector y = Eigen::Vector2d(0.6, 0.4);
    double last = 0.0;
    for (double T = 400.0; T <= 2400.0; T += 100.0) {
        double q = -m.production_rates(y, T, 1.0)[0];
        CHECK(q > last);
        last = q;
    }
}

TEST_CASE("production_rates: input checks") {
    Mechanism m = single_reaction(1.0, 0.0, 0.0);
    Vector bad = Eigen::Vector2d(-1e-3, 1.0 + 1e-3);
    CHECK_THROWS_AS(m.production_rates(bad, 1000.0, 1.0), DomainError);
    Vector short_y(1);
    short_y << 1.0;
    CHECK_THROWS_AS(m.production_rates(short_y, 1000.0, 1.0), DimensionError);
    Vector ok = Eigen::Vector2d(0.5, 0.5);
    CHECK_THROWS_AS(m.production_rates(ok, -5.0, 1.0), DomainError);

    // overflow in one reaction names it
    Mechanism hot = single_reaction(1.0, 0.0, -1.0e9);
    try {
        hot.production_rates(ok, 2000.0, 1.0);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("reaction 0") != std::string::npos);
    }
}

TEST_CASE("source_energy") {
    Mechanism m = toy3();
    SECTION("zero source") {
        CHECK(m.source_energy(Vector::Zero(3)) == 0.0);
    }
    SECTION("two-term arithmetic") {
        Mechanism m2 = single_reaction(1.0, 0.0, 0.0);
        m2.species[0].heat_of_formation = 2.0;
        m2.species[1].heat_of_formation = -1.0;
        CHECK(m2.source_energy(Eigen::Vector2d(1.0, 3.0)) == 1.0);
    }
    SECTION("random vectors match dot-product oracle") {
        Mechanism m5;
        m5.atomic_masses["Q"] = 0.010;
        for (int i = 0; i < 5; ++i)
            m5.species.push_back({"S" + std::to_string(i), 0.010, 0.0, 1e-4, {{"Q", 1}}});
        m5.thermal_conductivity = 0.1;
        m5.heat_capacity = 1000.0;
        m5.fuel_composition = Vector::Zero(5);
        m5.fuel_composition[0] = 1.0;
        m5.oxidizer_composition = Vector::Zero(5);
        m5.oxidizer_composition[1] = 1.0;
        rng::Stream rs(5);
        for (int trial = 0; trial < 100; ++trial) {
            for (auto& sp : m5.species)
                sp.heat_of_formation = rs.uniform(-5e6, 5e6);
            m5.validate();
            Vector sdot(5);
            for (int i = 0; i < 5; ++i)
                sdot[i] = rs.uniform(-1e4, 1e4);
            double oracle = 0.0;
            for (int i = 0; i < 5; ++i)
                oracle -= m5.species[i].heat_of_formation * sdot[i];
            double got = m5.source_energy(sdot);
            CHECK_THAT(got, Catch::Matchers::WithinRel(oracle, 1e-15) ||
                                Catch::Matchers::WithinAbs(0.0, 1e-9));
        }
    }
    SECTION("length mismatch") {
        CHECK_THROWS_AS(m.source_energy(Vector::Zero(4)), DimensionError);
    }
}

TEST_CASE("mixture_fraction: boundaries and linearity") {
    Mechanism m = mech::builtin_mechanism();
    CHECK_THAT(m.mixture_fraction(m.fuel_composition), Catch::Matchers::WithinAbs(1.0, 1e-14));
    CHECK_THAT(m.mixture_fraction(m.oxidizer_composition), Catch::Matchers::WithinAbs(0.0, 1e-14));

    Vector mix = 0.5 * m.fuel_composition + 0.5 * m.oxidizer_composition;
    CHECK_THAT(m.mixture_fraction(mix), Catch::Matchers::WithinAbs(0.5, 1e-14));

    // affine in Y
    rng::Stream rs(9);
    for (int trial = 0; trial < 50; ++trial) {
        Vector y1 = random_mass_fractions(rs, m.n_species());
        Vector y2 = random_mass_fractions(rs, m.n_species());
        double a = rs.next_double();
        double lhs = m.mixture_fraction(a * y1 + (1.0 - a) * y2);
        double rhs = a * m.mixture_fraction(y1) + (1.0 - a) * m.mixture_fraction(y2);
        CHECK_THAT(lhs, Catch::Matchers::WithinAbs(rhs, 1e-12));
    }
}

TEST_CASE("mixture_fraction: invariant under balanced reaction extents") {
    Mechanism m = mech::builtin_mechanism();
    rng::Stream rs(13);
    const Index s = m.n_species();
    for (int trial = 0; trial < 50; ++trial) {
        Vector y = random_mass_fractions(rs, s);
        double z0 = m.mixture_fraction(y);
        Vector y2 = y;
        for (const auto& rx : m.reactions) {
            double extent = rs.uniform(-1e-3, 1e-3);
            for (const auto& [i, nu] : rx.reactant_stoich)
                y2[i] -= extent * nu * m.species[i].molar_mass;
            for (const auto& [i, nu] : rx.product_stoich)
                y2[i] += extent * nu * m.species[i].molar_mass;
        }
        CHECK_THAT(m.mixture_fraction(y2), Catch::Matchers::WithinAbs(z0, 1e-10));
    }
}

TEST_CASE("mixture_fraction: degenerate boundaries rejected") {
    Mechanism m = toy3(); // no C/H/O content, no coupling -> beta identically 0
    CHECK_THROWS_AS(m.mixture_fraction(Eigen::Vector3d(1.0, 0.0, 0.0)), ConfigError);
}

TEST_CASE("mechanism parser: builtin text round trip") {
    Mechanism m = mech::builtin_mechanism();
    CHECK(m.n_species() == 8);
    CHECK(m.n_reactions() == 5);
    CHECK(m.species[0].name == "CH4");
    CHECK(m.species[7].name == "N2");
    CHECK(m.closure_species() == 7);
    CHECK(m.pressure == 101325.0);
    // Diluted CH4 against enriched oxidizer: Z_st = 0.40/(0.40 + 4*0.45).
    CHECK_THAT(m.stoichiometric_mixture_fraction(), Catch::Matchers::WithinAbs(0.4 / 2.2, 5e-3));
}

TEST_CASE("mechanism parser: rejects bad input with line numbers") {
    std::string good = mech::builtin_mechanism_text();

    SECTION("unbalanced reaction") {
        std::string text = good;
        auto pos = text.find("1*CH4 + 1*O2 -> 1*CO + 1*H2 + 1*H2O");
        text.replace(pos, 35, "1*CH4 + 1*O2 -> 1*CO + 1*H2        ");
        try {
            mech::parse_mechanism(text, "bad.mech");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            std::string msg = e.what();
            CHECK(msg.find("unbalanced") != std::string::npos);
        }
    }
    SECTION("unknown species in reaction") {
        std::string text = good;
        auto pos = text.find("1*CH4 + 1*O2 ->");
        text.replace(pos, 5, "1*CH9");
        try {
            mech::parse_mechanism(text);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 13") != std::string::npos);
        }
    }
    SECTION("molar mass inconsistent with elements") {
        std::string text = good;
        auto pos = text.find("CH4  0.016");
        text.replace(pos, 10, "CH4  0.017");
        CHECK_THROWS_AS(mech::parse_mechanism(text), ParseError);
    }
    SECTION("missing fuel line") {
        std::string text = good;
        auto pos = text.find("fuel: CH4");
        text.replace(pos, 9, "#uel: CH4");
        CHECK_THROWS_AS(mech::parse_mechanism(text), ParseError);
    }
}

TEST_CASE("density: ideal gas at fixed pressure") {
    Mechanism m = mech::builtin_mechanism();
    Vector air = m.oxidizer_composition;
    double rho = m.density(air, 300.0);
    double mbar = 1.0 / (0.40 / 0.032 + 0.60 / 0.028);
    CHECK_THAT(rho, Catch::Matchers::WithinRel(101325.0 * mbar / (8.314462618 * 300.0), 1e-12));
}
