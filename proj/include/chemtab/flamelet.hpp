#pragma once

// 1-D steady laminar flamelet solver.
//
// Discrete system (finite volume, uniform grid, Dirichlet ends):
//   species i:  d/dx( rho*D_i dY_i/dx ) + sdot_i = 0
//   energy:     d/dx( kappa dT/dx + sum_i rho*D_i dY_i/dx * h0f_i )
//               - sum_i sdot_i h0f_i = 0
// Face diffusivities use the harmonic mean of the adjacent cell densities.
// One species (the closure species, N2 when present) is eliminated
// algebraically via Y_c = 1 - sum of the others, so every state satisfies
// sum_i Y_i = 1 exactly; the solved unknowns per interior node are the
// remaining s-1 mass fractions plus temperature.
//
// Steady states are found by pseudo-transient continuation: damped implicit
// Euler steps with an adaptive dt (x1.5 on success, halved on rejection),
// each step solved by Newton with an analytic diffusion Jacobian, a
// finite-difference chemistry Jacobian, and a block-tridiagonal solve.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chemtab/dataset.hpp"
#include "chemtab/errors.hpp"
#include "chemtab/mechanism.hpp"
#include "chemtab/types.hpp"

namespace chemtab::flame {

// Default generation protocol: 200-point grid, 2.9 mm widest domain, 100
// flames shrunk by 0.99 per step. With the shipped mechanism the sweep
// extinguishes after roughly 90 flames.
inline constexpr Index kDefaultGridPoints = 200;
inline constexpr double kDefaultDomainLength = 0.0029;
inline constexpr Index kDefaultFlames = 100;
inline constexpr double kDefaultShrink = 0.99;

struct Grid {
    Index n_points = 0;
    double domain_length = 0.0;
    Vector x;

    static Grid uniform(Index n, double length) {
        if (n < 3)
            throw DomainError("grid: need at least 3 points");
        if (!(length > 0.0))
            throw DomainError("grid: domain length must be positive");
        Grid g;
        g.n_points = n;
        g.domain_length = length;
        g.x = Vector::LinSpaced(n, 0.0, length);
        return g;
    }

    double dx() const { return domain_length / static_cast<double>(n_points - 1); }

    void check() const {
        if (n_points < 3 || !(domain_length > 0.0) || x.size() != n_points)
            throw DomainError("grid: invalid");
        for (Index i = 1; i < n_points; ++i)
            if (!(x[i] > x[i - 1]))
                throw DomainError("grid: coordinates must increase strictly");
    }
};

struct FlameletState {
    Matrix Y;   // n_points x s
    Vector T;   // n_points
    Vector rho; // n_points, derived from (Y, T) by the ideal-gas law

    void check() const {
        const Index n = T.size();
        if (Y.rows() != n || rho.size() != n)
            throw DimensionError("flamelet state: inconsistent row counts");
        for (Index j = 0; j < n; ++j) {
            if (!(T[j] > 0.0))
                throw DomainError("flamelet state: T must be positive at node " +
                                  std::to_string(j));
            double sum = Y.row(j).sum();
            if (std::abs(sum - 1.0) > 1e-6)
                throw DomainError("flamelet state: mass fractions at node " + std::to_string(j) +
                                  " sum to " + std::to_string(sum));
            if (Y.row(j).minCoeff() < -1e-9)
                throw DomainError("flamelet state: negative mass fraction at node " +
                                  std::to_string(j));
        }
    }
};

struct BoundaryConditions {
    Vector fuel_Y; // node 0
    double fuel_T = 300.0;
    Vector ox_Y; // node n-1
    double ox_T = 300.0;

    static BoundaryConditions from_mechanism(const mech::Mechanism& m, double fuel_T = 300.0,
                                             double ox_T = 300.0) {
        BoundaryConditions bc;
        bc.fuel_Y = m.fuel_composition;
        bc.ox_Y = m.oxidizer_composition;
        bc.fuel_T = fuel_T;
        bc.ox_T = ox_T;
        return bc;
    }

    void check(Index s) const {
        if (fuel_Y.size() != s || ox_Y.size() != s)
            throw DimensionError("boundary conditions: composition size mismatch");
        for (const Vector* v : {&fuel_Y, &ox_Y}) {
            if (v->minCoeff() < -1e-9 || std::abs(v->sum() - 1.0) > 1e-9)
                throw DomainError("boundary conditions: invalid mass-fraction vector");
        }
        if (!(fuel_T > 0.0) || !(ox_T > 0.0))
            throw DomainError("boundary conditions: temperatures must be positive");
    }
};

struct SolverControl {
    double tol = 1e-8;        // scaled steady residual norm
    Index max_steps = 2000;   // pseudo-time step attempts (rejections count)
    double dt0 = 1e-6;        // s
    double dt_min = 1e-15;
    double dt_max = 1e6;
    Index max_newton = 10;
    double newton_tol = 1e-9; // scaled Newton update size
    int verbose = 0;          // 1: per-step trace on stderr
};

struct FlameletSolution {
    double flame_key = 0.0; // = domain length, a monotone proxy for strain
    Vector x;               // node coordinates
    FlameletState state;
    Matrix sdot;   // n_points x s
    Vector zmix;   // n_points
    Vector souener; // n_points
    bool converged = false;
    bool extinguished = false;
    double residual_norm = std::numeric_limits<double>::infinity();
    Index pseudo_steps = 0;
};

namespace detail {

inline void sync_rho(const mech::Mechanism& m, FlameletState& st) {
    for (Index j = 0; j < st.T.size(); ++j)
        st.rho[j] = m.density(st.Y.row(j).transpose(), st.T[j]);
}

// Raw residuals of the discrete system, one row per node. Boundary rows hold
// the Dirichlet mismatch (state minus bc). Interior rows hold the s-1 solved
// species equations followed by energy. `mag` receives the sum of the
// magnitudes of the assembled terms, used to scale the norm.
struct ResidualWork {
    Matrix R;   // n x B
    Matrix mag; // n x B
    Matrix sdot;  // n x s, local production rates
    Vector souener; // n
};

inline void assemble_residual(const mech::Mechanism& m, const Grid& grid,
                              const BoundaryConditions& bc, const FlameletState& st,
                              ResidualWork& w) {
    const Index n = grid.n_points;
    const Index s = m.n_species();
    const Index c = m.closure_species();
    const Index B = s; // s-1 species + temperature
    const double dx = grid.dx();

    w.R.setZero(n, B);
    w.mag.setZero(n, B);
    w.sdot.resize(n, s);
    w.souener.resize(n);

    for (Index j = 0; j < n; ++j) {
        w.sdot.row(j) = m.production_rates(st.Y.row(j).transpose(), st.T[j], st.rho[j]).transpose();
        w.souener[j] = m.source_energy(w.sdot.row(j).transpose());
    }

    // Dirichlet rows: plain mismatch, scaled against max(1, |bc|).
    auto boundary_row = [&](Index node, const Vector& Yb, double Tb) {
        Index k = 0;
        for (Index i = 0; i < s; ++i) {
            if (i == c)
                continue;
            w.R(node, k) = st.Y(node, i) - Yb[i];
            w.mag(node, k) = std::max(1.0, std::abs(Yb[i]));
            ++k;
        }
        w.R(node, B - 1) = st.T[node] - Tb;
        w.mag(node, B - 1) = std::max(1.0, std::abs(Tb));
    };
    boundary_row(0, bc.fuel_Y, bc.fuel_T);
    boundary_row(n - 1, bc.ox_Y, bc.ox_T);

    // Harmonic-mean face densities; face f lies between nodes f and f+1.
    Vector hrho(n - 1);
    for (Index f = 0; f < n - 1; ++f) {
        double a = st.rho[f], b = st.rho[f + 1];
        hrho[f] = 2.0 * a * b / (a + b);
    }

    const auto& sp = m.species;
    for (Index j = 1; j + 1 < n; ++j) {
        const double hl = hrho[j - 1] / (dx * dx);
        const double hr = hrho[j] / (dx * dx);
        double eflux = 0.0, emag = 0.0;
        Index k = 0;
        for (Index i = 0; i < s; ++i) {
            const double D = sp[static_cast<std::size_t>(i)].diffusivity;
            const double fr = D * hr * (st.Y(j + 1, i) - st.Y(j, i));
            const double fl = D * hl * (st.Y(j, i) - st.Y(j - 1, i));
            const double h0 = sp[static_cast<std::size_t>(i)].heat_of_formation;
            eflux += (fr - fl) * h0;
            emag += (std::abs(fr) + std::abs(fl)) * std::abs(h0);
            if (i == c)
                continue;
            w.R(j, k) = (fr - fl) + w.sdot(j, i);
            w.mag(j, k) = std::abs(fr) + std::abs(fl) + std::abs(w.sdot(j, i));
            ++k;
        }
        // kappa is constant, so the face value needs no averaging:
        const double tr = m.thermal_conductivity / (dx * dx) * (st.T[j + 1] - st.T[j]);
        const double tl = m.thermal_conductivity / (dx * dx) * (st.T[j] - st.T[j - 1]);
        w.R(j, B - 1) = (tr - tl) + eflux + w.souener[j];
        w.mag(j, B - 1) = std::abs(tr) + std::abs(tl) + emag + std::abs(w.souener[j]);
    }
}

// Scaled L2 norm: each equation is divided by the largest term magnitude seen
// for that equation class (per solved variable, across all nodes), so the
// norm is invariant under rescaling any single equation and is exactly zero
// only for an exact discrete solution.
inline double scaled_norm(const ResidualWork& w) {
    const Index n = w.R.rows(), B = w.R.cols();
    double acc = 0.0;
    for (Index k = 0; k < B; ++k) {
        double scale = std::max(w.mag.col(k).maxCoeff(), 1e-300);
        acc += (w.R.col(k) / scale).squaredNorm();
    }
    return std::sqrt(acc / static_cast<double>(n * B));
}

inline bool within_bounds(const FlameletState& st, Index /*c*/) {
    if (!st.Y.allFinite() || !st.T.allFinite())
        return false;
    if (st.Y.minCoeff() < -9e-7 || st.Y.maxCoeff() > 1.0 + 1e-6)
        return false;
    if (st.T.minCoeff() < 50.0 || st.T.maxCoeff() > 6000.0)
        return false;
    return true;
}

// Solve the block-tridiagonal system with blocks (A_j, B_j, C_j) by forward
// elimination; rhs rows correspond to blocks. Returns false if the solve
// produces non-finite values (singular pivot block).
inline bool block_thomas(std::vector<Matrix>& A, std::vector<Matrix>& Bd, std::vector<Matrix>& C,
                         Matrix& rhs) {
    const std::size_t mblocks = Bd.size();
    const Index B = Bd[0].rows();
    std::vector<Eigen::PartialPivLU<Matrix>> lus(mblocks);
    std::vector<Matrix> Cp(mblocks);
    lus[0].compute(Bd[0]);
    Cp[0] = lus[0].solve(C[0]);
    rhs.row(0) = lus[0].solve(rhs.row(0).transpose()).transpose();
    for (std::size_t j = 1; j < mblocks; ++j) {
        Matrix Bj = Bd[j] - A[j] * Cp[j - 1];
        lus[j].compute(Bj);
        if (j + 1 < mblocks)
            Cp[j] = lus[j].solve(C[j]);
        Vector r = rhs.row(j).transpose() - A[j] * rhs.row(j - 1).transpose();
        rhs.row(j) = lus[j].solve(r).transpose();
    }
    for (std::size_t j = mblocks - 1; j-- > 0;)
        rhs.row(static_cast<Index>(j)) -=
            (Cp[j] * rhs.row(static_cast<Index>(j) + 1).transpose()).transpose();
    for (Index i = 0; i < static_cast<Index>(mblocks) * B; ++i)
        if (!std::isfinite(rhs(i / B, i % B)))
            return false;
    return true;
}

} // namespace detail

inline double residual(const mech::Mechanism& m, const Grid& grid, const BoundaryConditions& bc,
                       const FlameletState& st) {
    grid.check();
    bc.check(m.n_species());
    if (st.Y.rows() != grid.n_points || st.Y.cols() != m.n_species())
        throw DimensionError("residual: state shape does not match grid/mechanism");
    detail::ResidualWork w;
    detail::assemble_residual(m, grid, bc, st, w);
    return detail::scaled_norm(w);
}

// Linear interpolation in the relative coordinate x/L, used to warm-start a
// continuation step on a shrunk domain.
inline FlameletState interpolate_state(const FlameletState& st, const Grid& from, const Grid& to) {
    FlameletState out;
    out.Y.resize(to.n_points, st.Y.cols());
    out.T.resize(to.n_points);
    out.rho.resize(to.n_points);
    for (Index j = 0; j < to.n_points; ++j) {
        double xi = to.x[j] / to.domain_length * from.domain_length;
        Index lo = 0;
        while (lo + 2 < from.n_points && from.x[lo + 1] <= xi)
            ++lo;
        double t = (xi - from.x[lo]) / (from.x[lo + 1] - from.x[lo]);
        t = std::clamp(t, 0.0, 1.0);
        out.Y.row(j) = (1.0 - t) * st.Y.row(lo) + t * st.Y.row(lo + 1);
        out.T[j] = (1.0 - t) * st.T[lo] + t * st.T[lo + 1];
        out.rho[j] = (1.0 - t) * st.rho[lo] + t * st.rho[lo + 1];
    }
    return out;
}

// Linear profiles between the boundary states plus a Gaussian temperature
// bump centered at the stoichiometric mixture fraction, to ignite flame 0.
inline FlameletState initial_state(const mech::Mechanism& m, const Grid& grid,
                                   const BoundaryConditions& bc, double ignition_T = 2200.0,
                                   double bump_width = 0.12) {
    grid.check();
    bc.check(m.n_species());
    const Index n = grid.n_points;
    const Index s = m.n_species();
    const Index c = m.closure_species();
    FlameletState st;
    st.Y.resize(n, s);
    st.T.resize(n);
    st.rho.resize(n);
    const double zst = m.stoichiometric_mixture_fraction();
    const double xi_st = 1.0 - zst; // the linear blend has Z = 1 - x/L
    const double amp = std::max(0.0, ignition_T - std::max(bc.fuel_T, bc.ox_T));
    for (Index j = 0; j < n; ++j) {
        double xi = grid.x[j] / grid.domain_length;
        st.Y.row(j) = ((1.0 - xi) * bc.fuel_Y + xi * bc.ox_Y).transpose();
        double other = st.Y.row(j).sum() - st.Y(j, c);
        st.Y(j, c) = 1.0 - other;
        double tlin = (1.0 - xi) * bc.fuel_T + xi * bc.ox_T;
        double u = (xi - xi_st) / bump_width;
        st.T[j] = tlin + amp * std::exp(-u * u);
    }
    st.T[0] = bc.fuel_T;
    st.T[n - 1] = bc.ox_T;
    detail::sync_rho(m, st);
    return st;
}

inline FlameletSolution solve_steady(const mech::Mechanism& m, const Grid& grid,
                                     const BoundaryConditions& bc, const FlameletState& init,
                                     const SolverControl& control = {}) {
    grid.check();
    bc.check(m.n_species());
    init.check();
    if (init.Y.rows() != grid.n_points || init.Y.cols() != m.n_species())
        throw DimensionError("solve_steady: init shape does not match grid/mechanism");

    const Index n = grid.n_points;
    const Index s = m.n_species();
    const Index c = m.closure_species();
    const Index B = s;
    const Index mint = n - 2; // interior nodes
    const double dx = grid.dx();
    const double dx2 = dx * dx;
    const auto& sp = m.species;

    FlameletState st = init;
    // Impose the Dirichlet values exactly.
    st.Y.row(0) = bc.fuel_Y.transpose();
    st.T[0] = bc.fuel_T;
    st.Y.row(n - 1) = bc.ox_Y.transpose();
    st.T[n - 1] = bc.ox_T;
    detail::sync_rho(m, st);

    detail::ResidualWork w;
    auto steady_norm = [&](const FlameletState& state) {
        detail::assemble_residual(m, grid, bc, state, w);
        return detail::scaled_norm(w);
    };

    auto report_nonfinite = [&](Index step) {
        Index worst = -1;
        double worst_val = 0.0;
        for (Index j = 0; j < w.R.rows(); ++j)
            for (Index k = 0; k < w.R.cols(); ++k)
                if (!std::isfinite(w.R(j, k))) {
                    worst = j;
                    worst_val = w.R(j, k);
                }
        (void)worst_val;
        throw SolverError("solve_steady: non-finite residual at pseudo-step " +
                          std::to_string(step) + ", worst cell " + std::to_string(worst));
    };

    double norm = steady_norm(st);
    if (!std::isfinite(norm))
        report_nonfinite(0);

    // Solved-variable indexing: per interior node, the s-1 non-closure
    // species in mechanism order, then T.
    std::vector<Index> solved; // solved slot -> species index
    for (Index i = 0; i < s; ++i)
        if (i != c)
            solved.push_back(i);

    double dt = control.dt0;
    Index step = 0;
    std::vector<Matrix> JA(static_cast<std::size_t>(mint)), JB(static_cast<std::size_t>(mint)),
        JC(static_cast<std::size_t>(mint));
    Matrix rhs(mint, B);
    Vector hrho(n - 1);

    while (step < control.max_steps && norm > control.tol) {
        ++step;
        const FlameletState st_old = st;
        const Vector rho_old = st.rho;

        FlameletState u = st;
        bool newton_ok = false;
        for (Index it = 0; it < control.max_newton; ++it) {
            detail::sync_rho(m, u);
            detail::assemble_residual(m, grid, bc, u, w);
            if (!w.R.allFinite())
                break;
            for (Index f = 0; f < n - 1; ++f)
                hrho[f] = 2.0 * u.rho[f] * u.rho[f + 1] / (u.rho[f] + u.rho[f + 1]);

            // rhs = -F where F = M (u - u_old)/dt - R_steady(u)
            for (Index j = 1; j + 1 < n; ++j) {
                const Index b = j - 1;
                const double rj = rho_old[j];
                for (Index k = 0; k < B - 1; ++k) {
                    const Index i = solved[static_cast<std::size_t>(k)];
                    rhs(b, k) = -(rj * (u.Y(j, i) - st_old.Y(j, i)) / dt - w.R(j, k));
                }
                rhs(b, B - 1) =
                    -(rj * m.heat_capacity * (u.T[j] - st_old.T[j]) / dt - w.R(j, B - 1));
            }

            // Jacobian blocks: J = M/dt - dR/du with frozen face densities.
            for (Index j = 1; j + 1 < n; ++j) {
                const Index b = j - 1;
                Matrix& Aj = JA[static_cast<std::size_t>(b)];
                Matrix& Bj = JB[static_cast<std::size_t>(b)];
                Matrix& Cj = JC[static_cast<std::size_t>(b)];
                Aj.setZero(B, B);
                Bj.setZero(B, B);
                Cj.setZero(B, B);
                const double hl = hrho[j - 1] / dx2;
                const double hr = hrho[j] / dx2;
                const double Dc = sp[static_cast<std::size_t>(c)].diffusivity;
                const double hc = sp[static_cast<std::size_t>(c)].heat_of_formation;
                for (Index k = 0; k < B - 1; ++k) {
                    const Index i = solved[static_cast<std::size_t>(k)];
                    const double D = sp[static_cast<std::size_t>(i)].diffusivity;
                    Aj(k, k) = -D * hl;
                    Cj(k, k) = -D * hr;
                    Bj(k, k) = D * (hl + hr);
                    const double e = D * sp[static_cast<std::size_t>(i)].heat_of_formation -
                                     Dc * hc; // closure substitution
                    Aj(B - 1, k) = -hl * e;
                    Cj(B - 1, k) = -hr * e;
                    Bj(B - 1, k) = (hl + hr) * e;
                }
                const double kp = m.thermal_conductivity / dx2;
                Aj(B - 1, B - 1) = -kp;
                Cj(B - 1, B - 1) = -kp;
                Bj(B - 1, B - 1) = 2.0 * kp;

                // Chemistry by forward differences on the local source.
                Vector y0 = u.Y.row(j).transpose();
                const double T0 = u.T[j];
                Vector sd0 = w.sdot.row(j).transpose();
                for (Index k = 0; k < B; ++k) {
                    Vector yp = y0;
                    double Tp = T0;
                    double h;
                    if (k < B - 1) {
                        const Index i = solved[static_cast<std::size_t>(k)];
                        h = 1.5e-8;
                        yp[i] += h;
                        yp[c] -= h;
                    } else {
                        h = 1.5e-8 * std::max(std::abs(T0), 300.0);
                        Tp += h;
                    }
                    Vector sdp = m.production_rates(yp, Tp, m.density(yp, Tp));
                    double de = 0.0;
                    for (Index q = 0; q < B - 1; ++q) {
                        const Index i = solved[static_cast<std::size_t>(q)];
                        double dsdu = (sdp[i] - sd0[i]) / h;
                        Bj(q, k) -= dsdu;
                    }
                    for (Index i = 0; i < s; ++i)
                        de += (sdp[i] - sd0[i]) / h *
                              sp[static_cast<std::size_t>(i)].heat_of_formation;
                    Bj(B - 1, k) += de; // d souener/du = -sum h0f dS/du
                }

                // Transient mass matrix.
                for (Index k = 0; k < B - 1; ++k)
                    Bj(k, k) += rho_old[j] / dt;
                Bj(B - 1, B - 1) += rho_old[j] * m.heat_capacity / dt;
            }

            if (!detail::block_thomas(JA, JB, JC, rhs))
                break;

            // Bounds-damped update.
            double lambda = 1.0;
            FlameletState trial;
            bool ok = false;
            for (int half = 0; half < 7; ++half) {
                trial = u;
                for (Index j = 1; j + 1 < n; ++j) {
                    const Index b = j - 1;
                    double other = 0.0;
                    for (Index k = 0; k < B - 1; ++k) {
                        const Index i = solved[static_cast<std::size_t>(k)];
                        trial.Y(j, i) += lambda * rhs(b, k);
                        other += trial.Y(j, i);
                    }
                    trial.Y(j, c) = 1.0 - other;
                    trial.T[j] += lambda * rhs(b, B - 1);
                }
                if (detail::within_bounds(trial, c)) {
                    ok = true;
                    break;
                }
                lambda *= 0.5;
            }
            if (!ok)
                break;
            u = trial;

            double dmax = 0.0;
            for (Index b = 0; b < mint; ++b) {
                for (Index k = 0; k < B - 1; ++k)
                    dmax = std::max(dmax, std::abs(lambda * rhs(b, k)));
                dmax = std::max(dmax, std::abs(lambda * rhs(b, B - 1)) / 1000.0);
            }
            if (dmax <= control.newton_tol) {
                newton_ok = true;
                break;
            }
        }

        if (!newton_ok) {
            if (control.verbose)
                std::fprintf(stderr, "  step %ld REJECT dt=%.3e norm=%.3e\n", long(step), dt,
                             norm);
            dt *= 0.5;
            if (dt < control.dt_min)
                break; // give up; report non-convergence below
            continue;
        }

        detail::sync_rho(m, u);
        double new_norm = steady_norm(u);
        if (!std::isfinite(new_norm))
            report_nonfinite(step);
        st = u;
        norm = new_norm;
        if (control.verbose)
            std::fprintf(stderr, "  step %ld accept dt=%.3e norm=%.3e maxT=%.0f\n", long(step),
                         dt, norm, st.T.maxCoeff());
        dt = std::min(dt * 1.5, control.dt_max);
    }

    // Clean up round-off negatives so converged states satisfy the state
    // invariants; keep the cleanup only if it does not degrade the residual.
    if (norm <= control.tol) {
        FlameletState cleaned = st;
        bool touched = false;
        for (Index j = 1; j + 1 < n; ++j) {
            double other = 0.0;
            for (Index i = 0; i < s; ++i) {
                if (i == c)
                    continue;
                if (cleaned.Y(j, i) < 0.0 && cleaned.Y(j, i) > -1e-7) {
                    cleaned.Y(j, i) = 0.0;
                    touched = true;
                }
                other += cleaned.Y(j, i);
            }
            cleaned.Y(j, c) = 1.0 - other;
        }
        if (touched) {
            detail::sync_rho(m, cleaned);
            double cleaned_norm = steady_norm(cleaned);
            if (cleaned_norm <= control.tol) {
                st = cleaned;
                norm = cleaned_norm;
            }
        }
    }

    FlameletSolution sol;
    sol.flame_key = grid.domain_length;
    sol.x = grid.x;
    sol.state = st;
    sol.converged = norm <= control.tol;
    sol.residual_norm = norm;
    sol.pseudo_steps = step;
    sol.sdot.resize(n, s);
    sol.zmix.resize(n);
    sol.souener.resize(n);
    for (Index j = 0; j < n; ++j) {
        sol.sdot.row(j) =
            m.production_rates(st.Y.row(j).transpose(), st.T[j], st.rho[j]).transpose();
        sol.souener[j] = m.source_energy(sol.sdot.row(j).transpose());
        sol.zmix[j] = m.mixture_fraction(st.Y.row(j).transpose());
    }
    return sol;
}

inline bool detect_extinction(const FlameletSolution& sol, const BoundaryConditions& bc,
                              double threshold = 150.0) {
    double boundary_max = std::max(bc.fuel_T, bc.ox_T);
    return sol.state.T.maxCoeff() - boundary_max < threshold;
}

struct SweepOptions {
    SolverControl control;
    double extinction_threshold = 150.0;
    double ignition_T = 2200.0;
};

// Continuation sweep over shrinking domains L0*shrink^j. Stops early when a
// flame extinguishes (the extinguished solution is returned, flagged) or when
// a later flame fails to converge (that solution is not returned).
inline std::vector<FlameletSolution> strain_sweep(const mech::Mechanism& m,
                                                  const BoundaryConditions& bc, Index n_flames,
                                                  double shrink, const Grid& grid0,
                                                  const SweepOptions& opts = {}) {
    if (n_flames < 1)
        throw DomainError("strain_sweep: need at least one flame");
    if (!(shrink > 0.0 && shrink < 1.0))
        throw DomainError("strain_sweep: shrink factor must lie in (0,1)");
    grid0.check();

    std::vector<FlameletSolution> out;
    Grid prev_grid = grid0;
    FlameletState init = initial_state(m, grid0, bc, opts.ignition_T);
    for (Index j = 0; j < n_flames; ++j) {
        Grid grid = (j == 0) ? grid0
                             : Grid::uniform(grid0.n_points,
                                             grid0.domain_length * std::pow(shrink, double(j)));
        if (j > 0)
            init = interpolate_state(out.back().state, prev_grid, grid);
        FlameletSolution sol = solve_steady(m, grid, bc, init, opts.control);
        if (j == 0 && !sol.converged)
            throw SolverError("strain_sweep: first flame did not converge (residual " +
                              io::format_g17(sol.residual_norm) + ")");
        if (!sol.converged)
            break;
        sol.extinguished = detect_extinction(sol, bc, opts.extinction_threshold);
        out.push_back(std::move(sol));
        if (out.back().extinguished)
            break;
        prev_grid = grid;
    }
    return out;
}

// Stack solutions into the flat training corpus; rows from extinguished
// flames are dropped.
inline data::Dataset assemble_dataset(const std::vector<FlameletSolution>& sols,
                                      const std::vector<std::string>& species_names) {
    if (sols.empty())
        throw DomainError("assemble_dataset: need at least one solution");
    const Index s = static_cast<Index>(species_names.size());
    Index n = 0;
    for (const auto& sol : sols) {
        if (sol.state.Y.cols() != s || sol.sdot.cols() != s)
            throw DimensionError("assemble_dataset: inconsistent species count across solutions");
        if (!sol.extinguished)
            n += sol.state.T.size();
    }
    data::Dataset ds;
    ds.species_names = species_names;
    ds.flame_key.resize(n);
    ds.x.resize(n);
    ds.zmix.resize(n);
    ds.temperature.resize(n);
    ds.souener.resize(n);
    ds.Y.resize(n, s);
    ds.src.resize(n, s);
    Index r = 0;
    for (const auto& sol : sols) {
        if (sol.extinguished)
            continue;
        for (Index j = 0; j < sol.state.T.size(); ++j, ++r) {
            ds.flame_key[r] = sol.flame_key;
            ds.x[r] = sol.x[j];
            ds.zmix[r] = sol.zmix[j];
            ds.temperature[r] = sol.state.T[j];
            ds.souener[r] = sol.souener[j];
            ds.Y.row(r) = sol.state.Y.row(j);
            ds.src.row(r) = sol.sdot.row(j);
        }
    }
    return ds;
}

} // namespace chemtab::flame
