#pragma once

// Comparison methods: PCA progress variables, fixed domain-inspired PVs,
// unconstrained and nonlinear encoders (all delegating to the joint trainer),
// and a structured-grid tabulation + multilinear lookup.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chemtab/chemtab_model.hpp"
#include "chemtab/dataset.hpp"
#include "chemtab/errors.hpp"
#include "chemtab/text_io.hpp"
#include "chemtab/types.hpp"

namespace chemtab::baselines {

using data::Dataset;

// ---- PCA -------------------------------------------------------------------

struct PcaBasis {
    Matrix components;         // s x p, orthonormal columns
    Vector mean;               // s
    Vector explained_variance; // p, fractions of total variance, non-increasing

    void check() const {
        if (components.cols() != explained_variance.size() || components.rows() != mean.size())
            throw DimensionError("pca: inconsistent basis shapes");
        Matrix gram = components.transpose() * components;
        gram.diagonal().array() -= 1.0;
        if (gram.cwiseAbs().maxCoeff() > 1e-10)
            throw NumericError("pca: columns drifted from orthonormality");
        for (Index j = 1; j < explained_variance.size(); ++j)
            if (explained_variance[j] > explained_variance[j - 1])
                throw NumericError("pca: explained variance must be non-increasing");
    }
};

// Top-p eigenvectors of the column-centered covariance (population
// normalization), eigenvalues descending, each column's largest-magnitude
// entry made positive so the basis is reproducible.
inline PcaBasis pca_fit(const Matrix& Y, Index p) {
    const Index n = Y.rows(), s = Y.cols();
    if (p < 1)
        throw DomainError("pca_fit: p must be >= 1");
    if (p > s)
        throw DomainError("pca_fit: p exceeds the feature count");
    if (n <= p)
        throw DomainError("pca_fit: need more rows than components");

    PcaBasis basis;
    basis.mean = Y.colwise().mean();
    Matrix centered = Y.rowwise() - basis.mean.transpose();
    Matrix cov = centered.transpose() * centered / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success)
        throw NumericError("pca_fit: eigendecomposition failed");

    // ascending from the solver; take the top p in descending order
    double total = 0.0;
    for (Index j = 0; j < s; ++j)
        total += std::max(0.0, eig.eigenvalues()[j]);
    if (total <= 0.0)
        throw DomainError("pca_fit: zero-variance data");

    basis.components.resize(s, p);
    basis.explained_variance.resize(p);
    for (Index j = 0; j < p; ++j) {
        Index src = s - 1 - j;
        Vector col = eig.eigenvectors().col(src);
        Index arg = 0;
        col.cwiseAbs().maxCoeff(&arg);
        if (col[arg] < 0.0)
            col = -col;
        basis.components.col(j) = col;
        basis.explained_variance[j] = std::max(0.0, eig.eigenvalues()[src]) / total;
    }
    basis.check();
    return basis;
}

inline Matrix pca_transform(const PcaBasis& basis, const Matrix& Y) {
    if (Y.cols() != basis.components.rows())
        throw DimensionError("pca_transform: feature count does not match the basis");
    return (Y.rowwise() - basis.mean.transpose()) * basis.components;
}

// rows = input dims (mean + loadings); final row carries the
// explained-variance fractions.
inline void pca_export_csv(const PcaBasis& basis, const std::vector<std::string>& dim_names,
                           const std::string& path) {
    if (static_cast<Index>(dim_names.size()) != basis.components.rows())
        throw DimensionError("pca_export_csv: one name per input dimension required");
    std::ostringstream ss;
    ss << "dim,mean";
    for (Index j = 0; j < basis.components.cols(); ++j)
        ss << ",pc_" << (j + 1);
    ss << "\n";
    for (Index i = 0; i < basis.components.rows(); ++i) {
        ss << dim_names[static_cast<std::size_t>(i)] << ',' << io::format_g17(basis.mean[i]);
        for (Index j = 0; j < basis.components.cols(); ++j)
            ss << ',' << io::format_g17(basis.components(i, j));
        ss << "\n";
    }
    ss << "explained_variance,";
    for (Index j = 0; j < basis.explained_variance.size(); ++j)
        ss << ',' << io::format_g17(basis.explained_variance[j]);
    ss << "\n";
    io::write_file(path, ss.str());
}

// ---- variants ---------------------------------------------------------

enum class VariantKind { FGM_CPVG, PCA_PVG, UL_ENC, NL_ENC, CT };

struct VariantPlan {
    VariantKind kind = VariantKind::CT;
    std::string name;
    model::ModelSpec spec;
    model::ConstraintConfig constraints;
};

inline const std::map<std::string, double>& default_fgm_weights() {
    // classical reaction-progress sum over major products
    static const std::map<std::string, double> w = {
        {"CO2", 1.0}, {"H2O", 1.0}, {"CO", 1.0}, {"H2", 1.0}};
    return w;
}

// Weighted-species column for the classical progress variable; species the
// mechanism lacks are skipped with a warning.
inline Matrix fgm_weight_column(const std::vector<std::string>& species,
                                const std::map<std::string, double>& weights =
                                    default_fgm_weights()) {
    Matrix W = Matrix::Zero(static_cast<Index>(species.size()), 1);
    Index hits = 0;
    for (const auto& [name, weight] : weights) {
        auto at = std::find(species.begin(), species.end(), name);
        if (at == species.end()) {
            std::cerr << "chemtab: FGM progress-variable species " << name << " missing, skipped\n";
            continue;
        }
        W(static_cast<Index>(at - species.begin()), 0) = weight;
        ++hits;
    }
    if (hits == 0)
        throw ConfigError("fgm_weight_column: no progress-variable species in this mechanism");
    return W;
}

// Builds the training recipe for one comparison method. All variants share
// the trunk/heads; they differ in how the progress variables are produced.
inline VariantPlan make_variant(VariantKind kind, Index p, const Dataset& train,
                                const model::ModelSpec& base = {},
                                const model::ConstraintConfig& ct_flags =
                                    model::ConstraintConfig::all(),
                                const std::map<std::string, double>& fgm_weights =
                                    default_fgm_weights()) {
    VariantPlan plan;
    plan.kind = kind;
    plan.spec = base;
    plan.spec.p = p;
    plan.spec.encoder = model::EncoderKind::Linear;
    plan.spec.freeze_encoder = false;
    plan.spec.init_W.resize(0, 0);
    plan.spec.enc_center.resize(0);
    plan.constraints = model::ConstraintConfig::none();

    switch (kind) {
    case VariantKind::FGM_CPVG:
        plan.name = "FGM_CPVG";
        plan.spec.p = 1; // Z_mix + one classical progress variable
        plan.spec.init_W = fgm_weight_column(train.species_names, fgm_weights);
        plan.spec.freeze_encoder = true;
        break;
    case VariantKind::PCA_PVG: {
        plan.name = "PCA_PVG";
        PcaBasis basis = pca_fit(train.Y, p);
        plan.spec.init_W = basis.components;
        plan.spec.enc_center = basis.mean;
        plan.spec.freeze_encoder = true;
        break;
    }
    case VariantKind::UL_ENC:
        plan.name = "UL_ENC";
        break;
    case VariantKind::NL_ENC:
        plan.name = "NL_ENC";
        plan.spec.encoder = model::EncoderKind::Nonlinear;
        break;
    case VariantKind::CT:
        plan.name = "CT(" + ct_flags.flags_string() + ")";
        plan.constraints = ct_flags;
        break;
    default:
        throw DomainError("make_variant: unknown variant kind");
    }
    return plan;
}

// Variant names as accepted on the command line / in configs:
// FGM_CPVG, PCA_PVG, UL_ENC, NL_ENC, CT(NONE), CT(UN), CT(UN+WO+AR), CT(ALL)...
inline VariantPlan parse_variant(const std::string& text, Index p, const Dataset& train,
                                 const model::ModelSpec& base = {}) {
    if (text == "FGM_CPVG")
        return make_variant(VariantKind::FGM_CPVG, p, train, base);
    if (text == "PCA_PVG")
        return make_variant(VariantKind::PCA_PVG, p, train, base);
    if (text == "UL_ENC")
        return make_variant(VariantKind::UL_ENC, p, train, base);
    if (text == "NL_ENC")
        return make_variant(VariantKind::NL_ENC, p, train, base);
    if (text.rfind("CT(", 0) == 0 && text.back() == ')') {
        std::string flags = text.substr(3, text.size() - 4);
        model::ConstraintConfig cfg;
        if (flags == "ALL") {
            cfg = model::ConstraintConfig::all();
        } else if (flags != "NONE") {
            for (const auto& tok : io::split(flags, '+')) {
                if (tok == "UN")
                    cfg.un = true;
                else if (tok == "WO")
                    cfg.wo = true;
                else if (tok == "AR")
                    cfg.ar = true;
                else
                    throw DomainError("parse_variant: unknown constraint flag '" + tok + "'");
            }
        }
        return make_variant(VariantKind::CT, p, train, base, cfg);
    }
    throw DomainError("parse_variant: unknown variant kind '" + text + "'");
}

// ---- tabulation + lookup -----------------------------------------------

// Grid resolution defaults follow the classical discretization ladder
// (finest along Z_mix, coarser per added progress variable).
inline std::vector<Index> default_grid_sizes(Index d) {
    if (d < 1 || d > 3)
        throw DomainError("default_grid_sizes: dimension count must be 1..3");
    static const Index ladder[3] = {200, 100, 50};
    return std::vector<Index>(ladder, ladder + d);
}

// Node-centered regular grid over PV space. Values live on grid nodes;
// building snaps each sample to its nearest node and averages, then fills
// empty nodes from the nearest filled ones (breadth-first, deterministic
// order). Lookup is multilinear over the enclosing cell with clamping.
struct LookupTable {
    std::vector<Vector> axes; // strictly increasing coordinates per dimension
    Matrix values;            // (prod of axis sizes) x m, row-major flat index

    Index dims() const { return static_cast<Index>(axes.size()); }
    Index outputs() const { return values.cols(); }

    Index flat_size() const {
        Index n = 1;
        for (const auto& ax : axes)
            n *= ax.size();
        return n;
    }

    void check() const {
        if (axes.empty() || axes.size() > 3)
            throw DomainError("lookup table: dimension count must be 1..3");
        for (const auto& ax : axes) {
            if (ax.size() < 2)
                throw DomainError("lookup table: each axis needs at least 2 nodes");
            for (Index i = 1; i < ax.size(); ++i)
                if (!(ax[i] > ax[i - 1]))
                    throw DomainError("lookup table: axis coordinates must increase strictly");
        }
        if (values.rows() != flat_size())
            throw DimensionError("lookup table: value rows must match the grid size");
    }
};

namespace detail {

inline Index flat_index(const LookupTable& t, const std::vector<Index>& idx) {
    Index flat = 0;
    for (std::size_t k = 0; k < idx.size(); ++k)
        flat = flat * t.axes[k].size() + idx[k];
    return flat;
}

} // namespace detail

inline LookupTable table_build(const Matrix& PV, const Matrix& vals,
                               const std::vector<Index>& grid_sizes) {
    const Index n = PV.rows(), d = PV.cols(), m = vals.cols();
    if (n == 0)
        throw DomainError("table_build: no samples");
    if (d < 1 || d > 3)
        throw DomainError("table_build: supports 1 to 3 progress variables");
    if (vals.rows() != n)
        throw DimensionError("table_build: sample and value row counts differ");
    if (static_cast<Index>(grid_sizes.size()) != d)
        throw DimensionError("table_build: one grid size per dimension required");

    LookupTable t;
    for (Index k = 0; k < d; ++k) {
        if (grid_sizes[static_cast<std::size_t>(k)] < 2)
            throw DomainError("table_build: grid sizes must be >= 2");
        double lo = PV.col(k).minCoeff(), hi = PV.col(k).maxCoeff();
        if (!(hi > lo))
            throw DomainError("table_build: axis " + std::to_string(k) + " has zero range");
        t.axes.push_back(
            Vector::LinSpaced(grid_sizes[static_cast<std::size_t>(k)], lo, hi));
    }

    const Index cells = t.flat_size();
    Matrix sums = Matrix::Zero(cells, m);
    std::vector<Index> counts(static_cast<std::size_t>(cells), 0);
    std::vector<Index> idx(static_cast<std::size_t>(d));
    for (Index r = 0; r < n; ++r) {
        for (Index k = 0; k < d; ++k) {
            const Vector& ax = t.axes[static_cast<std::size_t>(k)];
            double step = (ax[ax.size() - 1] - ax[0]) / static_cast<double>(ax.size() - 1);
            Index i = static_cast<Index>(std::llround((PV(r, k) - ax[0]) / step));
            idx[static_cast<std::size_t>(k)] = std::clamp(i, Index{0}, ax.size() - 1);
        }
        Index at = detail::flat_index(t, idx);
        sums.row(at) += vals.row(r);
        ++counts[static_cast<std::size_t>(at)];
    }

    t.values.resize(cells, m);
    std::deque<Index> queue;
    std::vector<char> filled(static_cast<std::size_t>(cells), 0);
    for (Index c = 0; c < cells; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
            t.values.row(c) =
                sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            filled[static_cast<std::size_t>(c)] = 1;
            queue.push_back(c);
        }
    }
    // nearest-neighbor fill, multi-source BFS over the grid graph
    while (!queue.empty()) {
        Index c = queue.front();
        queue.pop_front();
        // unflatten
        std::vector<Index> at(static_cast<std::size_t>(d));
        Index rem = c;
        for (Index k = d - 1; k >= 0; --k) {
            at[static_cast<std::size_t>(k)] = rem % t.axes[static_cast<std::size_t>(k)].size();
            rem /= t.axes[static_cast<std::size_t>(k)].size();
        }
        for (Index k = 0; k < d; ++k)
            for (int dir = -1; dir <= 1; dir += 2) {
                Index nk = at[static_cast<std::size_t>(k)] + dir;
                if (nk < 0 || nk >= t.axes[static_cast<std::size_t>(k)].size())
                    continue;
                std::vector<Index> nb = at;
                nb[static_cast<std::size_t>(k)] = nk;
                Index fc = detail::flat_index(t, nb);
                if (!filled[static_cast<std::size_t>(fc)]) {
                    t.values.row(fc) = t.values.row(c);
                    filled[static_cast<std::size_t>(fc)] = 1;
                    queue.push_back(fc);
                }
            }
    }
    t.check();
    return t;
}

inline Vector table_lookup(const LookupTable& t, const Vector& pv) {
    t.check();
    const Index d = t.dims();
    if (pv.size() != d)
        throw DimensionError("table_lookup: query dimension mismatch");
    if (!pv.allFinite())
        throw DomainError("table_lookup: non-finite query");

    std::vector<Index> base(static_cast<std::size_t>(d));
    std::vector<double> w(static_cast<std::size_t>(d));
    for (Index k = 0; k < d; ++k) {
        const Vector& ax = t.axes[static_cast<std::size_t>(k)];
        double x = std::clamp(pv[k], ax[0], ax[ax.size() - 1]);
        // largest segment start with ax[j] <= x, j in [0, size-2]
        Index j = 0;
        for (Index i = 1; i < ax.size() - 1; ++i)
            if (ax[i] <= x)
                j = i;
        base[static_cast<std::size_t>(k)] = j;
        w[static_cast<std::size_t>(k)] = (x - ax[j]) / (ax[j + 1] - ax[j]);
    }

    Vector out = Vector::Zero(t.outputs());
    const Index corners = Index{1} << d;
    std::vector<Index> idx(static_cast<std::size_t>(d));
    for (Index c = 0; c < corners; ++c) {
        double weight = 1.0;
        for (Index k = 0; k < d; ++k) {
            bool hi = (c >> k) & 1;
            idx[static_cast<std::size_t>(k)] = base[static_cast<std::size_t>(k)] + (hi ? 1 : 0);
            weight *= hi ? w[static_cast<std::size_t>(k)] : 1.0 - w[static_cast<std::size_t>(k)];
        }
        out += weight * t.values.row(detail::flat_index(t, idx)).transpose();
    }
    return out;
}

// Binary container: "CTLT" + version, u64 d, u64 m, per-dimension u64 axis
// size + coordinates, then the value block row-major.
inline void write_table(std::ostream& out, const LookupTable& t) {
    t.check();
    nn::detail::put_bytes(out, "CTLT", 4);
    nn::detail::put_u32(out, 1);
    nn::detail::put_u64(out, static_cast<std::uint64_t>(t.dims()));
    nn::detail::put_u64(out, static_cast<std::uint64_t>(t.outputs()));
    for (const auto& ax : t.axes) {
        nn::detail::put_u64(out, static_cast<std::uint64_t>(ax.size()));
        for (Index i = 0; i < ax.size(); ++i)
            nn::detail::put_f64(out, ax[i]);
    }
    for (Index r = 0; r < t.values.rows(); ++r)
        for (Index c = 0; c < t.values.cols(); ++c)
            nn::detail::put_f64(out, t.values(r, c));
}

inline LookupTable read_table(std::istream& in) {
    char magic[4];
    nn::detail::get_bytes(in, magic, 4);
    if (std::string_view(magic, 4) != "CTLT")
        throw ParseError("lookup table: bad magic");
    std::uint32_t version = nn::detail::get_u32(in);
    if (version != 1)
        throw ParseError("lookup table: unsupported version " + std::to_string(version));
    std::uint64_t d = nn::detail::get_u64(in);
    std::uint64_t m = nn::detail::get_u64(in);
    if (d < 1 || d > 3 || m < 1 || m > (1u << 20))
        throw ParseError("lookup table: implausible shape");
    LookupTable t;
    for (std::uint64_t k = 0; k < d; ++k) {
        std::uint64_t len = nn::detail::get_u64(in);
        if (len < 2 || len > (1u << 24))
            throw ParseError("lookup table: implausible axis length");
        Vector ax(static_cast<Index>(len));
        for (Index i = 0; i < ax.size(); ++i)
            ax[i] = nn::detail::get_f64(in);
        t.axes.push_back(std::move(ax));
    }
    t.values.resize(t.flat_size(), static_cast<Index>(m));
    for (Index r = 0; r < t.values.rows(); ++r)
        for (Index c = 0; c < t.values.cols(); ++c)
            t.values(r, c) = nn::detail::get_f64(in);
    t.check();
    return t;
}

inline void save_table(const std::string& path, const LookupTable& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write file: " + path);
    write_table(out, t);
}

inline LookupTable load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open file: " + path);
    return read_table(in);
}

} // namespace chemtab::baselines
