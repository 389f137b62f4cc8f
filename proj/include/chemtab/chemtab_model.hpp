#pragma once

// Joint model: constrained linear encoder W (mass fractions -> progress
// variables), Z_mix concatenation, shared trunk with two heads (key-species
// source terms and source energy), penalty-augmented MAE loss, Adam training
// with early stopping, prediction and conformity reporting.
//
// Targets are z-scored inside the model (stats fitted on the training split)
// and predictions are mapped back to raw units, so reported MAEs are raw while
// optimization sees O(1) quantities; with raw 1e9-scale targets the unit-norm
// and orthogonality penalties would be invisible next to the prediction
// gradient.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "chemtab/dataset.hpp"
#include "chemtab/errors.hpp"
#include "chemtab/nn.hpp"
#include "chemtab/rng.hpp"
#include "chemtab/text_io.hpp"
#include "chemtab/types.hpp"

namespace chemtab::model {

using data::Dataset;

// ---- encoder primitives -----------------------------------------------

// Linear embedding: PVs are exact linear combinations of mass fractions,
// no bias, no activation.
inline Matrix embed(const Matrix& W, const Matrix& Y) {
    if (Y.cols() != W.rows())
        throw DimensionError("embed: Y has " + std::to_string(Y.cols()) +
                             " species columns, W expects " + std::to_string(W.rows()));
    return Y * W;
}

// Z_mix rides along as progress-variable column 0.
inline Matrix concat_zmix(const Matrix& enc, const Vector& zmix) {
    if (enc.rows() != zmix.size())
        throw DimensionError("concat_zmix: row counts differ");
    Matrix pv(enc.rows(), enc.cols() + 1);
    pv.col(0) = zmix;
    pv.rightCols(enc.cols()) = enc;
    return pv;
}

// ---- constraint penalties ----------------------------------------------

// sum_j (||w_j|| - 1)^2 over columns of W
inline double penalty_un(const Matrix& W) {
    double acc = 0.0;
    for (Index j = 0; j < W.cols(); ++j) {
        double d = W.col(j).norm() - 1.0;
        acc += d * d;
    }
    return acc;
}

inline Matrix penalty_un_grad(const Matrix& W) {
    Matrix g = Matrix::Zero(W.rows(), W.cols());
    for (Index j = 0; j < W.cols(); ++j) {
        double n = W.col(j).norm();
        if (n > 0.0)
            g.col(j) = 2.0 * (n - 1.0) / n * W.col(j);
    }
    return g;
}

// ||W^T W - I||_F^2
inline double penalty_wo(const Matrix& W) {
    Matrix gram = W.transpose() * W;
    gram.diagonal().array() -= 1.0;
    return gram.squaredNorm();
}

inline Matrix penalty_wo_grad(const Matrix& W) {
    Matrix gram = W.transpose() * W;
    gram.diagonal().array() -= 1.0;
    return 4.0 * W * gram;
}

// Sum of squared off-diagonal entries of the batch covariance of the PV
// columns (batch-centered, normalized by n). Decorrelates progress
// variables, Z_mix column included.
inline double penalty_ar(const Matrix& PV) {
    const Index n = PV.rows();
    if (n < 2)
        throw DomainError("penalty_ar: need at least 2 rows");
    Matrix centered = PV.rowwise() - PV.colwise().mean();
    Matrix cov = centered.transpose() * centered / static_cast<double>(n);
    cov.diagonal().setZero();
    return cov.squaredNorm();
}

// d/dPV of penalty_ar; the centering projector is a no-op on the result
// because centered columns stay centered under right-multiplication.
inline Matrix penalty_ar_grad(const Matrix& PV) {
    const Index n = PV.rows();
    if (n < 2)
        throw DomainError("penalty_ar: need at least 2 rows");
    Matrix centered = PV.rowwise() - PV.colwise().mean();
    Matrix cov = centered.transpose() * centered / static_cast<double>(n);
    cov.diagonal().setZero();
    return 4.0 / static_cast<double>(n) * centered * cov;
}

// ---- model -----------------------------------------------------------------

struct ConstraintConfig {
    bool un = false, wo = false, ar = false;
    double lambda_un = 1.0, lambda_wo = 1.0, lambda_ar = 1.0;

    void check() const {
        if (lambda_un < 0 || lambda_wo < 0 || lambda_ar < 0)
            throw DomainError("constraints: penalty weights must be nonnegative");
    }

    static ConstraintConfig none() { return {}; }
    static ConstraintConfig all() { return {true, true, true, 1.0, 1.0, 1.0}; }

    std::string flags_string() const {
        std::string s;
        if (un)
            s += "UN";
        if (wo)
            s += s.empty() ? "WO" : "+WO";
        if (ar)
            s += s.empty() ? "AR" : "+AR";
        return s.empty() ? "NONE" : s;
    }
};

enum class EncoderKind { Linear, Nonlinear };

struct ModelSpec {
    Index p = 4; // progress variables in addition to Z_mix
    std::vector<Index> trunk_widths = {32, 64, 128, 256, 512, 256, 128, 64, 32};
    double dropout = 0.05;
    std::vector<std::string> key_species = {"O2", "CO", "CO2", "H2O", "OH", "H2", "CH4"};
    EncoderKind encoder = EncoderKind::Linear;
    std::vector<Index> enc_hidden = {16}; // nonlinear encoder hidden widths
    bool freeze_encoder = false;
    Matrix init_W;     // optional s x p start / frozen weights
    Vector enc_center; // optional per-species shift before W (PCA uses it)

    void check(Index n_species) const {
        if (p < 1)
            throw DomainError("model spec: p must be >= 1");
        if (p >= n_species)
            throw DomainError("model spec: p must be smaller than the species count");
        if (trunk_widths.empty())
            throw DomainError("model spec: empty trunk");
        if (!(dropout >= 0.0 && dropout < 1.0))
            throw DomainError("model spec: dropout must lie in [0,1)");
        if (key_species.empty())
            throw DomainError("model spec: no key species");
        if (init_W.size() > 0 && (init_W.rows() != n_species || init_W.cols() != p))
            throw DimensionError("model spec: init_W must be species x p");
        if (enc_center.size() > 0 && enc_center.size() != n_species)
            throw DimensionError("model spec: enc_center length must equal species count");
        if (encoder == EncoderKind::Nonlinear && enc_hidden.empty())
            throw DomainError("model spec: nonlinear encoder needs hidden widths");
    }
};

struct ChemTabModel {
    std::vector<std::string> species_names; // training column order
    std::vector<std::string> key_species;
    std::vector<Index> key_idx; // into species_names
    EncoderKind encoder = EncoderKind::Linear;
    bool encoder_frozen = false;
    Matrix W;           // s x p
    Vector enc_center;  // s
    nn::Network enc_net; // nonlinear encoder (unused otherwise)
    nn::Network trunk;
    nn::Network head_zeta; // k source-term outputs
    nn::Network head_psi;  // source energy
    ConstraintConfig constraints;
    data::NormStats norm;
    std::uint64_t seed = 0;

    Index n_species() const { return static_cast<Index>(species_names.size()); }
    Index n_pv() const {
        return encoder == EncoderKind::Linear ? W.cols() : enc_net.n_outputs();
    }
    Index n_key() const { return static_cast<Index>(key_idx.size()); }

    void check() const {
        if (species_names.empty())
            throw StateError("model: uninitialized");
        if (encoder == EncoderKind::Linear) {
            if (W.rows() != n_species())
                throw DimensionError("model: W rows must equal species count");
            if (!W.allFinite())
                throw NumericError("model: non-finite encoder weights");
        } else {
            enc_net.check();
            if (enc_net.n_inputs() != n_species())
                throw DimensionError("model: encoder input must equal species count");
        }
        if (enc_center.size() != n_species())
            throw DimensionError("model: enc_center length mismatch");
        trunk.check();
        head_zeta.check();
        head_psi.check();
        if (trunk.n_inputs() != n_pv() + 1)
            throw DimensionError("model: trunk input must be p+1");
        if (head_zeta.n_inputs() != trunk.n_outputs() ||
            head_psi.n_inputs() != trunk.n_outputs())
            throw DimensionError("model: head input must match trunk output");
        if (head_zeta.n_outputs() != n_key())
            throw DimensionError("model: zeta head must emit one output per key species");
        if (head_psi.n_outputs() != 1)
            throw DimensionError("model: psi head must emit one output");
        if (key_idx.size() != key_species.size())
            throw DimensionError("model: key species bookkeeping out of sync");
    }

    // progress variables for a raw batch (encoder + Z_mix column)
    Matrix progress_variables(const Matrix& Y, const Vector& zmix) const {
        Matrix shifted = Y.rowwise() - enc_center.transpose();
        Matrix enc = encoder == EncoderKind::Linear ? embed(W, shifted)
                                                    : nn::forward(enc_net, shifted);
        return concat_zmix(enc, zmix);
    }
};

// ---- initialization ---------------------------------------------------

namespace detail {

inline std::vector<Index> resolve_key_species(const Dataset& ds,
                                              std::vector<std::string>& names) {
    std::vector<std::string> kept;
    std::vector<Index> idx;
    for (const auto& name : names) {
        int at = ds.species_index(name);
        if (at < 0) {
            std::cerr << "chemtab: key species " << name
                      << " not in mechanism, dropping it from the regression heads\n";
            continue;
        }
        kept.push_back(name);
        idx.push_back(at);
    }
    if (idx.empty())
        throw ConfigError("model: none of the key species exist in this dataset");
    names = std::move(kept);
    return idx;
}

inline Matrix glorot_matrix(Index rows, Index cols, rng::Stream& rs) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = rs.uniform(-a, a);
    return m;
}

} // namespace detail

// Architecture + parameter init + normalization stats; no training steps.
inline ChemTabModel init_model(const Dataset& train, const ModelSpec& spec,
                               const ConstraintConfig& constraints, std::uint64_t seed) {
    train.check();
    spec.check(train.n_species());
    constraints.check();

    ChemTabModel m;
    m.species_names = train.species_names;
    m.key_species = spec.key_species;
    m.key_idx = detail::resolve_key_species(train, m.key_species);
    m.encoder = spec.encoder;
    m.encoder_frozen = spec.freeze_encoder;
    m.constraints = constraints;
    m.seed = seed;
    m.norm = data::fit_norm(train);

    const Index s = train.n_species();
    m.enc_center = spec.enc_center.size() > 0 ? spec.enc_center : Vector::Zero(s);

    if (spec.encoder == EncoderKind::Linear) {
        if (spec.init_W.size() > 0) {
            if (!spec.init_W.allFinite())
                throw NumericError("model: init_W has non-finite entries");
            m.W = spec.init_W;
        } else {
            rng::Stream rs(rng::derive_seed(seed, "model.W"));
            m.W = detail::glorot_matrix(s, spec.p, rs);
        }
    } else {
        std::vector<Index> sizes = {s};
        sizes.insert(sizes.end(), spec.enc_hidden.begin(), spec.enc_hidden.end());
        sizes.push_back(spec.p);
        m.enc_net = nn::init_uniform(nn::NetworkSpec::relu_mlp(sizes),
                                     rng::derive_seed(seed, "model.enc"));
        m.W = Matrix::Zero(s, spec.p); // unused placeholder
    }

    std::vector<Index> trunk_sizes = {spec.p + 1};
    trunk_sizes.insert(trunk_sizes.end(), spec.trunk_widths.begin(), spec.trunk_widths.end());
    nn::NetworkSpec trunk_spec;
    trunk_spec.sizes = trunk_sizes;
    trunk_spec.acts.assign(trunk_sizes.size() - 1, nn::Activation::Relu);
    trunk_spec.dropout = spec.dropout;
    m.trunk = nn::init_uniform(trunk_spec, rng::derive_seed(seed, "model.trunk"));

    const Index trunk_out = spec.trunk_widths.back();
    m.head_zeta = nn::init_uniform(
        nn::NetworkSpec{{trunk_out, static_cast<Index>(m.key_idx.size())},
                        {nn::Activation::Linear},
                        0.0},
        rng::derive_seed(seed, "model.zeta"));
    m.head_psi = nn::init_uniform(
        nn::NetworkSpec{{trunk_out, 1}, {nn::Activation::Linear}, 0.0},
        rng::derive_seed(seed, "model.psi"));
    m.check();
    return m;
}

// ---- loss ------------------------------------------------------------------

struct LossBreakdown {
    double pred_souener = 0.0; // MAE of the psi head, normalized target space
    double pred_src = 0.0;     // (1/k) sum of per-key-species MAEs
    double un = 0.0, wo = 0.0, ar = 0.0; // raw penalty values (before lambda)
    double total = 0.0;
};

namespace detail {

struct Targets {
    Matrix Y;       // raw mass fractions
    Vector zmix;    // raw
    Matrix src;     // normalized, key columns only (n x k)
    Vector souener; // normalized
};

inline Targets normalized_targets(const ChemTabModel& m, const Dataset& ds) {
    if (ds.species_names != m.species_names)
        throw ConfigError("model: dataset species do not match the training layout");
    Targets t;
    t.Y = ds.Y;
    t.zmix = ds.zmix;
    const Index n = ds.n_rows();
    const Index k = m.n_key();
    t.src.resize(n, k);
    for (Index j = 0; j < k; ++j) {
        Index col = m.key_idx[static_cast<std::size_t>(j)];
        t.src.col(j) =
            (ds.src.col(col).array() - m.norm.src_center[col]) / m.norm.src_scale[col];
    }
    t.souener = (ds.souener.array() - m.norm.souener_center) / m.norm.souener_scale;
    return t;
}

inline double matrix_mae(const Matrix& a, const Matrix& b) {
    // (1/k) sum_j MAE(col j) == mean over all entries; sequential like nn::mae
    double acc = 0.0;
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            acc += std::abs(a(i, j) - b(i, j));
    return acc / static_cast<double>(a.size());
}

inline LossBreakdown assemble_loss(const ChemTabModel& m, const Matrix& PV, const Matrix& zeta,
                                   const Matrix& psi, const Targets& t) {
    LossBreakdown out;
    out.pred_souener = nn::mae(psi.col(0), t.souener);
    out.pred_src = matrix_mae(zeta, t.src);
    out.total = out.pred_souener + out.pred_src;
    const ConstraintConfig& c = m.constraints;
    if (c.un) {
        out.un = penalty_un(m.W);
        out.total += c.lambda_un * out.un;
    }
    if (c.wo) {
        out.wo = penalty_wo(m.W);
        out.total += c.lambda_wo * out.wo;
    }
    if (c.ar && PV.rows() >= 2) {
        out.ar = penalty_ar(PV);
        out.total += c.lambda_ar * out.ar;
    }
    return out;
}

} // namespace detail

// Deterministic (dropout-free) loss of a raw batch. Prediction terms live in
// normalized target space; penalties are raw penalty values, weighted into
// `total` by their lambdas.
inline LossBreakdown loss_total(const ChemTabModel& m, const Dataset& batch) {
    m.check();
    if (batch.n_rows() < 1)
        throw DomainError("loss_total: empty batch");
    detail::Targets t = detail::normalized_targets(m, batch);
    Matrix PV = m.progress_variables(t.Y, t.zmix);
    Matrix H = nn::forward(m.trunk, PV);
    Matrix zeta = nn::forward(m.head_zeta, H);
    Matrix psi = nn::forward(m.head_psi, H);
    return detail::assemble_loss(m, PV, zeta, psi, t);
}

// ---- prediction -------------------------------------------------------

struct Prediction {
    Vector souener; // raw units
    Matrix src_key; // raw units, n x k in key_species order
};

inline Prediction predict(const ChemTabModel& m, const Matrix& Y, const Vector& zmix) {
    if (Y.cols() != m.n_species())
        throw DimensionError("predict: Y column count does not match the model");
    if (Y.rows() != zmix.size())
        throw DimensionError("predict: Y and zmix row counts differ");
    Matrix PV = m.progress_variables(Y, zmix);
    Matrix H = nn::forward(m.trunk, PV);
    Matrix zeta = nn::forward(m.head_zeta, H);
    Matrix psi = nn::forward(m.head_psi, H);
    Prediction out;
    out.souener = psi.col(0).array() * m.norm.souener_scale + m.norm.souener_center;
    out.src_key.resize(Y.rows(), m.n_key());
    for (Index j = 0; j < m.n_key(); ++j) {
        Index col = m.key_idx[static_cast<std::size_t>(j)];
        out.src_key.col(j) =
            zeta.col(j).array() * m.norm.src_scale[col] + m.norm.src_center[col];
    }
    return out;
}

// ---- conformity -------------------------------------------------------

struct ConstraintReport {
    Vector col_norms;  // p
    Matrix gram;       // W^T W
    Matrix pv_cov;     // (p+1)^2 covariance of PV columns over the dataset
    double max_gram_offdiag = 0.0;
    double max_cov_offdiag = 0.0;
};

inline ConstraintReport constraint_report(const ChemTabModel& m, const Dataset& ds) {
    m.check();
    if (m.encoder != EncoderKind::Linear)
        throw StateError("constraint_report: model has no linear encoder");
    if (ds.n_rows() < 2)
        throw DomainError("constraint_report: need at least 2 rows");
    ConstraintReport r;
    r.col_norms.resize(m.W.cols());
    for (Index j = 0; j < m.W.cols(); ++j)
        r.col_norms[j] = m.W.col(j).norm();
    r.gram = m.W.transpose() * m.W;
    for (Index i = 0; i < r.gram.rows(); ++i)
        for (Index j = 0; j < r.gram.cols(); ++j)
            if (i != j)
                r.max_gram_offdiag = std::max(r.max_gram_offdiag, std::abs(r.gram(i, j)));

    Matrix PV = m.progress_variables(ds.Y, ds.zmix);
    Matrix centered = PV.rowwise() - PV.colwise().mean();
    r.pv_cov = centered.transpose() * centered / static_cast<double>(PV.rows());
    for (Index i = 0; i < r.pv_cov.rows(); ++i)
        for (Index j = 0; j < r.pv_cov.cols(); ++j)
            if (i != j)
                r.max_cov_offdiag = std::max(r.max_cov_offdiag, std::abs(r.pv_cov(i, j)));
    return r;
}

// ---- training ---------------------------------------------------------

struct EpochStats {
    double pred_souener = 0.0, pred_src = 0.0;
    double un = 0.0, wo = 0.0, ar = 0.0;
    double total = 0.0;           // batch-averaged training loss
    double val_souener_mae = 0.0; // normalized space
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    long best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
    double wall_seconds = 0.0;
};

namespace detail {

// Flat parameter order: W (when trainable), nonlinear encoder, trunk, zeta
// head, psi head.
struct ParamLayout {
    bool train_w = false;
    bool train_enc_net = false;
    Index w_count = 0, enc_count = 0, trunk_count = 0, zeta_count = 0, psi_count = 0;

    Index total() const { return w_count + enc_count + trunk_count + zeta_count + psi_count; }

    static ParamLayout of(const ChemTabModel& m) {
        ParamLayout lay;
        lay.train_w = m.encoder == EncoderKind::Linear && !m.encoder_frozen;
        lay.train_enc_net = m.encoder == EncoderKind::Nonlinear && !m.encoder_frozen;
        lay.w_count = lay.train_w ? m.W.size() : 0;
        lay.enc_count = lay.train_enc_net ? nn::param_count(m.enc_net) : 0;
        lay.trunk_count = nn::param_count(m.trunk);
        lay.zeta_count = nn::param_count(m.head_zeta);
        lay.psi_count = nn::param_count(m.head_psi);
        return lay;
    }
};

inline Vector pack_model(const ChemTabModel& m, const ParamLayout& lay) {
    Vector flat(lay.total());
    Index at = 0;
    if (lay.train_w)
        for (Index i = 0; i < m.W.rows(); ++i)
            for (Index j = 0; j < m.W.cols(); ++j)
                flat[at++] = m.W(i, j);
    if (lay.train_enc_net)
        flat.segment(at, lay.enc_count) = nn::pack(m.enc_net), at += lay.enc_count;
    flat.segment(at, lay.trunk_count) = nn::pack(m.trunk), at += lay.trunk_count;
    flat.segment(at, lay.zeta_count) = nn::pack(m.head_zeta), at += lay.zeta_count;
    flat.segment(at, lay.psi_count) = nn::pack(m.head_psi);
    return flat;
}

inline void unpack_model(ChemTabModel& m, const ParamLayout& lay, const Vector& flat) {
    Index at = 0;
    if (lay.train_w)
        for (Index i = 0; i < m.W.rows(); ++i)
            for (Index j = 0; j < m.W.cols(); ++j)
                m.W(i, j) = flat[at++];
    if (lay.train_enc_net)
        nn::unpack(m.enc_net, flat.segment(at, lay.enc_count)), at += lay.enc_count;
    nn::unpack(m.trunk, flat.segment(at, lay.trunk_count)), at += lay.trunk_count;
    nn::unpack(m.head_zeta, flat.segment(at, lay.zeta_count)), at += lay.zeta_count;
    nn::unpack(m.head_psi, flat.segment(at, lay.psi_count));
}

inline Matrix sign_matrix(const Matrix& d) {
    return d.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

struct BatchGrad {
    double l_psi = 0.0, l_zeta = 0.0;
    double pen_un = 0.0, pen_wo = 0.0, pen_ar = 0.0;
    double total = 0.0;
    Vector grad;
};

// Forward + analytic gradient of the penalty-augmented batch loss over every
// trainable parameter (ParamLayout order). Inputs are normalized-target
// batches. `drop_rs` non-null applies dropout masks as in training; null runs
// the deterministic path, matching loss_total.
inline BatchGrad loss_and_grad(const ChemTabModel& m, const ParamLayout& lay,
                               const ConstraintConfig& constraints, const Matrix& Yb,
                               const Vector& zb, const Vector& soub, const Matrix& srcb,
                               rng::Stream* drop_rs) {
    const Index bn = Yb.rows();
    const Index k = srcb.cols();

    // forward
    Matrix shifted = Yb.rowwise() - m.enc_center.transpose();
    nn::ForwardCache cache_e;
    Matrix enc;
    if (lay.train_enc_net || m.encoder == EncoderKind::Nonlinear)
        enc = drop_rs ? nn::forward_train(m.enc_net, shifted, cache_e, *drop_rs)
                      : nn::forward(m.enc_net, shifted, &cache_e);
    else
        enc = embed(m.W, shifted);
    Matrix PV = concat_zmix(enc, zb);
    nn::ForwardCache cache_t, cache_z, cache_p;
    Matrix H = drop_rs ? nn::forward_train(m.trunk, PV, cache_t, *drop_rs)
                       : nn::forward(m.trunk, PV, &cache_t);
    Matrix zeta = nn::forward(m.head_zeta, H, &cache_z);
    Matrix psi = nn::forward(m.head_psi, H, &cache_p);

    // loss + upstream gradients (MAE subgradients)
    BatchGrad out;
    out.l_psi = nn::mae(psi.col(0), soub);
    out.l_zeta = matrix_mae(zeta, srcb);
    Matrix up_psi = sign_matrix(psi - soub) / static_cast<double>(bn);
    Matrix up_zeta = sign_matrix(zeta - srcb) / static_cast<double>(bn * k);

    Matrix dH1, dH2, dPV;
    auto g_z = nn::backward(m.head_zeta, cache_z, up_zeta, &dH1);
    auto g_p = nn::backward(m.head_psi, cache_p, up_psi, &dH2);
    Matrix dH = dH1 + dH2;
    auto g_t = nn::backward(m.trunk, cache_t, dH, &dPV);

    Matrix dW_pen;
    if (lay.train_w)
        dW_pen = Matrix::Zero(m.W.rows(), m.W.cols());
    if (constraints.un) {
        out.pen_un = penalty_un(m.W);
        if (lay.train_w)
            dW_pen += constraints.lambda_un * penalty_un_grad(m.W);
    }
    if (constraints.wo) {
        out.pen_wo = penalty_wo(m.W);
        if (lay.train_w)
            dW_pen += constraints.lambda_wo * penalty_wo_grad(m.W);
    }
    if (constraints.ar && bn >= 2) {
        out.pen_ar = penalty_ar(PV);
        dPV += constraints.lambda_ar * penalty_ar_grad(PV);
    }
    out.total = out.l_psi + out.l_zeta + constraints.lambda_un * out.pen_un +
                constraints.lambda_wo * out.pen_wo + constraints.lambda_ar * out.pen_ar;

    // encoder gradient
    Matrix dEnc = dPV.rightCols(enc.cols());
    out.grad.resize(lay.total());
    Index at = 0;
    if (lay.train_w) {
        Matrix dW = shifted.transpose() * dEnc + dW_pen;
        for (Index i = 0; i < dW.rows(); ++i)
            for (Index j = 0; j < dW.cols(); ++j)
                out.grad[at++] = dW(i, j);
    }
    if (lay.train_enc_net) {
        auto g_e = nn::backward(m.enc_net, cache_e, dEnc);
        out.grad.segment(at, lay.enc_count) = nn::pack(m.enc_net, g_e);
        at += lay.enc_count;
    }
    out.grad.segment(at, lay.trunk_count) = nn::pack(m.trunk, g_t);
    at += lay.trunk_count;
    out.grad.segment(at, lay.zeta_count) = nn::pack(m.head_zeta, g_z);
    at += lay.zeta_count;
    out.grad.segment(at, lay.psi_count) = nn::pack(m.head_psi, g_p);
    return out;
}

} // namespace detail

// Joint mini-batch Adam on the penalty-augmented loss; dropout lives in the
// trunk; early stopping monitors validation source-energy MAE and the
// best-epoch parameters are restored. Throws NumericError when the loss
// leaves the reals, quoting the epoch and the last finite breakdown.
inline std::pair<ChemTabModel, TrainReport> train(const Dataset& ds_train, const Dataset& ds_val,
                                                  const ModelSpec& spec,
                                                  const nn::TrainControl& control,
                                                  const ConstraintConfig& constraints,
                                                  std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    control.check();
    if (ds_val.n_rows() < 1)
        throw DomainError("train: empty validation set");
    ChemTabModel m = init_model(ds_train, spec, constraints, seed);
    TrainReport report;

    detail::Targets tr = detail::normalized_targets(m, ds_train);
    detail::Targets va = detail::normalized_targets(m, ds_val);
    const Index n = ds_train.n_rows();
    const Index k = m.n_key();
    const auto lay = detail::ParamLayout::of(m);

    Vector params = detail::pack_model(m, lay);
    nn::AdamState adam;
    adam.init(lay.total());
    adam.lr = control.lr;
    nn::EarlyStopper stop(control.patience);
    rng::Stream batch_rs(rng::derive_seed(seed, "train.batches"));
    rng::Stream drop_rs(rng::derive_seed(seed, "train.dropout"));

    auto val_metric = [&]() {
        Matrix PV = m.progress_variables(va.Y, va.zmix);
        Matrix psi = nn::forward(m.head_psi, nn::forward(m.trunk, PV));
        return nn::mae(psi.col(0), va.souener);
    };

    EpochStats last_finite;
    bool have_finite = false;
    for (long epoch = 0; epoch < control.max_epochs; ++epoch) {
        EpochStats ep;
        long batches = 0;
        for (const auto& rows : nn::epoch_batches(n, control.batch_size, batch_rs)) {
            const Index bn = static_cast<Index>(rows.size());
            Matrix Yb(bn, tr.Y.cols());
            Vector zb(bn), soub(bn);
            Matrix srcb(bn, k);
            for (Index i = 0; i < bn; ++i) {
                Index r = rows[static_cast<std::size_t>(i)];
                Yb.row(i) = tr.Y.row(r);
                zb[i] = tr.zmix[r];
                soub[i] = tr.souener[r];
                srcb.row(i) = tr.src.row(r);
            }

            detail::BatchGrad bg =
                detail::loss_and_grad(m, lay, constraints, Yb, zb, soub, srcb, &drop_rs);

            if (!std::isfinite(bg.total)) {
                std::string last = have_finite
                                       ? " last finite losses: total=" +
                                             io::format_g17(last_finite.total) + " souener=" +
                                             io::format_g17(last_finite.pred_souener) +
                                             " src=" + io::format_g17(last_finite.pred_src)
                                       : " no finite epoch completed";
                throw NumericError("train: loss diverged at epoch " + std::to_string(epoch) +
                                   ";" + last);
            }

            nn::adam_step(adam, params, bg.grad);
            detail::unpack_model(m, lay, params);

            ep.pred_souener += bg.l_psi;
            ep.pred_src += bg.l_zeta;
            ep.un += bg.pen_un;
            ep.wo += bg.pen_wo;
            ep.ar += bg.pen_ar;
            ep.total += bg.total;
            ++batches;
        }
        ep.pred_souener /= static_cast<double>(batches);
        ep.pred_src /= static_cast<double>(batches);
        ep.un /= static_cast<double>(batches);
        ep.wo /= static_cast<double>(batches);
        ep.ar /= static_cast<double>(batches);
        ep.total /= static_cast<double>(batches);
        ep.val_souener_mae = val_metric();
        if (!std::isfinite(ep.val_souener_mae))
            throw NumericError("train: validation metric diverged at epoch " +
                               std::to_string(epoch));
        report.epochs.push_back(ep);
        last_finite = ep;
        have_finite = true;
        if (control.verbose)
            std::cerr << "epoch " << epoch << " total " << ep.total << " val "
                      << ep.val_souener_mae << "\n";
        if (stop.update(epoch, ep.val_souener_mae, params))
            break;
    }

    if (stop.has_best()) {
        detail::unpack_model(m, lay, stop.best_params());
        report.best_epoch = stop.best_epoch();
        report.best_val = stop.best();
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(m), std::move(report)};
}

// ---- persistence ------------------------------------------------------

// Extends the network container: "CTMD" + version, seed, encoder geometry,
// species bookkeeping, constraint config and normalization stats, followed by
// nested CTNN blocks (optional nonlinear encoder, trunk, zeta head, psi head).
namespace detail {

inline void put_string(std::ostream& out, const std::string& s) {
    nn::detail::put_u64(out, s.size());
    nn::detail::put_bytes(out, s.data(), s.size());
}

inline std::string get_string(std::istream& in) {
    std::uint64_t len = nn::detail::get_u64(in);
    if (len > (1u << 20))
        throw ParseError("checkpoint: implausible string length");
    std::string s(len, '\0');
    if (len > 0)
        nn::detail::get_bytes(in, s.data(), len);
    return s;
}

inline void put_vector(std::ostream& out, const Vector& v) {
    nn::detail::put_u64(out, static_cast<std::uint64_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i)
        nn::detail::put_f64(out, v[i]);
}

inline Vector get_vector(std::istream& in) {
    std::uint64_t len = nn::detail::get_u64(in);
    if (len > (1u << 28))
        throw ParseError("checkpoint: implausible vector length");
    Vector v(static_cast<Index>(len));
    for (Index i = 0; i < v.size(); ++i)
        v[i] = nn::detail::get_f64(in);
    return v;
}

inline void put_flags(std::ostream& out, const std::vector<bool>& flags) {
    nn::detail::put_u64(out, flags.size());
    for (bool f : flags) {
        char c = f ? 1 : 0;
        nn::detail::put_bytes(out, &c, 1);
    }
}

inline std::vector<bool> get_flags(std::istream& in) {
    std::uint64_t len = nn::detail::get_u64(in);
    if (len > (1u << 20))
        throw ParseError("checkpoint: implausible flag count");
    std::vector<bool> flags(len);
    for (std::uint64_t i = 0; i < len; ++i) {
        char c;
        nn::detail::get_bytes(in, &c, 1);
        flags[i] = c != 0;
    }
    return flags;
}

} // namespace detail

inline void write_model(std::ostream& out, const ChemTabModel& m) {
    m.check();
    nn::detail::put_bytes(out, "CTMD", 4);
    nn::detail::put_u32(out, 1);
    nn::detail::put_u64(out, m.seed);
    char kind = m.encoder == EncoderKind::Nonlinear ? 1 : 0;
    nn::detail::put_bytes(out, &kind, 1);
    char frozen = m.encoder_frozen ? 1 : 0;
    nn::detail::put_bytes(out, &frozen, 1);
    nn::detail::put_u64(out, static_cast<std::uint64_t>(m.n_species()));
    nn::detail::put_u64(out, static_cast<std::uint64_t>(m.W.cols()));
    for (const auto& name : m.species_names)
        detail::put_string(out, name);
    nn::detail::put_u64(out, m.key_species.size());
    for (const auto& name : m.key_species)
        detail::put_string(out, name);
    char flags[3] = {m.constraints.un ? char(1) : char(0), m.constraints.wo ? char(1) : char(0),
                     m.constraints.ar ? char(1) : char(0)};
    nn::detail::put_bytes(out, flags, 3);
    nn::detail::put_f64(out, m.constraints.lambda_un);
    nn::detail::put_f64(out, m.constraints.lambda_wo);
    nn::detail::put_f64(out, m.constraints.lambda_ar);
    for (Index i = 0; i < m.W.rows(); ++i)
        for (Index j = 0; j < m.W.cols(); ++j)
            nn::detail::put_f64(out, m.W(i, j));
    detail::put_vector(out, m.enc_center);
    detail::put_vector(out, m.norm.y_center);
    detail::put_vector(out, m.norm.y_scale);
    detail::put_vector(out, m.norm.src_center);
    detail::put_vector(out, m.norm.src_scale);
    nn::detail::put_f64(out, m.norm.souener_center);
    nn::detail::put_f64(out, m.norm.souener_scale);
    detail::put_flags(out, m.norm.y_constant);
    detail::put_flags(out, m.norm.src_constant);
    char sc = m.norm.souener_constant ? 1 : 0;
    nn::detail::put_bytes(out, &sc, 1);
    char has_enc = m.encoder == EncoderKind::Nonlinear ? 1 : 0;
    nn::detail::put_bytes(out, &has_enc, 1);
    if (has_enc)
        nn::write_network(out, m.enc_net, m.seed, "encoder");
    nn::write_network(out, m.trunk, m.seed, "trunk");
    nn::write_network(out, m.head_zeta, m.seed, "head_zeta");
    nn::write_network(out, m.head_psi, m.seed, "head_psi");
}

inline ChemTabModel read_model(std::istream& in) {
    char magic[4];
    nn::detail::get_bytes(in, magic, 4);
    if (std::string_view(magic, 4) != "CTMD")
        throw ParseError("checkpoint: bad magic, not a model file");
    std::uint32_t version = nn::detail::get_u32(in);
    if (version != 1)
        throw ParseError("checkpoint: unsupported model version " + std::to_string(version));
    ChemTabModel m;
    m.seed = nn::detail::get_u64(in);
    char kind;
    nn::detail::get_bytes(in, &kind, 1);
    m.encoder = kind == 1 ? EncoderKind::Nonlinear : EncoderKind::Linear;
    char frozen;
    nn::detail::get_bytes(in, &frozen, 1);
    m.encoder_frozen = frozen != 0;
    std::uint64_t s = nn::detail::get_u64(in);
    std::uint64_t p = nn::detail::get_u64(in);
    if (s < 1 || s > (1u << 16) || p < 1 || p > (1u << 16))
        throw ParseError("checkpoint: implausible model shape");
    m.species_names.resize(s);
    for (auto& name : m.species_names)
        name = detail::get_string(in);
    std::uint64_t nk = nn::detail::get_u64(in);
    if (nk < 1 || nk > s)
        throw ParseError("checkpoint: implausible key species count");
    m.key_species.resize(nk);
    for (auto& name : m.key_species)
        name = detail::get_string(in);
    for (const auto& name : m.key_species) {
        auto it = std::find(m.species_names.begin(), m.species_names.end(), name);
        if (it == m.species_names.end())
            throw ParseError("checkpoint: key species " + name + " missing from species list");
        m.key_idx.push_back(it - m.species_names.begin());
    }
    char flags[3];
    nn::detail::get_bytes(in, flags, 3);
    m.constraints.un = flags[0] != 0;
    m.constraints.wo = flags[1] != 0;
    m.constraints.ar = flags[2] != 0;
    m.constraints.lambda_un = nn::detail::get_f64(in);
    m.constraints.lambda_wo = nn::detail::get_f64(in);
    m.constraints.lambda_ar = nn::detail::get_f64(in);
    m.W.resize(static_cast<Index>(s), static_cast<Index>(p));
    for (Index i = 0; i < m.W.rows(); ++i)
        for (Index j = 0; j < m.W.cols(); ++j)
            m.W(i, j) = nn::detail::get_f64(in);
    m.enc_center = detail::get_vector(in);
    m.norm.y_center = detail::get_vector(in);
    m.norm.y_scale = detail::get_vector(in);
    m.norm.src_center = detail::get_vector(in);
    m.norm.src_scale = detail::get_vector(in);
    m.norm.souener_center = nn::detail::get_f64(in);
    m.norm.souener_scale = nn::detail::get_f64(in);
    m.norm.y_constant = detail::get_flags(in);
    m.norm.src_constant = detail::get_flags(in);
    char sc;
    nn::detail::get_bytes(in, &sc, 1);
    m.norm.souener_constant = sc != 0;
    char has_enc;
    nn::detail::get_bytes(in, &has_enc, 1);
    if (has_enc)
        m.enc_net = nn::read_network(in);
    m.trunk = nn::read_network(in);
    m.head_zeta = nn::read_network(in);
    m.head_psi = nn::read_network(in);
    m.check();
    return m;
}

inline void save_model(const std::string& path, const ChemTabModel& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write file: " + path);
    write_model(out, m);
}

inline ChemTabModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open file: " + path);
    return read_model(in);
}

// Species-by-PV weight matrix for inspection.
inline void export_encoder_csv(const ChemTabModel& m, const std::string& path) {
    if (m.encoder != EncoderKind::Linear)
        throw StateError("export_encoder_csv: model has no linear encoder");
    std::ostringstream ss;
    ss << "species";
    for (Index j = 0; j < m.W.cols(); ++j)
        ss << ",pv_" << (j + 1);
    ss << "\n";
    for (Index i = 0; i < m.W.rows(); ++i) {
        ss << m.species_names[static_cast<std::size_t>(i)];
        for (Index j = 0; j < m.W.cols(); ++j)
            ss << ',' << io::format_g17(m.W(i, j));
        ss << "\n";
    }
    io::write_file(path, ss.str());
}

} // namespace chemtab::model
