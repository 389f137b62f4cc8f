#pragma once

// Flamelet training corpus: stacked data matrices, split strategies,
// z-score normalization and CSV persistence.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "chemtab/errors.hpp"
#include "chemtab/rng.hpp"
#include "chemtab/text_io.hpp"
#include "chemtab/types.hpp"

namespace chemtab::data {

class Dataset {
public:
    std::vector<std::string> species_names; // length s
    Vector flame_key;                       // n
    Vector x;                               // n, axial coordinate
    Vector zmix;                            // n
    Vector temperature;                     // n
    Matrix Y;                               // n x s mass fractions
    Matrix src;                             // n x s production rates
    Vector souener;                         // n source energy

    Index n_rows() const { return flame_key.size(); }
    Index n_species() const { return static_cast<Index>(species_names.size()); }

    void check() const {
        const Index n = n_rows();
        const Index s = n_species();
        if (x.size() != n || zmix.size() != n || temperature.size() != n || souener.size() != n ||
            Y.rows() != n || src.rows() != n)
            throw DimensionError("dataset: inconsistent row counts");
        if (Y.cols() != s || src.cols() != s)
            throw DimensionError("dataset: column count does not match species list");
    }

    std::vector<double> distinct_keys() const {
        std::vector<double> keys;
        for (Index i = 0; i < n_rows(); ++i)
            if (std::find(keys.begin(), keys.end(), flame_key[i]) == keys.end())
                keys.push_back(flame_key[i]);
        return keys;
    }

    Dataset take_rows(const std::vector<Index>& rows) const {
        Dataset out;
        out.species_names = species_names;
        const Index m = static_cast<Index>(rows.size());
        out.flame_key.resize(m);
        out.x.resize(m);
        out.zmix.resize(m);
        out.temperature.resize(m);
        out.souener.resize(m);
        out.Y.resize(m, n_species());
        out.src.resize(m, n_species());
        for (Index k = 0; k < m; ++k) {
            Index r = rows[static_cast<std::size_t>(k)];
            out.flame_key[k] = flame_key[r];
            out.x[k] = x[r];
            out.zmix[k] = zmix[r];
            out.temperature[k] = temperature[r];
            out.souener[k] = souener[r];
            out.Y.row(k) = Y.row(r);
            out.src.row(k) = src.row(r);
        }
        return out;
    }

    int species_index(const std::string& name) const {
        for (std::size_t i = 0; i < species_names.size(); ++i)
            if (species_names[i] == name)
                return static_cast<int>(i);
        return -1;
    }
};

// ---- train/test splitting -------------------------------------------------

enum class SplitMode { ByFlamelet, ByPoint };

struct SplitSpec {
    SplitMode mode = SplitMode::ByPoint;
    double fraction = 0.5; // share of keys/rows that goes to train
    std::uint64_t seed = 0;
};

struct SplitResult {
    Dataset train;
    Dataset test;
    std::vector<Index> train_rows; // row indices into the source dataset
    std::vector<Index> test_rows;
    std::vector<double> train_keys; // by-flamelet mode only
    std::vector<double> test_keys;
};

inline SplitResult split(const Dataset& ds, const SplitSpec& spec) {
    if (!(spec.fraction > 0.0 && spec.fraction < 1.0))
        throw DomainError("split: fraction must lie in (0,1)");
    if (ds.n_rows() < 2)
        throw DomainError("split: need at least 2 rows");
    SplitResult out;
    rng::Stream rs(spec.seed);

    if (spec.mode == SplitMode::ByFlamelet) {
        std::vector<double> keys = ds.distinct_keys();
        if (keys.size() < 2)
            throw DomainError("split: by_flamelet needs at least 2 distinct flame keys");
        rs.shuffle(keys);
        std::size_t n_train = static_cast<std::size_t>(
            std::ceil(spec.fraction * static_cast<double>(keys.size())));
        n_train = std::min(std::max<std::size_t>(n_train, 1), keys.size() - 1);
        out.train_keys.assign(keys.begin(), keys.begin() + static_cast<long>(n_train));
        out.test_keys.assign(keys.begin() + static_cast<long>(n_train), keys.end());
        std::set<double> train_set(out.train_keys.begin(), out.train_keys.end());
        for (Index i = 0; i < ds.n_rows(); ++i) {
            if (train_set.count(ds.flame_key[i]))
                out.train_rows.push_back(i);
            else
                out.test_rows.push_back(i);
        }
    } else {
        std::vector<Index> rows(static_cast<std::size_t>(ds.n_rows()));
        std::iota(rows.begin(), rows.end(), Index{0});
        rs.shuffle(rows);
        std::size_t n_train = static_cast<std::size_t>(
            std::llround(spec.fraction * static_cast<double>(rows.size())));
        n_train = std::min(std::max<std::size_t>(n_train, 1), rows.size() - 1);
        out.train_rows.assign(rows.begin(), rows.begin() + static_cast<long>(n_train));
        out.test_rows.assign(rows.begin() + static_cast<long>(n_train), rows.end());
        std::sort(out.train_rows.begin(), out.train_rows.end());
        std::sort(out.test_rows.begin(), out.test_rows.end());
    }
    out.train = ds.take_rows(out.train_rows);
    out.test = ds.take_rows(out.test_rows);
    return out;
}

inline std::string split_manifest(const SplitResult& sr, SplitMode mode) {
    std::ostringstream ss;
    if (mode == SplitMode::ByFlamelet) {
        ss << "mode=flamelet\n";
        ss << "train_keys=";
        for (std::size_t i = 0; i < sr.train_keys.size(); ++i)
            ss << (i ? "," : "") << io::format_g17(sr.train_keys[i]);
        ss << "\ntest_keys=";
        for (std::size_t i = 0; i < sr.test_keys.size(); ++i)
            ss << (i ? "," : "") << io::format_g17(sr.test_keys[i]);
        ss << "\n";
    } else {
        ss << "mode=point\n";
        ss << "train_rows=";
        for (std::size_t i = 0; i < sr.train_rows.size(); ++i)
            ss << (i ? "," : "") << sr.train_rows[i];
        ss << "\ntest_rows=";
        for (std::size_t i = 0; i < sr.test_rows.size(); ++i)
            ss << (i ? "," : "") << sr.test_rows[i];
        ss << "\n";
    }
    return ss.str();
}

// ---- normalization --------------------------------------------------------

// Per-column z-score statistics for the model inputs (Y) and regression
// targets (key source terms, source energy). Population standard deviation;
// zero-variance columns keep scale 1 and are flagged.
struct NormStats {
    Vector y_center, y_scale;     // s
    Vector src_center, src_scale; // s
    double souener_center = 0.0, souener_scale = 1.0;
    std::vector<bool> y_constant, src_constant;
    bool souener_constant = false;
};

namespace detail {

inline void column_stats(const Matrix& m, Vector& center, Vector& scale,
                         std::vector<bool>& constant) {
    const Index n = m.rows(), c = m.cols();
    center.resize(c);
    scale.resize(c);
    constant.assign(static_cast<std::size_t>(c), false);
    for (Index j = 0; j < c; ++j) {
        double mean = m.col(j).mean();
        double var = (m.col(j).array() - mean).square().sum() / static_cast<double>(n);
        center[j] = mean;
        if (var > 0) {
            scale[j] = std::sqrt(var);
        } else {
            scale[j] = 1.0;
            constant[static_cast<std::size_t>(j)] = true;
        }
    }
}

} // namespace detail

inline NormStats fit_norm(const Dataset& ds) {
    if (ds.n_rows() < 2)
        throw DomainError("fit_norm: need at least 2 rows");
    NormStats st;
    detail::column_stats(ds.Y, st.y_center, st.y_scale, st.y_constant);
    detail::column_stats(ds.src, st.src_center, st.src_scale, st.src_constant);
    double mean = ds.souener.mean();
    double var = (ds.souener.array() - mean).square().sum() / static_cast<double>(ds.n_rows());
    st.souener_center = mean;
    if (var > 0) {
        st.souener_scale = std::sqrt(var);
    } else {
        st.souener_scale = 1.0;
        st.souener_constant = true;
    }
    return st;
}

inline Dataset apply_norm(const Dataset& ds, const NormStats& st) {
    Dataset out = ds;
    out.Y = (ds.Y.rowwise() - st.y_center.transpose()).array().rowwise() /
            st.y_scale.transpose().array();
    out.src = (ds.src.rowwise() - st.src_center.transpose()).array().rowwise() /
              st.src_scale.transpose().array();
    out.souener = (ds.souener.array() - st.souener_center) / st.souener_scale;
    return out;
}

inline Dataset unapply_norm(const Dataset& ds, const NormStats& st) {
    Dataset out = ds;
    out.Y = (ds.Y.array().rowwise() * st.y_scale.transpose().array()).matrix().rowwise() +
            st.y_center.transpose();
    out.src = (ds.src.array().rowwise() * st.src_scale.transpose().array()).matrix().rowwise() +
              st.src_center.transpose();
    out.souener = ds.souener.array() * st.souener_scale + st.souener_center;
    return out;
}

// ---- CSV persistence --------------------------------------------------

// Column order is fixed: flame_key,x,Zmix,T, Y_<species...>, SRC_<species...>,
// souener. Floats carry 17 significant digits so a round trip is bit exact.
inline std::string csv_header(const std::vector<std::string>& species) {
    std::string h = "flame_key,x,Zmix,T";
    for (const auto& sp : species)
        h += ",Y_" + sp;
    for (const auto& sp : species)
        h += ",SRC_" + sp;
    h += ",souener";
    return h;
}

inline void write_csv(const Dataset& ds, const std::string& path) {
    ds.check();
    std::ostringstream ss;
    ss << csv_header(ds.species_names) << "\n";
    for (Index r = 0; r < ds.n_rows(); ++r) {
        ss << io::format_g17(ds.flame_key[r]) << ',' << io::format_g17(ds.x[r]) << ','
           << io::format_g17(ds.zmix[r]) << ',' << io::format_g17(ds.temperature[r]);
        for (Index j = 0; j < ds.n_species(); ++j)
            ss << ',' << io::format_g17(ds.Y(r, j));
        for (Index j = 0; j < ds.n_species(); ++j)
            ss << ',' << io::format_g17(ds.src(r, j));
        ss << ',' << io::format_g17(ds.souener[r]) << "\n";
    }
    io::write_file(path, ss.str());
}

inline Dataset read_csv(const std::string& path) {
    std::string text = io::read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(path + ": empty file, expected a header row");
    std::vector<std::string> cols = io::split(io::trim(line), ',');
    const std::size_t nc = cols.size();
    if (nc < 5 || cols[0] != "flame_key" || cols[1] != "x" || cols[2] != "Zmix" || cols[3] != "T")
        throw ParseError(path + ": header must start with flame_key,x,Zmix,T");
    if (cols.back() != "souener")
        throw ParseError(path + ": missing column: souener");
    std::size_t body = nc - 5; // Y block + SRC block
    if (body == 0 || body % 2 != 0)
        throw ParseError(path + ": expected matching Y_/SRC_ column blocks");
    std::size_t s = body / 2;
    std::vector<std::string> species;
    for (std::size_t j = 0; j < s; ++j) {
        const std::string& y = cols[4 + j];
        if (y.rfind("Y_", 0) != 0)
            throw ParseError(path + ": expected Y_<species> at column " + std::to_string(4 + j) +
                             ", got '" + y + "'");
        species.push_back(y.substr(2));
    }
    for (std::size_t j = 0; j < s; ++j) {
        const std::string& c = cols[4 + s + j];
        if (c != "SRC_" + species[j])
            throw ParseError(path + ": expected SRC_" + species[j] + " at column " +
                             std::to_string(4 + s + j) + ", got '" + c + "'");
    }

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = io::trim(line);
        if (t.empty())
            continue;
        std::vector<std::string> cells = io::split(t, ',');
        if (cells.size() != nc)
            throw ParseError(path + ": row " + std::to_string(lineno) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(nc));
        std::vector<double> vals(nc);
        for (std::size_t j = 0; j < nc; ++j)
            vals[j] = io::parse_double(cells[j], path + ": row " + std::to_string(lineno) +
                                                     ", column " + std::to_string(j + 1));
        rows.push_back(std::move(vals));
    }

    Dataset ds;
    ds.species_names = species;
    const Index n = static_cast<Index>(rows.size());
    const Index si = static_cast<Index>(s);
    ds.flame_key.resize(n);
    ds.x.resize(n);
    ds.zmix.resize(n);
    ds.temperature.resize(n);
    ds.souener.resize(n);
    ds.Y.resize(n, si);
    ds.src.resize(n, si);
    for (Index r = 0; r < n; ++r) {
        const auto& v = rows[static_cast<std::size_t>(r)];
        ds.flame_key[r] = v[0];
        ds.x[r] = v[1];
        ds.zmix[r] = v[2];
        ds.temperature[r] = v[3];
        for (Index j = 0; j < si; ++j) {
            ds.Y(r, j) = v[4 + static_cast<std::size_t>(j)];
            ds.src(r, j) = v[4 + s + static_cast<std::size_t>(j)];
        }
        ds.souener[r] = v[nc - 1];
    }
    return ds;
}

} // namespace chemtab::data
