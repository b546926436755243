#include "descent/feature_pipeline.hpp"

#include "descent/errors.hpp"
#include "descent/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace descent {

ColumnKind parse_column_kind(const std::string& s) {
    if (s == "continuous") return ColumnKind::Continuous;
    if (s == "discrete") return ColumnKind::Discrete;
    if (s == "dummy") return ColumnKind::Dummy;
    throw ValidationError("unknown column kind '" + s + "' (expected continuous, discrete or dummy)");
}

std::string to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::Continuous: return "continuous";
        case ColumnKind::Discrete: return "discrete";
        case ColumnKind::Dummy: return "dummy";
    }
    return "?";
}

void ExpansionPlan::validate() const {
    if (bins_per_continuous < 2) throw ValidationError("expansion: bins must be at least 2");
    if (!(jitter_sd >= 0.0) || !std::isfinite(jitter_sd)) throw ValidationError("expansion: jitter_sd must be >= 0");
    if (num_orderings < 1) throw ValidationError("expansion: need at least one ordering");
}

namespace {

std::string short_number(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

Index bin_of(double x, const std::vector<double>& edges) {
    return static_cast<Index>(std::lower_bound(edges.begin(), edges.end(), x) - edges.begin());
}

InteractionExpansion expand(const Matrix& dummies, const std::vector<DummyColumn>& columns, bool interact) {
    if (static_cast<Index>(columns.size()) != dummies.cols()) {
        throw ValidationError("expand_interactions: column description count does not match the matrix");
    }
    for (Index c = 0; c < dummies.cols(); ++c) {
        for (Index r = 0; r < dummies.rows(); ++r) {
            const double v = dummies(r, c);
            if (v != 0.0 && v != 1.0) {
                throw ValidationError("expand_interactions: column '" + columns[static_cast<std::size_t>(c)].name +
                                      "' row " + std::to_string(r + 1) + " is not 0/1");
            }
        }
    }
    InteractionExpansion out;
    std::vector<Vector> cols;
    auto keep = [&](Vector v, std::string name, Index a, Index b) {
        if (v.cwiseAbs().maxCoeff() == 0.0) {
            ++out.dropped;
            return;
        }
        cols.push_back(std::move(v));
        out.names.push_back(std::move(name));
        out.sources.emplace_back(a, b);
    };
    const Index k = dummies.cols();
    for (Index a = 0; a < k; ++a) keep(dummies.col(a), columns[static_cast<std::size_t>(a)].name, a, -1);
    if (interact) {
        for (Index a = 0; a < k; ++a) {
            for (Index b = a + 1; b < k; ++b) {
                const auto& ca = columns[static_cast<std::size_t>(a)];
                const auto& cb = columns[static_cast<std::size_t>(b)];
                if (ca.group == cb.group) continue;
                keep(dummies.col(a).cwiseProduct(dummies.col(b)), ca.name + ":" + cb.name, a, b);
            }
        }
    }
    out.x.resize(dummies.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.x.col(static_cast<Index>(c)) = cols[c];
    return out;
}

}  // namespace

BinResult quantile_bin(const Vector& column, int bins) {
    if (bins < 2) throw ValidationError("quantile_bin: need at least 2 bins");
    if (column.size() == 0) throw ValidationError("quantile_bin: empty column");
    require_finite(column, "quantile_bin");
    std::vector<double> sorted(column.data(), column.data() + column.size());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<long long>(sorted.size());
    const double max_value = sorted.back();

    BinResult out;
    for (long long b = 1; b < bins; ++b) {
        const long long idx = (b * n + bins - 1) / bins - 1;  // ceil(b n / B) - 1
        const double edge = sorted[static_cast<std::size_t>(std::max(0LL, idx))];
        if (edge >= max_value) break;
        if (out.upper_edges.empty() || edge > out.upper_edges.back()) out.upper_edges.push_back(edge);
    }
    out.degenerate = sorted.front() == max_value;
    out.indicators = apply_bins(column, out.upper_edges);
    return out;
}

Matrix apply_bins(const Vector& column, const std::vector<double>& upper_edges) {
    require_finite(column, "apply_bins");
    Matrix ind = Matrix::Zero(column.size(), static_cast<Index>(upper_edges.size()) + 1);
    for (Index r = 0; r < column.size(); ++r) ind(r, bin_of(column(r), upper_edges)) = 1.0;
    return ind;
}

InteractionExpansion expand_interactions(const Matrix& dummies, const std::vector<DummyColumn>& columns) {
    return expand(dummies, columns, true);
}

FeatureExpansion FeatureExpansion::fit(const Matrix& raw, const std::vector<std::string>& raw_names,
                                       const std::vector<ColumnSpec>& specs, const ExpansionPlan& plan) {
    plan.validate();
    if (static_cast<Index>(raw_names.size()) != raw.cols()) {
        throw ValidationError("feature expansion: name count does not match the input columns");
    }
    if (specs.empty()) throw ValidationError("feature expansion: no column specs");
    FeatureExpansion fx;
    fx.raw_names_ = raw_names;
    fx.specs_ = specs;
    fx.plan_ = plan;

    for (const ColumnSpec& spec : specs) {
        const auto it = std::find(raw_names.begin(), raw_names.end(), spec.name);
        if (it == raw_names.end()) {
            throw ValidationError("column '" + spec.name + "' referenced in column specs is not in the input");
        }
        const Index src = static_cast<Index>(it - raw_names.begin());
        fx.spec_source_.push_back(src);
        const Vector col = raw.col(src);
        if (!col.allFinite()) throw ValidationError("column '" + spec.name + "' has a non-finite value");

        switch (spec.kind) {
            case ColumnKind::Continuous: {
                const BinResult bins = quantile_bin(col, plan.bins_per_continuous);
                if (bins.degenerate) fx.warnings_.push_back("column '" + spec.name + "' is constant; using one bin");
                const auto& e = bins.upper_edges;
                for (std::size_t b = 0; b <= e.size(); ++b) {
                    Base base;
                    base.name = spec.name + "_bin" + std::to_string(b + 1);
                    base.group = spec.group();
                    base.source = src;
                    base.kind = ColumnKind::Continuous;
                    base.lower_open = b == 0;
                    base.upper_open = b == e.size();
                    base.lower = b == 0 ? 0.0 : e[b - 1];
                    base.upper = b == e.size() ? 0.0 : e[b];
                    fx.bases_.push_back(base);
                }
                break;
            }
            case ColumnKind::Discrete: {
                std::vector<double> levels(col.data(), col.data() + col.size());
                std::sort(levels.begin(), levels.end());
                levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
                for (double level : levels) {
                    Base base;
                    base.name = spec.name + "=" + short_number(level);
                    base.group = spec.group();
                    base.source = src;
                    base.kind = ColumnKind::Discrete;
                    base.level = level;
                    fx.bases_.push_back(base);
                }
                break;
            }
            case ColumnKind::Dummy: {
                Base base;
                base.name = spec.name;
                base.group = spec.group();
                base.source = src;
                base.kind = ColumnKind::Dummy;
                fx.bases_.push_back(base);
                break;
            }
        }
    }

    std::vector<DummyColumn> cols;
    for (const Base& b : fx.bases_) cols.push_back({b.name, b.group});
    const InteractionExpansion ex = expand(fx.base_dummies(raw), cols, plan.interactions);
    fx.features_ = ex.sources;
    fx.feature_names_ = ex.names;
    if (ex.dropped > 0) fx.warnings_.push_back("dropped " + std::to_string(ex.dropped) + " all-zero columns");
    if (fx.features_.empty()) throw ValidationError("feature expansion produced no columns");
    return fx;
}

Matrix FeatureExpansion::base_dummies(const Matrix& raw) const {
    if (raw.cols() != static_cast<Index>(raw_names_.size())) {
        throw ValidationError("feature expansion: input has " + std::to_string(raw.cols()) +
                              " columns, expected " + std::to_string(raw_names_.size()));
    }
    Matrix out = Matrix::Zero(raw.rows(), static_cast<Index>(bases_.size()));
    for (std::size_t b = 0; b < bases_.size(); ++b) {
        const Base& base = bases_[b];
        for (Index r = 0; r < raw.rows(); ++r) {
            const double v = raw(r, base.source);
            if (!std::isfinite(v)) {
                throw ValidationError("column '" + raw_names_[static_cast<std::size_t>(base.source)] + "' row " +
                                      std::to_string(r + 1) + " is not finite");
            }
            bool hit = false;
            switch (base.kind) {
                case ColumnKind::Continuous:
                    hit = (base.lower_open || v > base.lower) && (base.upper_open || v <= base.upper);
                    break;
                case ColumnKind::Discrete: hit = v == base.level; break;
                case ColumnKind::Dummy:
                    if (v != 0.0 && v != 1.0) {
                        throw ValidationError("dummy column '" + base.name + "' row " + std::to_string(r + 1) +
                                              " has value " + short_number(v) + " (expected 0 or 1)");
                    }
                    hit = v == 1.0;
                    break;
            }
            out(r, static_cast<Index>(b)) = hit ? 1.0 : 0.0;
        }
    }
    return out;
}

Matrix FeatureExpansion::transform(const Matrix& raw) const {
    const Matrix base = base_dummies(raw);
    Matrix out(raw.rows(), static_cast<Index>(features_.size()));
    for (std::size_t f = 0; f < features_.size(); ++f) {
        const auto [a, b] = features_[f];
        out.col(static_cast<Index>(f)) = b < 0 ? Vector(base.col(a)) : Vector(base.col(a).cwiseProduct(base.col(b)));
    }
    return out;
}

Matrix FeatureExpansion::transform_full(const Matrix& raw, std::uint64_t stream) const {
    const Matrix x = jitter(transform(raw), plan_.jitter_sd, plan_.jitter_seed, stream);
    if (!plan_.intercept) return x;
    Matrix out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
}

std::vector<std::string> FeatureExpansion::names() const {
    std::vector<std::string> out;
    if (plan_.intercept) out.push_back("intercept");
    out.insert(out.end(), feature_names_.begin(), feature_names_.end());
    return out;
}

std::vector<FeatureInfo> FeatureExpansion::provenance() const {
    std::vector<FeatureInfo> out;
    if (plan_.intercept) out.push_back({"intercept", "intercept", "", ""});
    auto describe = [&](const Base& b) {
        switch (b.kind) {
            case ColumnKind::Continuous:
                return std::string(b.lower_open ? "(-inf" : "(" + short_number(b.lower)) + ", " +
                       (b.upper_open ? "inf)" : short_number(b.upper) + "]");
            case ColumnKind::Discrete: return short_number(b.level);
            case ColumnKind::Dummy: return std::string("1");
        }
        return std::string();
    };
    auto kind_of = [](const Base& b) {
        switch (b.kind) {
            case ColumnKind::Continuous: return "bin";
            case ColumnKind::Discrete: return "level";
            case ColumnKind::Dummy: return "dummy";
        }
        return "?";
    };
    for (std::size_t f = 0; f < features_.size(); ++f) {
        const auto [a, b] = features_[f];
        const Base& ba = bases_[static_cast<std::size_t>(a)];
        const std::string& sa = raw_names_[static_cast<std::size_t>(ba.source)];
        if (b < 0) {
            out.push_back({feature_names_[f], kind_of(ba), sa, describe(ba)});
        } else {
            const Base& bb = bases_[static_cast<std::size_t>(b)];
            const std::string& sb = raw_names_[static_cast<std::size_t>(bb.source)];
            out.push_back({feature_names_[f], "interaction", sa + ";" + sb, ba.name + "*" + bb.name});
        }
    }
    return out;
}

Matrix jitter(const Matrix& x, double sd, std::uint64_t seed, std::uint64_t stream) {
    if (!(sd >= 0.0) || !std::isfinite(sd)) throw ValidationError("jitter: sd must be >= 0");
    if (sd == 0.0) return x;
    auto rng = make_rng(seed, RngPurpose::Jitter, stream);
    std::normal_distribution<double> noise(0.0, sd);
    Matrix out = x;
    for (Index r = 0; r < out.rows(); ++r) {
        for (Index c = 0; c < out.cols(); ++c) out(r, c) += noise(rng);
    }
    return out;
}

std::vector<Index> random_ordering(Index k, std::uint64_t seed, std::uint64_t stream) {
    if (k < 1) throw ValidationError("random_ordering: k must be >= 1");
    std::vector<Index> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), Index{0});
    auto rng = make_rng(seed, RngPurpose::Ordering, stream);
    for (Index i = k - 1; i > 0; --i) {
        std::uniform_int_distribution<Index> pick(0, i);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    return perm;
}

}  // namespace descent
