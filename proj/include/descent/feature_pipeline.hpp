#pragma once

// Deterministic feature expansion for the many-regressor experiments:
// quantile binning of continuous columns, one indicator per level of discrete
// columns, pairwise interactions of indicators from different exclusion
// groups, pruning of all-zero columns, Gaussian jitter and seeded column
// orderings.

#include "descent/numcore.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace descent {

enum class ColumnKind { Continuous, Discrete, Dummy };

ColumnKind parse_column_kind(const std::string& s);
std::string to_string(ColumnKind kind);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    // Indicators sharing a group are never interacted. Defaults to the column name.
    std::optional<std::string> exclusion_group;

    std::string group() const { return exclusion_group.value_or(name); }
};

struct ExpansionPlan {
    int bins_per_continuous = 50;
    double jitter_sd = 0.02;  // standard deviation; N(0, 0.0004) in variance terms
    std::uint64_t jitter_seed = 0;
    bool interactions = true;
    bool intercept = true;
    std::uint64_t ordering_seed = 0;
    int num_orderings = 5;

    void validate() const;
};

struct BinResult {
    std::vector<double> upper_edges;  // x <= edge[b] (and > edge[b-1]) falls in bin b; last bin is open
    Matrix indicators;                // rows x bins
    bool degenerate = false;          // constant column, single bin
};

// Bin boundaries at the empirical quantiles b/B (lower inverse CDF); values
// equal to a boundary fall in the lower bin; duplicate boundaries collapse.
BinResult quantile_bin(const Vector& column, int bins);

// Indicators for new data against previously fitted boundaries.
Matrix apply_bins(const Vector& column, const std::vector<double>& upper_edges);

struct DummyColumn {
    std::string name;
    std::string group;
};

struct InteractionExpansion {
    Matrix x;
    std::vector<std::string> names;
    // (a, -1) for base dummy a, (a, b) for the product a * b with a < b.
    std::vector<std::pair<Index, Index>> sources;
    Index dropped = 0;  // all-zero candidates removed
};

// Base dummies followed by pairwise products across distinct groups, in
// lexicographic (a, b) order; columns that are zero on every row are dropped.
InteractionExpansion expand_interactions(const Matrix& dummies, const std::vector<DummyColumn>& columns);

// Column description for the provenance sidecar.
struct FeatureInfo {
    std::string name;
    std::string kind;     // intercept | bin | level | dummy | interaction
    std::string sources;  // source column names joined by ';'
    std::string detail;   // bin interval or level value
};

// Fitted on training rows; replayable on evaluation rows.
class FeatureExpansion {
public:
    static FeatureExpansion fit(const Matrix& raw, const std::vector<std::string>& raw_names,
                                const std::vector<ColumnSpec>& specs, const ExpansionPlan& plan);

    // Indicator/interaction matrix before jitter and intercept.
    Matrix transform(const Matrix& raw) const;

    // transform + jitter (stream selects an independent noise stream) + intercept.
    Matrix transform_full(const Matrix& raw, std::uint64_t stream) const;

    std::vector<std::string> names() const;  // including the intercept when enabled
    std::vector<FeatureInfo> provenance() const;
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    struct Base {
        std::string name;
        std::string group;
        Index source = 0;  // index into raw columns
        ColumnKind kind = ColumnKind::Dummy;
        double lower = 0.0, upper = 0.0;  // bin interval (lower, upper]
        bool lower_open = true, upper_open = false;
        double level = 0.0;
    };

    Matrix base_dummies(const Matrix& raw) const;

    std::vector<std::string> raw_names_;
    std::vector<ColumnSpec> specs_;
    std::vector<Index> spec_source_;
    ExpansionPlan plan_;
    std::vector<Base> bases_;
    std::vector<std::pair<Index, Index>> features_;
    std::vector<std::string> feature_names_;
    std::vector<std::string> warnings_;
};

// X + iid N(0, sd^2) per entry; deterministic in (seed, stream); sd = 0 is the identity.
Matrix jitter(const Matrix& x, double sd, std::uint64_t seed, std::uint64_t stream = 0);

// Seeded Fisher-Yates permutation of 0..k-1.
std::vector<Index> random_ordering(Index k, std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace descent
