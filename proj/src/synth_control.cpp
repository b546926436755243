#include "descent/synth_control.hpp"

#include "descent/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace descent {

Panel::Panel(Matrix outcomes_, Index pre, Index post, std::vector<std::string> names)
    : outcomes(std::move(outcomes_)), pre_periods(pre), post_periods(post), unit_names(std::move(names)) {
    validate();
}

void Panel::validate() const {
    if (pre_periods < 1) throw ValidationError("Panel: need at least one pre-period");
    if (post_periods < 0) throw ValidationError("Panel: negative post-period count");
    if (outcomes.rows() < 2) throw ValidationError("Panel: need a target unit and at least one donor");
    if (outcomes.cols() != pre_periods + post_periods) {
        throw ValidationError("Panel: outcome matrix has " + std::to_string(outcomes.cols()) +
                              " periods but T + S = " + std::to_string(pre_periods + post_periods));
    }
    if (!outcomes.allFinite()) throw ValidationError("Panel: non-finite outcome");
    if (!unit_names.empty() && static_cast<Index>(unit_names.size()) != outcomes.rows()) {
        throw ValidationError("Panel: unit name count does not match the outcome rows");
    }
}

Vector Panel::pre_target() const { return outcomes.row(0).head(pre_periods).transpose(); }
Vector Panel::post_target() const { return outcomes.row(0).tail(post_periods).transpose(); }
Matrix Panel::pre_controls() const {
    return outcomes.bottomRows(donors()).leftCols(pre_periods).transpose();
}
Matrix Panel::post_controls() const {
    return outcomes.bottomRows(donors()).rightCols(post_periods).transpose();
}

DonorSubset::DonorSubset(std::vector<Index> indices, Index donors) : indices_(std::move(indices)), donors_(donors) {
    if (indices_.empty()) throw ValidationError("DonorSubset: empty subset");
    std::unordered_set<Index> seen;
    for (Index j : indices_) {
        if (j < 0 || j >= donors) {
            throw ValidationError("DonorSubset: donor " + std::to_string(j) + " outside [0, " +
                                  std::to_string(donors) + ")");
        }
        if (!seen.insert(j).second) throw ValidationError("DonorSubset: duplicate donor " + std::to_string(j));
    }
}

DonorSubset DonorSubset::all(Index donors) {
    std::vector<Index> idx(static_cast<std::size_t>(donors));
    for (Index i = 0; i < donors; ++i) idx[static_cast<std::size_t>(i)] = i;
    return DonorSubset(std::move(idx), donors);
}

void SimplexWeights::validate(double tol) const {
    if (w.size() == 0) throw ValidationError("SimplexWeights: empty");
    if (!w.allFinite() || w.minCoeff() < -tol) throw NumericalError("SimplexWeights: negative or non-finite weight");
    if (std::abs(w.sum() - 1.0) > tol) {
        throw NumericalError("SimplexWeights: weights sum to " + std::to_string(w.sum()));
    }
}

RidgePenalty::RidgePenalty(double eta_) : eta(eta_) {
    if (!(eta_ > 0.0) || !std::isfinite(eta_)) throw ValidationError("ridge penalty must be positive");
}

void SolverSettings::validate() const {
    if (!(opt_tol > 0.0)) throw ValidationError("solver opt_tol must be positive");
    if (max_iter < 1) throw ValidationError("solver max_iter must be positive");
    if (path.empty()) throw ValidationError("solver path must not be empty");
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (!(path[i] > 0.0)) throw ValidationError("solver path entries must be positive");
        if (i > 0 && !(path[i] < path[i - 1])) throw ValidationError("solver path must be strictly decreasing");
    }
    if (!(path_tol > 0.0)) throw ValidationError("solver path_tol must be positive");
}

QpOptions SolverSettings::qp() const {
    QpOptions o;
    o.opt_tol = opt_tol;
    o.max_iter = max_iter;
    return o;
}

namespace {

void check_problem(const Matrix& a, const Vector& y) {
    require_finite(a, "synthetic control pre-period controls");
    require_finite(y, "synthetic control pre-period target");
    if (a.rows() != y.size()) {
        throw ValidationError("synthetic control: controls have " + std::to_string(a.rows()) +
                              " periods but the target has " + std::to_string(y.size()));
    }
}

bool same_support(const Vector& a, const Vector& b) {
    for (Index i = 0; i < a.size(); ++i) {
        if ((a(i) > 0.0) != (b(i) > 0.0)) return false;
    }
    return true;
}

Vector clip_to_simplex(Vector w) {
    w = w.cwiseMax(0.0);
    return w / w.sum();
}

// Exact minimum-norm least-squares point on the affine hull of the support
// of w at several thresholds. Candidates that stay in the simplex and fit no
// worse than w are exact optima; the smallest of them replaces w. Iterative solvers leave
// O(sqrt(opt_tol) / separation) error in w when donors are nearly collinear.
Vector polish_on_face(const Matrix& a, const Vector& y, Vector w) {
    const double f0 = simplex_qp_objective(a, y, 0.0, w);
    const double slack = 1e-12 * (1.0 + y.squaredNorm());
    const double wmax = w.maxCoeff();
    Vector best;
    for (double tau : {1e-4, 1e-6, 1e-8, 0.0}) {
        std::vector<Index> support;
        for (Index i = 0; i < w.size(); ++i) {
            if (w(i) > tau * wmax) support.push_back(i);
        }
        const Index k = static_cast<Index>(support.size());
        const Matrix as = select_columns(a, support);
        Vector ws = Vector::Ones(1);
        if (k > 1) {
            // Fitted values of the least-squares problem on {sum w = 1}; unique even when w is not.
            const Matrix basis = Eigen::HouseholderQR<Matrix>(Matrix::Ones(k, 1)).householderQ() * Matrix::Identity(k, k);
            const Matrix null = basis.rightCols(k - 1);
            const Vector w0 = Vector::Constant(k, 1.0 / static_cast<double>(k));
            const Vector z = min_norm_least_squares(as * null, y - as * w0, RankTolerance{1e-12});
            Matrix c(as.rows() + 1, k);
            c << as, Matrix::Ones(1, k);
            Vector d(as.rows() + 1);
            d << as * (w0 + null * z), 1.0;
            ws = min_norm_least_squares(c, d, RankTolerance{1e-12});
        }
        if (!(ws.minCoeff() >= -1e-12)) continue;
        Vector cand = Vector::Zero(w.size());
        for (Index i = 0; i < k; ++i) cand(support[static_cast<std::size_t>(i)]) = std::max(0.0, ws(i));
        cand /= cand.sum();
        if (simplex_qp_objective(a, y, 0.0, cand) <= f0 + slack && (best.size() == 0 || cand.norm() < best.norm())) {
            best = std::move(cand);
        }
    }
    return best.size() == 0 ? w : best;
}

MinNormResult ridge_path(const Matrix& a, const Vector& y, const SolverSettings& settings) {
    MinNormResult out;
    out.route_used = MinNormRoute::RidgePath;
    const QpOptions qp = settings.qp();
    std::optional<Vector> warm;
    Vector prev;
    double prev_eta = 0.0;
    for (std::size_t k = 0; k < settings.path.size(); ++k) {
        const double eta = settings.path[k];
        Vector w = solve_simplex_qp(a, y, eta, qp, warm).w;
        if (k > 0) {
            const double step = (w - prev).cwiseAbs().maxCoeff();
            out.path_steps.push_back(step);
            if (step < settings.path_tol) {
                out.path_consistent = true;
                // On a fixed face w_eta = w_0 + eta c + O(eta^2); extrapolate linearly to eta = 0.
                Vector limit = w + (w - prev) * (eta / (prev_eta - eta));
                if (same_support(w, prev) && limit.minCoeff() >= -1e-9) {
                    out.weights.w = polish_on_face(a, y, clip_to_simplex(std::move(limit)));
                } else {
                    out.weights.w = polish_on_face(a, y, w);
                }
                return out;
            }
        }
        prev = w;
        prev_eta = eta;
        warm = std::move(w);
    }
    out.weights.w = polish_on_face(a, y, prev);
    return out;
}

// Stage 1 fixes the fitted values yhat = A w1, which every least-squares
// minimizer shares. Stage 2 minimizes ||w|| over {w in simplex : A w = yhat}
// by the method of multipliers; each inner problem is a ridge QP with a
// shifted target.
MinNormResult two_stage(const Matrix& a, const Vector& y, const SolverSettings& settings) {
    MinNormResult out;
    out.route_used = MinNormRoute::TwoStage;
    const QpOptions qp = settings.qp();
    const Vector w1 = solve_simplex_qp(a, y, 0.0, qp).w;
    const Vector yhat = a * w1;

    const double smax = Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
    if (!(smax > 0.0)) {
        out.weights.w = Vector::Constant(a.cols(), 1.0 / static_cast<double>(a.cols()));
        return out;
    }
    const double eta = 1e-6 * smax * smax;
    Vector nu = Vector::Zero(a.rows());
    Vector w = w1;
    const int rounds = std::max(500, settings.max_iter);
    for (int it = 0; it < rounds; ++it) {
        const Vector next = solve_simplex_qp(a, yhat - eta * nu, eta, qp, w).w;
        const Vector violation = a * next - yhat;
        nu += violation / eta;
        const double change = (next - w).cwiseAbs().maxCoeff();
        w = next;
        if (it > 0 && change < 1e-14 && violation.norm() <= 1e-12 * (1.0 + yhat.norm())) break;
    }
    out.weights.w = polish_on_face(a, y, clip_to_simplex(w));
    return out;
}

}  // namespace

SimplexWeights simplex_lsq(const Matrix& pre_controls, const Vector& pre_target, const SolverSettings& settings) {
    check_problem(pre_controls, pre_target);
    settings.validate();
    return SimplexWeights{solve_simplex_qp(pre_controls, pre_target, 0.0, settings.qp()).w};
}

SimplexWeights ridge_synth(const Matrix& pre_controls, const Vector& pre_target, RidgePenalty eta,
                           const SolverSettings& settings) {
    check_problem(pre_controls, pre_target);
    settings.validate();
    return SimplexWeights{solve_simplex_qp(pre_controls, pre_target, eta.eta, settings.qp()).w};
}

double synth_objective(const Matrix& pre_controls, const Vector& pre_target, double eta, const Vector& w) {
    return simplex_qp_objective(pre_controls, pre_target, eta, w);
}

MinNormResult min_norm_synth_detailed(const Matrix& pre_controls, const Vector& pre_target,
                                      const SolverSettings& settings, MinNormRoute route) {
    check_problem(pre_controls, pre_target);
    settings.validate();
    if (pre_controls.cols() == 1) {
        MinNormResult out;
        out.weights.w = Vector::Ones(1);
        out.path_consistent = true;
        out.route_used = route == MinNormRoute::TwoStage ? MinNormRoute::TwoStage : MinNormRoute::RidgePath;
        return out;
    }
    if (route == MinNormRoute::TwoStage) return two_stage(pre_controls, pre_target, settings);
    MinNormResult path = ridge_path(pre_controls, pre_target, settings);
    if (route == MinNormRoute::RidgePath || path.path_consistent) return path;
    MinNormResult fallback = two_stage(pre_controls, pre_target, settings);
    fallback.path_steps = std::move(path.path_steps);
    return fallback;
}

SimplexWeights min_norm_synth(const Matrix& pre_controls, const Vector& pre_target, const SolverSettings& settings) {
    return min_norm_synth_detailed(pre_controls, pre_target, settings, MinNormRoute::Auto).weights;
}

ScDecomposition sc_averaging_decomposition(const Vector& full, std::span<const Vector> loo, double tol,
                                           const SolverSettings& settings) {
    const Index size = full.size();
    if (size <= 1) throw ValidationError("sc_averaging_decomposition: needs |J| > 1");
    if (static_cast<Index>(loo.size()) != size) {
        throw ValidationError("sc_averaging_decomposition: expected one leave-one-out solution per member");
    }
    Matrix basis(size, size);
    for (Index j = 0; j < size; ++j) {
        const Vector& v = loo[static_cast<std::size_t>(j)];
        if (v.size() != size) throw ValidationError("sc_averaging_decomposition: leave-one-out length mismatch");
        if (v(j) != 0.0) {
            throw ValidationError("sc_averaging_decomposition: submodel " + std::to_string(j) +
                                  " puts weight on its excluded donor");
        }
        basis.col(j) = v;
    }
    ScDecomposition out;
    const Vector lambda = min_norm_synth(basis, full, settings).w;
    out.lambda.weights.assign(lambda.data(), lambda.data() + size);
    out.residual = (full - basis * lambda).norm();
    if (!(out.residual <= tol)) {
        throw NumericalError("synthetic-control averaging decomposition residual " +
                             std::to_string(out.residual) + " exceeds " + std::to_string(tol));
    }
    return out;
}

ScAveraging sc_model_averaging(const Matrix& pre_controls, const Vector& pre_target, double tol,
                               const SolverSettings& settings, std::optional<RidgePenalty> penalty) {
    check_problem(pre_controls, pre_target);
    const Index size = pre_controls.cols();
    if (size <= 1) throw ValidationError("sc_model_averaging: needs |J| > 1");
    auto solve = [&](const Matrix& a) {
        return penalty ? ridge_synth(a, pre_target, *penalty, settings).w
                       : min_norm_synth(a, pre_target, settings).w;
    };
    ScAveraging out;
    out.full = solve(pre_controls);
    out.loo.reserve(static_cast<std::size_t>(size));
    for (Index j = 0; j < size; ++j) {
        std::vector<Index> keep;
        for (Index i = 0; i < size; ++i) {
            if (i != j) keep.push_back(i);
        }
        const Vector local = solve(select_columns(pre_controls, keep));
        Vector embedded = Vector::Zero(size);
        for (std::size_t p = 0; p < keep.size(); ++p) embedded(keep[p]) = local(static_cast<Index>(p));
        out.loo.push_back(std::move(embedded));
    }
    out.decomposition = sc_averaging_decomposition(out.full, out.loo, tol, settings);
    return out;
}

Vector impute(const SimplexWeights& weights, const Matrix& post_controls) {
    if (post_controls.cols() != weights.w.size()) {
        throw ValidationError("impute: post-period controls have " + std::to_string(post_controls.cols()) +
                              " donors but the weights have length " + std::to_string(weights.w.size()));
    }
    require_finite(weights.w, "impute weights");
    if (post_controls.rows() == 0) return Vector(0);
    if (!post_controls.allFinite()) throw ValidationError("impute: non-finite post-period control");
    return post_controls * weights.w;
}

SimplexWeights embed(const SimplexWeights& local, const DonorSubset& subset) {
    if (local.w.size() != subset.size()) throw ValidationError("embed: weight length does not match subset");
    SimplexWeights out{Vector::Zero(subset.donors())};
    for (Index p = 0; p < subset.size(); ++p) out.w(subset.indices()[static_cast<std::size_t>(p)]) = local.w(p);
    return out;
}

SynthFit fit_synth(const Panel& panel, const DonorSubset& subset, const SolverSettings& settings) {
    panel.validate();
    if (subset.donors() != panel.donors()) throw ValidationError("fit_synth: subset built for a different donor pool");
    const Matrix pre = select_columns(panel.pre_controls(), subset.indices());
    const Vector target = panel.pre_target();
    const SimplexWeights local = min_norm_synth(pre, target, settings);
    SynthFit fit;
    fit.weights = embed(local, subset);
    fit.train_rmse = std::sqrt((target - pre * local.w).squaredNorm() / static_cast<double>(panel.pre_periods));
    if (panel.post_periods > 0) {
        const Matrix post = select_columns(panel.post_controls(), subset.indices());
        const Vector imputed = impute(local, post);
        fit.out_rmse = std::sqrt((panel.post_target() - imputed).squaredNorm() /
                                 static_cast<double>(panel.post_periods));
    }
    return fit;
}

}  // namespace descent
