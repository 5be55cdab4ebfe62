#include "tdlab/td.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tdlab/errors.hpp"

namespace tdlab {

Variant parse_variant(const std::string& name) {
    if (name == "standard") return Variant::standard;
    if (name == "regularized") return Variant::regularized;
    if (name == "projected") return Variant::projected;
    if (name == "tail-average") return Variant::tail_average;
    fail(ErrorCode::config_invalid, "no variant named '" + name + "'");
}

std::string variant_name(Variant variant) {
    switch (variant) {
        case Variant::standard: return "standard";
        case Variant::regularized: return "regularized";
        case Variant::projected: return "projected";
        case Variant::tail_average: return "tail-average";
    }
    return "?";
}

std::vector<std::int64_t> default_checkpoints(std::int64_t T) {
    std::vector<std::int64_t> points;
    for (std::int64_t t = 1; t < T; t *= 2) points.push_back(t);
    points.push_back(T);
    return points;
}

Vec td_step(const Vec& w, const Transition& tr, double eta, double lambda,
            const FeatureMap& features, double gamma) {
    const Vec phi_s = features.row(tr.s);
    const double td_error = tr.reward + gamma * features.row(tr.s_next).dot(w) - phi_s.dot(w);
    return w + eta * (td_error * phi_s - lambda * w);
}

namespace {

RunConfig normalized_config(const RunConfig& raw, const ProblemBundle& bundle) {
    RunConfig config = raw;
    if (config.T < 1) fail(ErrorCode::config_invalid, "horizon must be positive");
    if (config.schedule.T == 0) config.schedule.T = config.T;
    if (config.schedule.T != config.T)
        fail(ErrorCode::config_invalid, "schedule horizon disagrees with the run horizon");
    if (config.variant != Variant::regularized && config.lambda != 0.0)
        fail(ErrorCode::config_invalid, "lambda applies to the regularized variant only");
    if (config.variant == Variant::regularized && config.lambda < 0.0)
        fail(ErrorCode::missing_lambda, "regularized runs need lambda >= 0");
    if (!config.w_init.has_value()) config.w_init = Vec::Zero(bundle.dim());
    if (config.w_init->size() != bundle.dim())
        fail(ErrorCode::config_invalid, "w_init dimension disagrees with the features");
    if (!config.w_init->allFinite())
        fail(ErrorCode::non_finite_iterate, "w_init has a non-finite coordinate");
    if (config.checkpoints.empty()) config.checkpoints = default_checkpoints(config.T);
    if (!std::is_sorted(config.checkpoints.begin(), config.checkpoints.end()))
        fail(ErrorCode::config_invalid, "checkpoints must be sorted");
    if (config.checkpoints.front() < 0 || config.checkpoints.back() != config.T)
        fail(ErrorCode::config_invalid, "checkpoints must lie in [0, T] and include T");
    if (config.variant == Variant::tail_average &&
        !(config.tail_fraction > 0.0 && config.tail_fraction <= 1.0))
        fail(ErrorCode::config_invalid, "tail fraction must lie in (0, 1]");
    return config;
}

}  // namespace

RunRecord run_with_observer(const RunConfig& raw_config, const ProblemBundle& bundle,
                            const StepObserver& observer) {
    const RunConfig config = normalized_config(raw_config, bundle);
    const double lambda = config.variant == Variant::regularized ? config.lambda : 0.0;
    const FixedPoints fixed = solve_fixed_point(bundle, lambda);
    const double gamma = bundle.mdp.gamma;

    double radius = std::numeric_limits<double>::infinity();
    if (config.variant == Variant::projected) {
        radius = config.radius > 0.0
                     ? config.radius
                     : 2.0 * fixed.zeta / ((1.0 - gamma) * bundle.analysis.omega);
    }

    RunRecord record;
    record.config = config;
    Vec w = *config.w_init;
    record.initial_error_sq = (w - fixed.w_star).squaredNorm();
    record.initial_reg_error_sq = (w - fixed.w_reg_star).squaredNorm();

    const std::int64_t tail_window =
        config.variant == Variant::tail_average
            ? std::max<std::int64_t>(
                  1, static_cast<std::int64_t>(std::ceil(config.tail_fraction *
                                                         static_cast<double>(config.T))))
            : 0;
    Vec tail_sum = Vec::Zero(bundle.dim());

    TransitionSource source(config.regime, bundle.mdp, &bundle.analysis, config.seed);
    const Mat& phi = bundle.features.phi;

    auto value_error_at = [&](const Vec& v) {
        const Vec diff = v - fixed.w_star;
        return diff.dot(bundle.analysis.sigma * diff);
    };
    auto push_row = [&](std::int64_t t, const Vec& v, bool finite) {
        CheckpointRow row;
        row.t = t;
        if (finite) {
            row.error_sq = (v - fixed.w_star).squaredNorm();
            row.reg_error_sq = (v - fixed.w_reg_star).squaredNorm();
            row.value_error = value_error_at(v);
        } else {
            row.error_sq = row.reg_error_sq = row.value_error =
                std::numeric_limits<double>::infinity();
        }
        record.rows.push_back(row);
    };

    size_t next_checkpoint = 0;
    while (next_checkpoint < config.checkpoints.size() &&
           config.checkpoints[next_checkpoint] == 0) {
        push_row(0, w, true);
        ++next_checkpoint;
    }

    for (std::int64_t t = 1; t <= config.T; ++t) {
        const double eta = step_size(config.schedule, t);
        if (config.regime == Regime::mean_path) {
            // Exact expected direction g(w) = b - A w - lambda w.
            if (observer) {
                Transition none{-1, 0.0, -1};
                observer(t, w, none, eta);
            }
            Vec g = bundle.b_vec - bundle.A_mat * w;
            if (lambda != 0.0) g -= lambda * w;
            w += eta * g;
        } else {
            const Transition tr = source.next();
            if (observer) observer(t, w, tr, eta);
            const double td_error =
                tr.reward + gamma * phi.row(tr.s_next).dot(w) - phi.row(tr.s).dot(w);
            if (lambda != 0.0) w *= 1.0 - eta * lambda;
            w.noalias() += (eta * td_error) * phi.row(tr.s).transpose();
        }
        if (config.variant == Variant::projected) {
            const double norm = w.norm();
            if (norm > radius) w *= radius / norm;
        }
        if (!w.allFinite()) {
            record.diverged_at = t;
            break;
        }
        if (tail_window > 0 && t > config.T - tail_window) tail_sum += w;
        if (next_checkpoint < config.checkpoints.size() &&
            config.checkpoints[next_checkpoint] == t) {
            push_row(t, w, true);
            ++next_checkpoint;
        }
    }

    if (record.diverged_at >= 0) {
        for (size_t k = next_checkpoint; k < config.checkpoints.size(); ++k)
            push_row(config.checkpoints[k], w, false);
    }

    record.w_final = w;
    if (tail_window > 0 && record.diverged_at < 0) {
        record.w_tail_avg = tail_sum / static_cast<double>(tail_window);
        record.tail_avg_error_sq = (*record.w_tail_avg - fixed.w_star).squaredNorm();
    }
    return record;
}

RunRecord run(const RunConfig& config, const ProblemBundle& bundle) {
    return run_with_observer(config, bundle, StepObserver{});
}

// ─── aggregation ─────────────────────────────────────────────────────────────

namespace {

bool same_cell(const RunConfig& a, const RunConfig& b) {
    return a.variant == b.variant && a.lambda == b.lambda && a.radius == b.radius &&
           a.tail_fraction == b.tail_fraction && a.regime == b.regime && a.T == b.T &&
           a.schedule.kind == b.schedule.kind && a.schedule.eta0 == b.schedule.eta0 &&
           a.schedule.poly_z == b.schedule.poly_z && a.schedule.omega == b.schedule.omega &&
           a.schedule.divisor == b.schedule.divisor && a.checkpoints == b.checkpoints;
}

}  // namespace

std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& records) {
    if (records.empty()) fail(ErrorCode::heterogeneous_configs, "nothing to aggregate");
    for (const auto& rec : records)
        if (!same_cell(rec.config, records.front().config))
            fail(ErrorCode::heterogeneous_configs, "records mix sweep cells");

    // Seed order fixes the floating-point summation order, so the aggregate is
    // independent of the order records arrive in.
    std::vector<const RunRecord*> ordered;
    ordered.reserve(records.size());
    for (const auto& rec : records) ordered.push_back(&rec);
    std::sort(ordered.begin(), ordered.end(), [](const RunRecord* x, const RunRecord* y) {
        return x->config.seed < y->config.seed;
    });

    const size_t n_rows = records.front().rows.size();
    const double k = static_cast<double>(records.size());
    std::vector<SummaryRow> summary(n_rows);
    for (size_t i = 0; i < n_rows; ++i) {
        double sum = 0.0, sum_sq = 0.0, value_sum = 0.0;
        for (const RunRecord* rec : ordered) {
            if (rec->rows.size() != n_rows)
                fail(ErrorCode::heterogeneous_configs, "records disagree on checkpoints");
            const double err = rec->rows[i].error_sq;
            sum += err;
            sum_sq += err * err;
            value_sum += rec->rows[i].value_error;
        }
        SummaryRow& row = summary[i];
        row.t = records.front().rows[i].t;
        row.mean_error_sq = sum / k;
        row.mean_value_error = value_sum / k;
        if (records.size() > 1) {
            const double variance =
                std::max(0.0, (sum_sq - sum * sum / k) / (k - 1.0));
            row.stderr_error_sq = std::sqrt(variance / k);
        } else {
            row.stderr_error_sq = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return summary;
}

}  // namespace tdlab
