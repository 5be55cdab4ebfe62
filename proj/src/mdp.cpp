#include "tdlab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "tdlab/errors.hpp"
#include "tdlab/rng.hpp"

namespace tdlab {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kStationaryResidualTol = 1e-10;
constexpr double kErgodicGap = 1e-9;
constexpr double kRankTol = 1e-10;
constexpr double kOmegaFloor = 1e-12;

}  // namespace

// ─── validation ──────────────────────────────────────────────────────────────

const MdpSpec& validate_mdp(const MdpSpec& spec) {
    if (spec.n < 1) fail(ErrorCode::non_stochastic_row, "state count must be positive");
    if (spec.P.rows() != spec.n || spec.P.cols() != spec.n)
        fail(ErrorCode::non_stochastic_row, "P must be n x n");
    for (int i = 0; i < spec.n; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < spec.n; ++j) {
            const double p = spec.P(i, j);
            if (!(p >= 0.0) || !std::isfinite(p))
                fail(ErrorCode::non_stochastic_row,
                     "P(" + std::to_string(i) + "," + std::to_string(j) + ") negative or non-finite");
            row_sum += p;
        }
        if (std::abs(row_sum - 1.0) > kRowSumTol)
            fail(ErrorCode::non_stochastic_row,
                 "row " + std::to_string(i) + " sums to " + std::to_string(row_sum));
    }
    if (spec.r.size() != spec.n) fail(ErrorCode::reward_out_of_range, "r must have n entries");
    for (int i = 0; i < spec.n; ++i) {
        const double v = spec.r[i];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            fail(ErrorCode::reward_out_of_range,
                 "r(" + std::to_string(i) + ") = " + std::to_string(v) + " outside [0,1]");
    }
    if (!std::isfinite(spec.gamma) || spec.gamma <= 0.0 || spec.gamma >= 1.0)
        fail(ErrorCode::discount_out_of_range, "gamma must lie strictly inside (0,1)");
    if (spec.mu0.size() != spec.n)
        fail(ErrorCode::bad_initial_distribution, "mu0 must have n entries");
    double mass = 0.0;
    for (int i = 0; i < spec.n; ++i) {
        const double p = spec.mu0[i];
        if (!(p >= 0.0) || !std::isfinite(p))
            fail(ErrorCode::bad_initial_distribution, "mu0 has a negative or non-finite entry");
        mass += p;
    }
    if (std::abs(mass - 1.0) > kRowSumTol)
        fail(ErrorCode::bad_initial_distribution, "mu0 sums to " + std::to_string(mass));
    return spec;
}

void validate_features(const MdpSpec& spec, const FeatureMap& features) {
    if (features.phi.rows() != spec.n)
        fail(ErrorCode::feature_shape_mismatch, "feature rows must match the state count");
    const int d = features.dim();
    if (d < 1) fail(ErrorCode::degenerate_features, "feature dimension must be positive");
    if (d > spec.n)
        fail(ErrorCode::degenerate_features, "feature dimension exceeds the state count");
    for (int s = 0; s < spec.n; ++s) {
        const double norm = features.phi.row(s).norm();
        if (!std::isfinite(norm) || norm > 1.0 + 1e-12)
            fail(ErrorCode::degenerate_features,
                 "feature row " + std::to_string(s) + " has norm " + std::to_string(norm));
    }
    Eigen::JacobiSVD<Mat> svd(features.phi);
    const double smallest = svd.singularValues().tail(1)(0);
    if (smallest <= kRankTol)
        fail(ErrorCode::degenerate_features,
             "smallest singular value " + std::to_string(smallest) + " certifies rank deficiency");
}

// ─── stationary analysis ─────────────────────────────────────────────────────

StationaryAnalysis stationary_analysis(const MdpSpec& spec, const FeatureMap& features) {
    validate_mdp(spec);
    validate_features(spec, features);
    const int n = spec.n;

    // Ergodicity certificate: the eigenvalue 1 must be simple and every other
    // eigenvalue strictly inside the unit circle.
    double lambda2_mod = 0.0;
    {
        Eigen::EigenSolver<Mat> es(spec.P, /*computeEigenvectors=*/false);
        std::vector<double> moduli(n);
        for (int i = 0; i < n; ++i) moduli[i] = std::abs(es.eigenvalues()[i]);
        std::sort(moduli.begin(), moduli.end(), std::greater<double>());
        if (n > 1) {
            lambda2_mod = moduli[1];
            if (lambda2_mod >= 1.0 - kErgodicGap)
                fail(ErrorCode::chain_not_ergodic,
                     "subdominant eigenvalue modulus " + std::to_string(lambda2_mod));
        }
    }

    // mu_pi: least-squares solution of the stacked system (P^T - I) mu = 0,
    // 1^T mu = 1. The ergodicity check above makes the solution unique.
    Mat system(n + 1, n);
    system.topRows(n) = spec.P.transpose() - Mat::Identity(n, n);
    system.row(n).setOnes();
    Vec rhs = Vec::Zero(n + 1);
    rhs[n] = 1.0;
    Vec mu = system.colPivHouseholderQr().solve(rhs);
    for (int i = 0; i < n; ++i) {
        if (mu[i] < -1e-9)
            fail(ErrorCode::singular_system, "stationary solve produced a negative mass");
        mu[i] = std::max(mu[i], 0.0);
    }
    mu /= mu.sum();
    const double residual = ((spec.P.transpose() * mu) - mu).lpNorm<Eigen::Infinity>();
    if (residual > kStationaryResidualTol)
        fail(ErrorCode::singular_system,
             "stationary residual " + std::to_string(residual) + " exceeds tolerance");

    StationaryAnalysis out;
    out.mu_pi = mu;
    out.lambda2_mod = lambda2_mod;
    out.sigma = features.phi.transpose() * mu.asDiagonal() * features.phi;
    Eigen::SelfAdjointEigenSolver<Mat> ses(out.sigma);
    out.omega = ses.eigenvalues()(0);
    if (!(out.omega > kOmegaFloor))
        fail(ErrorCode::degenerate_features,
             "Sigma is not positive definite (omega = " + std::to_string(out.omega) + ")");
    return out;
}

// ─── generators ──────────────────────────────────────────────────────────────

Family parse_family(const std::string& name) {
    if (name == "dense-dirichlet") return Family::dense_dirichlet;
    if (name == "chain") return Family::chain;
    if (name == "garnet") return Family::garnet;
    fail(ErrorCode::unknown_family, "no generator family named '" + name + "'");
}

std::string family_name(Family family) {
    switch (family) {
        case Family::dense_dirichlet: return "dense-dirichlet";
        case Family::chain: return "chain";
        case Family::garnet: return "garnet";
    }
    return "?";
}

namespace {

// Dirichlet(1,...,1) over `k` coordinates via normalized exponentials.
Vec random_simplex(Rng& rng, int k) {
    Vec v(k);
    for (int i = 0; i < k; ++i) v[i] = -std::log(1.0 - rng.next_double());
    return v / v.sum();
}

Mat dense_dirichlet_rows(Rng& rng, int n) {
    Mat P(n, n);
    for (int i = 0; i < n; ++i) P.row(i) = random_simplex(rng, n).transpose();
    return P;
}

Mat chain_rows(Rng& rng, int n) {
    // Birth-death chain: stay/left/right masses are random but bounded away
    // from zero, so the chain is irreducible and aperiodic by construction.
    Mat P = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const double stay = rng.uniform(0.2, 0.6);
        if (i == 0) {
            P(0, 0) = stay;
            P(0, std::min(1, n - 1)) += 1.0 - stay;
        } else if (i == n - 1) {
            P(i, i) = stay;
            P(i, i - 1) += 1.0 - stay;
        } else {
            const double right = rng.uniform(0.2, 0.8) * (1.0 - stay);
            P(i, i) = stay;
            P(i, i + 1) = right;
            P(i, i - 1) = 1.0 - stay - right;
        }
    }
    return P;
}

Mat garnet_rows(Rng& rng, int n, int branching) {
    const int b = std::clamp(branching, 1, n);
    Mat P = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        // Successor (i+1) mod n is always present so the ring keeps the chain
        // irreducible; state 0 keeps a self loop to break periodicity.
        std::vector<int> targets{(i + 1) % n};
        if (i == 0 && b >= 2) targets.push_back(0);
        while (static_cast<int>(targets.size()) < b) {
            const int candidate = static_cast<int>(rng.next_double() * n);
            if (std::find(targets.begin(), targets.end(), candidate) == targets.end())
                targets.push_back(candidate);
        }
        const Vec mass = random_simplex(rng, b);
        for (int k = 0; k < b; ++k) P(i, targets[k]) = mass[k];
    }
    return P;
}

}  // namespace

std::pair<MdpSpec, FeatureMap> make_random_mdp(std::uint64_t seed, int n, int d,
                                               const GeneratorOptions& options) {
    if (n < 1 || d < 1 || d > n)
        fail(ErrorCode::unknown_family, "generator needs 1 <= d <= n");
    Rng rng(derive_stream(seed, 0x6d6470u + static_cast<std::uint64_t>(options.family)));

    MdpSpec spec;
    spec.n = n;
    spec.gamma = options.gamma;
    switch (options.family) {
        case Family::dense_dirichlet: spec.P = dense_dirichlet_rows(rng, n); break;
        case Family::chain: spec.P = chain_rows(rng, n); break;
        case Family::garnet: spec.P = garnet_rows(rng, n, options.branching); break;
    }
    spec.r = Vec(n);
    for (int i = 0; i < n; ++i) spec.r[i] = rng.next_double();
    spec.mu0 = random_simplex(rng, n);

    FeatureMap features;
    features.phi = Mat(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) features.phi(i, j) = rng.uniform(-1.0, 1.0);
    double max_norm = 0.0;
    for (int i = 0; i < n; ++i) max_norm = std::max(max_norm, features.phi.row(i).norm());
    features.phi /= max_norm;

    validate_mdp(spec);
    validate_features(spec, features);
    return {std::move(spec), std::move(features)};
}

std::pair<MdpSpec, FeatureMap> reference_chain() {
    MdpSpec spec;
    spec.n = 2;
    spec.P = Mat(2, 2);
    spec.P << 0.9, 0.1, 0.2, 0.8;
    spec.r = Vec(2);
    spec.r << 1.0, 0.0;
    spec.gamma = 0.9;
    spec.mu0 = Vec(2);
    spec.mu0 << 0.0, 1.0;
    FeatureMap features;
    features.phi = Mat::Identity(2, 2);
    return {std::move(spec), std::move(features)};
}

// ─── serialization ───────────────────────────────────────────────────────────

namespace {

nlohmann::json matrix_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.empty())
        fail(ErrorCode::config_invalid, what + " must be a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols)
            fail(ErrorCode::config_invalid, what + " rows have uneven lengths");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

Vec vector_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) fail(ErrorCode::config_invalid, what + " must be an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

}  // namespace

std::string problem_to_json(const Problem& problem) {
    nlohmann::json doc;
    doc["n"] = problem.mdp.n;
    doc["gamma"] = problem.mdp.gamma;
    doc["P"] = matrix_to_json(problem.mdp.P);
    doc["r"] = matrix_to_json(problem.mdp.r.transpose())[0];
    doc["mu0"] = matrix_to_json(problem.mdp.mu0.transpose())[0];
    doc["phi"] = matrix_to_json(problem.features.phi);
    return doc.dump(2);
}

Problem problem_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::config_invalid, std::string("problem JSON does not parse: ") + e.what());
    }
    static const char* known[] = {"n", "gamma", "P", "r", "mu0", "phi"};
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known))
            fail(ErrorCode::config_invalid, "unknown problem key '" + key + "'");
    }
    for (const char* key : known)
        if (!doc.contains(key)) fail(ErrorCode::config_invalid, std::string("problem lacks '") + key + "'");

    Problem problem;
    problem.mdp.n = doc["n"].get<int>();
    problem.mdp.gamma = doc["gamma"].get<double>();
    problem.mdp.P = matrix_from_json(doc["P"], "P");
    problem.mdp.r = vector_from_json(doc["r"], "r");
    problem.mdp.mu0 = vector_from_json(doc["mu0"], "mu0");
    problem.features.phi = matrix_from_json(doc["phi"], "phi");
    validate_mdp(problem.mdp);
    validate_features(problem.mdp, problem.features);
    return problem;
}

Problem load_problem_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_failure, "cannot open problem file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return problem_from_json(buffer.str());
}

void save_problem_file(const Problem& problem, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io_failure, "cannot write problem file '" + path + "'");
    out << problem_to_json(problem) << '\n';
}

}  // namespace tdlab
