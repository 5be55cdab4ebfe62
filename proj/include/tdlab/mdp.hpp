#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace tdlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Finite Markov reward process under a fixed policy: P is n x n row-stochastic,
/// rewards live in [0, 1], the discount is strictly inside (0, 1), and mu0 is the
/// initial state distribution.
struct MdpSpec {
    int n = 0;
    Mat P;
    Vec r;
    double gamma = 0.0;
    Vec mu0;
};

/// Linear features, one row per state. Rows are kept at norm <= 1 so the
/// contraction constants used downstream apply verbatim.
struct FeatureMap {
    Mat phi;  // n x d

    int dim() const { return static_cast<int>(phi.cols()); }
    int states() const { return static_cast<int>(phi.rows()); }
    Vec row(int s) const { return phi.row(s).transpose(); }
};

/// Stationary quantities of the chain together with the feature second-moment
/// matrix Sigma = Phi^T D Phi and its smallest eigenvalue omega.
struct StationaryAnalysis {
    Vec mu_pi;
    Mat sigma;
    double omega = 0.0;
    double lambda2_mod = 0.0;  // modulus of the subdominant transition eigenvalue

    Eigen::DiagonalMatrix<double, Eigen::Dynamic> D() const {
        return Eigen::DiagonalMatrix<double, Eigen::Dynamic>(mu_pi);
    }
};

/// Throws unless P is row-stochastic to 1e-12, rewards are in [0,1], gamma is in
/// (0,1) and mu0 is a distribution. Returns its argument for call chaining.
const MdpSpec& validate_mdp(const MdpSpec& spec);

/// Shape, row-norm and rank checks for a feature map attached to `spec`.
void validate_features(const MdpSpec& spec, const FeatureMap& features);

/// Stationary distribution (least-squares null-space solve), Sigma, omega, and
/// the ergodicity certificate. Throws ChainNotErgodic when the subdominant
/// eigenvalue modulus is not strictly below 1 - 1e-9.
StationaryAnalysis stationary_analysis(const MdpSpec& spec, const FeatureMap& features);

enum class Family {
    dense_dirichlet,  // every transition probability positive
    chain,            // birth-death chain with self loops
    garnet,           // exactly `branching` successors per state
};

Family parse_family(const std::string& name);
std::string family_name(Family family);

struct GeneratorOptions {
    Family family = Family::dense_dirichlet;
    int branching = 2;     // garnet only
    double gamma = 0.9;
};

/// Seed-deterministic random instance; the result always passes validate_mdp
/// and validate_features. Feature rows are rescaled so the largest row norm
/// is exactly 1.
std::pair<MdpSpec, FeatureMap> make_random_mdp(std::uint64_t seed, int n, int d,
                                               const GeneratorOptions& options = {});

/// The two-state reference chain used throughout the tests: P = [[.9,.1],[.2,.8]],
/// r = [1,0], gamma = 0.9, identity features, start in state 1.
std::pair<MdpSpec, FeatureMap> reference_chain();

struct Problem {
    MdpSpec mdp;
    FeatureMap features;
};

/// JSON round-trip with full double fidelity.
std::string problem_to_json(const Problem& problem);
Problem problem_from_json(const std::string& text);

Problem load_problem_file(const std::string& path);
void save_problem_file(const Problem& problem, const std::string& path);

}  // namespace tdlab
