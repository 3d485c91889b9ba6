#pragma once

// VCG over directed sharing graphs and its budget-balanced variants that pay
// part of each VCG charge in "data money": the intermediary distorts the
// quality of the data an agent receives instead of collecting cash.

#include "datamarket/directed_search.hpp"
#include "datamarket/model.hpp"

#include <span>
#include <string>
#include <vector>

namespace datamarket {

/// A requested distortion cannot be realized for some agent.
struct CalibrationInfeasible : std::runtime_error {
    CalibrationInfeasible(AgentIndex agent, const std::string& what)
        : std::runtime_error("calibration infeasible for agent " + std::to_string(agent + 1) + ": " + what),
          agent(agent)
    {
    }
    AgentIndex agent;
};

inline constexpr double kIdentityTolerance = 1e-9;
inline constexpr double kCalibrationTolerance = 1e-10;

/// Allocation space: every edge is absent or present at `base_weight`
/// (1 for plain graphs, w0 < 1 for the pre-distorted class).
struct GraphClass {
    double base_weight = 1.0;

    static GraphClass unweighted() { return {}; }
    static GraphClass base_distorted(double w0);
};

enum class SolverMode { decomposed, brute };

/// How the pivot problem for agent i treats i: keep its data in the market
/// and drop only its own V, or remove it together with all its edges.
enum class PivotRule { keep_data, remove_agent };

struct VcgCore {
    DirectedGraph g_star;
    double base_weight = 1.0;
    std::vector<double> t_tilde;
    double delta = 0.0;
    /// Per-agent pivot graphs: optimum of everyone else's V over the same class.
    std::vector<DirectedGraph> g_minus;
    /// SW^T of g_star.
    double welfare = 0.0;
};

/// G*, the pivot graphs, t~_i = sum_{j!=i} V_j(G*_-i) - sum_{j!=i} V_j(G*) and
/// their sum.
VcgCore solve_vcg(const Profiles& profiles, const PreferenceModel& pref, GraphClass graph_class = {},
                  SolverMode mode = SolverMode::decomposed, Execution exec = Execution::parallel,
                  std::optional<std::size_t> cap = std::nullopt, PivotRule pivot = PivotRule::keep_data);

struct DataMoneySplit {
    std::vector<double> data_money;
    /// Part of the imbalance no agent could absorb; zero means balanced.
    double residual = 0.0;
};

/// Surplus: sweep from the largest t~, taking min(max(t~,0), capacity,
/// remaining). Deficit: sweep from the smallest, symmetric with signs
/// flipped. Equal t~ keep index order.
DataMoneySplit split_data_money(std::span<const double> t_tilde, double delta, std::span<const double> capacities);

/// U(alpha) = scale * sqrt(own + alpha * received): an agent's benefit when
/// every incoming weight is multiplied by alpha.
struct DistortionCurve {
    double scale = 0.0;
    double own = 0.0;
    double received = 0.0;

    double at(double alpha) const;
};

/// Allowed range for the incoming-weight multiplier.
struct DistortionBounds {
    double lower = 0.0;
    double upper = 1.0;
};

/// Curve of `agent` in `g`; nullopt for table models, which have no
/// notion of partially distorted data and so carry zero capacity.
std::optional<DistortionCurve> distortion_curve(const Profiles& profiles, const PreferenceModel& pref,
                                                const WeightedDirectedGraph& g, AgentIndex agent);

/// Multiplier alpha with U(alpha) = U(1) - data_money. Uses the closed form
/// and checks it against monotone bisection.
double calibrate_scale(const DistortionCurve& curve, double data_money, DistortionBounds bounds, AgentIndex agent);

struct Calibration {
    WeightedDirectedGraph allocation;
    std::vector<double> alpha;
};

/// Scales each agent's incoming weights so that its benefit drops by its
/// data money (rises, when negative). Other agents' weights and every
/// supply cost are untouched.
Calibration calibrate_distortion(const Profiles& profiles, const PreferenceModel& pref,
                                 const WeightedDirectedGraph& g_star, std::span<const double> data_money,
                                 DistortionBounds bounds);

enum class MechanismKind { standard, mixed, d_mixed };

struct MechanismOptions {
    MechanismKind kind = MechanismKind::mixed;
    /// Base weight for d_mixed.
    double w0 = 0.5;
    /// Largest upward multiplier for mixed (deficit case).
    double alpha_max = 10.0;
    SolverMode solver = SolverMode::decomposed;
    Execution exec = Execution::parallel;
    PivotRule pivot = PivotRule::keep_data;
};

struct MechanismOutcome {
    MechanismKind kind = MechanismKind::mixed;
    VcgCore core;
    WeightedDirectedGraph allocation;
    std::vector<double> money;
    std::vector<double> data_money;
    std::vector<double> alpha;
    std::vector<double> capacity;
    double residual = 0.0;
    DistortionBounds bounds;

    bool balanced() const { return residual == 0.0; }
};

/// Standard VCG: allocation G*, money t~.
MechanismOutcome standard_vcg(const Profiles& profiles, const PreferenceModel& pref, MechanismOptions options = {});
MechanismOutcome mixed_vcg(const Profiles& profiles, const PreferenceModel& pref, MechanismOptions options = {});
/// mixed_vcg over the class with every edge at w0; weights stay in [0, 1].
MechanismOutcome d_mixed_vcg(const Profiles& profiles, const PreferenceModel& pref, double w0,
                             MechanismOptions options = {});
MechanismOutcome run_mechanism(const Profiles& profiles, const PreferenceModel& pref, const MechanismOptions& options);

/// V_i(allocation) - t_i.
double mechanism_net_utility(const Profiles& profiles, const PreferenceModel& pref, const MechanismOutcome& out,
                             AgentIndex agent);
/// SW^A: sum of net utilities.
double agents_welfare(const Profiles& profiles, const PreferenceModel& pref, const MechanismOutcome& out);
/// SW^T: sum of V over the allocation, payments excluded.
double total_social_welfare(const Profiles& profiles, const PreferenceModel& pref, const MechanismOutcome& out);

struct Check {
    std::string name;
    bool pass = true;
    /// Largest violation (or margin, for inequality checks).
    double slack = 0.0;
    /// Number of items the check applied to.
    std::size_t checked = 0;
};

/// Budget balance, t + t^d = t~, utility equivalence with standard VCG, the
/// SW^A and SW^T identities, calibration accuracy, isolated impact and
/// ex-post IR against autarky for agents whose pivot graph leaves them no
/// worse than autarky.
std::vector<Check> check_mechanism(const Profiles& profiles, const PreferenceModel& pref,
                                   const MechanismOutcome& out);

struct ProbePoint {
    std::string parameter; // "truthful", "benefit_scale" or "supply_cost"
    double factor = 1.0;
    double net_utility = 0.0;
    double gain = 0.0;
};

struct ProbeReport {
    AgentIndex agent = 0;
    double truthful_utility = 0.0;
    std::vector<ProbePoint> points;
    double max_gain = 0.0;
};

inline constexpr double kMisreportFactors[] = {0.5, 0.8, 1.25, 2.0};

/// Re-runs the mechanism with `agent` misreporting its benefit scale or its
/// supply costs by each factor, and measures the change in its true net
/// utility against truthful reporting.
ProbeReport truthfulness_probe(const Profiles& profiles, const PreferenceModel& pref, AgentIndex agent,
                               std::span<const double> factors, const MechanismOptions& options);

} // namespace datamarket
