#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "upmdp/expr.hpp"
#include "upmdp/mdp.hpp"
#include "upmdp/rng.hpp"

namespace upmdp {

inline constexpr double kEntryClamp = 1e-12;

/// Distribution over the parameter space: a uniform box, independent
/// triangular marginals, or a finite mixture of boxes.
struct ParameterDistribution {
    enum class Kind { box, triangular, mixture };

    Kind kind = Kind::box;
    std::vector<std::array<double, 2>> box;                        // per-parameter [lo, hi]
    std::vector<std::array<double, 3>> triangular;                 // per-parameter [lo, mode, hi]
    std::vector<double> mixture_weights;
    std::vector<std::vector<std::array<double, 2>>> mixture_boxes;

    std::size_t dimension() const {
        switch (kind) {
            case Kind::box: return box.size();
            case Kind::triangular: return triangular.size();
            case Kind::mixture: return mixture_boxes.empty() ? 0 : mixture_boxes.front().size();
        }
        return 0;
    }
};

inline ParameterDistribution uniform_box_distribution(std::size_t dimension, double lo = 0.0,
                                                      double hi = 1.0) {
    ParameterDistribution dist;
    dist.kind = ParameterDistribution::Kind::box;
    dist.box.assign(dimension, {lo, hi});
    return dist;
}

inline void validate_distribution(const ParameterDistribution& dist, std::size_t num_params) {
    if (dist.dimension() != num_params)
        throw SchemaError("distribution", "dimension does not match the parameter list");
    switch (dist.kind) {
        case ParameterDistribution::Kind::box:
            for (const auto& b : dist.box)
                if (!(b[0] <= b[1])) throw SchemaError("distribution", "box bound with lo > hi");
            break;
        case ParameterDistribution::Kind::triangular:
            for (const auto& t : dist.triangular)
                if (!(t[0] <= t[1] && t[1] <= t[2]))
                    throw SchemaError("distribution", "triangular bound needs lo <= mode <= hi");
            break;
        case ParameterDistribution::Kind::mixture: {
            if (dist.mixture_weights.size() != dist.mixture_boxes.size() || dist.mixture_boxes.empty())
                throw SchemaError("distribution", "mixture weights and components disagree");
            double sum = 0.0;
            for (double w : dist.mixture_weights) {
                if (w < 0.0) throw SchemaError("distribution", "negative mixture weight");
                sum += w;
            }
            if (std::abs(sum - 1.0) > kRowSumTol)
                throw SchemaError("distribution", "mixture weights sum to " + std::to_string(sum));
            for (const auto& component : dist.mixture_boxes) {
                if (component.size() != dist.mixture_boxes.front().size())
                    throw SchemaError("distribution", "mixture components of unequal dimension");
                for (const auto& b : component)
                    if (!(b[0] <= b[1])) throw SchemaError("distribution", "box bound with lo > hi");
            }
            break;
        }
    }
}

/// MDP skeleton whose transition entries are parameter expressions. Sparse:
/// absent targets are structural zeros.
struct TransitionEntry {
    int target;
    Expr expr;
};

struct UpMdpTemplate {
    std::vector<std::string> state_names;
    std::vector<std::string> action_names;
    std::vector<std::string> params;
    std::vector<std::vector<int>> enabled;                               // [s] -> action ids
    std::vector<std::vector<std::vector<TransitionEntry>>> trans;        // [s][slot]
    std::vector<double> initial;
    double gamma = 0.99;
    std::vector<char> goal, safe;
    ParameterDistribution distribution;

    int num_states() const { return static_cast<int>(state_names.size()); }
    bool is_terminal(int s) const { return goal[s] || !safe[s]; }

    /// Concrete-model fields shared with every instantiation.
    Mdp skeleton() const {
        Mdp m;
        m.state_names = state_names;
        m.action_names = action_names;
        m.enabled = enabled;
        m.initial = initial;
        m.gamma = gamma;
        m.goal = goal;
        m.safe = safe;
        m.trans.resize(state_names.size());
        return m;
    }
};

/// Structural checks that do not depend on parameter values.
inline void validate_template(const UpMdpTemplate& t) {
    const int n = t.num_states();
    if (n == 0) throw SchemaError("states", "empty state set");
    if (static_cast<int>(t.enabled.size()) != n || static_cast<int>(t.trans.size()) != n)
        throw SchemaError("transitions", "missing rows for some states");
    if (!(t.gamma > 0.0 && t.gamma <= 1.0)) throw SchemaError("gamma", "must lie in (0, 1]");

    double rho = 0.0;
    for (double p : t.initial) {
        if (p < 0.0) throw SchemaError("initial", "negative probability");
        rho += p;
    }
    if (std::abs(rho - 1.0) > kRowSumTol)
        throw SchemaError("initial", "sums to " + std::to_string(rho));

    for (int s = 0; s < n; ++s) {
        if (t.enabled[s].empty())
            throw SchemaError("transitions", "state " + t.state_names[s] + " has no enabled action");
        if (t.trans[s].size() != t.enabled[s].size())
            throw SchemaError("transitions", "state " + t.state_names[s] + " has mismatched rows");
        if (t.is_terminal(s)) {
            for (const auto& row : t.trans[s])
                if (row.size() != 1 || row.front().target != s)
                    throw SchemaError("transitions", "terminal state " + t.state_names[s] +
                                                         " must carry only a self-loop");
        }
    }
    validate_distribution(t.distribution, t.params.size());
}

/// Evaluates every transition expression at a parameter point. Entries may
/// undershoot zero by at most kEntryClamp (clamped away); larger violations
/// or row sums off by more than kRowSumTol raise NormalizationError.
inline Mdp instantiate(const UpMdpTemplate& t, std::span<const double> values,
                       long sample_index = -1) {
    if (values.size() != t.params.size())
        throw InvalidInputError("parameter vector has length " + std::to_string(values.size()) +
                                ", template declares " + std::to_string(t.params.size()));
    Mdp m = t.skeleton();
    const int n = t.num_states();
    for (int s = 0; s < n; ++s) {
        m.trans[s].assign(t.enabled[s].size(), std::vector<double>(n, 0.0));
        for (std::size_t slot = 0; slot < t.enabled[s].size(); ++slot) {
            double sum = 0.0;
            for (const auto& entry : t.trans[s][slot]) {
                double p = eval_expr(entry.expr, values);
                if (p < 0.0) {
                    if (p < -kEntryClamp)
                        throw NormalizationError(s, t.enabled[s][slot], p, t.state_names[s],
                                                 t.action_names[t.enabled[s][slot]], sample_index);
                    p = 0.0;
                }
                if (p > 1.0 + kEntryClamp)
                    throw NormalizationError(s, t.enabled[s][slot], p, t.state_names[s],
                                             t.action_names[t.enabled[s][slot]], sample_index);
                m.trans[s][slot][entry.target] = std::min(p, 1.0);
                sum += m.trans[s][slot][entry.target];
            }
            if (std::abs(sum - 1.0) > kRowSumTol)
                throw NormalizationError(s, t.enabled[s][slot], sum, t.state_names[s],
                                         t.action_names[t.enabled[s][slot]], sample_index);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Scenario sampling
// ---------------------------------------------------------------------------

struct ScenarioSet {
    std::vector<std::vector<double>> samples;
    std::uint64_t seed = 0;
    std::string fingerprint;  // hash of the sampled distribution

    std::size_t size() const { return samples.size(); }
};

namespace detail {

inline double sample_triangular(double lo, double mode, double hi, double u) {
    if (hi <= lo) return lo;
    const double cut = (mode - lo) / (hi - lo);
    if (u < cut) return lo + std::sqrt(u * (hi - lo) * (mode - lo));
    return hi - std::sqrt((1.0 - u) * (hi - lo) * (hi - mode));
}

inline std::vector<double> draw_parameter_vector(const ParameterDistribution& dist, rng::Stream& stream) {
    std::vector<double> v(dist.dimension(), 0.0);
    switch (dist.kind) {
        case ParameterDistribution::Kind::box:
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] = dist.box[i][0] + (dist.box[i][1] - dist.box[i][0]) * stream.next_unit();
            break;
        case ParameterDistribution::Kind::triangular:
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] = sample_triangular(dist.triangular[i][0], dist.triangular[i][1],
                                         dist.triangular[i][2], stream.next_unit());
            break;
        case ParameterDistribution::Kind::mixture: {
            const double u = stream.next_unit();
            double acc = 0.0;
            std::size_t component = dist.mixture_boxes.size() - 1;
            for (std::size_t c = 0; c < dist.mixture_weights.size(); ++c) {
                acc += dist.mixture_weights[c];
                if (u < acc) {
                    component = c;
                    break;
                }
            }
            const auto& b = dist.mixture_boxes[component];
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] = b[i][0] + (b[i][1] - b[i][0]) * stream.next_unit();
            break;
        }
    }
    return v;
}

inline nlohmann::json distribution_to_json(const ParameterDistribution& dist) {
    nlohmann::json j;
    switch (dist.kind) {
        case ParameterDistribution::Kind::box:
            j["type"] = "box";
            j["bounds"] = dist.box;
            break;
        case ParameterDistribution::Kind::triangular:
            j["type"] = "triangular";
            j["bounds"] = dist.triangular;
            break;
        case ParameterDistribution::Kind::mixture:
            j["type"] = "mixture";
            j["weights"] = dist.mixture_weights;
            j["components"] = nlohmann::json::array();
            for (const auto& b : dist.mixture_boxes) j["components"].push_back(b);
            break;
    }
    return j;
}

}  // namespace detail

inline std::string distribution_fingerprint(const ParameterDistribution& dist) {
    const std::string dump = detail::distribution_to_json(dist).dump();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(rng::fnv1a64(dump.data(), dump.size())));
    return buf;
}

/// Draws n i.i.d. parameter vectors, each from its own counter-based stream,
/// so the result is reproducible and order-independent. Every sample is
/// instantiated once as a validity check.
inline ScenarioSet sample_scenarios(const UpMdpTemplate& t, std::size_t n, std::uint64_t seed,
                                    rng::Purpose purpose = rng::Purpose::scenarios) {
    ScenarioSet set;
    set.seed = seed;
    set.fingerprint = distribution_fingerprint(t.distribution);
    set.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        rng::Stream stream(seed, purpose, i);
        auto v = detail::draw_parameter_vector(t.distribution, stream);
        try {
            instantiate(t, v, static_cast<long>(i));
        } catch (const NormalizationError&) {
            std::ostringstream oss;
            for (double x : v) oss << x << " ";
            throw ModelError("sample " + std::to_string(i) + " [" + oss.str() +
                             "] does not instantiate to a valid MDP");
        }
        set.samples.push_back(std::move(v));
    }
    return set;
}

inline void save_scenarios(const std::string& path, const ScenarioSet& set) {
    nlohmann::json j;
    j["seed"] = set.seed;
    j["n"] = set.samples.size();
    j["samples"] = set.samples;
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path);
    out << j.dump(2) << "\n";
}

inline ScenarioSet load_scenarios(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError("invalid scenario file " + path + ": " + e.what());
    }
    ScenarioSet set;
    if (!j.contains("seed") || !j.contains("n") || !j.contains("samples"))
        throw SchemaError("samples", "scenario file requires seed, n and samples");
    set.seed = j["seed"].get<std::uint64_t>();
    set.samples = j["samples"].get<std::vector<std::vector<double>>>();
    if (set.samples.size() != j["n"].get<std::size_t>())
        throw SchemaError("n", "does not match the number of samples");
    return set;
}

// ---------------------------------------------------------------------------
// Model file format
// ---------------------------------------------------------------------------

namespace detail {

inline ParameterDistribution distribution_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("type")) throw SchemaError("distribution", "missing type");
    ParameterDistribution dist;
    const std::string type = j["type"].get<std::string>();
    try {
        if (type == "box") {
            dist.kind = ParameterDistribution::Kind::box;
            dist.box = j.at("bounds").get<std::vector<std::array<double, 2>>>();
        } else if (type == "triangular") {
            dist.kind = ParameterDistribution::Kind::triangular;
            dist.triangular = j.at("bounds").get<std::vector<std::array<double, 3>>>();
        } else if (type == "mixture") {
            dist.kind = ParameterDistribution::Kind::mixture;
            dist.mixture_weights = j.at("weights").get<std::vector<double>>();
            dist.mixture_boxes =
                j.at("components").get<std::vector<std::vector<std::array<double, 2>>>>();
        } else {
            throw SchemaError("distribution", "unknown type '" + type + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("distribution", e.what());
    }
    return dist;
}

}  // namespace detail

/// Reads the JSON model format; see README for the schema. Every expression
/// is parsed and bound, and structural checks run before returning.
inline UpMdpTemplate model_from_json(const nlohmann::json& j) {
    UpMdpTemplate t;
    for (const char* field : {"states", "actions", "gamma", "initial", "labels", "params",
                              "distribution", "transitions"})
        if (!j.contains(field)) throw SchemaError(field, "missing");

    try {
        t.state_names = j["states"].get<std::vector<std::string>>();
        t.action_names = j["actions"].get<std::vector<std::string>>();
        t.params = j["params"].get<std::vector<std::string>>();
        t.gamma = j["gamma"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("states/actions/params/gamma", e.what());
    }

    const int n = t.num_states();
    auto state_index = [&](const std::string& name, const char* field) {
        const auto it = std::find(t.state_names.begin(), t.state_names.end(), name);
        if (it == t.state_names.end())
            throw SchemaError(field, "unknown state '" + name + "'");
        return static_cast<int>(it - t.state_names.begin());
    };

    t.initial.assign(n, 0.0);
    for (const auto& [name, value] : j["initial"].items())
        t.initial[state_index(name, "initial")] = value.get<double>();

    t.goal.assign(n, 0);
    t.safe.assign(n, 0);
    if (!j["labels"].contains("goal") || !j["labels"].contains("safe"))
        throw SchemaError("labels", "requires goal and safe state lists");
    for (const auto& name : j["labels"]["goal"]) t.goal[state_index(name.get<std::string>(), "labels")] = 1;
    for (const auto& name : j["labels"]["safe"]) t.safe[state_index(name.get<std::string>(), "labels")] = 1;

    t.enabled.assign(n, {});
    t.trans.assign(n, {});
    for (const auto& entry : j["transitions"]) {
        if (!entry.contains("from") || !entry.contains("action") || !entry.contains("to"))
            throw SchemaError("transitions", "each entry requires from, action and to");
        const int s = state_index(entry["from"].get<std::string>(), "transitions");
        const std::string action = entry["action"].get<std::string>();
        const auto ait = std::find(t.action_names.begin(), t.action_names.end(), action);
        if (ait == t.action_names.end())
            throw SchemaError("transitions", "unknown action '" + action + "'");
        const int a = static_cast<int>(ait - t.action_names.begin());
        if (std::find(t.enabled[s].begin(), t.enabled[s].end(), a) != t.enabled[s].end())
            throw SchemaError("transitions", "duplicate row for (" + t.state_names[s] + ", " + action + ")");
        t.enabled[s].push_back(a);
        std::vector<TransitionEntry> row;
        for (const auto& [target, expr_text] : entry["to"].items()) {
            TransitionEntry te;
            te.target = state_index(target, "transitions");
            te.expr = parse_expr(expr_text.get<std::string>());
            bind_expr(te.expr, t.params,
                      "transition (" + t.state_names[s] + ", " + action + ") -> " + target);
            row.push_back(std::move(te));
        }
        t.trans[s].push_back(std::move(row));
    }

    t.distribution = detail::distribution_from_json(j["distribution"]);
    validate_template(t);
    return t;
}

inline nlohmann::json model_to_json(const UpMdpTemplate& t) {
    nlohmann::json j;
    j["states"] = t.state_names;
    j["actions"] = t.action_names;
    j["gamma"] = t.gamma;
    j["params"] = t.params;
    nlohmann::json initial = nlohmann::json::object();
    for (int s = 0; s < t.num_states(); ++s)
        if (t.initial[s] != 0.0) initial[t.state_names[s]] = t.initial[s];
    j["initial"] = initial;
    nlohmann::json goal = nlohmann::json::array(), safe = nlohmann::json::array();
    for (int s = 0; s < t.num_states(); ++s) {
        if (t.goal[s]) goal.push_back(t.state_names[s]);
        if (t.safe[s]) safe.push_back(t.state_names[s]);
    }
    j["labels"] = {{"goal", goal}, {"safe", safe}};
    j["distribution"] = detail::distribution_to_json(t.distribution);
    nlohmann::json transitions = nlohmann::json::array();
    for (int s = 0; s < t.num_states(); ++s)
        for (std::size_t slot = 0; slot < t.enabled[s].size(); ++slot) {
            nlohmann::json row;
            row["from"] = t.state_names[s];
            row["action"] = t.action_names[t.enabled[s][slot]];
            nlohmann::json to = nlohmann::json::object();
            for (const auto& entry : t.trans[s][slot])
                to[t.state_names[entry.target]] = print_expr(entry.expr);
            row["to"] = to;
            transitions.push_back(row);
        }
    j["transitions"] = transitions;
    return j;
}

inline UpMdpTemplate load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError("invalid JSON in " + path + ": " + e.what());
    }
    return model_from_json(j);
}

inline void save_model(const std::string& path, const UpMdpTemplate& t) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path);
    out << model_to_json(t).dump(2) << "\n";
}

}  // namespace upmdp
