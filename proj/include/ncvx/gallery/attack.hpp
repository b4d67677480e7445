#ifndef NCVX_GALLERY_ATTACK_HPP
#define NCVX_GALLERY_ATTACK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "ncvx/gallery/common.hpp"
#include "ncvx/gallery/config.hpp"

namespace ncvx::gallery {

enum class AttackMode
{
    MaxLoss,
    MinDistortion
};
enum class AttackMetric
{
    L2,
    Embed
};

inline std::string to_string(AttackMode m) { return m == AttackMode::MaxLoss ? "max-loss" : "min-distortion"; }
inline std::string to_string(AttackMetric m) { return m == AttackMetric::L2 ? "l2" : "embed"; }

/// Perturbation attack on a fixed random relu classifier R^8 -> R^3.
struct AttackConfig
{
    std::uint64_t seed = 1;
    AttackMode mode = AttackMode::MaxLoss;
    AttackMetric metric = AttackMetric::L2;
    double epsilon = 0.5;
    std::int64_t hidden = 16;

    static constexpr std::int64_t inputs = 8;
    static constexpr std::int64_t classes = 3;
    static constexpr std::int64_t features = 4;

    void validate() const
    {
        require_config(epsilon > 0.0 && std::isfinite(epsilon), "epsilon", "must be positive");
        require_config(hidden >= 1, "hidden", "must be at least 1");
    }

    static AttackConfig from_map(const ConfigMap& map)
    {
        ConfigReader r(map);
        AttackConfig c;
        c.seed = r.unsigned_integer("seed", c.seed);
        const std::string mode = r.text("mode", to_string(c.mode));
        if (mode == "max-loss") c.mode = AttackMode::MaxLoss;
        else if (mode == "min-distortion") c.mode = AttackMode::MinDistortion;
        else throw ConfigError("mode", "expected max-loss or min-distortion, got '" + mode + "'");
        const std::string metric = r.text("metric", to_string(c.metric));
        if (metric == "l2") c.metric = AttackMetric::L2;
        else if (metric == "embed") c.metric = AttackMetric::Embed;
        else throw ConfigError("metric", "expected l2 or embed, got '" + metric + "'");
        c.epsilon = r.real("epsilon", c.epsilon);
        c.hidden = r.integer("hidden", c.hidden);
        r.reject_unknown();
        return c;
    }

    ConfigMap to_map() const
    {
        return {{"seed", std::to_string(seed)}, {"mode", to_string(mode)}, {"metric", to_string(metric)},
                {"epsilon", format_double(epsilon)}, {"hidden", std::to_string(hidden)}};
    }
};

struct AttackNetwork
{
    Matrix W1, W2, E;  // hidden, output and embedder weights
    Vector b1, b2, e;

    Vector logits(const Vector& x) const { return W2 * (W1 * x + b1).cwiseMax(0.0) + b2; }
    Vector embedding(const Vector& x) const { return (E * x + e).cwiseMax(0.0); }
};

struct AttackInstance : Instance
{
    AttackNetwork net;
    Vector clean;  // correctly classified input
    Eigen::Index label = 0;
};

inline AttackInstance build_attack(const AttackConfig& cfg)
{
    cfg.validate();
    const Eigen::Index d = AttackConfig::inputs, h = cfg.hidden, k = AttackConfig::classes,
                       p = AttackConfig::features;
    Rng rng(cfg.seed);
    AttackNetwork net;
    Vector clean(d);
    Eigen::Index label = 0;
    std::vector<std::size_t> others;
    auto margin_at = [&](const Vector& z) {
        const Vector l = net.logits(z);
        double other = -std::numeric_limits<double>::infinity();
        for (std::size_t i : others) other = std::max(other, l[static_cast<Eigen::Index>(i)]);
        return other - l[label];
    };
    // Redraw until some point of the box is misclassified, so both modes are feasible.
    std::vector<Vector> flipped;
    for (int draw = 0; draw < 100 && flipped.empty(); ++draw) {
        net.W1 = gaussian_matrix(rng, h, d) / std::sqrt(static_cast<double>(d));
        net.b1 = gaussian_matrix(rng, h, 1).col(0) * 0.1;
        net.W2 = gaussian_matrix(rng, k, h) / std::sqrt(static_cast<double>(h));
        net.b2 = gaussian_matrix(rng, k, 1).col(0) * 0.1;
        net.E = gaussian_matrix(rng, p, d) / std::sqrt(static_cast<double>(d));
        net.e = gaussian_matrix(rng, p, 1).col(0) * 0.1;
        for (Eigen::Index i = 0; i < d; ++i) clean[i] = rng.uniform();
        net.logits(clean).maxCoeff(&label);
        others.clear();
        for (Eigen::Index i = 0; i < k; ++i)
            if (i != label) others.push_back(static_cast<std::size_t>(i));
        Vector cand(d);
        for (int s = 0; s < 4000; ++s) {
            for (Eigen::Index i = 0; i < d; ++i) cand[i] = rng.uniform();
            if (margin_at(cand) >= 0.0) flipped.push_back(cand);
        }
    }
    if (flipped.empty()) throw ConfigError("seed", "no attackable network found for this seed");

    const auto y = static_cast<std::size_t>(label);
    const Tensor W1 = to_tensor(net.W1), b1 = to_tensor(net.b1), W2 = to_tensor(net.W2), b2 = to_tensor(net.b2);
    const Tensor E = to_tensor(net.E), e = to_tensor(net.e), x0 = to_tensor(clean);
    const Tensor embed0 = to_tensor(Vector(net.embedding(clean)));
    const AttackMode mode = cfg.mode;
    const AttackMetric metric = cfg.metric;
    const double eps = cfg.epsilon;

    Callback fn = [=](Tape& tape, const Variables& v) {
        const Var x = v["x"];
        const Var logits = matmul(tape.constant(W2), relu(matmul(tape.constant(W1), x) + tape.constant(b1))) +
                           tape.constant(b2);
        // max_{i != y} f_i - f_y: positive once the input is misclassified
        const Var margin = max(gather(logits, others, Shape{others.size()})) - element(logits, y);
        const Var dist = metric == AttackMetric::L2
                             ? pnorm(x - tape.constant(x0), Norm::L2)
                             : pnorm(relu(matmul(tape.constant(E), x) + tape.constant(e)) - tape.constant(embed0),
                                     Norm::L2);
        Terms t;
        if (mode == AttackMode::MaxLoss) {
            t.f = -margin;
            t.ci = {dist - eps, -x, x - 1.0};
        } else {
            t.f = dist;
            t.ci = {-margin, -x, x - 1.0};
        }
        return t;
    };

    std::optional<Vector> feasible;
    Vector start = clean;
    if (mode == AttackMode::MaxLoss) {
        feasible = clean;
    } else {
        // Closest misclassified sample.
        double best = std::numeric_limits<double>::infinity();
        for (const Vector& cand : flipped) {
            const double r = metric == AttackMetric::L2 ? (cand - clean).norm()
                                                        : (net.embedding(cand) - net.embedding(clean)).norm();
            if (r < best) {
                best = r;
                feasible = cand;
            }
        }
        // The distance has a kink at the clean input; start just off it.
        for (Eigen::Index i = 0; i < d; ++i) start[i] = std::clamp(clean[i] + 1e-3 * rng.normal(), 0.0, 1.0);
    }
    return AttackInstance{
        {ProblemDefinition(VariableSpec{{"x", Shape{static_cast<std::size_t>(d)}}}, std::move(fn)), start, feasible},
        std::move(net), clean, label};
}

} // namespace ncvx::gallery

#endif // NCVX_GALLERY_ATTACK_HPP
