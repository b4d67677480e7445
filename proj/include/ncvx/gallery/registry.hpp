#ifndef NCVX_GALLERY_REGISTRY_HPP
#define NCVX_GALLERY_REGISTRY_HPP

#include <functional>
#include <string>
#include <vector>

#include "ncvx/gallery/attack.hpp"
#include "ncvx/gallery/odl.hpp"
#include "ncvx/gallery/pde.hpp"
#include "ncvx/gallery/procrustes.hpp"
#include "ncvx/gallery/topology.hpp"

namespace ncvx::gallery {

struct Example
{
    std::string name;
    std::string description;
    ConfigMap defaults;                               // example keys with default values
    std::function<Instance(const ConfigMap&)> build;  // throws ConfigError
    ConfigMap solver_defaults;                        // recommended solver settings, overridable
};

using Registry = std::vector<Example>;

inline const Example* find_example(const Registry& reg, const std::string& name)
{
    for (const Example& e : reg)
        if (e.name == name) return &e;
    return nullptr;
}

inline Registry default_registry()
{
    Registry r;
    r.push_back({"odl", "orthogonal dictionary learning: min 1/m |q'Y|_1 s.t. q'q = 1", OdlConfig{}.to_map(),
                 [](const ConfigMap& m) -> Instance { return build_odl(OdlConfig::from_map(m)); },
                 {}});
    r.push_back({"attack", "perturbation attack on a small relu classifier (max-loss or min-distortion)",
                 AttackConfig{}.to_map(),
                 [](const ConfigMap& m) -> Instance { return build_attack(AttackConfig::from_map(m)); },
                 {}});
    r.push_back({"topology", "spring-chain compliance with equilibrium, volume and box constraints",
                 TopologyConfig{}.to_map(),
                 [](const ConfigMap& m) -> Instance { return build_topology(TopologyConfig::from_map(m)); },
                 {{"curvature", "lagrangian"}}});
    r.push_back({"procrustes", "orthogonal Procrustes: min |WA - B|_F^2 s.t. W'W = I", ProcrustesConfig{}.to_map(),
                 [](const ConfigMap& m) -> Instance { return build_procrustes(ProcrustesConfig::from_map(m)); },
                 {{"curvature", "lagrangian"}, {"mu0", "0.10000000000000001"}}});
    r.push_back({"pde", "sine-series collocation for u'' = g with zero boundary values", PdeConfig{}.to_map(),
                 [](const ConfigMap& m) -> Instance { return build_pde(PdeConfig::from_map(m)); },
                 {}});
    return r;
}

} // namespace ncvx::gallery

#endif // NCVX_GALLERY_REGISTRY_HPP
