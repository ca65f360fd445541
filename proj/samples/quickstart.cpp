// Builds the prior from generated rooms, plans a relay chain, then runs one episode.

#include <cstdio>

#include "gridrelay/gridrelay.hpp"

using namespace gridrelay;

int main(int argc, char** argv) {
    const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 771;
    const Knowledge k = train_knowledge(SimConfig{}, SeedRange{0, 199});

    const auto clusters = cluster(k.prior);
    std::printf("prior: %zu categories, modularity %.3f\n", k.prior.size(), clusters.modularity);

    const Scenario s = generate(seed);
    RelayConfig relay;
    relay.max_hops = 2;
    const auto chain = best_relay_chain(k.prior, "Sofa", s.goal, relay);
    std::printf("seed %llu, goal %s, shortest %.2f m\nprior chain from Sofa:", static_cast<unsigned long long>(seed),
                s.goal.c_str(), s.shortest_path);
    for (const auto& a : chain.anchors) std::printf(" %s", a.c_str());
    std::printf(" -> %s (mean %.3f)\n", s.goal.c_str(), chain.mean_weight);

    EpisodeConfig cfg;
    for (Variant v : {Variant::Full, Variant::NoChaining}) {
        cfg.variant = v;
        const auto r = run_episode(s, k, cfg);
        std::printf("%-12s %s in %d steps, %.2f m, SPL term %.3f, subgoals:", std::string(to_string(v)).c_str(),
                    r.success ? "success" : "failure", r.steps, r.traveled, spl_term(r));
        for (const auto& g : r.subgoals) std::printf(" %s", g.c_str());
        std::printf("\n");
    }
}
