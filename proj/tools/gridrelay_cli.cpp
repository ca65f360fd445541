// gridrelay: scenario generation, knowledge building, episodes and reports.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "gridrelay/gridrelay.hpp"

namespace fs = std::filesystem;
using namespace gridrelay;

namespace {

struct KnowledgeOpts {
    std::string train = "0..599";
    std::string corpus, demos;
    double smoothing = 0.1;

    void add(CLI::App* app) {
        app->add_option("--train", train, "seed range for the built-in corpus and demonstrations");
        app->add_option("--corpus", corpus, "co-occurrence corpus file (overrides --train for the prior)");
        app->add_option("--demos", demos, "demonstration file (overrides --train for the model)");
        app->add_option("--smoothing", smoothing, "additive smoothing of the subgoal model");
    }

    Knowledge load() const {
        const SeedRange seeds = parse_seed_range(train);
        std::vector<CategorySet> c;
        std::vector<Demonstration> d;
        if (corpus.empty()) c = build_corpus(seeds);
        else {
            std::ifstream in(corpus);
            if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + corpus);
            c = read_corpus(in);
        }
        if (demos.empty()) d = build_demonstrations(seeds);
        else {
            std::ifstream in(demos);
            if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + demos);
            d = read_demonstrations(in);
        }
        return fit_knowledge(c, d, default_catalogue().vocabulary(), smoothing);
    }
};

struct EpisodeOpts {
    int budget = EpisodeConfig{}.failure.step_budget;
    double lambda = EpisodeConfig{}.fusion.lambda_fuse;
    double inject = 0.0;
    std::string oracle;
    int oracle_timeout = 5000;

    void add(CLI::App* app) {
        app->add_option("--budget", budget, "primitive step budget per episode");
        app->add_option("--lambda", lambda, "weight of the learned model in the fused score");
        app->add_option("--inject", inject, "probability a relay anchor is forced unreachable");
        app->add_option("--oracle", oracle, "rule | stdio:<cmd> | tcp:<host:port> (default: $GRIDRELAY_ORACLE)");
        app->add_option("--oracle-timeout", oracle_timeout, "ms");
    }

    EpisodeConfig config() const {
        EpisodeConfig c;
        c.failure.step_budget = budget;
        c.fusion.lambda_fuse = lambda;
        c.failure_injection = inject;
        return c;
    }

    std::unique_ptr<RecoveryOracle> make() const {
        return make_oracle(oracle.empty() ? oracle_spec_from_env() : oracle, oracle_timeout);
    }
};

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw Error(ErrorCode::InvalidInput, "cannot write " + p.string());
    return os;
}

void emit_reports(const std::vector<BenchmarkReport>& reports, const std::string& format, const std::string& out) {
    std::ofstream file;
    if (!out.empty()) file = open_out(out);
    std::ostream& os = out.empty() ? std::cout : file;
    if (format == "json") write_reports_json(os, reports);
    else write_reports_csv(os, reports);
}

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
    std::vector<Variant> v;
    for (const auto& n : names) v.push_back(variant_from_string(n));
    if (v.empty()) v.assign(std::begin(kVariants), std::end(kVariants));
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grid-world object-goal navigation with co-occurrence relay planning"};
    app.require_subcommand(1);

    std::string seeds = "0..9", out, trace_dir, format = "csv", scenario_file, graph_out;
    std::vector<std::string> variant_names;
    std::string variant = "full";
    KnowledgeOpts kopt;
    EpisodeOpts eopt;

    auto* gen = app.add_subcommand("generate", "write scenario JSON files");
    gen->add_option("--seeds", seeds, "A..B")->required();
    gen->add_option("--out", out, "output directory")->required();

    auto* corpus = app.add_subcommand("corpus", "write the room co-occurrence corpus");
    corpus->add_option("--seeds", seeds, "A..B");
    corpus->add_option("--out", out, "corpus file (default stdout)");
    corpus->add_option("--graph", graph_out, "also write the weighted adjacency list");

    auto* demos = app.add_subcommand("demos", "write expert demonstrations");
    demos->add_option("--seeds", seeds, "A..B");
    demos->add_option("--out", out, "demonstration file (default stdout)");

    auto* run = app.add_subcommand("run", "run episodes of one variant");
    run->add_option("--variant", variant, "full | no-cooccurrence | no-chaining | random-anchors | static-grid-oracle");
    run->add_option("--seeds", seeds, "A..B");
    run->add_option("--scenario", scenario_file, "run a single scenario file instead of generated seeds");
    run->add_option("--trace", trace_dir, "directory for per-episode TRACE v1 files");
    run->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    run->add_option("--out", out, "report file (default stdout)");
    kopt.add(run);
    eopt.add(run);

    auto* ablate = app.add_subcommand("ablate", "run every variant over one seed set");
    ablate->add_option("--seeds", seeds, "A..B")->required();
    ablate->add_option("--variants", variant_names, "subset of variants (default all)");
    ablate->add_option("--trace", trace_dir, "directory for per-episode TRACE v1 files");
    ablate->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    ablate->add_option("--out", out, "report file (default stdout)");
    kopt.add(ablate);
    eopt.add(ablate);

    auto* report = app.add_subcommand("report", "recompute reports from trace files");
    report->add_option("--traces", trace_dir, "directory of *.ndjson traces")->required();
    report->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    report->add_option("--out", out, "report file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            fs::create_directories(out);
            for (auto s : parse_seed_range(seeds).seeds()) {
                auto os = open_out(fs::path(out) / ("scenario_" + std::to_string(s) + ".json"));
                write_scenario(os, generate(s));
            }
        } else if (corpus->parsed()) {
            const auto scenes = build_corpus(parse_seed_range(seeds));
            if (out.empty()) write_corpus(std::cout, scenes);
            else {
                auto os = open_out(out);
                write_corpus(os, scenes);
            }
            if (!graph_out.empty()) {
                auto os = open_out(graph_out);
                CoOccurrenceGraph::build_from_corpus(scenes).write_adjacency(os);
            }
        } else if (demos->parsed()) {
            const auto ds = build_demonstrations(parse_seed_range(seeds));
            if (out.empty()) write_demonstrations(std::cout, ds);
            else {
                auto os = open_out(out);
                write_demonstrations(os, ds);
            }
        } else if (run->parsed() || ablate->parsed()) {
            const Knowledge k = kopt.load();
            const auto oracle = eopt.make();
            EpisodeConfig cfg = eopt.config();
            cfg.keep_trace = !trace_dir.empty();
            if (!trace_dir.empty()) fs::create_directories(trace_dir);
            const std::vector<Variant> vs =
                run->parsed() ? std::vector<Variant>{variant_from_string(variant)} : parse_variants(variant_names);
            std::vector<BenchmarkReport> reports;
            if (run->parsed() && !scenario_file.empty()) {
                std::ifstream in(scenario_file);
                if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + scenario_file);
                const Scenario s = read_scenario(in);
                cfg.variant = vs.front();
                const auto r = run_episode(s, k, cfg, oracle.get());
                if (!trace_dir.empty()) {
                    auto os = open_out(fs::path(trace_dir) / trace_filename(cfg.variant, s.seed));
                    write_trace(os, r);
                }
                reports.push_back(make_report(r.variant, {r}, s.step));
            } else {
                const auto res = run_ablation(parse_seed_range(seeds).seeds(), vs, k, cfg, {}, default_catalogue(),
                                              oracle.get());
                if (!trace_dir.empty())
                    for (Variant v : vs)
                        for (const auto& r : res.records.at(std::string(to_string(v)))) {
                            auto os = open_out(fs::path(trace_dir) / trace_filename(v, r.seed));
                            write_trace(os, r);
                        }
                reports = res.reports;
            }
            emit_reports(reports, format, out);
        } else if (report->parsed()) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(trace_dir))
                if (e.path().extension() == ".ndjson") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            std::map<std::string, std::vector<EpisodeRecord>> by_variant;
            for (const auto& f : files) {
                std::ifstream in(f);
                auto r = read_trace(in);
                by_variant[r.variant].push_back(std::move(r));
            }
            std::vector<BenchmarkReport> reports;
            for (Variant v : kVariants) {
                auto it = by_variant.find(std::string(to_string(v)));
                if (it == by_variant.end()) continue;
                std::sort(it->second.begin(), it->second.end(), [](auto& a, auto& b) { return a.seed < b.seed; });
                reports.push_back(make_report(it->first, it->second));
            }
            emit_reports(reports, format, out);
        }
    } catch (const Error& e) {
        std::cerr << "gridrelay: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
