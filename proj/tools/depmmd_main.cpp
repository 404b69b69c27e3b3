#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "depmmd/depmmd.hpp"

namespace fs = std::filesystem;
using namespace depmmd;

namespace {

struct CommonOpts {
    std::string manifest;
    std::string out;
    int threads = 0;
    std::uint64_t seed = 0;
    Index subsample_cap = 2000;
};

struct FitOpts : CommonOpts {
    std::string algorithm = "dmmd";
    double eps2 = 0.01;
    Index max_m = 0;  // 0: candidate pool size
    double max_seconds = 3600.0;
};

struct AnalyzeOpts {
    std::string manifest;
    std::string out;
    int threads = 0;
    Index criticisms_k = 0;  // 0: min(20, smallest dataset)
    double ratio_upper = 2.0;
    double ratio_lower = 0.5;
    std::vector<std::string> attributes;
    std::string labels_key;
};

struct BenchOpts : CommonOpts {
    std::vector<std::string> algorithms;  // empty: all three
    std::vector<double> eps2 = {0.01, 0.005};
    Index max_m = 50;
    double max_seconds = 3600.0;
};

struct SynthOpts {
    std::string preset;
    std::string out;
    Index n = 250;
    std::uint64_t seed = 1;
};

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ResourceError("cannot open '" + path.string() + "' for writing");
    os << content;
    if (!os) throw ResourceError("write to '" + path.string() + "' failed");
}

struct Prepared {
    LoadedCollection loaded;
    GramCache cache;
};

Prepared prepare(const CommonOpts& o) {
    Prepared p{load_collection(o.manifest), {}};
    const KernelModel kernel =
        build_additive_kernel(p.loaded.table, p.loaded.collection, o.subsample_cap, o.seed);
    p.cache = build_gram_cache(p.loaded.table, p.loaded.collection, kernel, o.threads);
    return p;
}

std::vector<std::string> support_ids_of(const Prepared& p, const WeightedSupport& ws) {
    std::vector<std::string> ids;
    for (Index s : ws.support)
        ids.push_back(p.loaded.table.ids[static_cast<std::size_t>(
            p.cache.candidate_rows[static_cast<std::size_t>(s)])]);
    return ids;
}

int run_fit(const FitOpts& o) {
    const Prepared p = prepare(o);

    FitConfig config;
    config.algorithm = parse_algorithm(o.algorithm);
    config.epsilon_sq = o.eps2;
    config.max_exemplars = o.max_m > 0 ? o.max_m : p.cache.size();
    config.max_seconds = o.max_seconds;
    config.threads = o.threads;

    const DependentCoreset coreset = fit(p.cache, config);
    const std::vector<std::string> ids = support_ids_of(p, coreset.ws);

    fs::create_directories(o.out);
    const fs::path coreset_path = fs::path(o.out) / "coreset.json";
    write_coreset(coreset_path.string(), coreset, ids, p.cache.counts);

    std::cout << "algorithm: " << algorithm_name(coreset.algorithm) << "\n";
    std::cout << "epsilon_sq: " << format_double(coreset.epsilon_sq) << "\n";
    std::cout << "support size: " << coreset.ws.size() << "\n";
    for (const auto& label : p.cache.labels)
        std::cout << "dataset " << label << ": n=" << p.cache.counts.at(label)
                  << " mmd_sq=" << format_double(coreset.mmd_sq.at(label)) << "\n";
    std::cout << "satisfied: " << (coreset.satisfied ? "true" : "false")
              << " (stop reason: " << stop_reason_name(coreset.stop_reason) << ")\n";
    std::cout << "wrote " << coreset_path.string() << "\n";
    return coreset.satisfied ? 0 : 2;
}

int run_analyze(const AnalyzeOpts& o) {
    const LoadedCollection loaded = load_collection(o.manifest);
    const fs::path coreset_path = fs::path(o.out) / "coreset.json";
    const LoadedCoreset coreset = read_coreset(coreset_path.string());

    std::vector<Index> support_rows;
    for (const auto& id : coreset.support_ids) {
        auto it = loaded.table.index_of.find(id);
        if (it == loaded.table.index_of.end())
            throw SpecError("coreset support id '" + id + "' is absent from the manifest's data");
        support_rows.push_back(it->second);
    }

    WeightedSupport ws;
    ws.support = coreset.support_indices;
    ws.weights = coreset.weights;

    Index min_n = std::numeric_limits<Index>::max();
    for (const auto& label : coreset.labels)
        min_n = std::min(min_n, static_cast<Index>(loaded.collection.dataset(label).size()));
    const Index k = o.criticisms_k > 0 ? o.criticisms_k : std::min<Index>(20, min_n);

    std::vector<CriticismSet> crit_sets;
    for (const auto& label : coreset.labels)
        crit_sets.push_back(criticisms(loaded.table, loaded.collection, coreset.kernel, label,
                                       support_rows, coreset.weights.at(label), k, o.threads));

    std::vector<RatioReport> ratio_reports;
    for (std::size_t i = 0; i + 1 < coreset.labels.size(); ++i)
        ratio_reports.push_back(weight_ratio(ws, coreset.support_ids, coreset.labels[i],
                                             coreset.labels[i + 1], o.ratio_upper, o.ratio_lower));

    fs::create_directories(o.out);
    {
        std::ostringstream os;
        write_criticisms_csv(os, crit_sets);
        write_text_file(fs::path(o.out) / "criticisms.csv", os.str());
    }
    if (!ratio_reports.empty()) {
        std::ostringstream os;
        write_ratios_csv(os, ratio_reports);
        write_text_file(fs::path(o.out) / "ratios.csv", os.str());
    }
    if (!o.labels_key.empty()) {
        const auto grouped =
            grouped_weights(ws, coreset.support_ids, loaded.collection.attributes, o.labels_key);
        std::ostringstream os;
        write_grouped_csv(os, grouped, o.labels_key);
        write_text_file(fs::path(o.out) / "grouped.csv", os.str());
    }
    if (!o.attributes.empty()) {
        std::vector<std::pair<std::string, std::map<std::string, Moments>>> per_attribute;
        for (const auto& key : o.attributes)
            per_attribute.emplace_back(key, weighted_attribute_moments(ws, coreset.support_ids,
                                                                       loaded.collection.attributes, key));
        std::ostringstream os;
        write_moments_csv(os, per_attribute);
        write_text_file(fs::path(o.out) / "moments.csv", os.str());
    }

    std::cout << "analyzed coreset of size " << ws.size() << " over " << coreset.labels.size()
              << " datasets (criticisms per dataset: " << k << ")\n";
    return 0;
}

int run_bench(const BenchOpts& o) {
    const Prepared p = prepare(o);

    std::vector<Algorithm> algorithms;
    if (o.algorithms.empty())
        algorithms = {Algorithm::dmmd, Algorithm::dmmd_opt, Algorithm::protodash};
    else
        for (const auto& name : o.algorithms) algorithms.push_back(parse_algorithm(name));

    const BenchResult curves = run_curves(p.cache, algorithms, o.max_m, o.max_seconds, {}, o.threads);
    const SizeResult sizes =
        size_to_threshold(p.cache, algorithms, o.eps2, o.max_m, o.max_seconds, {}, o.threads);

    fs::create_directories(o.out);
    {
        std::ostringstream os;
        write_curves_csv(os, curves.records);
        write_text_file(fs::path(o.out) / "curves.csv", os.str());
    }
    {
        std::ostringstream os;
        write_sizes_csv(os, sizes.records);
        write_text_file(fs::path(o.out) / "sizes.csv", os.str());
    }

    bool failed = false;
    for (const auto& [what, message] : curves.errors) {
        std::cerr << "error: curves for " << what << ": " << message << "\n";
        failed = true;
    }
    for (const auto& [what, message] : sizes.errors) {
        std::cerr << "error: size table for " << what << ": " << message << "\n";
        failed = true;
    }
    std::cout << "wrote " << (fs::path(o.out) / "curves.csv").string() << " and "
              << (fs::path(o.out) / "sizes.csv").string() << "\n";
    return failed ? 1 : 0;
}

nlohmann::ordered_json mixture_to_json(const MixtureSpec& spec) {
    nlohmann::ordered_json components = nlohmann::ordered_json::array();
    for (const auto& comp : spec.components) {
        nlohmann::ordered_json mean = nlohmann::ordered_json::array();
        for (Index i = 0; i < comp.mean.size(); ++i) mean.push_back(comp.mean(i));
        nlohmann::ordered_json cov = nlohmann::ordered_json::array();
        for (Index r = 0; r < comp.covariance.rows(); ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (Index c = 0; c < comp.covariance.cols(); ++c) row.push_back(comp.covariance(r, c));
            cov.push_back(row);
        }
        components.push_back({{"weight", comp.weight}, {"mean", mean}, {"covariance", cov}});
    }
    return components;
}

int run_synth(const SynthOpts& o) {
    const SyntheticCollection generated = generate_preset(o.preset, o.n, o.seed);
    fs::create_directories(o.out);
    const fs::path manifest = save_collection(o.out, generated.table, generated.collection);

    nlohmann::ordered_json meta;
    meta["preset"] = generated.preset.name;
    meta["n_per_dataset"] = o.n;
    meta["seed"] = o.seed;
    meta["generator"] = "splitmix64 counter streams; dataset k uses stream seed + k";
    nlohmann::ordered_json datasets = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < generated.preset.dataset_labels.size(); ++k)
        datasets.push_back({{"label", generated.preset.dataset_labels[k]},
                            {"components", mixture_to_json(generated.preset.dataset_specs[k])}});
    meta["datasets"] = datasets;
    write_text_file(fs::path(o.out) / "synth_meta.json", meta.dump(2) + "\n");

    std::cout << "wrote " << manifest.string() << " (" << generated.preset.dataset_labels.size()
              << " datasets, " << o.n << " rows each)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dependent MMD coresets: shared-support exemplar summaries across related datasets"};
    app.name("depmmd");  // stable usage text regardless of invocation path
    app.require_subcommand(1);

    FitOpts fit_opts;
    CLI::App* fit_cmd = app.add_subcommand("fit", "select a coreset for every dataset in a manifest");
    fit_cmd->add_option("--manifest", fit_opts.manifest, "manifest JSON describing the datasets")
        ->required();
    fit_cmd->add_option("--out", fit_opts.out, "output directory (coreset.json is written here)")
        ->required();
    fit_cmd->add_option("--algorithm", fit_opts.algorithm, "dmmd, dmmd-opt, or protodash")
        ->capture_default_str();
    fit_cmd->add_option("--eps2", fit_opts.eps2, "per-dataset MMD^2 threshold")->capture_default_str();
    fit_cmd->add_option("--max-m", fit_opts.max_m, "exemplar budget (0 = candidate pool size)")
        ->capture_default_str();
    fit_cmd->add_option("--max-seconds", fit_opts.max_seconds, "wall-clock budget for selection")
        ->capture_default_str();
    fit_cmd->add_option("--threads", fit_opts.threads, "worker threads (0 = hardware)")
        ->capture_default_str();
    fit_cmd->add_option("--seed", fit_opts.seed, "seed for the bandwidth median subsample")
        ->capture_default_str();
    fit_cmd->add_option("--subsample-cap", fit_opts.subsample_cap,
                        "point cap for median bandwidth estimation")
        ->capture_default_str();

    AnalyzeOpts analyze_opts;
    CLI::App* analyze_cmd =
        app.add_subcommand("analyze", "criticisms, weight ratios, grouped weights, attribute drift");
    analyze_cmd->add_option("--manifest", analyze_opts.manifest, "manifest JSON describing the datasets")
        ->required();
    analyze_cmd
        ->add_option("--out", analyze_opts.out,
                     "directory holding coreset.json; tables are written here")
        ->required();
    analyze_cmd->add_option("--criticisms-k", analyze_opts.criticisms_k,
                            "criticisms per dataset (0 = min(20, smallest dataset))")
        ->capture_default_str();
    analyze_cmd->add_option("--ratio-upper", analyze_opts.ratio_upper, "over-represented-in-b threshold")
        ->capture_default_str();
    analyze_cmd->add_option("--ratio-lower", analyze_opts.ratio_lower, "over-represented-in-a threshold")
        ->capture_default_str();
    analyze_cmd->add_option("--attribute", analyze_opts.attributes,
                            "numeric attribute(s) for weighted moments (repeatable)");
    analyze_cmd->add_option("--labels", analyze_opts.labels_key,
                            "categorical attribute for grouped weights");
    analyze_cmd->add_option("--threads", analyze_opts.threads, "worker threads (0 = hardware)")
        ->capture_default_str();

    BenchOpts bench_opts;
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "MMD^2-vs-m curves, time-vs-m, and size-to-threshold tables");
    bench_cmd->add_option("--manifest", bench_opts.manifest, "manifest JSON describing the datasets")
        ->required();
    bench_cmd->add_option("--out", bench_opts.out, "output directory for curves.csv and sizes.csv")
        ->required();
    bench_cmd
        ->add_option("--algorithm", bench_opts.algorithms,
                     "algorithms to run (repeatable; default: all three)")
        ->delimiter(',');
    bench_cmd->add_option("--eps2", bench_opts.eps2, "thresholds for the size table (comma separated)")
        ->delimiter(',')
        ->capture_default_str();
    bench_cmd->add_option("--max-m", bench_opts.max_m, "exemplar budget per run")->capture_default_str();
    bench_cmd->add_option("--max-seconds", bench_opts.max_seconds, "wall-clock budget per run")
        ->capture_default_str();
    bench_cmd->add_option("--threads", bench_opts.threads, "worker threads (0 = hardware)")
        ->capture_default_str();
    bench_cmd->add_option("--seed", bench_opts.seed, "seed for the bandwidth median subsample")
        ->capture_default_str();
    bench_cmd->add_option("--subsample-cap", bench_opts.subsample_cap,
                          "point cap for median bandwidth estimation")
        ->capture_default_str();

    SynthOpts synth_opts;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "generate a synthetic benchmark collection from a named preset");
    synth_cmd->add_option("preset", synth_opts.preset, "preset name: gauss3 or skewpair")->required();
    synth_cmd->add_option("--out", synth_opts.out, "output directory for the generated collection")
        ->required();
    synth_cmd->add_option("--n", synth_opts.n, "rows per dataset")->capture_default_str();
    synth_cmd->add_option("--seed", synth_opts.seed, "generator seed")->capture_default_str();

    int rc = 0;
    fit_cmd->callback([&] { rc = run_fit(fit_opts); });
    analyze_cmd->callback([&] { rc = run_analyze(analyze_opts); });
    bench_cmd->callback([&] { rc = run_bench(bench_opts); });
    synth_cmd->callback([&] { rc = run_synth(synth_opts); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
