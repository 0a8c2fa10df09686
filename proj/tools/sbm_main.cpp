// sbm: footprint analysis, blocked encoding and corpus reports for sparse matrices.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "sbm/codec.hpp"
#include "sbm/report.hpp"

namespace {

using namespace sbm;

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitFatal = 2;

std::vector<Precision> parse_precisions(const std::string& text) {
    if (text == "both") return {Precision::Single, Precision::Double};
    if (text == "32") return {Precision::Single};
    if (text == "64") return {Precision::Double};
    throw CLI::ValidationError("--precision", "expected 32, 64 or both");
}

std::vector<Scheme> parse_schemes(const std::string& text) {
    if (text == "all") return {kBaseSchemes.begin(), kBaseSchemes.end()};
    if (text == "standard") return {kStandardSchemes.begin(), kStandardSchemes.end()};
    std::vector<Scheme> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(',', start), text.size());
        const auto s = Scheme::parse(std::string_view(text).substr(start, end - start));
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
        start = end + 1;
    }
    return out;
}

std::string file_stem_for(std::string id) {
    for (auto& ch : id)
        if (ch == '/' || ch == '\\' || ch == ':') ch = '_';
    return id;
}

int summarize_exit(std::size_t failed, std::size_t total) {
    if (failed == 0) return kExitOk;
    return failed == total ? kExitFatal : kExitPartial;
}

std::vector<std::string> read_list_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto last = line.find_last_not_of(" \t\r");
        out.push_back(line.substr(first, last - first + 1));
    }
    return out;
}

std::vector<double> values_or_ones(const LoadedMatrix& m) {
    if (m.values.size() == m.matrix.nnz_stored()) return m.values;
    return std::vector<double>(m.matrix.nnz_stored(), 1.0);
}

struct Common {
    std::string precision = "both";
    std::string cache_dir;
    bool offline = false;

    FetchOptions fetch_options() const {
        auto options = FetchOptions::from_environment();
        if (!cache_dir.empty()) options.cache_dir = cache_dir;
        if (offline) options.offline = true;
        return options;
    }
};

void add_fetch_flags(CLI::App* cmd, Common& common) {
    cmd->add_option("--cache-dir", common.cache_dir, "Download cache (default $SBM_CACHE_DIR)");
    cmd->add_flag("--offline", common.offline, "Serve collection ids from the cache only");
}

int run_fetch(const std::vector<std::string>& ids, const Common& common) {
    const auto options = common.fetch_options();
    std::size_t failed = 0;
    for (const auto& id : ids) {
        try {
            const auto r = fetch(id, options);
            std::cout << id << '\t' << r.path.string() << '\t' << r.sha256 << '\t'
                      << (r.from_cache ? "cached" : "downloaded") << '\n';
        } catch (const std::exception& e) {
            std::cerr << "fetch " << id << ": " << e.what() << '\n';
            ++failed;
        }
    }
    return summarize_exit(failed, ids.size());
}

int run_analyze(const std::vector<std::string>& inputs, JobConfig config, const std::string& out_dir) {
    std::size_t failed = 0;
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    for (const auto& input : inputs) {
        try {
            const auto loaded = load_input(input, config.fetch);
            const auto doc = analysis_json(loaded, config);
            if (out_dir.empty()) {
                std::cout << doc.dump(2) << '\n';
            } else {
                const auto path = std::filesystem::path(out_dir) / (file_stem_for(loaded.id) + ".json");
                std::ofstream out(path, std::ios::binary | std::ios::trunc);
                out << doc.dump(2) << '\n';
                if (!out) throw std::runtime_error("cannot write " + path.string());
                std::cerr << input << " -> " << path.string() << '\n';
            }
        } catch (const std::exception& e) {
            std::cerr << "analyze " << input << ": " << e.what() << '\n';
            ++failed;
        }
    }
    return summarize_exit(failed, inputs.size());
}

int run_encode(const std::string& input, const std::string& output, const std::string& scheme_text,
               const std::string& size_text, const std::string& precision_text, const FetchOptions& fetch) {
    const auto precisions = parse_precisions(precision_text);
    if (precisions.size() != 1) throw CLI::ValidationError("--precision", "encode needs 32 or 64");
    const auto p = precisions.front();
    const auto loaded = load_input(input, fetch);

    Scheme scheme;
    BlockSize size{1, 1};
    if (scheme_text.empty() || size_text.empty()) {
        SearchSpace space = SearchSpace::full();
        if (!scheme_text.empty()) space.schemes = {Scheme::parse(scheme_text)};
        if (!size_text.empty()) space.sizes = {BlockSize::parse(size_text)};
        const auto best = optimal_config(loaded.matrix, space, p);
        scheme = best.scheme;
        size = best.size;
    } else {
        scheme = Scheme::parse(scheme_text);
        size = BlockSize::parse(size_text);
    }
    const auto container = encode(loaded.matrix, scheme, size, p, values_or_ones(loaded));
    write_container_file(output, container);
    std::cout << output << '\t' << scheme.name() << '\t' << size.to_string() << "\tb=" << bits_of(p)
              << "\tpayload_bits=" << container.header.payload_bits << '\n';
    return kExitOk;
}

int run_decode(const std::string& input, const std::string& output) {
    const auto decoded = decode(read_container_file(input));
    const auto values = decoded.values();
    if (output.empty() || output == "-") {
        write_matrix_market(std::cout, decoded.matrix, values);
    } else {
        std::ofstream out(output, std::ios::binary | std::ios::trunc);
        write_matrix_market(out, decoded.matrix, values);
        if (!out) throw std::runtime_error("cannot write " + output);
    }
    return kExitOk;
}

int verify_container(const std::string& input) {
    const auto container = read_container_file(input);
    const auto& h = container.header;
    const auto decoded = decode(container);
    const auto model = mmf(decoded.matrix, h.scheme, h.size, h.precision);
    const bool ok = model == h.payload_bits;
    std::cout << input << '\t' << h.scheme.name() << '\t' << h.size.to_string() << "\tb=" << bits_of(h.precision)
              << "\tpayload_bits=" << h.payload_bits << "\tmmf=" << model << '\t' << (ok ? "OK" : "MISMATCH")
              << '\n';
    return ok ? kExitOk : kExitPartial;
}

int verify_matrix(const std::string& input, const JobConfig& config) {
    const auto loaded = load_input(input, config.fetch);
    const auto values = values_or_ones(loaded);
    std::size_t checked = 0, failed = 0;
    for (auto p : config.precisions) {
        std::vector<std::uint64_t> bits;
        for (double v : values) bits.push_back(value_bits_of(v, p));
        for (const auto& scheme : config.schemes)
            for (auto size : config.sizes()) {
                ++checked;
                std::string problem;
                try {
                    const auto container = encode(loaded.matrix, scheme, size, p, std::span<const std::uint64_t>(bits));
                    const auto model = mmf(loaded.matrix, scheme, size, p);
                    const auto decoded = decode(deserialize(serialize(container)));
                    if (container.header.payload_bits != model)
                        problem = "payload " + std::to_string(container.header.payload_bits) + " != mmf " +
                                  std::to_string(model);
                    else if (!(decoded.matrix == loaded.matrix) || decoded.value_bits != bits)
                        problem = "round trip changed the matrix";
                } catch (const CodecError& e) {
                    // Dense blocks cannot represent explicit zeros; not a model mismatch.
                    if (e.code() == CodecErrc::ZeroInDenseBlock) {
                        --checked;
                        continue;
                    }
                    problem = e.what();
                }
                if (!problem.empty()) {
                    ++failed;
                    std::cout << input << '\t' << scheme.name() << '\t' << size.to_string() << "\tb=" << bits_of(p)
                              << '\t' << problem << '\n';
                }
            }
    }
    std::cout << input << '\t' << checked << " configurations\t" << failed << " mismatches\n";
    return failed == 0 ? kExitOk : kExitPartial;
}

int run_rank(const std::string& footprints, const std::string& precision_text, const std::string& output) {
    const auto records = read_footprints_csv(footprints);
    if (records.empty()) throw std::runtime_error(footprints + ": no records");
    std::ostringstream text;
    text << "precision,rank,size,avg,max\n";
    for (auto p : parse_precisions(precision_text)) {
        std::vector<FootprintTable> tables;
        for (const auto& r : records) tables.push_back(r.table(p));
        const auto ranking = rank_block_sizes(tables);
        for (std::size_t i = 0; i < ranking.size(); ++i)
            text << bits_of(p) << ',' << i + 1 << ',' << ranking[i].size.to_string() << ','
                 << format_percent(ranking[i].average) << ',' << format_percent(ranking[i].maximum) << '\n';
    }
    if (output.empty()) {
        std::cout << text.str();
    } else {
        std::ofstream out(output, std::ios::binary | std::ios::trunc);
        out << text.str();
        if (!out) throw std::runtime_error("cannot write " + output);
    }
    return kExitOk;
}

int run_consistency(const std::string& footprints, const std::string& scheme_text, const std::string& sizes,
                    const std::string& precision_text, std::size_t subset, std::size_t trials, std::uint64_t seed) {
    const auto records = read_footprints_csv(footprints);
    if (records.empty()) throw std::runtime_error(footprints + ": no records");
    nlohmann::json out = nlohmann::json::array();
    for (auto p : parse_precisions(precision_text)) {
        ConsistencyParams params;
        params.scheme = Scheme::parse(scheme_text);
        params.sizes = parse_size_set_id(sizes);
        params.precision = p;
        params.subset_size = std::min(subset, records.size());
        params.trials = trials;
        params.seed = seed;
        const auto r = consistency_experiment(records, params);
        out.push_back({{"scheme", params.scheme.name()},
                       {"size_set", std::string(to_string(params.sizes))},
                       {"precision", bits_of(p)},
                       {"subset_size", params.subset_size},
                       {"trials", trials},
                       {"seed", seed},
                       {"stddev_avg", round_percent(r.stddev_of_averages)},
                       {"stddev_max", round_percent(r.stddev_of_maxima)},
                       {"corpus_avg", round_percent(r.corpus_average)},
                       {"corpus_max", round_percent(r.corpus_maximum)},
                       {"normalized_stddev_avg", round_percent(r.normalized_averages)},
                       {"normalized_stddev_max", round_percent(r.normalized_maxima)}});
    }
    std::cout << out.dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Blocked sparse matrix memory footprints"};
    app.set_version_flag("--version", std::string(sbm::kToolVersion));
    app.require_subcommand(1);
    Common common;

    std::vector<std::string> ids;
    auto* fetch_cmd = app.add_subcommand("fetch", "Download collection matrices (Group/Name or URL) into the cache");
    fetch_cmd->add_option("ids", ids, "Collection ids or URLs")->required();
    add_fetch_flags(fetch_cmd, common);

    std::vector<std::string> inputs;
    std::string schemes = "all", sizes = "B64", out_dir;
    auto* analyze = app.add_subcommand("analyze", "Footprint table, optimum and metrics per matrix as JSON");
    analyze->add_option("inputs", inputs, ".mtx/.sbm files, collection ids or URLs")->required();
    analyze->add_option("--precision", common.precision, "32, 64 or both")->default_val("both");
    analyze->add_option("--schemes", schemes, "all, standard or a list such as coo,adaptive-wo-csr")
        ->default_val("all");
    analyze->add_option("--sizes", sizes, "B64, B20, B14, B8 or a list such as 8x8,4x16")->default_val("B64");
    analyze->add_option("-o,--output-dir", out_dir, "Write <id>.json files here instead of stdout");
    add_fetch_flags(analyze, common);

    std::string input, output, scheme_text, size_text, precision_one = "64";
    auto* encode_cmd = app.add_subcommand("encode", "Encode a matrix into a blocked container (.sbm)");
    encode_cmd->add_option("input", input, "Matrix file, collection id or URL")->required();
    encode_cmd->add_option("-o,--output", output, "Container path")->required();
    encode_cmd->add_option("--scheme", scheme_text, "Scheme (default: optimal)");
    encode_cmd->add_option("--size", size_text, "Block size HxW (default: optimal)");
    encode_cmd->add_option("--precision", precision_one, "32 or 64")->default_val("64");
    add_fetch_flags(encode_cmd, common);

    auto* decode_cmd = app.add_subcommand("decode", "Decode a container back to Matrix Market");
    decode_cmd->add_option("input", input, "Container path")->required()->check(CLI::ExistingFile);
    decode_cmd->add_option("-o,--output", output, "Matrix Market path (default stdout)");

    auto* verify = app.add_subcommand("verify", "Check payload length against the footprint model");
    verify->add_option("inputs", inputs, ".sbm containers, or matrices to sweep through encode/decode")->required();
    verify->add_option("--precision", common.precision, "32, 64 or both")->default_val("both");
    verify->add_option("--schemes", schemes, "Schemes swept for matrices")->default_val("all");
    verify->add_option("--sizes", sizes, "Sizes swept for matrices")->default_val("B8");
    add_fetch_flags(verify, common);

    JobConfig corpus_config;
    std::string list_file;
    auto* corpus = app.add_subcommand("corpus", "Analyze a corpus and write the report directory");
    corpus->add_option("inputs", inputs, "Matrix files, collection ids or URLs");
    corpus->add_option("--list", list_file, "File with one input per line ('#' comments)");
    corpus->add_option("-o,--output-dir", corpus_config.output_dir, "Report directory")->required();
    corpus->add_option("--precision", common.precision, "32, 64 or both")->default_val("both");
    corpus->add_flag("!--no-filter", corpus_config.filter, "Keep pattern and small matrices");
    corpus->add_option("--seed", corpus_config.seed, "Seed of the consistency experiment")->default_val(2016);
    corpus->add_option("--subset-size", corpus_config.subset_size, "Matrices per random subset")->default_val(200);
    corpus->add_option("--trials", corpus_config.trials, "Random subsets")->default_val(50);
    corpus->add_option("-j,--threads", corpus_config.threads, "Worker threads (0: all cores)")->default_val(0);
    add_fetch_flags(corpus, common);

    std::string footprints;
    auto* rank = app.add_subcommand("rank", "Rank block sizes from a footprints.csv dump");
    rank->add_option("footprints", footprints, "footprints.csv of a corpus report")->required()->check(CLI::ExistingFile);
    rank->add_option("--precision", common.precision, "32, 64 or both")->default_val("both");
    rank->add_option("-o,--output", output, "CSV path (default stdout)");

    std::string consistency_scheme = "min-fixed", size_set = "B64", consistency_precision = "64";
    std::size_t subset = 200, trials = 50;
    std::uint64_t seed = 2016;
    auto* consistency = app.add_subcommand("consistency", "Delta statistics over random corpus subsets");
    consistency->add_option("footprints", footprints, "footprints.csv of a corpus report")
        ->required()
        ->check(CLI::ExistingFile);
    consistency->add_option("--scheme", consistency_scheme, "Scheme")->default_val("min-fixed");
    consistency->add_option("--sizes", size_set, "B64, B20, B14 or B8")->default_val("B64");
    consistency->add_option("--precision", consistency_precision, "32, 64 or both")->default_val("64");
    consistency->add_option("--subset-size", subset, "Matrices per subset")->default_val(200);
    consistency->add_option("--trials", trials, "Number of subsets")->default_val(50);
    consistency->add_option("--seed", seed, "Seed")->default_val(2016);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitFatal;
    }

    try {
        if (*fetch_cmd) return run_fetch(ids, common);
        if (*analyze) {
            JobConfig config;
            config.precisions = parse_precisions(common.precision);
            config.schemes = parse_schemes(schemes);
            config.size_spec = sizes;
            config.sizes();
            config.fetch = common.fetch_options();
            return run_analyze(inputs, config, out_dir);
        }
        if (*encode_cmd) return run_encode(input, output, scheme_text, size_text, precision_one, common.fetch_options());
        if (*decode_cmd) return run_decode(input, output);
        if (*verify) {
            JobConfig config;
            config.precisions = parse_precisions(common.precision);
            config.schemes = parse_schemes(schemes);
            config.size_spec = sizes;
            config.fetch = common.fetch_options();
            std::size_t failed = 0;
            for (const auto& in : inputs) {
                try {
                    const bool container = std::filesystem::path(in).extension() == ".sbm";
                    if ((container ? verify_container(in) : verify_matrix(in, config)) != kExitOk) ++failed;
                } catch (const std::exception& e) {
                    std::cerr << "verify " << in << ": " << e.what() << '\n';
                    ++failed;
                }
            }
            return summarize_exit(failed, inputs.size());
        }
        if (*corpus) {
            if (!list_file.empty())
                for (auto& line : read_list_file(list_file)) inputs.push_back(std::move(line));
            if (inputs.empty()) throw std::runtime_error("corpus needs at least one input");
            corpus_config.inputs = inputs;
            corpus_config.precisions = parse_precisions(common.precision);
            corpus_config.fetch = common.fetch_options();
            const auto r = corpus_run(corpus_config);
            std::cerr << r.inputs << " inputs, " << r.analyzed << " analyzed, " << r.failed << " failed, " << r.kept
                      << " kept -> " << corpus_config.output_dir.string() << '\n';
            return r.exit_code;
        }
        if (*rank) return run_rank(footprints, common.precision, output);
        if (*consistency)
            return run_consistency(footprints, consistency_scheme, size_set, consistency_precision, subset, trials, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFatal;
    }
    return kExitFatal;
}
