#include "sbm/report.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "sbm/codec.hpp"

namespace sbm {

using nlohmann::json;

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& work) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) work(i);
        });
}

LoadedMatrix load_input(const std::string& input, const FetchOptions& fetch_options) {
    LoadedMatrix out;
    std::filesystem::path path(input);
    if (!std::filesystem::exists(path)) {
        if (!is_url(input) && !is_collection_id(input))
            throw std::runtime_error("no such file or collection id: " + input);
        path = fetch(input, fetch_options).path;
        out.id = input;
    }
    out.source = input;
    if (path.extension() == ".sbm") {
        auto decoded = decode(read_container_file(path));
        out.matrix = std::move(decoded.matrix);
        out.values = decoded.values();
        out.info.field = ValueField::Real;
    } else {
        auto data = read_matrix_market_file(path);
        out.matrix = std::move(data.matrix);
        out.values = std::move(data.values);
        out.info = std::move(data.info);
    }
    if (out.id.empty()) out.id = out.info.name.empty() ? path.stem().string() : out.info.name;
    return out;
}

// ---------------------------------------------------------------------------
// Per-matrix analysis

namespace {

json config_json(const OptimalConfig& c) {
    return {{"scheme", c.scheme.name()}, {"size", c.size.to_string()}, {"bits", c.bits}};
}

std::vector<Scheme> with_base_schemes(std::span<const Scheme> extra) {
    std::vector<Scheme> out(kBaseSchemes.begin(), kBaseSchemes.end());
    for (const auto& s : extra)
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    return out;
}

}  // namespace

json analysis_json(const LoadedMatrix& loaded, const JobConfig& config) {
    const auto& a = loaded.matrix;
    if (a.empty()) throw std::runtime_error(loaded.id + ": matrix has no stored elements");
    const auto rho = density(a);
    const auto uniformity = row_uniformity(a);
    const SearchSpace space{config.schemes, config.sizes()};

    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["matrix"] = {
        {"id", loaded.id},
        {"source", loaded.source},
        {"kind", normalize_kind(loaded.info.kind)},
        {"field", to_string(loaded.info.field)},
        {"rows", a.rows()},
        {"cols", a.cols()},
        {"symmetry", to_string(a.symmetry())},
        {"nnz_all", a.nnz_all()},
        {"nnz_stored", a.nnz_stored()},
        {"density", {{"all", round_percent(rho.all)}, {"stored", round_percent(rho.stored)}}},
        {"prnnz_stddev", {{"all", round_percent(uniformity.all)}, {"stored", round_percent(uniformity.stored)}}},
    };
    json schemes = json::array(), sizes = json::array();
    for (const auto& s : space.schemes) schemes.push_back(s.name());
    for (auto s : space.sizes) sizes.push_back(s.to_string());
    doc["space"] = {{"schemes", schemes}, {"sizes", sizes}};

    const auto all_schemes = with_base_schemes(space.schemes);
    const auto tables = compute_footprint_tables(a, all_schemes, config.precisions, loaded.id);
    json results = json::array();
    for (const auto& table : tables) {
        const auto p = table.precision();
        json cells = json::array();
        for (const auto& s : space.schemes)
            for (auto size : space.sizes)
                cells.push_back({{"scheme", s.name()}, {"size", size.to_string()}, {"bits", table.at(s, size)}});

        auto best = optimal_config(table, space);
        json best_json = config_json(best);
        if (best.scheme.kind == SchemeKind::Adaptive) {
            const auto map = block_nnz_map(a, best.size);
            std::map<std::string, std::size_t> usage;
            for (const auto& block : map.blocks)
                ++usage[std::string(to_string(best_block_format(best.scheme.formats, best.size, block.nnz, p)))];
            best_json["block_formats"] = usage;
        }
        const auto global = optimal_config(table, SearchSpace::full());
        const Bits csr = csr32_footprint(a, p);
        const Bits lb = lower_bound(a, p);
        const auto gamma = gamma_metrics(global.bits, csr, lb);
        results.push_back({
            {"precision", bits_of(p)},
            {"cells", cells},
            {"optimum", best_json},
            {"global_optimum", config_json(global)},
            {"delta", round_percent(delta(table, space))},
            {"csr32_bits", csr},
            {"lower_bound_bits", lb},
            {"lambda", round_percent(lambda_savings(global.bits, csr))},
            {"gamma_blocked", round_percent(gamma.blocked)},
            {"gamma_csr32", round_percent(gamma.csr32)},
        });
    }
    doc["results"] = results;
    return doc;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

class CsvFile {
public:
    explicit CsvFile(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
    }

    template <typename... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        ((write_field(fields, first)), ...);
        out_ << '\n';
    }

    void row(const std::vector<std::string>& fields) {
        bool first = true;
        for (const auto& f : fields) write_field(f, first);
        out_ << '\n';
    }

private:
    void write_field(std::string_view value, bool& first) {
        if (!first) out_ << ',';
        first = false;
        if (value.find_first_of(",\"\n") == std::string_view::npos) {
            out_ << value;
            return;
        }
        out_ << '"';
        for (char ch : value) {
            if (ch == '"') out_ << '"';
            out_ << ch;
        }
        out_ << '"';
    }
    void write_field(const std::string& v, bool& first) { write_field(std::string_view(v), first); }
    void write_field(const char* v, bool& first) { write_field(std::string_view(v), first); }
    template <typename T>
        requires std::is_integral_v<T>
    void write_field(T v, bool& first) {
        write_field(std::string_view(std::to_string(v)), first);
    }

    std::ofstream out_;
};

std::string pct(double v) { return format_percent(v); }
std::string bsuffix(Precision p) { return "b" + std::to_string(bits_of(p)); }

std::vector<FootprintTable> tables_for(std::span<const CorpusRecord> records, Precision p) {
    std::vector<FootprintTable> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.table(p));
    return out;
}

const std::array<SizeSetId, 4> kSizeSets = {SizeSetId::B64, SizeSetId::B20, SizeSetId::B14, SizeSetId::B8};

}  // namespace

void write_footprints_csv(const std::filesystem::path& path, std::span<const CorpusRecord> records) {
    CsvFile csv(path);
    csv.row("id", "kind", "precision", "scheme", "size", "bits");
    for (const auto& r : records)
        for (const auto& t : r.tables)
            for (const auto& s : t.schemes())
                for (auto size : all_block_sizes())
                    csv.row(r.id, r.kind, bits_of(t.precision()), s.name(), size.to_string(), t.at(s, size));
}

std::vector<CorpusRecord> read_footprints_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "id,kind,precision,scheme,size,bits")
        throw std::runtime_error(path.string() + ": not a footprint table dump");

    auto split = [](const std::string& text) {
        std::vector<std::string> fields;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < text.size(); ++i) {
            const char ch = text[i];
            if (quoted) {
                if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (ch == '"') {
                    quoted = false;
                } else {
                    cur += ch;
                }
            } else if (ch == '"') {
                quoted = true;
            } else if (ch == ',') {
                fields.push_back(std::move(cur));
                cur.clear();
            } else {
                cur += ch;
            }
        }
        fields.push_back(std::move(cur));
        return fields;
    };

    std::vector<CorpusRecord> records;
    std::map<std::string, std::size_t> index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 6) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 6 fields");
        auto [it, inserted] = index.emplace(f[0], records.size());
        if (inserted) {
            records.emplace_back();
            records.back().id = f[0];
            records.back().kind = f[1];
        }
        auto& r = records[it->second];
        const auto p = precision_from_bits(static_cast<unsigned>(std::stoul(f[2])));
        auto table = std::find_if(r.tables.begin(), r.tables.end(),
                                  [&](const FootprintTable& t) { return t.precision() == p; });
        if (table == r.tables.end()) {
            r.tables.emplace_back(r.id, p, std::vector<Scheme>(kStandardSchemes.begin(), kStandardSchemes.end()));
            table = r.tables.end() - 1;
        }
        const auto scheme = Scheme::parse(f[3]);
        const auto schemes = table->schemes();
        const auto pos = std::find(schemes.begin(), schemes.end(), scheme);
        if (pos == schemes.end()) throw std::runtime_error("unexpected scheme " + f[3]);
        table->set(static_cast<std::size_t>(pos - schemes.begin()), BlockSize::parse(f[4]), std::stoull(f[5]));
    }
    return records;
}

void write_corpus_reports(const std::filesystem::path& dir, std::span<const CorpusRecord> records,
                          const JobConfig& config) {
    std::filesystem::create_directories(dir);
    const auto& precisions = config.precisions;

    {
        CsvFile csv(dir / "records.csv");
        std::vector<std::string> header = {"id", "kind", "field", "rows", "cols", "symmetry", "nnz_all",
                                           "nnz_stored", "density_all", "density_stored",
                                           "prnnz_stddev_all", "prnnz_stddev_stored"};
        for (auto p : precisions)
            for (const char* col : {"optimal_scheme", "optimal_size", "optimal_bits", "csr32_bits",
                                    "lower_bound_bits", "lambda", "gamma_blocked", "gamma_csr32"})
                header.push_back(std::string(col) + "_" + bsuffix(p));
        csv.row(header);
        for (const auto& r : records) {
            std::vector<std::string> row = {r.id, r.kind, std::string(to_string(r.field)),
                                            std::to_string(r.rows), std::to_string(r.cols),
                                            std::string(to_string(r.symmetry)), std::to_string(r.nnz_all),
                                            std::to_string(r.nnz_stored), pct(r.density.all),
                                            pct(r.density.stored), pct(r.prnnz_stddev.all),
                                            pct(r.prnnz_stddev.stored)};
            for (auto p : precisions) {
                const auto& m = r.at(p);
                for (auto v : {m.optimal_scheme.name(), m.optimal_size.to_string(), std::to_string(m.optimal_bits),
                               std::to_string(m.csr32_bits), std::to_string(m.lower_bound_bits), pct(m.lambda),
                               pct(m.gamma_blocked), pct(m.gamma_csr32)})
                    row.push_back(v);
            }
            csv.row(row);
        }
    }

    write_footprints_csv(dir / "footprints.csv", records);

    {
        std::map<std::string, std::size_t> kinds;
        for (const auto& r : records) ++kinds[r.kind];
        CsvFile csv(dir / "problem_kinds.csv");
        csv.row("kind", "matrices");
        for (const auto& [kind, n] : kinds) csv.row(kind, n);
    }

    // Optimal scheme and block size counts.
    {
        CsvFile schemes(dir / "optimal_schemes.csv");
        CsvFile sizes(dir / "optimal_block_sizes.csv");
        std::vector<std::string> header = {"scheme"};
        std::vector<std::string> size_header = {"size"};
        for (auto p : precisions) {
            header.push_back("matrices_" + bsuffix(p));
            size_header.push_back("matrices_" + bsuffix(p));
        }
        schemes.row(header);
        sizes.row(size_header);
        for (const auto& s : kBaseSchemes) {
            std::vector<std::string> row = {s.name()};
            for (auto p : precisions)
                row.push_back(std::to_string(std::count_if(records.begin(), records.end(), [&](const auto& r) {
                    return r.at(p).optimal_scheme == s;
                })));
            schemes.row(row);
        }
        for (auto size : all_block_sizes()) {
            std::vector<std::string> row = {size.to_string()};
            for (auto p : precisions)
                row.push_back(std::to_string(std::count_if(records.begin(), records.end(), [&](const auto& r) {
                    return r.at(p).optimal_size == size;
                })));
            sizes.row(row);
        }
    }

    // Delta statistics per scheme over all sizes.
    {
        CsvFile csv(dir / "scheme_deltas.csv");
        std::vector<std::string> header = {"scheme"};
        for (auto p : precisions)
            for (const char* stat : {"min", "avg", "max"}) header.push_back(std::string(stat) + "_" + bsuffix(p));
        csv.row(header);
        for (const auto& s : kStandardSchemes) {
            std::vector<std::string> row = {s.name()};
            for (auto p : precisions) {
                const auto st = u_set(tables_for(records, p), {{s}, all_block_sizes()});
                row.insert(row.end(), {pct(st.min), pct(st.mean), pct(st.max)});
            }
            csv.row(row);
        }
    }

    // Block size ranking and prefix sets of the ranking.
    for (auto p : precisions) {
        const auto tables = tables_for(records, p);
        const auto ranking = rank_block_sizes(tables);
        CsvFile csv(dir / ("block_size_ranking_" + bsuffix(p) + ".csv"));
        csv.row("rank", "size", "avg", "max");
        for (std::size_t i = 0; i < ranking.size(); ++i)
            csv.row(i + 1, ranking[i].size.to_string(), pct(ranking[i].average), pct(ranking[i].maximum));

        CsvFile prefix(dir / ("ranked_prefix_deltas_" + bsuffix(p) + ".csv"));
        prefix.row("n", "avg", "max");
        SearchSpace space{std::vector<Scheme>(kBaseSchemes.begin(), kBaseSchemes.end()), {}};
        for (std::size_t n = 1; n <= ranking.size(); ++n) {
            space.sizes.push_back(ranking[n - 1].size);
            const auto st = u_set(tables, space);
            prefix.row(n, pct(st.mean), pct(st.max));
        }
    }

    // Reduced block size sets for the format-choosing schemes, with and without CSR.
    {
        CsvFile csv(dir / "reduced_set_deltas.csv");
        csv.row("size_set", "precision", "scheme", "min", "avg", "max");
        for (auto id : kSizeSets)
            for (auto p : precisions) {
                const auto tables = tables_for(records, p);
                for (const auto& s : {kStandardSchemes[4], kStandardSchemes[5], kStandardSchemes[6], kStandardSchemes[7]}) {
                    const auto st = u_set(tables, {{s}, size_set(id)});
                    csv.row(std::string(to_string(id)), bits_of(p), s.name(), pct(st.min), pct(st.mean), pct(st.max));
                }
            }
    }

    // Savings against CSR32 and distance to the lower bound.
    {
        CsvFile savings(dir / "savings.csv");
        CsvFile bounds(dir / "lower_bounds.csv");
        std::vector<std::string> sh = {"statistic"}, bh = {"statistic"};
        for (auto p : precisions) {
            sh.push_back("lambda_" + bsuffix(p));
            bh.push_back("gamma_blocked_" + bsuffix(p));
            bh.push_back("gamma_csr32_" + bsuffix(p));
        }
        savings.row(sh);
        bounds.row(bh);
        std::vector<Stats> lambda, gb, gc;
        for (auto p : precisions) {
            std::vector<double> l, b, c;
            for (const auto& r : records) {
                l.push_back(r.at(p).lambda);
                b.push_back(r.at(p).gamma_blocked);
                c.push_back(r.at(p).gamma_csr32);
            }
            lambda.push_back(summarize(l));
            gb.push_back(summarize(b));
            gc.push_back(summarize(c));
        }
        const std::array<std::pair<const char*, double Stats::*>, 3> rows = {
            {{"minimum", &Stats::min}, {"average", &Stats::mean}, {"maximum", &Stats::max}}};
        for (const auto& [label, member] : rows) {
            std::vector<std::string> s = {label}, b = {label};
            for (std::size_t i = 0; i < precisions.size(); ++i) {
                s.push_back(pct(lambda[i].*member));
                b.push_back(pct(gb[i].*member));
                b.push_back(pct(gc[i].*member));
            }
            savings.row(s);
            bounds.row(b);
        }

        CsvFile near(dir / "lower_bound_proximity.csv");
        std::vector<std::string> nh = {"gamma_blocked_at_most"};
        for (auto p : precisions) nh.push_back("matrices_" + bsuffix(p));
        near.row(nh);
        for (int threshold : {1, 2, 5, 10}) {
            std::vector<std::string> row = {std::to_string(threshold)};
            for (auto p : precisions)
                row.push_back(std::to_string(std::count_if(records.begin(), records.end(), [&](const auto& r) {
                    return r.at(p).gamma_blocked <= threshold;
                })));
            near.row(row);
        }
    }

    // Savings by problem kind, density and row uniformity.
    for (auto p : precisions) {
        const auto breakdown = criterion_breakdown(records, p);
        CsvFile kinds(dir / ("savings_by_kind_" + bsuffix(p) + ".csv"));
        kinds.row("kind", "matrices", "min", "avg", "max");
        for (const auto& g : breakdown.by_kind)
            kinds.row(g.kind, g.count, pct(g.lambda.min), pct(g.lambda.mean), pct(g.lambda.max));
        for (const auto& [variant, points] : {std::pair{"all", &breakdown.all}, std::pair{"stored", &breakdown.stored}}) {
            CsvFile scatter(dir / ("savings_scatter_" + bsuffix(p) + "_" + variant + ".csv"));
            scatter.row("id", "density", "prnnz_stddev", "lambda");
            for (const auto& pt : *points)
                scatter.row(pt.id, pct(pt.density), pct(pt.prnnz_stddev), pct(pt.lambda));
        }
    }

    // Consistency of delta statistics across random subsets.
    {
        CsvFile csv(dir / "consistency.csv");
        csv.row("scheme", "size_set", "precision", "subset_size", "trials", "seed", "stddev_avg", "stddev_max",
                "corpus_avg", "corpus_max", "normalized_stddev_avg", "normalized_stddev_max");
        const std::size_t subset = std::min(config.subset_size, records.size());
        for (const auto& s : {Scheme::min_fixed(), Scheme::adaptive()})
            for (auto id : kSizeSets)
                for (auto p : precisions) {
                    ConsistencyParams params{s, id, p, subset, config.trials, config.seed};
                    const auto c = consistency_experiment(records, params);
                    csv.row(s.name(), std::string(to_string(id)), bits_of(p), subset, config.trials,
                            std::to_string(config.seed), pct(c.stddev_of_averages), pct(c.stddev_of_maxima),
                            pct(c.corpus_average), pct(c.corpus_maximum), pct(c.normalized_averages),
                            pct(c.normalized_maxima));
                }
    }
}

CorpusRunResult corpus_run(const JobConfig& config) {
    CorpusRunResult result;
    result.inputs = config.inputs.size();
    std::filesystem::create_directories(config.output_dir);

    struct Slot {
        std::optional<CorpusRecord> record;
        std::string error;
    };
    std::vector<Slot> slots(config.inputs.size());
    parallel_for(config.inputs.size(), config.threads, [&](std::size_t i) {
        try {
            const auto loaded = load_input(config.inputs[i], config.fetch);
            slots[i].record = make_record(loaded.id, loaded.info.kind, loaded.info.field, loaded.matrix,
                                          config.precisions);
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    });

    std::vector<CorpusRecord> analyzed;
    std::vector<std::pair<std::string, std::string>> errors;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].record)
            analyzed.push_back(std::move(*slots[i].record));
        else
            errors.emplace_back(config.inputs[i], slots[i].error);
    }
    result.analyzed = analyzed.size();
    result.failed = errors.size();

    const auto filtered = filter_corpus(analyzed, {config.filter});
    std::vector<CorpusRecord> kept;
    for (auto i : filtered.kept) kept.push_back(analyzed[i]);
    result.kept = kept.size();

    const auto& dir = config.output_dir;
    std::filesystem::remove(dir / "errors.csv");
    std::filesystem::remove(dir / "excluded.csv");
    if (!errors.empty()) {
        CsvFile csv(dir / "errors.csv");
        csv.row("input", "error");
        for (const auto& [input, error] : errors) csv.row(input, error);
    }
    if (!filtered.rejected.empty()) {
        CsvFile csv(dir / "excluded.csv");
        csv.row("id", "reason");
        for (const auto& r : filtered.rejected) csv.row(analyzed[r.index].id, r.reason);
    }

    json manifest;
    manifest["schema_version"] = kSchemaVersion;
    manifest["tool"] = {{"name", "sbm"}, {"version", kToolVersion}};
    json precisions = json::array(), schemes = json::array();
    for (auto p : config.precisions) precisions.push_back(bits_of(p));
    for (const auto& s : kStandardSchemes) schemes.push_back(s.name());
    manifest["config"] = {
        {"precisions", precisions},
        {"schemes", schemes},
        {"filter", {{"enabled", config.filter}, {"min_nnz_all_exclusive", FilterOptions{}.min_nnz_all_exclusive}}},
        {"seed", config.seed},
        {"sampler", "mt19937_64, rejection-sampled bounded draws, partial Fisher-Yates"},
        {"subset_size", {{"requested", config.subset_size}, {"effective", std::min(config.subset_size, kept.size())}}},
        {"trials", config.trials},
    };
    json inputs = json::array();
    for (std::size_t i = 0; i < config.inputs.size(); ++i) inputs.push_back(config.inputs[i]);
    manifest["inputs"] = inputs;
    json kept_ids = json::array();
    for (const auto& r : kept) kept_ids.push_back({{"id", r.id}, {"fingerprint", r.fingerprint}});
    manifest["matrices"] = kept_ids;
    manifest["counts"] = {{"inputs", result.inputs}, {"analyzed", result.analyzed},
                          {"failed", result.failed}, {"kept", result.kept}};
    {
        std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
        out << manifest.dump(2) << '\n';
    }

    if (kept.empty()) {
        result.exit_code = 2;
        return result;
    }
    write_corpus_reports(dir, kept, config);
    result.exit_code = 0;
    return result;
}

}  // namespace sbm
