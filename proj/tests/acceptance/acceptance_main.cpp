// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any FAIL.
//
//   sbm_acceptance            criteria 1-5 and 8 on generated matrices, 9 if SBM_REPRO_LIST is set
//   sbm_acceptance --ufsmc    criteria 6 and 7 on collection matrices (exit 77 when unavailable)

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>

#include "sbm/codec.hpp"
#include "sbm/report.hpp"
#include "support/oracles.hpp"

using namespace sbm;

namespace {

enum class Status { Pass, Fail, Blocked, Skipped };

struct Outcome {
    Status status = Status::Pass;
    std::string detail;
};

int g_failures = 0;
int g_blocked = 0;

void report(const char* id, const char* title, const Outcome& o, double seconds) {
    static constexpr const char* names[] = {"PASS", "FAIL", "BLOCKED", "SKIP"};
    std::cout << '[' << names[static_cast<int>(o.status)] << "] " << id << ' ' << title << " -- " << o.detail << " ("
              << std::fixed << std::setprecision(1) << seconds << " s)" << std::endl;
    if (o.status == Status::Fail) ++g_failures;
    if (o.status == Status::Blocked) ++g_blocked;
}

template <typename F>
void run(const char* id, const char* title, F&& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    report(id, title, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

// Collects the first few failure messages from worker threads.
class Failures {
public:
    void add(std::string message) {
        std::lock_guard lock(mutex_);
        ++count_;
        if (messages_.size() < 3) messages_.push_back(std::move(message));
    }
    bool empty() const { return count_ == 0; }
    std::string summary() const {
        std::string out = std::to_string(count_) + " failures";
        for (const auto& m : messages_) out += "; " + m;
        return out;
    }

private:
    std::mutex mutex_;
    std::size_t count_ = 0;
    std::vector<std::string> messages_;
};

SparseMatrix identity(Index n) {
    std::vector<Coord> c;
    for (Index i = 0; i < n; ++i) c.push_back({i, i});
    return SparseMatrix::from_sorted(n, n, Symmetry::General, c);
}

// Matrix i of a reproducible family: dims <= max_dim, log-uniform density in
// [1e-4, 0.5], every other one symmetric.
oracle::RandomMatrix family_matrix(std::uint64_t seed, std::size_t i, std::uint32_t max_dim) {
    std::mt19937_64 rng(seed * 1000003 + i);
    std::uniform_int_distribution<std::uint32_t> dim(1, max_dim);
    std::uniform_real_distribution<double> log_density(std::log(1e-4), std::log(0.5));
    const bool sym = i % 2 == 1;
    const auto rows = dim(rng);
    const auto cols = sym ? rows : dim(rng);
    return oracle::random_matrix(rng, rows, cols, std::exp(log_density(rng)), sym);
}

// ---------------------------------------------------------------------------

Outcome codec_equals_model() {
    constexpr std::size_t kMatrices = 200;
    std::atomic<std::size_t> configs{0}, symmetric{0};
    Failures failures;
    parallel_for(kMatrices, 0, [&](std::size_t i) {
        const auto rm = family_matrix(1, i, 1024);
        if (rm.matrix.symmetric()) ++symmetric;
        std::mt19937_64 rng(i);
        auto sizes = size_set(SizeSetId::B8);
        std::vector<BlockSize> others;
        for (auto s : all_block_sizes())
            if (s.row_exp() != s.col_exp()) others.push_back(s);
        std::shuffle(others.begin(), others.end(), rng);
        sizes.insert(sizes.end(), others.begin(), others.begin() + 4);
        for (auto p : {Precision::Single, Precision::Double}) {
            std::vector<std::uint64_t> bits;
            for (double v : rm.values) bits.push_back(value_bits_of(v, p));
            for (const auto& s : kBaseSchemes)
                for (auto size : sizes) {
                    ++configs;
                    const auto c = encode(rm.matrix, s, size, p, std::span<const std::uint64_t>(bits));
                    const auto model = mmf(rm.matrix, s, size, p);
                    const auto what = "matrix " + std::to_string(i) + " " + s.name() + " " + size.to_string() +
                                      " b=" + std::to_string(bits_of(p));
                    if (c.header.payload_bits != model) {
                        failures.add(what + ": payload " + std::to_string(c.header.payload_bits) + " != mmf " +
                                     std::to_string(model));
                        continue;
                    }
                    const auto d = decode(deserialize(serialize(c)));
                    if (!(d.matrix == rm.matrix) || d.value_bits != bits) failures.add(what + ": round trip differs");
                }
        }
    });
    if (!failures.empty()) return {Status::Fail, failures.summary()};
    return {Status::Pass, std::to_string(kMatrices) + " matrices (" + std::to_string(symmetric.load()) +
                              " symmetric), " + std::to_string(configs.load()) +
                              " configurations, payload bits == mmf and decode(encode) exact"};
}

Outcome counting_oracle() {
    constexpr std::size_t kMatrices = 60;
    Failures failures;
    parallel_for(kMatrices, 0, [&](std::size_t i) {
        const auto a = family_matrix(2, i, 512).matrix;
        std::size_t visited = 0;
        for_each_block_size(a, [&](const BlockNnzMap& hier) {
            ++visited;
            const auto direct = block_nnz_map(a, hier.size);
            const auto expected = oracle::bucket_by_division(a, hier.size.height(), hier.size.width());
            for (const auto* map : {&direct, &hier}) {
                bool ok = map->blocks.size() == expected.size();
                auto it = expected.begin();
                for (std::size_t b = 0; ok && b < map->blocks.size(); ++b, ++it)
                    ok = map->blocks[b].row == it->first.first && map->blocks[b].col == it->first.second &&
                         map->blocks[b].nnz == it->second;
                if (!ok)
                    failures.add("matrix " + std::to_string(i) + " " + hier.size.to_string() +
                                 (map == &direct ? " shift path" : " hierarchy path"));
            }
        });
        if (visited != 64) failures.add("matrix " + std::to_string(i) + ": visited " + std::to_string(visited));
    });
    if (!failures.empty()) return {Status::Fail, failures.summary()};
    return {Status::Pass, std::to_string(kMatrices) + " matrices up to 512x512, 64 sizes, shift and hierarchy == division"};
}

Outcome hand_cells() {
    const auto a = identity(16);
    const BlockSize bs{2, 2};
    const auto p = Precision::Single;
    const std::vector<std::pair<std::string, std::pair<Bits, Bits>>> cells = {
        {"coo", {mmf(a, Scheme::fixed(BlockFormat::Coo), bs, p), 596}},
        {"bitmap", {mmf(a, Scheme::fixed(BlockFormat::Bitmap), bs, p), 596}},
        {"min-fixed", {mmf(a, Scheme::min_fixed(), bs, p), 598}},
        {"adaptive", {mmf(a, Scheme::adaptive(), bs, p), 604}},
        {"dense", {mmf(a, Scheme::fixed(BlockFormat::Dense), bs, p), 2068}},
        {"coo 8x8 z=4", {block_format_bits(BlockFormat::Coo, {3, 3}, 4, Precision::Double), 280}},
        {"csr 8x8 z=4", {block_format_bits(BlockFormat::Csr, {3, 3}, 4, Precision::Double), 292}},
        {"bitmap 8x8 z=4", {block_format_bits(BlockFormat::Bitmap, {3, 3}, 4, Precision::Double), 320}},
        {"dense 8x8 z=4", {block_format_bits(BlockFormat::Dense, {3, 3}, 4, Precision::Double), 4096}},
    };
    std::string mismatches;
    for (const auto& [name, v] : cells)
        if (v.first != v.second)
            mismatches += name + "=" + std::to_string(v.first) + " (want " + std::to_string(v.second) + ") ";
    if (!mismatches.empty()) return {Status::Fail, mismatches};
    return {Status::Pass, "596/596/598/604/2068 at 4x4 b=32; 280/292/320/4096 at 8x8 z=4 b=64"};
}

Outcome gamma_floors(std::span<const CorpusRecord> records) {
    double min32 = 1e300, min64 = 1e300, min_blocked = 1e300;
    Failures failures;
    for (const auto& r : records)
        for (const auto& m : r.metrics) {
            // Integer forms of csr32/lb - 1 >= 1 (b=32) and >= 1/2 (b=64).
            const bool floor_ok = m.precision == Precision::Single ? m.csr32_bits >= 2 * m.lower_bound_bits
                                                                   : 2 * m.csr32_bits >= 3 * m.lower_bound_bits;
            const double floor = m.precision == Precision::Single ? 100.0 : 50.0;
            if (!floor_ok || m.gamma_csr32 < floor) failures.add(r.id + " gamma_csr32 " + format_percent(m.gamma_csr32));
            if (m.optimal_bits < m.lower_bound_bits || m.gamma_blocked < 0)
                failures.add(r.id + " gamma_blocked " + format_percent(m.gamma_blocked));
            (m.precision == Precision::Single ? min32 : min64) = std::min(
                m.precision == Precision::Single ? min32 : min64, m.gamma_csr32);
            min_blocked = std::min(min_blocked, m.gamma_blocked);
        }
    if (!failures.empty()) return {Status::Fail, failures.summary()};
    std::ostringstream detail;
    detail << records.size() << " matrices; min gamma_csr32 b=32 " << format_percent(min32) << ", b=64 "
           << format_percent(min64) << "; min gamma_blocked " << format_percent(min_blocked);
    return {Status::Pass, detail.str()};
}

struct Generated {
    oracle::RandomMatrix source;
    CorpusRecord record;
};

Outcome delta_properties(std::span<const Generated> corpus) {
    Failures failures;
    std::atomic<std::size_t> checks{0};
    const std::array<SizeSetId, 4> chain = {SizeSetId::B64, SizeSetId::B20, SizeSetId::B14, SizeSetId::B8};
    parallel_for(corpus.size(), 0, [&](std::size_t i) {
        const auto& r = corpus[i].record;
        for (const auto& t : r.tables) {
            const auto b = " b=" + std::to_string(bits_of(t.precision()));
            if (delta(t, SearchSpace::full()) != 0.0) failures.add(r.id + b + ": delta(S6, B64) != 0");
            for (const auto& s : kStandardSchemes) {
                double previous = 0.0;
                for (auto id : chain) {
                    const double d = delta(t, {{s}, size_set(id)});
                    ++checks;
                    if (d < 0.0) failures.add(r.id + b + ": negative delta");
                    if (d < previous)
                        failures.add(r.id + b + " " + s.name() + ": delta(" + std::string(to_string(id)) +
                                     ") below a larger set");
                    previous = d;
                }
            }
        }
        // Tag-free adaptive <= tag-free min-fixed, per block size and format set.
        for_each_block_size(corpus[i].source.matrix, [&](const BlockNnzMap& map) {
            for (auto p : {Precision::Single, Precision::Double})
                for (const auto& fs : {FormatSet::all(), FormatSet::without_csr()}) {
                    ++checks;
                    const auto adaptive = mmf(map, Scheme::adaptive(fs), p) - kFormatTagBits * map.blocks.size();
                    const auto min_fixed = mmf(map, Scheme::min_fixed(fs), p) - kFormatTagBits;
                    if (adaptive > min_fixed)
                        failures.add(r.id + " " + map.size.to_string() + ": tag-free adaptive > min-fixed");
                }
        });
    });
    if (!failures.empty()) return {Status::Fail, failures.summary()};
    return {Status::Pass, std::to_string(corpus.size()) + " matrices, " + std::to_string(checks.load()) +
                              " checks: delta >= 0, delta(S6,B64) = 0, antitone over B64>B20>B14>B8, "
                              "tag-free adaptive <= tag-free min-fixed"};
}

Outcome without_csr_synthetic(std::span<const Generated> corpus) {
    Failures failures;
    double worst_growth = 0.0;
    for (const auto& g : corpus)
        for (const auto& t : g.record.tables)
            for (auto kind : {SchemeKind::MinFixed, SchemeKind::Adaptive}) {
                const Scheme with{kind, FormatSet::all()}, without{kind, FormatSet::without_csr()};
                for (auto size : all_block_sizes())
                    if (t.at(without, size) < t.at(with, size))
                        failures.add(g.record.id + " " + without.name() + " " + size.to_string());
                worst_growth = std::max(worst_growth, delta(t, {{without}, all_block_sizes()}) -
                                                          delta(t, {{with}, all_block_sizes()}));
            }
    if (!failures.empty()) return {Status::Fail, failures.summary()};
    return {Status::Pass, std::to_string(corpus.size()) +
                              " generated matrices: w/o-CSR >= with CSR at every size; largest delta growth " +
                              format_percent(worst_growth) + " points (informational)"};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism(std::span<const Generated> corpus) {
    std::vector<CorpusRecord> records;
    for (const auto& g : corpus) records.push_back(g.record);
    ConsistencyParams params;
    params.subset_size = records.size() / 2;
    params.trials = 50;
    params.seed = 2016;
    for (const auto& s : {Scheme::min_fixed(), Scheme::adaptive()})
        for (auto id : {SizeSetId::B64, SizeSetId::B20, SizeSetId::B14, SizeSetId::B8}) {
            params.scheme = s;
            params.sizes = id;
            const auto a = consistency_experiment(records, params);
            const auto b = consistency_experiment(records, params);
            if (!(a == b) || a.normalized_averages != b.normalized_averages || a.normalized_maxima != b.normalized_maxima)
                return {Status::Fail, "consistency differs between identical runs"};
            auto one = params;
            one.trials = 1;
            const auto c = consistency_experiment(records, one);
            if (c.stddev_of_averages != 0.0 || c.stddev_of_maxima != 0.0)
                return {Status::Fail, "trials=1 gave nonzero standard deviations"};
        }

    // End-to-end: two corpus runs with different thread counts.
    const auto root = std::filesystem::temp_directory_path() / "sbm_acceptance_determinism";
    std::filesystem::remove_all(root);
    std::filesystem::create_directories(root / "in");
    JobConfig config;
    for (std::size_t i = 0; i < 8; ++i) {
        const auto path = root / "in" / ("g" + std::to_string(i) + ".mtx");
        std::ofstream out(path, std::ios::binary);
        out << "%%MatrixMarket matrix coordinate real " << (corpus[i].source.matrix.symmetric() ? "symmetric" : "general")
            << "\n% kind: " << (i % 3 ? "synthetic problem" : "graph problem") << '\n';
        std::ostringstream body;
        write_matrix_market(body, corpus[i].source.matrix, corpus[i].source.values);
        const auto text = body.str();
        out << text.substr(text.find('\n') + 1);
        config.inputs.push_back(path.string());
    }
    config.filter = false;
    config.subset_size = 4;
    config.trials = 20;
    config.output_dir = root / "a";
    config.threads = 1;
    const auto ra = corpus_run(config);
    config.output_dir = root / "b";
    config.threads = 8;
    const auto rb = corpus_run(config);
    if (ra.exit_code != 0 || rb.exit_code != 0) return {Status::Fail, "corpus run failed"};
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(root / "a")) {
        ++files;
        if (slurp(entry.path()) != slurp(root / "b" / entry.path().filename()))
            return {Status::Fail, entry.path().filename().string() + " differs between reruns"};
    }
    std::filesystem::remove_all(root);
    return {Status::Pass, "consistency identical on rerun for 8 (scheme, size set) pairs; trials=1 gives 0; " +
                              std::to_string(files) + " report files byte-identical across reruns (1 vs 8 threads)"};
}

Outcome reproduction_mode() {
    const char* list = std::getenv("SBM_REPRO_LIST");
    if (list == nullptr || *list == '\0')
        return {Status::Skipped, "optional; set SBM_REPRO_LIST to a file of collection ids to run it"};
    std::ifstream in(list);
    if (!in) return {Status::Fail, std::string("cannot read ") + list};
    JobConfig config;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') config.inputs.push_back(line);
    const char* out = std::getenv("SBM_REPRO_OUT");
    config.output_dir = out ? out : (std::filesystem::temp_directory_path() / "sbm_reproduction").string();
    config.fetch = FetchOptions::from_environment();
    const auto r = corpus_run(config);
    if (r.exit_code == 2) return {Status::Fail, "no usable matrix among " + std::to_string(r.inputs) + " inputs"};
    return {Status::Pass, std::to_string(r.kept) + " of " + std::to_string(r.inputs) + " ids kept; reports in " +
                              config.output_dir.string()};
}

// ---------------------------------------------------------------------------
// Collection matrices

const std::vector<std::string> kCollectionSample = {
    "HB/bcsstk17", "Bova/rma10", "Williams/cant", "Williams/mac_econ_fwd500", "Hamm/scircuit", "Williams/cop20k_A",
};

int run_collection_criteria() {
    std::vector<std::string> inputs;
    std::string source;
    if (const char* dir = std::getenv("SBM_UFSMC_DIR"); dir != nullptr && *dir != '\0') {
        source = dir;
        for (const auto& entry : std::filesystem::directory_iterator(dir))
            if (entry.path().extension() == ".mtx") inputs.push_back(entry.path().string());
        std::sort(inputs.begin(), inputs.end());
    } else {
        source = "collection ids via fetch cache";
        inputs = kCollectionSample;
    }

    const auto fetch = FetchOptions::from_environment();
    std::vector<CorpusRecord> records;
    std::vector<std::string> problems;
    for (const auto& input : inputs) {
        try {
            const auto loaded = load_input(input, fetch);
            if (loaded.info.field == ValueField::Pattern || loaded.matrix.nnz_all() <= 100000) {
                problems.push_back(loaded.id + ": not a real matrix with nnz > 100000");
                continue;
            }
            records.push_back(make_record(loaded.id, loaded.info.kind, loaded.info.field, loaded.matrix,
                                          std::array{Precision::Single, Precision::Double}));
        } catch (const std::exception& e) {
            problems.push_back(e.what());
        }
    }

    if (records.size() < 5) {
        std::string why = std::to_string(records.size()) + " usable matrices from " + source + " (need 5)";
        if (!problems.empty()) why += "; first problem: " + problems.front();
        report("6", "w/o-CSR variants on collection matrices", {Status::Blocked, why}, 0.0);
        report("7", "savings sanity on collection matrices", {Status::Blocked, why}, 0.0);
        return 77;
    }

    run("6", "w/o-CSR variants on collection matrices", [&]() -> Outcome {
        Failures failures;
        double worst = 0.0;
        for (const auto& r : records)
            for (const auto& t : r.tables)
                for (auto kind : {SchemeKind::MinFixed, SchemeKind::Adaptive}) {
                    const Scheme with{kind, FormatSet::all()}, without{kind, FormatSet::without_csr()};
                    for (auto size : all_block_sizes())
                        if (t.at(without, size) < t.at(with, size)) failures.add(r.id + " " + without.name());
                    const double growth =
                        delta(t, {{without}, all_block_sizes()}) - delta(t, {{with}, all_block_sizes()});
                    worst = std::max(worst, growth);
                    if (growth > 1.0)
                        failures.add(r.id + " " + without.name() + " b=" + std::to_string(bits_of(t.precision())) +
                                     " grew " + format_percent(growth) + " points");
                }
        if (!failures.empty()) return {Status::Fail, failures.summary()};
        return {Status::Pass, std::to_string(records.size()) + " matrices; largest delta growth " +
                                  format_percent(worst) + " points (limit 1.00)"};
    });
    run("7", "savings sanity on collection matrices", [&]() -> Outcome {
        Failures failures;
        for (const auto& r : records) {
            const double l32 = r.at(Precision::Single).lambda, l64 = r.at(Precision::Double).lambda;
            if (!(l32 > 0.0 && l64 > 0.0 && l32 > l64))
                failures.add(r.id + " lambda32 " + format_percent(l32) + " lambda64 " + format_percent(l64));
        }
        if (!failures.empty()) return {Status::Fail, failures.summary()};
        return {Status::Pass, std::to_string(records.size()) + " matrices with lambda > 0 and lambda32 > lambda64"};
    });
    return g_failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    std::cout << "sbm acceptance suite " << kToolVersion << std::endl;
    if (argc > 1 && std::string_view(argv[1]) == "--ufsmc") return run_collection_criteria();

    run("1", "codec payload length equals footprint model", codec_equals_model);
    run("2", "block counting equals division oracle", counting_oracle);
    run("3", "hand-computed cells", hand_cells);

    std::vector<Generated> corpus(48);
    parallel_for(corpus.size(), 0, [&](std::size_t i) {
        corpus[i].source = family_matrix(3, i, 1024);
        corpus[i].record = make_record("gen" + std::to_string(i), "synthetic", ValueField::Real,
                                       corpus[i].source.matrix, std::array{Precision::Single, Precision::Double});
    });
    std::vector<CorpusRecord> records;
    for (const auto& g : corpus) records.push_back(g.record);

    run("4", "lower-bound floors", [&] { return gamma_floors(records); });
    run("5", "delta ordering properties", [&] { return delta_properties(corpus); });
    run("6s", "w/o-CSR ordering on generated matrices", [&] { return without_csr_synthetic(corpus); });
    run("8", "determinism", [&] { return determinism(corpus); });
    run("9", "reproduction mode", reproduction_mode);

    std::cout << (g_failures == 0 ? "acceptance: all gating criteria passed" : "acceptance: FAILED") << std::endl;
    return g_failures == 0 ? 0 : 1;
}
