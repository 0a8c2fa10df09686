#include <gtest/gtest.h>

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <map>

#include "sbm/fetch.hpp"
#include "sbm/matrix_io.hpp"

using namespace sbm;

namespace {

constexpr const char* kMatrix =
    "%%MatrixMarket matrix coordinate real general\n"
    "% name: Test/tiny\n"
    "3 3 2\n"
    "1 1 1.0\n"
    "3 2 2.0\n";

std::string octal(std::uint64_t value, std::size_t width) {
    std::string digits;
    do {
        digits.insert(digits.begin(), static_cast<char>('0' + (value & 7)));
        value >>= 3;
    } while (value != 0);
    return std::string(width - 1 - digits.size(), '0') + digits;
}

// Minimal ustar writer: regular files and directories.
std::string make_tar(const std::vector<std::pair<std::string, std::string>>& files) {
    std::string out;
    for (const auto& [name, body] : files) {
        char header[512] = {};
        std::memcpy(header, name.data(), std::min<std::size_t>(name.size(), 100));
        const bool dir = !name.empty() && name.back() == '/';
        std::memcpy(header + 100, octal(dir ? 0755 : 0644, 8).c_str(), 7);
        std::memcpy(header + 108, octal(0, 8).c_str(), 7);
        std::memcpy(header + 116, octal(0, 8).c_str(), 7);
        std::memcpy(header + 124, octal(body.size(), 12).c_str(), 11);
        std::memcpy(header + 136, octal(0, 12).c_str(), 11);
        header[156] = dir ? '5' : '0';
        std::memcpy(header + 257, "ustar", 6);
        std::memcpy(header + 263, "00", 2);
        std::memset(header + 148, ' ', 8);
        unsigned sum = 0;
        for (unsigned char ch : header) sum += ch;
        std::memcpy(header + 148, octal(sum, 7).c_str(), 6);
        header[154] = '\0';
        header[155] = ' ';
        out.append(header, 512);
        out += body;
        out.append((512 - body.size() % 512) % 512, '\0');
    }
    out.append(1024, '\0');
    return out;
}

std::string gzip(const std::string& data) {
    z_stream zs{};
    EXPECT_EQ(deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY), Z_OK);
    std::string out(deflateBound(&zs, data.size()) + 64, '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    EXPECT_EQ(deflate(&zs, Z_FINISH), Z_STREAM_END);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

struct FakeServer {
    std::map<std::string, std::string> files;
    int requests = 0;

    Transport transport() {
        return [this](const std::string& url) {
            ++requests;
            const auto it = files.find(url);
            if (it == files.end()) throw FetchError(FetchError::Kind::Resolution, "HTTP 404 for " + url);
            return it->second;
        };
    }
};

class FetchTest : public ::testing::Test {
protected:
    void SetUp() override {
        cache = std::filesystem::temp_directory_path() /
                ("sbm_fetch_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        std::filesystem::remove_all(cache);
        options.cache_dir = cache;
        options.base_url = "https://example.invalid/MM";
        options.transport = server.transport();
    }
    void TearDown() override { std::filesystem::remove_all(cache); }

    std::size_t cached_objects() const {
        const auto dir = cache / "objects";
        if (!std::filesystem::exists(dir)) return 0;
        return static_cast<std::size_t>(std::distance(std::filesystem::directory_iterator(dir), {}));
    }

    std::filesystem::path cache;
    FakeServer server;
    FetchOptions options;
};

}  // namespace

TEST(FetchIds, Recognition) {
    EXPECT_TRUE(is_collection_id("HB/bcsstk17"));
    EXPECT_TRUE(is_collection_id("Williams/mac_econ_fwd500"));
    EXPECT_FALSE(is_collection_id("bcsstk17"));
    EXPECT_FALSE(is_collection_id("a/b/c"));
    EXPECT_FALSE(is_collection_id("../etc"));
    EXPECT_TRUE(is_url("https://sparse.tamu.edu/MM/HB/bcsstk17.tar.gz"));
    EXPECT_TRUE(is_url("file:///tmp/x.mtx"));
    EXPECT_FALSE(is_url("ftp://x"));
}

TEST(Archive, TarMembersAndGzip) {
    const auto tar = make_tar({{"tiny/", ""}, {"tiny/tiny.mtx", kMatrix}, {"tiny/tiny_b.mtx", "x"}});
    std::vector<std::string> names;
    for_each_tar_member(gunzip(gzip(tar)), [&](std::string_view name, std::string_view body) {
        names.emplace_back(name);
        if (name == "tiny/tiny.mtx") EXPECT_EQ(body, kMatrix);
        return true;
    });
    EXPECT_EQ(names, (std::vector<std::string>{"tiny/tiny.mtx", "tiny/tiny_b.mtx"}));

    auto damaged = tar;
    damaged[20] ^= 0x55;
    EXPECT_THROW(for_each_tar_member(damaged, [](auto, auto) { return true; }), FetchError);
    EXPECT_THROW(gunzip("\x1f\x8bgarbage"), FetchError);
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(FetchTest, DownloadsOnceThenServesFromCache) {
    server.files["https://example.invalid/MM/Test/tiny.tar.gz"] =
        gzip(make_tar({{"tiny/", ""}, {"tiny/tiny.mtx", kMatrix}}));
    const auto first = fetch("Test/tiny", options);
    EXPECT_FALSE(first.from_cache);
    EXPECT_EQ(server.requests, 1);
    EXPECT_EQ(first.sha256, sha256_hex(kMatrix));
    EXPECT_EQ(read_matrix_market_file(first.path).matrix.nnz_stored(), 2u);

    const auto second = fetch("Test/tiny", options);
    EXPECT_TRUE(second.from_cache);
    EXPECT_EQ(server.requests, 1);
    EXPECT_EQ(second.path, first.path);

    auto offline = options;
    offline.offline = true;
    EXPECT_TRUE(fetch("Test/tiny", offline).from_cache);
}

TEST_F(FetchTest, PrefersMemberNamedAfterMatrix) {
    server.files["https://example.invalid/MM/Test/tiny.tar.gz"] =
        gzip(make_tar({{"tiny/tiny_b.mtx", "%%MatrixMarket matrix coordinate real general\n1 1 0\n"},
                       {"tiny/tiny.mtx", kMatrix}}));
    EXPECT_EQ(fetch("Test/tiny", options).sha256, sha256_hex(kMatrix));
}

TEST_F(FetchTest, UnknownIdNamesTheId) {
    try {
        fetch("Nobody/nothing", options);
        FAIL();
    } catch (const FetchError& e) {
        EXPECT_EQ(e.kind(), FetchError::Kind::Resolution);
        EXPECT_NE(std::string(e.what()).find("Nobody/nothing"), std::string::npos);
    }
    EXPECT_THROW(fetch("not-an-id", options), FetchError);
    EXPECT_EQ(cached_objects(), 0u);
}

TEST_F(FetchTest, CorruptedArchiveLeavesNoCacheEntry) {
    auto archive = gzip(make_tar({{"tiny/tiny.mtx", kMatrix}}));
    archive.resize(archive.size() / 2);
    server.files["https://example.invalid/MM/Test/tiny.tar.gz"] = archive;
    try {
        fetch("Test/tiny", options);
        FAIL();
    } catch (const FetchError& e) {
        EXPECT_EQ(e.kind(), FetchError::Kind::Extract);
    }
    EXPECT_EQ(cached_objects(), 0u);
    EXPECT_FALSE(std::filesystem::exists(cache / "refs" / "Test__tiny.ref"));

    server.files["https://example.invalid/MM/Test/tiny.tar.gz"] = gzip(make_tar({{"tiny/readme.txt", "hi"}}));
    EXPECT_THROW(fetch("Test/tiny", options), FetchError);
    EXPECT_EQ(cached_objects(), 0u);
}

TEST_F(FetchTest, OfflineCacheMiss) {
    options.offline = true;
    try {
        fetch("Test/tiny", options);
        FAIL();
    } catch (const FetchError& e) {
        EXPECT_EQ(e.kind(), FetchError::Kind::CacheMiss);
    }
    EXPECT_EQ(server.requests, 0);
}

TEST_F(FetchTest, TruncatedCacheObjectIsRefetched) {
    server.files["https://example.invalid/MM/Test/tiny.tar.gz"] = gzip(make_tar({{"tiny/tiny.mtx", kMatrix}}));
    const auto first = fetch("Test/tiny", options);
    std::filesystem::resize_file(first.path, 5);
    const auto again = fetch("Test/tiny", options);
    EXPECT_FALSE(again.from_cache);
    EXPECT_EQ(server.requests, 2);
    EXPECT_EQ(std::filesystem::file_size(again.path), std::strlen(kMatrix));
}

TEST_F(FetchTest, CurlTransportReadsFileUrls) {
    std::filesystem::create_directories(cache / "server" / "Test");
    {
        std::ofstream out(cache / "server" / "Test" / "tiny.tar.gz", std::ios::binary);
        out << gzip(make_tar({{"tiny/tiny.mtx", kMatrix}}));
    }
    options.transport = curl_transport();
    options.base_url = "file://" + (cache / "server").string();
    const auto r = fetch("Test/tiny", options);
    EXPECT_EQ(r.sha256, sha256_hex(kMatrix));
    try {
        fetch("Test/missing", options);
        FAIL();
    } catch (const FetchError& e) {
        EXPECT_EQ(e.kind(), FetchError::Kind::Resolution);
    }

    // A plain .mtx URL is cached as is.
    {
        std::ofstream out(cache / "server" / "plain.mtx", std::ios::binary);
        out << kMatrix;
    }
    const auto plain = fetch("file://" + (cache / "server" / "plain.mtx").string(), options);
    EXPECT_EQ(plain.sha256, sha256_hex(kMatrix));
}

TEST(FetchOptionsEnv, CacheDirFromEnvironment) {
    ::setenv("SBM_CACHE_DIR", "/tmp/sbm-env-cache", 1);
    ::setenv("SBM_OFFLINE", "1", 1);
    const auto o = FetchOptions::from_environment();
    EXPECT_EQ(o.cache_dir, std::filesystem::path("/tmp/sbm-env-cache"));
    EXPECT_TRUE(o.offline);
    ::unsetenv("SBM_CACHE_DIR");
    ::unsetenv("SBM_OFFLINE");
}
