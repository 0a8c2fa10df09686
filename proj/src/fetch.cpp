#include "sbm/fetch.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>
#include <zlib.h>

#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <iterator>
#include <regex>
#include <sstream>
#include <system_error>

namespace sbm {

// ---------------------------------------------------------------------------
// Transport

namespace {

std::size_t append_body(char* data, std::size_t size, std::size_t count, void* user) {
    static_cast<std::string*>(user)->append(data, size * count);
    return size * count;
}

}  // namespace

Transport curl_transport() {
    static std::once_flag init;
    std::call_once(init, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
    return [](const std::string& url) {
        std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
        if (!curl) throw FetchError(FetchError::Kind::Transfer, "cannot initialize libcurl");
        std::string body;
        curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
        curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
        curl_easy_setopt(curl.get(), CURLOPT_FAILONERROR, 1L);
        curl_easy_setopt(curl.get(), CURLOPT_CONNECTTIMEOUT, 30L);
        curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, append_body);
        curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &body);
        const CURLcode rc = curl_easy_perform(curl.get());
        long status = 0;
        curl_easy_getinfo(curl.get(), CURLINFO_RESPONSE_CODE, &status);
        if (rc == CURLE_OK) return body;
        if (rc == CURLE_FILE_COULDNT_READ_FILE || status == 404 || status == 410)
            throw FetchError(FetchError::Kind::Resolution, url + " not found");
        throw FetchError(FetchError::Kind::Transfer,
                         "download of " + url + " failed: " + curl_easy_strerror(rc) +
                             (status ? " (HTTP " + std::to_string(status) + ")" : ""));
    };
}

// ---------------------------------------------------------------------------
// Archives

std::string gunzip(std::string_view data) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK)
        throw FetchError(FetchError::Kind::Extract, "cannot initialize zlib");
    std::unique_ptr<z_stream, decltype(&inflateEnd)> guard(&zs, inflateEnd);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    std::string out;
    char chunk[1 << 16];
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = reinterpret_cast<Bytef*>(chunk);
        zs.avail_out = sizeof chunk;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END)
            throw FetchError(FetchError::Kind::Extract,
                             std::string("gzip data corrupt: ") + (zs.msg ? zs.msg : "inflate failed"));
        out.append(chunk, sizeof chunk - zs.avail_out);
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0)
            throw FetchError(FetchError::Kind::Extract, "gzip data truncated");
    }
    return out;
}

namespace {

std::string_view field(std::string_view header, std::size_t offset, std::size_t length) {
    auto f = header.substr(offset, length);
    const auto nul = f.find('\0');
    return nul == std::string_view::npos ? f : f.substr(0, nul);
}

std::uint64_t tar_number(std::string_view raw) {
    if (!raw.empty() && (static_cast<unsigned char>(raw.front()) & 0x80)) {
        std::uint64_t v = static_cast<unsigned char>(raw.front()) & 0x7F;
        for (std::size_t i = 1; i < raw.size(); ++i) v = (v << 8) | static_cast<unsigned char>(raw[i]);
        return v;
    }
    std::uint64_t v = 0;
    for (char ch : raw) {
        if (ch == '\0' || ch == ' ') {
            if (v != 0) break;
            continue;
        }
        if (ch < '0' || ch > '7') throw FetchError(FetchError::Kind::Extract, "bad octal field in tar header");
        v = v * 8 + static_cast<std::uint64_t>(ch - '0');
    }
    return v;
}

std::optional<std::string> pax_path(std::string_view records) {
    while (!records.empty()) {
        const auto space = records.find(' ');
        if (space == std::string_view::npos) break;
        const auto len = std::strtoull(std::string(records.substr(0, space)).c_str(), nullptr, 10);
        if (len == 0 || len > records.size()) break;
        auto record = records.substr(space + 1, len - space - 2);
        if (record.starts_with("path=")) return std::string(record.substr(5));
        records.remove_prefix(len);
    }
    return std::nullopt;
}

}  // namespace

void for_each_tar_member(std::string_view archive,
                         const std::function<bool(std::string_view, std::string_view)>& visit) {
    constexpr std::size_t kBlock = 512;
    std::size_t pos = 0;
    std::optional<std::string> long_name;
    while (true) {
        if (archive.size() - pos < kBlock) throw FetchError(FetchError::Kind::Extract, "tar archive truncated");
        const auto header = archive.substr(pos, kBlock);
        if (header.find_first_not_of('\0') == std::string_view::npos) return;  // end marker

        unsigned sum = 0;
        for (std::size_t i = 0; i < kBlock; ++i)
            sum += (i >= 148 && i < 156) ? ' ' : static_cast<unsigned char>(header[i]);
        if (sum != tar_number(header.substr(148, 8)))
            throw FetchError(FetchError::Kind::Extract, "tar header checksum mismatch");

        const std::uint64_t size = tar_number(header.substr(124, 12));
        const char type = header[156];
        pos += kBlock;
        if (size > archive.size() - pos)
            throw FetchError(FetchError::Kind::Extract, "tar member extends past end of archive");
        const auto data = archive.substr(pos, size);
        pos += (size + kBlock - 1) / kBlock * kBlock;

        std::string name;
        if (long_name) {
            name = *long_name;
            long_name.reset();
        } else {
            const auto prefix = field(header, 345, 155);
            name = prefix.empty() ? std::string(field(header, 0, 100))
                                  : std::string(prefix) + "/" + std::string(field(header, 0, 100));
        }
        if (type == 'L') {
            long_name = std::string(field(data, 0, data.size()));
        } else if (type == 'x') {
            long_name = pax_path(data);
        } else if (type == '0' || type == '\0') {
            if (!visit(name, data)) return;
        }
    }
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cache

FetchOptions FetchOptions::from_environment() {
    FetchOptions o;
    if (const char* dir = std::getenv("SBM_CACHE_DIR"); dir && *dir) {
        o.cache_dir = dir;
    } else if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) {
        o.cache_dir = std::filesystem::path(xdg) / "sbm";
    } else if (const char* home = std::getenv("HOME"); home && *home) {
        o.cache_dir = std::filesystem::path(home) / ".cache" / "sbm";
    } else {
        o.cache_dir = std::filesystem::temp_directory_path() / "sbm-cache";
    }
    if (const char* off = std::getenv("SBM_OFFLINE"); off && std::string_view(off) == "1") o.offline = true;
    if (const char* url = std::getenv("SBM_COLLECTION_URL"); url && *url) o.base_url = url;
    return o;
}

bool is_collection_id(std::string_view text) {
    static const std::regex pattern(R"(^[A-Za-z0-9_.+-]+/[A-Za-z0-9_.+-]+$)");
    return std::regex_match(text.begin(), text.end(), pattern) && text.find("..") == std::string_view::npos;
}

bool is_url(std::string_view text) {
    return text.starts_with("https://") || text.starts_with("http://") || text.starts_with("file://");
}

namespace {

std::string strip_suffixes(std::string name) {
    for (std::string_view s : {".tar.gz", ".tgz", ".gz", ".mtx"})
        if (name.ends_with(s)) name.resize(name.size() - s.size());
    return name;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FetchError(FetchError::Kind::Io, "cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_atomically(const std::filesystem::path& target, std::string_view contents) {
    auto tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw FetchError(FetchError::Kind::Io, "cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw FetchError(FetchError::Kind::Io, "cannot move " + tmp.string() + ": " + ec.message());
}

std::string extract_matrix(std::string_view body, const std::string& member_name) {
    std::string inflated;
    if (body.size() >= 2 && static_cast<unsigned char>(body[0]) == 0x1f &&
        static_cast<unsigned char>(body[1]) == 0x8b) {
        inflated = gunzip(body);
        body = inflated;
    }
    if (body.starts_with("%%MatrixMarket")) return std::string(body);
    if (body.size() < 512 || body.substr(257, 5) != "ustar")
        throw FetchError(FetchError::Kind::Extract, "download is neither a tar archive nor a Matrix Market file");

    std::optional<std::string> exact, fallback;
    for_each_tar_member(body, [&](std::string_view name, std::string_view data) {
        const auto slash = name.rfind('/');
        const auto base = slash == std::string_view::npos ? name : name.substr(slash + 1);
        if (base == member_name + ".mtx") {
            exact = std::string(data);
            return false;
        }
        if (!fallback && base.ends_with(".mtx")) fallback = std::string(data);
        return true;
    });
    auto out = exact ? std::move(exact) : std::move(fallback);
    if (!out) throw FetchError(FetchError::Kind::Extract, "archive contains no .mtx member");
    if (!out->starts_with("%%MatrixMarket"))
        throw FetchError(FetchError::Kind::Extract, "extracted member is not a Matrix Market file");
    return std::move(*out);
}

}  // namespace

FetchResult fetch(std::string_view id_or_url, const FetchOptions& options) {
    std::string url, key, member;
    if (is_url(id_or_url)) {
        url = std::string(id_or_url);
        key = "url-" + sha256_hex(url).substr(0, 32);
        member = strip_suffixes(url.substr(url.rfind('/') + 1));
    } else if (is_collection_id(id_or_url)) {
        const auto slash = id_or_url.find('/');
        const std::string group(id_or_url.substr(0, slash));
        member = std::string(id_or_url.substr(slash + 1));
        url = options.base_url + "/" + group + "/" + member + ".tar.gz";
        key = group + "__" + member;
    } else {
        throw FetchError(FetchError::Kind::Resolution,
                         "cannot resolve '" + std::string(id_or_url) + "': expected Group/Name or a URL");
    }

    const auto objects = options.cache_dir / "objects";
    const auto refs = options.cache_dir / "refs";
    const auto ref = refs / (key + ".ref");

    if (std::filesystem::exists(ref)) {
        std::istringstream in(read_file(ref));
        std::string hash;
        std::uint64_t size = 0;
        in >> hash >> size;
        const auto object = objects / (hash + ".mtx");
        std::error_code ec;
        if (!hash.empty() && std::filesystem::file_size(object, ec) == size && !ec)
            return {object, hash, true};
    }
    if (options.offline)
        throw FetchError(FetchError::Kind::CacheMiss,
                         "'" + std::string(id_or_url) + "' is not cached and offline mode is on");

    const Transport transport = options.transport ? options.transport : curl_transport();
    std::string body;
    try {
        body = transport(url);
    } catch (const FetchError& e) {
        if (e.kind() == FetchError::Kind::Resolution)
            throw FetchError(FetchError::Kind::Resolution,
                             "unknown matrix '" + std::string(id_or_url) + "': " + e.what());
        throw;
    }
    const std::string matrix = extract_matrix(body, member);
    const std::string hash = sha256_hex(matrix);

    std::filesystem::create_directories(objects);
    std::filesystem::create_directories(refs);
    const auto object = objects / (hash + ".mtx");
    write_atomically(object, matrix);
    write_atomically(ref, hash + " " + std::to_string(matrix.size()) + "\n");
    return {object, hash, false};
}

}  // namespace sbm
