#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sbm {

class FetchError : public std::runtime_error {
public:
    enum class Kind { Resolution, Transfer, Extract, CacheMiss, Io };

    FetchError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Downloads a URL and returns the body. Throws FetchError with kind
/// Resolution when the resource does not exist and Transfer otherwise.
using Transport = std::function<std::string(const std::string& url)>;

/// libcurl-backed transport (https, http, file).
Transport curl_transport();

inline constexpr std::string_view kDefaultCollectionUrl = "https://sparse.tamu.edu/MM";

struct FetchOptions {
    std::filesystem::path cache_dir;
    bool offline = false;
    /// Prefix for "Group/Name" ids; the archive is <base>/<Group>/<Name>.tar.gz.
    std::string base_url = std::string(kDefaultCollectionUrl);
    Transport transport;

    /// SBM_CACHE_DIR, then $XDG_CACHE_HOME/sbm, then ~/.cache/sbm;
    /// SBM_OFFLINE=1 and SBM_COLLECTION_URL are honored too.
    static FetchOptions from_environment();
};

struct FetchResult {
    std::filesystem::path path;  // cached .mtx file
    std::string sha256;
    bool from_cache = false;
};

/// "Group/Name" as used by the SuiteSparse collection.
bool is_collection_id(std::string_view text);
bool is_url(std::string_view text);

/// Resolves a collection id or URL to a cached Matrix Market file. The object
/// is stored under objects/<sha256>.mtx and indexed by refs/<key>; a failed
/// download or extraction leaves the cache unchanged.
FetchResult fetch(std::string_view id_or_url, const FetchOptions& options);

/// Inflates gzip data.
std::string gunzip(std::string_view data);

/// Calls `visit(name, contents)` for every regular file of a ustar archive;
/// stops early when it returns false. Throws FetchError (Extract) on a
/// damaged archive.
void for_each_tar_member(std::string_view archive,
                         const std::function<bool(std::string_view, std::string_view)>& visit);

std::string sha256_hex(std::string_view data);

}  // namespace sbm
