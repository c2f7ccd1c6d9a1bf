// SPDX-License-Identifier: Apache-2.0
#include "netquery/http.hpp"

#include <chrono>

#include <httplib.h>

#include "netquery/error.hpp"

namespace netquery::http {

Url split_url(std::string_view url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos)
        throw Error(ErrorCode::InvalidArgument, "URL without scheme: " + std::string(url));
    auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw Error(ErrorCode::InvalidArgument, "unsupported URL scheme: " + std::string(scheme));
    auto path_start = url.find('/', scheme_end + 3);
    Url out;
    if (path_start == std::string_view::npos) {
        out.origin = std::string(url);
        out.path = "/";
    } else {
        out.origin = std::string(url.substr(0, path_start));
        out.path = std::string(url.substr(path_start));
    }
    if (out.origin.size() <= scheme_end + 3)
        throw Error(ErrorCode::InvalidArgument, "URL without host: " + std::string(url));
    return out;
}

Response post_json(std::string_view url, const std::string& body,
                   const std::vector<Header>& headers, double timeout_s) {
    auto target = split_url(url);
    httplib::Client client(target.origin);
    auto secs = static_cast<time_t>(timeout_s);
    auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers)
        hdrs.emplace(k, v);

    Response out;
    auto res = client.Post(target.path, hdrs, body, "application/json");
    if (!res) {
        out.transport_error = httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    out.retry_after = res->get_header_value("Retry-After");
    return out;
}

} // namespace netquery::http
