// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace netquery::http {

using Header = std::pair<std::string, std::string>;

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;   // at least "/"
};

/// Throws InvalidArgument for anything that is not http:// or https://.
Url split_url(std::string_view url);

struct Response {
    int status = 0;           // 0 when the request never completed
    std::string body;
    std::string retry_after;  // raw Retry-After header, if any
    std::string transport_error;

    bool ok() const noexcept { return status >= 200 && status < 300; }
};

Response post_json(std::string_view url, const std::string& body,
                   const std::vector<Header>& headers, double timeout_s);

} // namespace netquery::http
