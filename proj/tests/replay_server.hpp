#pragma once

// Serves a recorded forge API session over local HTTP. Routes are keyed by
// path plus sorted query (the `since` filter is ignored), list pages carry
// ETags and Link headers, and one route can be made to answer with a
// rate-limit 403 the first time it is hit.

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace satd::testing {

class ReplayServer {
public:
    explicit ReplayServer(const std::string& recording_path) {
        std::ifstream in(recording_path);
        recording_ = nlohmann::json::parse(in);
        server_.Get(R"(.*)", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~ReplayServer() {
        server_.stop();
        thread_.join();
    }

    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    const nlohmann::json& index() const { return recording_.at("index"); }

    void rate_limit_once(std::string route) {
        std::lock_guard lock(mu_);
        rate_limited_route_ = std::move(route);
    }
    void fail_route(std::string route) {
        std::lock_guard lock(mu_);
        failing_.insert(std::move(route));
    }
    void require_token(std::string token) {
        std::lock_guard lock(mu_);
        token_ = std::move(token);
    }
    void set_detail_delay(std::chrono::milliseconds d) { delay_ = d; }

    std::size_t requests() const { return requests_.load(); }
    std::size_t not_modified() const { return not_modified_.load(); }
    std::size_t max_in_flight() const { return max_in_flight_.load(); }

private:
    static std::string key_of(const httplib::Request& req) {
        std::vector<std::string> q;
        for (const auto& [k, v] : req.params)
            if (k != "since") q.push_back(k + "=" + v);
        std::sort(q.begin(), q.end());
        std::string key = req.path + "?";
        for (std::size_t i = 0; i < q.size(); ++i) key += (i ? "&" : "") + q[i];
        return key;
    }

    void handle(const httplib::Request& req, httplib::Response& res) {
        ++requests_;
        const auto now = ++in_flight_;
        for (auto seen = max_in_flight_.load(); now > seen && !max_in_flight_.compare_exchange_weak(seen, now);) {
        }
        respond(req, res);
        --in_flight_;
    }

    void respond(const httplib::Request& req, httplib::Response& res) {
        const auto key = key_of(req);
        {
            std::lock_guard lock(mu_);
            if (!token_.empty() && req.get_header_value("Authorization") != "Bearer " + token_) {
                res.status = 401;
                res.set_content(R"({"message":"Bad credentials"})", "application/json");
                return;
            }
            if (key == rate_limited_route_) {
                rate_limited_route_.clear();
                res.status = 403;
                res.set_header("X-RateLimit-Remaining", "0");
                res.set_header("Retry-After", "7");
                res.set_content(R"({"message":"API rate limit exceeded"})", "application/json");
                return;
            }
            if (failing_.count(key)) {
                res.status = 502;
                return;
            }
        }
        const auto& routes = recording_.at("routes");
        auto it = routes.find(key);
        if (it == routes.end()) {
            res.status = 404;
            res.set_content(R"({"message":"Not Found"})", "application/json");
            return;
        }
        if (key.find("/comments?") != std::string::npos || key.find("/commits?") != std::string::npos)
            std::this_thread::sleep_for(delay_.load());
        const auto& route = *it;
        if (route.contains("etag") && !route["etag"].is_null()) {
            const auto etag = route["etag"].get<std::string>();
            if (req.get_header_value("If-None-Match") == etag) {
                ++not_modified_;
                res.status = 304;
                return;
            }
            res.set_header("ETag", etag);
        }
        if (route.contains("next") && !route["next"].is_null())
            res.set_header("Link", "<" + base_url() + route["next"].get<std::string>() + ">; rel=\"next\"");
        res.status = 200;
        res.set_content(route["body"].dump(), "application/json");
    }

    nlohmann::json recording_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::mutex mu_;
    std::string rate_limited_route_;
    std::set<std::string> failing_;
    std::string token_;
    std::atomic<std::chrono::milliseconds> delay_{std::chrono::milliseconds(0)};
    std::atomic<std::size_t> requests_{0}, not_modified_{0}, in_flight_{0}, max_in_flight_{0};
};

} // namespace satd::testing
