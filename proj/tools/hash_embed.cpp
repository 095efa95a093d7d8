// Deterministic feature-hashing embedder speaking the line protocol:
// reads {"id","text"} per line on stdin, writes {"id","vector"} per line.
#include "satd_atlas/detect.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

namespace {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<double> embed(std::string_view text, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    const auto tokens = satd::detect::word_tokens(text);
    auto add = [&](std::string_view feature, double weight) {
        const auto h = fnv1a64(feature);
        v[h % dim] += (h >> 63) ? -weight : weight;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add(tokens[i], 1.0);
        if (i + 1 < tokens.size()) add(tokens[i] + " " + tokens[i + 1], 0.5);
    }
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-hashing text embedder (line protocol on stdin/stdout)"};
    std::size_t dim = 64;
    app.add_option("--dim", dim, "vector dimension")->check(CLI::Range(1, 1 << 20));
    CLI11_PARSE(app, argc, argv);

    std::ios::sync_with_stdio(false);
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        satd::Json req;
        try {
            req = satd::Json::parse(line);
        } catch (const satd::Json::parse_error& e) {
            std::cerr << "satd-hash-embed: malformed request: " << e.what() << "\n";
            return 1;
        }
        satd::Json resp{{"id", req.at("id")}, {"vector", embed(req.value("text", ""), dim)}};
        std::cout << resp.dump() << '\n' << std::flush;
    }
    return 0;
}
