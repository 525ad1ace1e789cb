#pragma once

// Seeded generator of valid (frame, payload) pairs for codec property tests.

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "biokm/wire_protocol.hpp"

namespace oracle {

inline std::string random_token(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {"a", "z", "Q", "7", "_", "-", ".", ":", "é", "ß", "λ", "中", "🙂"};
    std::uniform_int_distribution<int> len(1, 12);
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    std::string t;
    for (int k = len(rng); k > 0; --k) t += pieces[pick(rng)];
    return t;
}

inline std::string random_bytes(std::mt19937_64& rng, std::size_t n) {
    std::string s(n, '\0');
    for (auto& c : s) c = static_cast<char>(rng() & 0xFF);
    return s;
}

inline std::pair<biokm::wire::Frame, std::string> random_frame(std::mt19937_64& rng) {
    using biokm::wire::Command;
    const auto& all = biokm::wire::kAllCommands;
    const Command cmd = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
    biokm::wire::Frame f{cmd, {}};
    std::string payload;
    switch (cmd) {
    case Command::Msg: {
        // mostly short bodies, occasionally up to the cap
        const std::size_t n = rng() % 8 == 0 ? rng() % (biokm::wire::kMaxPayload + 1) : rng() % 300;
        payload = random_bytes(rng, n);
        f.args = {random_token(rng), std::to_string(n)};
        break;
    }
    case Command::FileOffer:
        f.args = {random_token(rng), random_token(rng), std::to_string(rng() % 100000000)};
        break;
    case Command::FileAccept:
        f.args = {random_token(rng), std::to_string(rng() % 65536)};
        break;
    case Command::List:
    case Command::Quit:
        break;
    case Command::Ok:
        if (rng() % 2) f.args = {random_token(rng)};
        break;
    default:
        f.args = {random_token(rng)};
    }
    return {f, payload};
}

}  // namespace oracle
