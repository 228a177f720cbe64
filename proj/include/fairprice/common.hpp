// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fairprice {

// Error taxonomy. Every failure mode surfaces as one of these so the CLI can
// report a single machine-parsable line.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : Error {
    using Error::Error;
};
struct SchemaError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct CardinalityError : Error {
    using Error::Error;
};
struct RankError : Error {
    using Error::Error;
};
struct DivergenceError : Error {
    using Error::Error;
};
struct UndefinedMetricError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

using Rng = std::mt19937_64;

// splitmix64 step; used to derive independent substreams from one seed so
// parallel and serial execution visit identical random sequences.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return Rng(mix_seed(seed, stream));
}

// Active worker cap for the parallel helpers. 0 means "hardware default".
inline unsigned& thread_cap() {
    static unsigned cap = 0;
    return cap;
}

inline unsigned effective_threads(std::size_t work_items) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    unsigned cap = thread_cap();
    if (cap != 0 && cap < hw) hw = cap;
    if (work_items < hw) hw = static_cast<unsigned>(work_items);
    return hw == 0 ? 1 : hw;
}

// Deterministic parallel map: body(i) must only write state owned by index i.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    unsigned workers = effective_threads(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace fairprice
