#pragma once

#include "dacq/database.hpp"
#include "dacq/query.hpp"
#include "dacq/semiring.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dacq::cli {

/// Parses the TOML-like manifest subset: `key = value` lines where values are
/// strings, numbers, booleans, bare words, arrays and inline tables.
nlohmann::json parse_manifest_text(std::string_view text);

struct Manifest {
    struct Rel {
        std::string name;
        std::string path;
        std::size_t arity = 0;
        bool annot_col = false;
    };
    std::vector<Rel> relations;
    std::string query;
    std::string semiring = "counting";
    std::filesystem::path dir;
};

Manifest load_manifest(const std::string& path);

/// counting | numeric | mintrop | maxtrop | avg | set:<domain-file>
SemiringKind parse_semiring_spec(const std::string& spec, const std::filesystem::path& dir);

struct BenchConfig {
    std::string generator = "path3";
    std::vector<int> log_sizes{14, 15, 16, 17, 18};
    int reps = 5;
    int probes = 1000;
    bool bigint = false;
    std::uint64_t seed = 7;
};

nlohmann::json run_bench(const BenchConfig& cfg);

/// Entry point of the `dacq` executable. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dacq::cli
