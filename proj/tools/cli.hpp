#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stackgen::cli {

// Highest N accepted in --cmdoptN, --pipeN and --xvarsN.
inline constexpr int kMaxIndexed = 64;

struct LearnerBlock {
    std::string method;
    std::string options;
    std::string pipeline;
    std::string xvars;

    bool operator==(const LearnerBlock&) const = default;
};

struct RunConfig {
    std::string subcommand;
    std::string data;
    std::string outcome;
    std::vector<std::string> predictors;
    std::string sample;  // 0/1 column restricting the estimation sample
    std::string type = "regress";

    // Inline syntax.
    std::string methods;
    std::map<int, std::string> cmdopt;
    std::map<int, std::string> pipe;
    std::map<int, std::string> xvars;
    // Block syntax, one entry per --learner group of key=value tokens.
    std::vector<std::vector<std::string>> learner_tokens;

    std::string finalest = "nnls1";
    int folds = 5;
    std::string foldvar;
    int bfolds = 5;
    std::optional<std::int64_t> seed;
    std::optional<std::uint64_t> global_seed;
    int njobs = 0;
    bool voting = false;
    std::string voteweights;

    std::optional<std::string> holdout;  // "" for the default holdout sample
    double threshold = 0.5;
    bool table = false;
    bool graph = false;
    bool histogram = false;
    bool printopt = false;
    bool showopt = false;
    std::string title, subtitle, xtitle, ytitle;

    std::string model;      // input model (predict, table, graph)
    std::string out_model;  // output model (fit)
    std::string out_dir = ".";
    std::string out;        // prediction CSV; stdout when empty
    bool xb = false, pr = false, basexb = false, cvalid = false;

    // Set when parsing ended early (help, usage error).
    std::optional<int> exit_code;
    std::string message;
};

// Parses a command line. Usage errors and help requests come back through
// exit_code and message rather than exceptions.
RunConfig parse_args(int argc, const char* const* argv);

// Learner list in declaration order from whichever syntax was used.
// Throws std::runtime_error on mixed syntaxes, bad block tokens and
// indexed options beyond the number of methods.
std::vector<LearnerBlock> learner_blocks(const RunConfig& config);

// Executes a parsed configuration; returns the process exit code.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace stackgen::cli
