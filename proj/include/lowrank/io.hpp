#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lowrank/adversary.hpp"
#include "lowrank/harness.hpp"
#include "lowrank/mdp_core.hpp"
#include "lowrank/model_class.hpp"
#include "lowrank/polo.hpp"

namespace lowrank {

/// Raised for malformed or unreadable input documents.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g, which round-trips every finite double; "nan"/"inf"/"-inf" otherwise.
std::string format_double(double x);

// MDP documents are JSON objects with n_states, n_actions, dim, gamma,
// init_dist, phi (nested S x A x d) and mu (S x d).
std::string mdp_to_json(const LowRankMdp& mdp);
LowRankMdp mdp_from_json(const std::string& text);
void save_mdp(const LowRankMdp& mdp, const std::filesystem::path& path);
LowRankMdp load_mdp(const std::filesystem::path& path);

/// One `s,a,s_next` line per tuple.
void write_dataset(const Dataset& data, std::ostream& out);
Dataset read_dataset(std::istream& in, int n_states, int n_actions, DatasetTag tag = DatasetTag::kMain);

/// Header `K S A`, then K blocks of S comma-separated lines of A entries,
/// blocks separated by a blank line.
void write_loss_sequence(const LossSequence& losses, std::ostream& out);
LossSequence read_loss_sequence(std::istream& in);

inline constexpr const char* kEpisodeCsvHeader =
    "algo,seed,k,epoch,v_mixed,v_comparator,cum_regret,omd_term,optimism_term,estbias_term,max_bonus,mle_index";
inline constexpr const char* kSummaryCsvHeader =
    "algo,n_seeds,mean_cum_regret,se_cum_regret,mean_slope,se_slope,slope_fits";

void write_episode_csv(const RunResult& run, std::ostream& out);
void write_summary_csv(const std::vector<AlgoSummary>& summary, std::ostream& out);
std::string summary_row(const AlgoSummary& s);

/// Whole file as a string; throws ParseError naming the path when unreadable.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace lowrank
