#include "lowrank/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lowrank {

using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

template <typename Row>
void append_row(std::string& out, const Row& row) {
  out += '[';
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (j) out += ", ";
    out += format_double(row(j));
  }
  out += ']';
}

double json_number(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_number()) {
    throw ParseError(std::string("MDP document: missing numeric field '") + key + "'");
  }
  return doc.at(key).get<double>();
}

int json_int(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_number_integer()) {
    throw ParseError(std::string("MDP document: missing integer field '") + key + "'");
  }
  return doc.at(key).get<int>();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

int parse_int(const std::string& field, const std::string& context) {
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(field, &used);
  } catch (const std::exception&) {
    throw ParseError(context + ": expected an integer, got '" + field + "'");
  }
  if (used != field.size()) throw ParseError(context + ": expected an integer, got '" + field + "'");
  return value;
}

double parse_real(const std::string& field, const std::string& context) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(field, &used);
  } catch (const std::exception&) {
    throw ParseError(context + ": expected a number, got '" + field + "'");
  }
  if (used != field.size()) throw ParseError(context + ": expected a number, got '" + field + "'");
  return value;
}

}  // namespace

std::string mdp_to_json(const LowRankMdp& mdp) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  std::string out = "{\n";
  out += "  \"n_states\": " + std::to_string(S) + ",\n";
  out += "  \"n_actions\": " + std::to_string(A) + ",\n";
  out += "  \"dim\": " + std::to_string(mdp.dim()) + ",\n";
  out += "  \"gamma\": " + format_double(mdp.gamma()) + ",\n";
  out += "  \"init_dist\": ";
  append_row(out, mdp.init_dist());
  out += ",\n  \"phi\": [\n";
  for (int s = 0; s < S; ++s) {
    out += "    [";
    for (int a = 0; a < A; ++a) {
      if (a) out += ", ";
      append_row(out, mdp.phi_row(s, a));
    }
    out += s + 1 < S ? "],\n" : "]\n";
  }
  out += "  ],\n  \"mu\": [\n";
  for (int s = 0; s < S; ++s) {
    out += "    ";
    append_row(out, mdp.mu().row(s));
    out += s + 1 < S ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

LowRankMdp mdp_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("MDP document: ") + e.what());
  }
  const int S = json_int(doc, "n_states");
  const int A = json_int(doc, "n_actions");
  const int d = json_int(doc, "dim");
  const double gamma = json_number(doc, "gamma");
  if (S <= 0 || A <= 0 || d <= 0) throw ParseError("MDP document: sizes must be positive");
  try {
    const auto init = doc.at("init_dist").get<std::vector<double>>();
    const auto phi = doc.at("phi").get<std::vector<std::vector<std::vector<double>>>>();
    const auto mu = doc.at("mu").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(init.size()) != S) throw ParseError("MDP document: init_dist must have n_states entries");
    if (static_cast<int>(phi.size()) != S) throw ParseError("MDP document: phi must have n_states blocks");
    if (static_cast<int>(mu.size()) != S) throw ParseError("MDP document: mu must have n_states rows");
    Vector init_v(S);
    Matrix phi_m(static_cast<Eigen::Index>(S) * A, d);
    Matrix mu_m(S, d);
    for (int s = 0; s < S; ++s) {
      init_v(s) = init[s];
      if (static_cast<int>(phi[s].size()) != A) throw ParseError("MDP document: phi block must have n_actions rows");
      for (int a = 0; a < A; ++a) {
        if (static_cast<int>(phi[s][a].size()) != d) throw ParseError("MDP document: phi row must have dim entries");
        for (int j = 0; j < d; ++j) phi_m(static_cast<Eigen::Index>(s) * A + a, j) = phi[s][a][j];
      }
      if (static_cast<int>(mu[s].size()) != d) throw ParseError("MDP document: mu row must have dim entries");
      for (int j = 0; j < d; ++j) mu_m(s, j) = mu[s][j];
    }
    return LowRankMdp(S, A, d, gamma, std::move(init_v), std::move(phi_m), std::move(mu_m));
  } catch (const json::exception& e) {
    throw ParseError(std::string("MDP document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("MDP document: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void save_mdp(const LowRankMdp& mdp, const std::filesystem::path& path) { write_file(path, mdp_to_json(mdp)); }

LowRankMdp load_mdp(const std::filesystem::path& path) {
  try {
    return mdp_from_json(read_file(path));
  } catch (const ParseError& e) {
    const std::string what = e.what();
    if (what.find(path.string()) != std::string::npos) throw;
    throw ParseError(path.string() + ": " + what);
  }
}

void write_dataset(const Dataset& data, std::ostream& out) {
  for (const auto& t : data.tuples()) out << t.s << ',' << t.a << ',' << t.s_next << '\n';
}

Dataset read_dataset(std::istream& in, int n_states, int n_actions, DatasetTag tag) {
  Dataset data(n_states, n_actions, tag);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = "dataset line " + std::to_string(line_no);
    const auto fields = split(line, ',');
    if (fields.size() != 3) throw ParseError(ctx + ": expected s,a,s_next");
    const int s = parse_int(fields[0], ctx);
    const int a = parse_int(fields[1], ctx);
    const int s_next = parse_int(fields[2], ctx);
    if (s < 0 || s >= n_states || s_next < 0 || s_next >= n_states || a < 0 || a >= n_actions) {
      throw ParseError(ctx + ": index out of range");
    }
    data.append(s, a, s_next);
  }
  return data;
}

void write_loss_sequence(const LossSequence& losses, std::ostream& out) {
  const int S = losses.tables().front().n_states();
  const int A = losses.tables().front().n_actions();
  out << losses.size() << ' ' << S << ' ' << A << '\n';
  for (std::size_t k = 0; k < losses.size(); ++k) {
    const Matrix& m = losses[k].values();
    out << '\n';
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) out << (a ? "," : "") << format_double(m(s, a));
      out << '\n';
    }
  }
}

LossSequence read_loss_sequence(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("loss sequence: empty input");
  std::istringstream header(line);
  int K = 0, S = 0, A = 0;
  if (!(header >> K >> S >> A) || K < 1 || S < 1 || A < 1) {
    throw ParseError("loss sequence: header must be 'K S A' with positive entries");
  }
  std::vector<LossFunction> tables;
  std::vector<std::uint32_t> index;
  tables.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    Matrix m(S, A);
    int row = 0;
    while (row < S) {
      if (!std::getline(in, line)) throw ParseError("loss sequence: truncated at block " + std::to_string(k));
      if (line.empty()) continue;
      const std::string ctx = "loss sequence block " + std::to_string(k) + " row " + std::to_string(row);
      const auto fields = split(line, ',');
      if (static_cast<int>(fields.size()) != A) throw ParseError(ctx + ": expected " + std::to_string(A) + " entries");
      for (int a = 0; a < A; ++a) m(row, a) = parse_real(fields[a], ctx);
      ++row;
    }
    // Reuse an identical earlier table so consumers can cache per-table work.
    std::size_t found = tables.size();
    if (!tables.empty() && tables.back().values() == m) found = tables.size() - 1;
    if (found == tables.size()) {
      try {
        tables.emplace_back(m);
      } catch (const std::invalid_argument& e) {
        throw ParseError("loss sequence block " + std::to_string(k) + ": " + e.what());
      }
    }
    index.push_back(static_cast<std::uint32_t>(found));
  }
  return LossSequence("file", 0, std::move(tables), std::move(index));
}

void write_episode_csv(const RunResult& run, std::ostream& out) {
  out << kEpisodeCsvHeader << '\n';
  const std::string algo = algo_name(run.algo);
  for (const auto& e : run.episodes) {
    out << algo << ',' << run.seed << ',' << e.k << ',' << e.epoch << ',' << format_double(e.v_mixed) << ','
        << format_double(e.v_comparator) << ',' << format_double(e.cum_regret) << ','
        << format_double(e.omd_term) << ',' << format_double(e.optimism_term) << ','
        << format_double(e.estbias_term) << ',' << format_double(e.max_bonus) << ',' << e.mle_index << '\n';
  }
}

std::string summary_row(const AlgoSummary& s) {
  return algo_name(s.algo) + ',' + std::to_string(s.n_seeds) + ',' + format_double(s.mean_cum_regret) + ',' +
         format_double(s.se_cum_regret) + ',' + format_double(s.mean_slope) + ',' + format_double(s.se_slope) +
         ',' + std::to_string(s.slope_fits);
}

void write_summary_csv(const std::vector<AlgoSummary>& summary, std::ostream& out) {
  out << kSummaryCsvHeader << '\n';
  for (const auto& s : summary) out << summary_row(s) << '\n';
}

}  // namespace lowrank
