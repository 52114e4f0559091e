#include <charconv>
#include <fstream>
#include <sstream>

#include "sptucker/errors.hpp"
#include "sptucker/schemes.hpp"

namespace sptucker {

void write_policy(std::ostream& out, const DistributionScheme& scheme) {
  out << "# scheme: " << to_string(scheme.kind) << " ranks: " << scheme.ranks << '\n';
  for (const auto& policy : scheme.policies) {
    if (!scheme.uni_policy()) out << "# mode: " << policy.mode + 1 << '\n';
    for (std::size_t e = 0; e < policy.assignment.size(); ++e) out << e << ' ' << policy.assignment[e] << '\n';
  }
}

void write_policy_file(const std::string& path, const DistributionScheme& scheme) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_policy(out, scheme);
  if (!out) throw IoError("write failed for " + path);
}

namespace {

bool parse_long(std::string_view tok, long long& v) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

}  // namespace

DistributionScheme load_external_policy(std::istream& in, const SparseTensor& t, int ranks) {
  if (ranks < 1) throw ConfigError("rank count must be at least 1");
  struct Section {
    int mode = Policy::kUniform;
    std::size_t header_line = 0;
    std::vector<int> ranks;
  };
  std::vector<Section> sections(1);
  std::string line;
  std::size_t lineno = 0;

  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first[0] == '#') {
      std::string key = first.size() > 1 ? first.substr(1) : std::string();
      if (key.empty()) ls >> key;
      if (key == "mode:") {
        long long m = 0;
        std::string tok;
        if (!(ls >> tok) || !parse_long(tok, m) || m < 1 || m > static_cast<long long>(t.order())) {
          throw ParseError("bad mode header", lineno);
        }
        if (sections.size() == 1 && sections[0].mode == Policy::kUniform && sections[0].ranks.empty()) {
          sections[0].mode = static_cast<int>(m - 1);
          sections[0].header_line = lineno;
        } else {
          sections.push_back(Section{static_cast<int>(m - 1), lineno, {}});
        }
      }
      continue;
    }
    std::vector<std::string> toks{first};
    for (std::string tok; ls >> tok;) toks.push_back(tok);
    long long rank = 0;
    auto& current = sections.back();
    if (toks.size() == 1) {
      if (!parse_long(toks[0], rank)) throw ParseError("bad rank '" + toks[0] + "'", lineno);
    } else if (toks.size() == 2) {
      long long id = 0;
      if (!parse_long(toks[0], id)) throw ParseError("bad element id '" + toks[0] + "'", lineno);
      if (id != static_cast<long long>(current.ranks.size())) {
        throw ParseError("element ids must appear in order; expected " + std::to_string(current.ranks.size()) +
                             ", found " + toks[0],
                         lineno);
      }
      if (!parse_long(toks[1], rank)) throw ParseError("bad rank '" + toks[1] + "'", lineno);
    } else {
      throw ParseError("expected 'rank' or 'elemId rank'", lineno);
    }
    if (rank < 0 || rank >= ranks) {
      throw DomainError("line " + std::to_string(lineno) + ": rank " + std::to_string(rank) + " outside [0, " +
                        std::to_string(ranks - 1) + "]");
    }
    current.ranks.push_back(static_cast<int>(rank));
  }

  const bool multi = sections.front().mode != Policy::kUniform;
  if (!multi && sections.size() > 1) throw ParseError("element lines before the first mode header", 1);
  if (multi &&sections.size() != t.order()) {
    throw DomainError("multi-policy file has " + std::to_string(sections.size()) + " sections, tensor order is " +
                      std::to_string(t.order()));
  }
  DistributionScheme scheme;
  scheme.kind = SchemeKind::kExternal;
  scheme.ranks = ranks;
  if (multi) scheme.policies.resize(t.order());
  std::vector<bool> seen(t.order(), false);
  for (auto& s : sections) {
    if (s.ranks.size() != t.nnz()) {
      throw DomainError("policy lists " + std::to_string(s.ranks.size()) + " elements, tensor has " +
                        std::to_string(t.nnz()));
    }
    Policy p{s.mode, ranks, std::move(s.ranks)};
    if (!multi) {
      scheme.policies.push_back(std::move(p));
      continue;
    }
    if (seen[static_cast<std::size_t>(s.mode)]) throw ParseError("duplicate mode section", s.header_line);
    seen[static_cast<std::size_t>(s.mode)] = true;
    scheme.policies[static_cast<std::size_t>(s.mode)] = std::move(p);
  }
  return scheme;
}

DistributionScheme load_external_policy_file(const std::string& path, const SparseTensor& t, int ranks) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return load_external_policy(in, t, ranks);
  } catch (const ParseError& e) {
    throw ParseError(e.detail(), e.line(), path);
  }
}

}  // namespace sptucker
