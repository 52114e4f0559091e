#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string_view>
#include <fstream>
#include <sstream>

#include "sptucker/errors.hpp"
#include "sptucker/tensor.hpp"

namespace sptucker {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_int(std::string_view tok, Index& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

bool parse_real(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

}  // namespace

SparseTensor ingest_tns(std::istream& in) {
  std::vector<Index> header_dims;
  std::vector<Index> flat;
  std::vector<double> values;
  std::size_t order = 0;
  std::string line;
  std::size_t lineno = 0;

  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    auto first = view.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    view.remove_prefix(first);
    if (view.front() == '#') {
      view.remove_prefix(1);
      auto toks = split_ws(view);
      if (!toks.empty() && toks[0] == "dims:") {
        header_dims.clear();
        for (std::size_t k = 1; k < toks.size(); ++k) {
          Index d = 0;
          if (!parse_int(toks[k], d) || d < 1) throw ParseError("bad dims header entry '" + std::string(toks[k]) + "'", lineno);
          header_dims.push_back(d);
        }
      }
      continue;
    }
    auto toks = split_ws(view);
    if (toks.size() < 3) throw ParseError("expected at least two coordinates and a value", lineno);
    if (order == 0) {
      order = toks.size() - 1;
    } else if (toks.size() - 1 != order) {
      throw ParseError("expected " + std::to_string(order) + " coordinates, found " + std::to_string(toks.size() - 1),
                       lineno);
    }
    for (std::size_t j = 0; j < order; ++j) {
      Index c = 0;
      if (!parse_int(toks[j], c)) throw ParseError("bad coordinate '" + std::string(toks[j]) + "'", lineno);
      if (c < 1) throw DomainError("line " + std::to_string(lineno) + ": coordinate " + std::to_string(c) + " < 1");
      flat.push_back(c - 1);
    }
    double v = 0.0;
    if (!parse_real(toks[order], v)) throw ParseError("bad value '" + std::string(toks[order]) + "'", lineno);
    if (!std::isfinite(v)) throw DomainError("line " + std::to_string(lineno) + ": non-finite value");
    values.push_back(v);
  }

  if (order == 0) {
    if (header_dims.size() < 2) throw ParseError("no elements and no dims header", lineno);
    return SparseTensor(header_dims, {}, {});
  }
  std::vector<Index> dims;
  if (!header_dims.empty()) {
    if (header_dims.size() != order) {
      throw ParseError("dims header has " + std::to_string(header_dims.size()) + " entries but data has order " +
                           std::to_string(order),
                       lineno);
    }
    dims = header_dims;
  } else {
    dims.assign(order, 1);
    for (std::size_t e = 0; e < values.size(); ++e) {
      for (std::size_t j = 0; j < order; ++j) dims[j] = std::max(dims[j], flat[e * order + j] + 1);
    }
  }
  return SparseTensor(std::move(dims), std::move(flat), std::move(values));
}

SparseTensor ingest_tns_string(const std::string& text) {
  std::istringstream in(text);
  return ingest_tns(in);
}

SparseTensor ingest_tns_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return ingest_tns(in);
  } catch (const ParseError& e) {
    throw ParseError(e.detail(), e.line(), path);
  }
}

void write_tns(std::ostream& out, const SparseTensor& t) {
  out << "# dims:";
  for (Index d : t.dims()) out << ' ' << d;
  out << '\n';
  out.precision(17);
  for (ElementId e = 0; e < t.nnz(); ++e) {
    for (Index c : t.coords(e)) out << c + 1 << ' ';
    out << t.value(e) << '\n';
  }
}

}  // namespace sptucker
