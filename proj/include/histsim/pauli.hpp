// Copyright 2026 The histsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Pauli-sum expressions such as "0.5*X0 + 0.25*Z0Z1".
//
//   expr := term (('+' | '-') term)*
//   term := float '*' word | word
//   word := (letter digits)+ | 'I'        letter in {I, X, Y, Z}
//
// Qubit 0 is the leftmost (slowest-varying) tensor factor.

#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "histsim/tensor.hpp"

namespace histsim {

class PauliParseError : public ValidationError {
 public:
  PauliParseError(const std::string& what, std::size_t offset)
      : ValidationError(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Site -> letter, identity letters dropped. Empty means the identity word.
using PauliWord = std::map<std::size_t, char>;

class PauliExpression {
 public:
  PauliExpression() = default;

  /// Merges duplicate words and drops zero coefficients.
  explicit PauliExpression(const std::vector<std::pair<double, PauliWord>>& terms) {
    for (const auto& [c, w] : terms) {
      PauliWord clean;
      for (const auto& [site, letter] : w) {
        if (letter != 'I') clean[site] = letter;
      }
      terms_[clean] += c;
    }
    std::erase_if(terms_, [](const auto& kv) { return kv.second == 0.0; });
  }

  const std::map<PauliWord, double>& terms() const { return terms_; }

  std::size_t min_qubits() const {
    std::size_t n = 1;
    for (const auto& [w, c] : terms_) {
      if (!w.empty()) n = std::max(n, w.rbegin()->first + 1);
    }
    return n;
  }

  static std::string word_string(const PauliWord& w) {
    if (w.empty()) return "I";
    std::string s;
    for (const auto& [site, letter] : w) s += letter + std::to_string(site);
    return s;
  }

  /// Canonical text, e.g. "2*Z0 - 0.5*X0X1". Round-trips through parse_pauli.
  std::string print() const {
    if (terms_.empty()) return "0*I";
    std::string out;
    bool first = true;
    for (const auto& [w, c] : terms_) {
      double mag = c;
      if (!first) {
        out += c < 0 ? " - " : " + ";
        mag = std::abs(c);
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", mag);
      out += buf;
      out += '*';
      out += word_string(w);
      first = false;
    }
    return out;
  }

  /// Dense matrix on `qubits` qubits, labelled Q.
  Operator matrix(std::size_t qubits) const {
    if (qubits < min_qubits()) throw ValidationError("expression addresses more qubits than declared");
    const auto d = static_cast<Eigen::Index>(std::size_t{1} << qubits);
    Matrix m = Matrix::Zero(d, d);
    for (const auto& [w, c] : terms_) {
      Matrix term = Matrix::Identity(1, 1);
      for (std::size_t q = 0; q < qubits; ++q) {
        const auto it = w.find(q);
        term = detail::kron_matrix(term, single(it == w.end() ? 'I' : it->second));
      }
      m += c * term;
    }
    return Operator({{"Q", static_cast<std::size_t>(d)}}, std::move(m));
  }

  friend bool operator==(const PauliExpression&, const PauliExpression&) = default;

  static Matrix single(char letter) {
    Matrix p(2, 2);
    const cplx i(0.0, 1.0);
    switch (letter) {
      case 'I': p << 1, 0, 0, 1; break;
      case 'X': p << 0, 1, 1, 0; break;
      case 'Y': p << 0, -i, i, 0; break;
      case 'Z': p << 1, 0, 0, -1; break;
      default: throw ValidationError(std::string("unknown Pauli letter '") + letter + "'");
    }
    return p;
  }

 private:
  std::map<PauliWord, double> terms_;
};

namespace detail {

class PauliParser {
 public:
  explicit PauliParser(std::string_view text) : s_(text) {}

  PauliExpression parse() {
    std::vector<std::pair<double, PauliWord>> terms;
    skip();
    if (pos_ == s_.size()) throw PauliParseError("empty expression", pos_);
    double sign = 1.0;
    while (true) {
      auto [c, w] = term();
      terms.emplace_back(sign * c, std::move(w));
      skip();
      if (pos_ == s_.size()) break;
      if (s_[pos_] == '+') {
        sign = 1.0;
      } else if (s_[pos_] == '-') {
        sign = -1.0;
      } else {
        throw PauliParseError(std::string("unexpected character '") + s_[pos_] + "'", pos_);
      }
      ++pos_;
      skip();
    }
    return PauliExpression(terms);
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  static bool is_letter(char c) { return c == 'I' || c == 'X' || c == 'Y' || c == 'Z'; }

  std::pair<double, PauliWord> term() {
    double coef = 1.0;
    if (pos_ < s_.size() && !is_letter(s_[pos_])) {
      const char* begin = s_.data() + pos_;
      const char* end = s_.data() + s_.size();
      if (*begin == '+') ++begin;  // from_chars rejects a leading '+'
      const auto res = std::from_chars(begin, end, coef);
      if (res.ec != std::errc()) throw PauliParseError("expected coefficient or Pauli word", pos_);
      pos_ = static_cast<std::size_t>(res.ptr - s_.data());
      skip();
      if (pos_ >= s_.size() || s_[pos_] != '*') throw PauliParseError("expected '*' after coefficient", pos_);
      ++pos_;
      skip();
    }
    return {coef, word()};
  }

  PauliWord word() {
    PauliWord w;
    if (pos_ >= s_.size() || !is_letter(s_[pos_])) throw PauliParseError("expected Pauli word", pos_);
    // A bare 'I' is the identity word.
    if (s_[pos_] == 'I' && (pos_ + 1 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])))) {
      ++pos_;
      return w;
    }
    while (pos_ < s_.size() && is_letter(s_[pos_])) {
      const char letter = s_[pos_];
      const std::size_t letter_pos = pos_++;
      const std::size_t digits = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (pos_ == digits) throw PauliParseError("expected site index after Pauli letter", pos_);
      std::size_t site = 0;
      std::from_chars(s_.data() + digits, s_.data() + pos_, site);
      if (w.contains(site)) {
        throw PauliParseError("site " + std::to_string(site) + " repeated in Pauli word", letter_pos);
      }
      w[site] = letter;
    }
    return w;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline PauliExpression parse_pauli(std::string_view text) { return detail::PauliParser(text).parse(); }

/// Parses and checks every site index against the declared qubit count.
inline PauliExpression parse_pauli(std::string_view text, std::size_t qubits) {
  auto e = detail::PauliParser(text).parse();
  // Out-of-range sites are reported at the first occurrence in the text.
  for (const auto& [w, c] : e.terms()) {
    for (const auto& [site, letter] : w) {
      if (site >= qubits) {
        const auto needle = std::string(1, letter) + std::to_string(site);
        const auto at = text.find(needle);
        throw PauliParseError("site " + std::to_string(site) + " out of range for " + std::to_string(qubits) +
                                  " qubit(s)",
                              at == std::string_view::npos ? 0 : at);
      }
    }
  }
  return e;
}

}  // namespace histsim
