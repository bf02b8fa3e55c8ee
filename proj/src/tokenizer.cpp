#include "humor/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "humor/manifest.hpp"

namespace humor::tokenizer {

namespace {

bool is_token_byte(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

std::vector<std::string> reserved_tokens() {
  return {kPadToken, kUnkToken, kClsToken, kSepToken};
}

}  // namespace

int Vocabulary::id_of(std::string_view token) const {
  auto it = token_to_id.find(std::string(token));
  return it == token_to_id.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(size()));
  }
  return id_to_token[static_cast<std::size_t>(id)];
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary build_vocab(const std::vector<std::string>& texts, int max_size,
                       int min_freq) {
  if (max_size < kReservedIds + 1) {
    throw std::invalid_argument("vocabulary max_size must be at least " +
                                std::to_string(kReservedIds + 1) + ", got " +
                                std::to_string(max_size));
  }
  if (texts.empty()) {
    throw std::invalid_argument("build_vocab requires a non-empty text list");
  }
  // std::map orders ties lexicographically without a second sort key pass.
  std::map<std::string, std::int64_t> freq;
  for (const std::string& text : texts) {
    for (std::string& tok : tokenize(text)) ++freq[std::move(tok)];
  }

  std::vector<std::pair<std::string, std::int64_t>> ranked;
  ranked.reserve(freq.size());
  for (auto& [tok, n] : freq) {
    if (n >= min_freq) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  vocab.max_size = max_size;
  vocab.min_freq = min_freq;
  vocab.id_to_token = reserved_tokens();
  const std::size_t capacity = static_cast<std::size_t>(max_size);
  for (auto& [tok, n] : ranked) {
    if (vocab.id_to_token.size() >= capacity) break;
    vocab.id_to_token.push_back(tok);
  }
  for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
    vocab.token_to_id.emplace(vocab.id_to_token[i], static_cast<int>(i));
  }
  return vocab;
}

int TokenSequence::real_token_count() const {
  int n = 0;
  for (std::uint8_t m : attention_mask) n += m;
  return n;
}

TokenSequence encode(std::string_view text, const Vocabulary& vocab,
                     int max_seq_len) {
  if (max_seq_len < 2) {
    throw std::invalid_argument("max_seq_len must be at least 2, got " +
                                std::to_string(max_seq_len));
  }
  const std::vector<std::string> tokens = tokenize(text);
  const std::size_t budget = static_cast<std::size_t>(max_seq_len - 2);
  const std::size_t kept = std::min(tokens.size(), budget);

  TokenSequence seq;
  seq.ids.reserve(static_cast<std::size_t>(max_seq_len));
  seq.ids.push_back(kClsId);
  for (std::size_t i = 0; i < kept; ++i) seq.ids.push_back(vocab.id_of(tokens[i]));
  seq.ids.push_back(kSepId);
  seq.attention_mask.assign(seq.ids.size(), 1);
  seq.ids.resize(static_cast<std::size_t>(max_seq_len), kPadId);
  seq.attention_mask.resize(static_cast<std::size_t>(max_seq_len), 0);
  return seq;
}

std::string decode(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (int id : seq.ids) {
    const std::string& tok = vocab.token_of(id);
    if (id == kPadId || id == kClsId || id == kSepId) continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
  out << "# vocabulary: one token per line; id = line index (comments excluded) + "
      << kReservedIds << "\n";
  out << "# ids 0-" << kReservedIds - 1 << " are reserved: " << kPadToken << " "
      << kUnkToken << " " << kClsToken << " " << kSepToken << "\n";
  out << "# max_size=" << vocab.max_size << " min_freq=" << vocab.min_freq << "\n";
  for (int id = kReservedIds; id < vocab.size(); ++id) {
    out << vocab.id_to_token[static_cast<std::size_t>(id)] << "\n";
  }
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary: " + path);
  Vocabulary vocab;
  vocab.id_to_token = reserved_tokens();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto ms = line.find("max_size=");
      if (ms != std::string::npos) vocab.max_size = std::stoi(line.substr(ms + 9));
      const auto mf = line.find("min_freq=");
      if (mf != std::string::npos) vocab.min_freq = std::stoi(line.substr(mf + 9));
      continue;
    }
    vocab.id_to_token.push_back(line);
  }
  if (vocab.max_size == 0) vocab.max_size = vocab.size();
  for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
    vocab.token_to_id.emplace(vocab.id_to_token[i], static_cast<int>(i));
  }
  return vocab;
}

std::string vocab_digest(const Vocabulary& vocab) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string& tok : vocab.id_to_token) {
    h = fnv1a64(tok.data(), tok.size(), h);
    h = fnv1a64("\n", 1, h);
  }
  return digest_hex(h);
}

}  // namespace humor::tokenizer
