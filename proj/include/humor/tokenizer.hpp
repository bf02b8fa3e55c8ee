#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace humor::tokenizer {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr int kReservedIds = 4;

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kClsToken = "<cls>";
inline constexpr const char* kSepToken = "<sep>";

// Word-level vocabulary with dense ids. Ids 0-3 are reserved; content
// tokens follow in frequency order (ties broken lexicographically).
// Immutable once built; encode/decode are pure.
struct Vocabulary {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;
  int max_size = 0;
  int min_freq = 1;

  int size() const { return static_cast<int>(id_to_token.size()); }
  int id_of(std::string_view token) const;
  const std::string& token_of(int id) const;
};

// Lowercased whitespace-and-punctuation tokenization: ASCII alphanumerics
// (lowercased) and non-ASCII bytes form tokens; everything else separates.
std::vector<std::string> tokenize(std::string_view text);

Vocabulary build_vocab(const std::vector<std::string>& texts, int max_size,
                       int min_freq);

struct TokenSequence {
  std::vector<int> ids;                   // length == max_seq_len
  std::vector<std::uint8_t> attention_mask;  // 1 where ids[i] != PAD

  int length() const { return static_cast<int>(ids.size()); }
  int real_token_count() const;
};

// [CLS] + content (UNK for out-of-vocabulary, head-truncated to
// max_seq_len-2) + [SEP], padded to exactly max_seq_len.
TokenSequence encode(std::string_view text, const Vocabulary& vocab,
                     int max_seq_len = 128);

// Inverse of encode up to lowercasing, OOV -> <unk>, and truncation.
// Special tokens are stripped; tokens are joined with single spaces.
std::string decode(const TokenSequence& seq, const Vocabulary& vocab);

void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

// Digest over the ordered token list; used to pair checkpoints with the
// vocabulary they were trained with.
std::string vocab_digest(const Vocabulary& vocab);

}  // namespace humor::tokenizer
