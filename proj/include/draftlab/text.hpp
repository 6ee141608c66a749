#pragma once

#include <string>
#include <vector>

namespace draft::text {

// Character inventory: lowercase letters, space, apostrophe. Ids start at 1
// because id 0 is reserved for the CTC blank and never appears in a
// transcript.
inline constexpr int kBlankId = 0;

const std::string& alphabet();

// Ids including the blank, so logits for CTC are sized with this.
int vocab_size();

// Out-of-alphabet characters raise a tokenization error naming the character
// and its position.
std::vector<int> tokenize(const std::string& transcript);

// Inverse of tokenize; ids outside [1, alphabet size] raise a tokenization
// error (the blank is not a character).
std::string detokenize(const std::vector<int>& ids);

}  // namespace draft::text
