#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "heaven/types.hpp"

namespace heaven {

/// Tags treated as key tokens: the four noun tags.
inline bool is_noun_tag(std::string_view tag) {
    return tag == "NN" || tag == "NNS" || tag == "NNP" || tag == "NNPS";
}

inline std::vector<bool> key_mask_from_tags(const std::vector<std::string>& tags) {
    if (tags.empty()) throw Error(Errc::empty_input, "key_mask_from_tags: no tags");
    std::vector<bool> mask(tags.size());
    for (std::size_t i = 0; i < tags.size(); ++i) mask[i] = is_noun_tag(tags[i]);
    return mask;
}

// Fixed function-word stoplist, v1. Changing it changes heuristic masks and
// is a breaking change caught by the golden tests.
inline constexpr std::array<std::string_view, 154> kStoplistV1 = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
    "any", "are", "aren't", "as", "at", "be", "because", "been", "before", "being",
    "below", "between", "both", "but", "by", "can", "cannot", "could", "couldn't",
    "did", "didn't", "do", "does", "doesn't", "doing", "don't", "down", "during",
    "each", "few", "for", "from", "further", "had", "hadn't", "has", "hasn't",
    "have", "haven't", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "i", "if", "in", "into", "is", "isn't", "it", "its",
    "itself", "let's", "many", "may", "me", "might", "more", "most", "much",
    "must", "mustn't", "my", "myself", "no", "nor", "not", "of", "off", "on",
    "once", "only", "or", "other", "ought", "our", "ours", "ourselves", "out",
    "over", "own", "per", "same", "shall", "shan't", "she", "should", "shouldn't",
    "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through",
    "to", "too", "under", "until", "up", "upon", "us", "very", "was", "wasn't",
    "we", "were", "weren't", "what", "when", "where", "which", "while", "who",
    "whom", "whose", "why", "will", "with", "won't", "would", "wouldn't", "you",
    "your", "yours", "yourself", "yourselves", "yet",
};

namespace detail {

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline bool in_stoplist(std::string_view token) {
    const std::string lower = lowercase(token);
    return std::find(kStoplistV1.begin(), kStoplistV1.end(), lower) != kStoplistV1.end();
}

inline bool all_alpha(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isalpha(c) != 0; });
}

}  // namespace detail

/// Deterministic rule-based tagger, a stand-in for a real POS tagger when
/// the query file carries no precomputed tags. Rules, in order:
///   stoplist word -> X; non-alphabetic (punctuation, numbers) -> SYM;
///   capitalized at a non-initial position -> NNP; alphabetic ending in
///   "s" -> NNS; other alphabetic -> NN.
inline std::vector<std::string> heuristic_tag(const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw Error(Errc::empty_input, "heuristic_tag: no tokens");
    std::vector<std::string> tags;
    tags.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        if (tok.empty() || detail::in_stoplist(tok)) {
            tags.emplace_back("X");
        } else if (!detail::all_alpha(tok)) {
            tags.emplace_back("SYM");
        } else if (i > 0 && std::isupper(static_cast<unsigned char>(tok.front()))) {
            tags.emplace_back("NNP");
        } else if (tok.size() > 1 && tok.back() == 's') {
            tags.emplace_back("NNS");
        } else {
            tags.emplace_back("NN");
        }
    }
    return tags;
}

inline std::vector<bool> heuristic_key_mask(const std::vector<std::string>& tokens) {
    return key_mask_from_tags(heuristic_tag(tokens));
}

}  // namespace heaven
