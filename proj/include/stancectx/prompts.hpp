#pragma once

#include <string>
#include <vector>

#include "stancectx/corpus.hpp"
#include "stancectx/errors.hpp"

namespace stancectx {

// Prompt templates are pinned byte-for-byte; golden files under tests/golden
// guard them. Do not reflow or "fix" whitespace here without regenerating the
// goldens on purpose.

inline constexpr const char* kProfilePromptTemplate =
    "Analyze the following set of forum posts by the user and create a concise political "
    "profile summary. For this task:\n"
    "\n"
    "1. Identify any consistent political indicators in their posts (criticism of specific "
    "politicians/parties, stance on issues, etc.)\n"
    "2. Note recurring topics this user discusses\n"
    "3. Observe distinctive language patterns (formal/informal, emotional/detached, specific "
    "phrases)\n"
    "4. Identify who/what they consistently criticize or support\n"
    "5. Determine if there's sufficient evidence to classify them as LEFT, RIGHT, or UNKNOWN\n"
    "\n"
    "Format your response as a JSON object with these fields:\n"
    "\n"
    "{\n"
    "  \"username\": \"the username\",\n"
    "  \"political_leaning\": \"left/right/unknown\",\n"
    "  \"confidence\": \"high/medium/low\",\n"
    "  \"key_indicators\": [\"3-5 specific examples from posts that indicate political "
    "leaning\"],\n"
    "  \"recurring_topics\": [\"list frequent topics\"],\n"
    "  \"language_style\": \"brief description of their communication style\",\n"
    "  \"sentiment_patterns\": \"who/what they criticize or support\",\n"
    "  \"context_notes\": \"any additional relevant information\"\n"
    "}\n"
    "\n"
    "IMPORTANT:\n"
    "- Focus on clear patterns rather than isolated statements\n"
    "- Maintain objectivity and avoid overinterpreting ambiguous content\n"
    "- If there isn't sufficient evidence to determine orientation, mark as \"unknown\"\n"
    "- Ensure your response is a valid JSON object\n"
    "\n"
    "Posts:\n";

inline constexpr const char* kClassificationHeader =
    "Analyze the following discussion group post and classify the author's political "
    "orientation.\n"
    "\n";

inline constexpr const char* kContextBlockPrefix = "IMPORTANT CONTEXT ABOUT THIS USER:\n";

inline constexpr const char* kContextBlockSuffix =
    "\n"
    "\n"
    "Take the above user profile into account when analyzing this post. The profile "
    "reflects patterns from the user's previous posts, which may provide context for this "
    "specific post.\n"
    "\n";

inline constexpr const char* kResponseFormat =
    "Provide your response in this exact JSON format:\n"
    "\n"
    "{\n"
    "  \"orientation\": \"LEFT|RIGHT|UNKNOWN\",\n"
    "  \"explanation\": \"A detailed explanation of why you chose this classification based "
    "on the content\"\n"
    "}\n"
    "\n"
    "Post:\n";

inline constexpr const char* kReaskSuffix = "\nReturn only the JSON object.\n";

// Plain text with each quoted span pulled onto its own "> quoted: " line, in
// offset order, surrounding text untouched.
inline std::string render_post_body(const RawPost& post) {
    std::vector<QuotedSpan> spans = post.quoted_spans;
    std::sort(spans.begin(), spans.end(),
              [](const QuotedSpan& a, const QuotedSpan& b) { return a.begin < b.begin; });
    std::string out;
    out.reserve(post.text.size() + spans.size() * 12);
    std::size_t pos = 0;
    for (const auto& span : spans) {
        std::size_t begin = std::min(span.begin, post.text.size());
        std::size_t end = std::min(span.end, post.text.size());
        out.append(post.text, pos, begin - pos);
        if (!out.empty() && out.back() != '\n') out.push_back('\n');
        out += "> quoted: ";
        out.append(post.text, begin, end - begin);
        out.push_back('\n');
        pos = end;
    }
    out.append(post.text, pos, post.text.size() - pos);
    return out;
}

namespace detail {

inline void append_block(std::string& prompt, const std::string& body) {
    prompt += body;
    if (prompt.empty() || prompt.back() != '\n') prompt.push_back('\n');
}

}  // namespace detail

inline std::string build_profile_prompt(const std::vector<const RawPost*>& posts) {
    if (posts.empty()) throw UsageError("cannot build a profile prompt from zero posts");
    std::string prompt = kProfilePromptTemplate;
    int number = 1;
    for (const RawPost* post : posts) {
        prompt += "\nPost " + std::to_string(number++) + ":\n";
        detail::append_block(prompt, render_post_body(*post));
    }
    return prompt;
}

inline std::string build_profile_prompt(const std::vector<RawPost>& posts) {
    std::vector<const RawPost*> ptrs;
    ptrs.reserve(posts.size());
    for (const auto& p : posts) ptrs.push_back(&p);
    return build_profile_prompt(ptrs);
}

inline std::string build_baseline_prompt(const RawPost& post) {
    if (post.text.empty())
        throw UsageError("cannot classify post \"" + post.post_id + "\" with empty text");
    std::string prompt = kClassificationHeader;
    prompt += kResponseFormat;
    detail::append_block(prompt, render_post_body(post));
    return prompt;
}

// The caller supplies the profile's canonical JSON; validation belongs to the
// profile layer.
inline std::string build_context_prompt_json(const RawPost& post,
                                             const std::string& profile_json) {
    if (post.text.empty())
        throw UsageError("cannot classify post \"" + post.post_id + "\" with empty text");
    std::string prompt = kClassificationHeader;
    prompt += kContextBlockPrefix;
    prompt += profile_json;
    prompt += kContextBlockSuffix;
    prompt += kResponseFormat;
    detail::append_block(prompt, render_post_body(post));
    return prompt;
}

}  // namespace stancectx
