#include <algorithm>
#include <cctype>
#include <random>

#include "doctest.h"
#include "saot/extraction.hpp"

using namespace saot;
using namespace saot::extraction;

namespace {

struct LabeledCase {
    const char* text;
    std::optional<PolarityLabel> expected;
};

// Hand-labeled under the default policy (LastMention, case-insensitive,
// canonical keywords) before the extractor was written.
const LabeledCase kCorpus[] = {
    {"The sentiment is positive.", PolarityLabel::Positive},
    {"Not negative; overall positive.", PolarityLabel::Positive},
    {"NEGATIVE", PolarityLabel::Negative},
    {"I would say neutral, leaning positive.", PolarityLabel::Positive},
    {"positive at first glance, but ultimately negative.",
     PolarityLabel::Negative},
    {"The polarity is neutral.", PolarityLabel::Neutral},
    {"", std::nullopt},
    {"No opinion about the food is expressed.", std::nullopt},
    {"Positive. The staff was friendly and attentive.",
     PolarityLabel::Positive},
    {"The answer is Negative, not neutral.", PolarityLabel::Neutral},
    {"Overall the review reads as POSITIVE.", PolarityLabel::Positive},
    {"neutral", PolarityLabel::Neutral},
    {"The customer seems satisfied, so I would call this positive overall.",
     PolarityLabel::Positive},
    {"Though the word negative appears here, the tone is positive.",
     PolarityLabel::Positive},
    {"polarity: negative", PolarityLabel::Negative},
    {"It is neither positive nor negative; it is neutral.",
     PolarityLabel::Neutral},
    {"The sentiment toward the staff is negative.", PolarityLabel::Negative},
    {"Mixed feelings, but the final answer is: neutral",
     PolarityLabel::Neutral},
    {"The review is **negative**.", PolarityLabel::Negative},
    {"Final verdict: neutral, since no explicit opinion about the laptop "
     "itself is given.",
     PolarityLabel::Neutral},
};

std::string uppercased(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
        return static_cast<char>(std::toupper(c));
    });
    return s;
}

// Random completion-like text that may embed keywords.
std::string random_text(std::mt19937& rng) {
    static const char* fragments[] = {
        "good",    "bad",     "positive", "negative", "neutral",  "food",
        "service", "overall", "the",      "answer",   "is",       "leaning",
        "maybe",   "!!",      "A+",       "verdict:", "restated", "tone",
    };
    std::uniform_int_distribution<int> count(0, 12);
    std::uniform_int_distribution<int> pick(0, std::size(fragments) - 1);
    std::uniform_int_distribution<int> upper(0, 3);
    std::string out;
    int n = count(rng);
    for (int i = 0; i < n; ++i) {
        std::string word = fragments[pick(rng)];
        if (upper(rng) == 0) word = uppercased(word);
        if (!out.empty()) out += " ";
        out += word;
    }
    return out;
}

// Letters that cannot occur in any default keyword.
std::string keyword_free_suffix(std::mt19937& rng) {
    static const char alphabet[] = "qwxzjkbfhm .,!;";
    std::uniform_int_distribution<int> len(0, 20);
    std::uniform_int_distribution<int> pick(0, std::size(alphabet) - 2);
    std::string out;
    int n = len(rng);
    for (int i = 0; i < n; ++i) out.push_back(alphabet[pick(rng)]);
    return out;
}

}  // namespace

TEST_CASE("extraction: hand-labeled corpus classifies exactly") {
    ExtractionPolicy policy;
    int matched = 0;
    for (const LabeledCase& c : kCorpus) {
        auto got = extract_polarity(c.text, policy);
        CHECK_MESSAGE(got == c.expected, "text: ", c.text);
        if (got == c.expected) ++matched;
    }
    CHECK(matched == 20);
}

TEST_CASE("extraction: stated-rule examples") {
    ExtractionPolicy policy;
    CHECK(extract_polarity("The sentiment is positive.", policy) ==
          PolarityLabel::Positive);
    CHECK(extract_polarity("Not negative; overall positive.", policy) ==
          PolarityLabel::Positive);
    CHECK(extract_polarity("", policy) == std::nullopt);
}

TEST_CASE("extraction: first-mention rule") {
    ExtractionPolicy policy;
    policy.occurrence = OccurrenceRule::FirstMention;
    CHECK(extract_polarity("positive at first, ultimately negative", policy) ==
          PolarityLabel::Positive);
}

TEST_CASE("extraction: same-offset overlap resolves by label order") {
    ExtractionPolicy policy;
    policy.keywords[0] = {"bad"};     // negative
    policy.keywords[1] = {"badly"};   // neutral
    policy.keywords[2] = {"superb"};  // positive
    // "badly" matches both keywords at the same offset; Negative is lower in
    // the fixed order.
    CHECK(extract_polarity("it went badly", policy) == PolarityLabel::Negative);
    CHECK(extract_polarity("badly", policy) == PolarityLabel::Negative);
}

TEST_CASE("extraction: overlapping keyword sets are rejected") {
    ExtractionPolicy policy;
    policy.keywords[0].push_back("ok");
    policy.keywords[2].push_back("OK");  // case-insensitive duplicate
    CHECK_THROWS_AS(policy.validate(), Error);
    CHECK_THROWS_AS(extract_polarity("ok", policy), Error);
}

TEST_CASE("extraction: resolve_unparseable per fallback") {
    ExtractionPolicy policy;
    policy.fallback = UnparseableFallback::AssignNeutral;
    CHECK(resolve_unparseable(policy) == PolarityLabel::Neutral);
    policy.fallback = UnparseableFallback::CountAsWrong;
    CHECK(resolve_unparseable(policy) == std::nullopt);
}

TEST_CASE("extraction properties: idempotence, case, keyword-free suffix") {
    ExtractionPolicy policy;
    std::mt19937 rng(424242);
    for (int i = 0; i < 1000; ++i) {
        std::string text = random_text(rng);

        auto label = extract_polarity(text, policy);
        if (label) {
            // extracting from the canonical label word returns the label
            CHECK(extract_polarity(to_string(*label), policy) == label);
        }

        CHECK(extract_polarity(uppercased(text), policy) == label);

        CHECK(extract_polarity(text + keyword_free_suffix(rng), policy) ==
              label);
    }
}
