#pragma once

// Texts quoted verbatim from the source material, shared by several tests.

namespace aeslab::testing {

inline constexpr const char* kSampleEssay =
    "Dear local Newspaper @CAPS1 a take all your computer and given to the people around the world for the can "
    "stay in their houses chating with their family and friend. Computers help people around the world to connect "
    "with other people computer help kids do their homework and look up staff that happen around the world.";

inline constexpr const char* kSampleEssayFirstSentence =
    "Dear local Newspaper @CAPS1 a take all your computer and given to the people around the world for the can "
    "stay in their houses chating with their family and friend.";

inline constexpr const char* kSet1Prompt =
    "Write a letter to your local newspaper in which you state your opinion on the effects computers have on "
    "people. Persuade the readers to agree with you.";

inline constexpr const char* kRstRaw =
    "Defense intellectuals have complained for years that the Pentagon cannot determine priorities because it has "
    "no strategy.";

inline constexpr const char* kRstSegmented =
    "Defense intellectuals have complained for years\n"
    "that the Pentagon cannot determine priorities\n"
    "because it has no strategy.\n";

inline constexpr const char* kSet8Prompt =
    "We all understand the benefits of laughter. For example, someone once said, \xE2\x80\x9CLaughter is the shortest "
    "distance between two people.\xE2\x80\x9D Many other people believe that laughter is an important part of any "
    "relationship. Tell a true story in which laughter was one element or part.";

// Assembled-context illustrations, markers written as in the source.
inline constexpr const char* kPromptLayout =
    "[PROMPT] We all understand the benefits of laughter. For example, someone once said, \xE2\x80\x9CLaughter is the "
    "shortest distance between two people.\xE2\x80\x9D Many other people believe that laughter is an important part of "
    "any relationship. Tell a true story in which laughter was one element or part. [ESSAY] Dear local Newspaper "
    "@CAPS1 a take all your computer and given to the people around the world for the can stay in their houses "
    "chating with their family and friend. Computers help people around the world to connect with other people "
    "computer help kids do their homework and look up staff that happen around the world.";

inline constexpr const char* kEduLayout =
    "[EDU] Dear local Newspaper @CAPS1 a take all your computer [EDU] and given to the people around the world [EDU] "
    "for the can stay in their houses [EDU] chating with their family and friend. [EDU] Computers help people around "
    "the world to connect with other people computer help kids do their homework [EDU] and look up staff [EDU] that "
    "happen around the world.";

inline constexpr const char* kAcLayout =
    "[PROMPT] Write a letter to your local newspaper in which you state your opinion on the effects computers have on "
    "people. Persuade the readers to agree with you. [AC] Dear local Newspaper @CAPS1 a take all your computer and "
    "given to the people around the world for the can stay in their houses chating with their family and friend. [AC] "
    "Computers help people around the world to connect with other people computer help kids do their homework and "
    "look up staff that happen around the world.";

// The EDU and AC units of the sample essay as laid out above.
inline const char* const kSampleEdus[] = {
    "Dear local Newspaper @CAPS1 a take all your computer",
    "and given to the people around the world",
    "for the can stay in their houses",
    "chating with their family and friend.",
    "Computers help people around the world to connect with other people computer help kids do their homework",
    "and look up staff",
    "that happen around the world."};

inline const char* const kSampleAcs[] = {
    "Dear local Newspaper @CAPS1 a take all your computer and given to the people around the world for the can stay "
    "in their houses chating with their family and friend.",
    "Computers help people around the world to connect with other people computer help kids do their homework and "
    "look up staff that happen around the world."};

}  // namespace aeslab::testing
