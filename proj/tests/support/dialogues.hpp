#pragma once

// Scripted dialogue fixtures shared by the unit tests and the acceptance suite.

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "lingo/session.hpp"

namespace lingo::testing {

// Replies with a fixed list of sentences, one per turn.
class ScriptedAgent : public Agent {
 public:
  ScriptedAgent(Vocabulary vocab, std::vector<std::string> lines);

  const Vocabulary& vocabulary() const override { return vocab_; }
  void begin_session(const WorldState&, const Scene&) override {}
  Utterance respond(const Utterance& teacher_utterance, Mode mode, Rng& rng) override;
  void observe_feedback(const Feedback&) override {}

 private:
  Vocabulary vocab_;
  std::deque<std::string> lines_;
};

struct DialogueLine {
  std::string teacher;
  std::string learner;
  std::string feedback;
  double reward;
};

// North avocado, west orange, east cucumber, south banana.
WorldState opening_world(const std::vector<std::string>& objects);
// The three-turn opening dialogue: a question answered with noise, a
// statement repeated with the wrong object, and a free statement.
std::vector<DialogueLine> opening_dialogue();

// First seed at or above `from` whose session reproduces the opening
// dialogue word for word, searching at most `budget` seeds.
std::optional<std::uint64_t> find_opening_seed(std::uint64_t from, std::uint64_t budget);

struct GrammarTally {
  std::size_t questions = 0, questions_ok = 0;
  std::size_t statements = 0, statements_ok = 0;
};

// Checks every (object, direction, template) sentence of the teacher against
// hand-built strings, and each statement against the judge.
GrammarTally grammar_tally(const std::vector<std::string>& objects);

}  // namespace lingo::testing
