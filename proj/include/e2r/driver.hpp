#pragma once

#include <functional>
#include <vector>

#include "e2r/agent.hpp"
#include "e2r/photo_library.hpp"
#include "e2r/session.hpp"

namespace e2r {

struct DriverConfig {
  PromptConfig prompts;
  int history_turns = kDefaultHistoryTurns;
};

// Couples the pure state machine to an agent: after each external event the
// agent takes every turn that belongs to it.
class SessionDriver {
 public:
  SessionDriver(const PhotoLibrary& library, AgentGateway& agent, DriverConfig config = {});

  // Returns the applied events in order, starting with `event`, followed by
  // the AgentReplied events the agent produced. `state` is updated in place
  // only when every step succeeds.
  std::vector<SessionEvent> apply(SessionState& state, const SessionEvent& event);

  PromptSpec next_prompt(const SessionState& state) const;

 private:
  const PhotoLibrary& library_;
  AgentGateway& agent_;
  DriverConfig config_;
};

// Produces the user's reply for the current question.
using UserScript = std::function<std::string(const SessionState&)>;

// Deterministic stand-in participant for simulations and tests.
std::string scripted_reply(const SessionState& state);

struct SimulatedSession {
  SessionState state;
  std::vector<SessionEvent> events;  // every applied event, agent replies included
};

// Runs a whole session: calibration, then per photo ViewingDone with the given
// artifacts, narration and two question rounds.
SimulatedSession simulate_session(const PhotoLibrary& library, AgentGateway& agent, std::uint64_t seed,
                                  const std::function<ViewingArtifacts(const PhotoSlot&)>& viewing,
                                  const UserScript& user = scripted_reply, const DriverConfig& config = {});

}  // namespace e2r
