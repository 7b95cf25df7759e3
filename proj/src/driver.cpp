#include "e2r/driver.hpp"

#include "e2r/error.hpp"
#include "e2r/hash.hpp"

namespace e2r {

SessionDriver::SessionDriver(const PhotoLibrary& library, AgentGateway& agent, DriverConfig config)
    : library_(library), agent_(agent), config_(config) {}

PromptSpec SessionDriver::next_prompt(const SessionState& state) const {
  const auto& slot = state.current_photo();
  const PhotoRecord* photo = library_.find(slot.photo_id);
  if (!photo) throw Error(ErrorCode::NotFound, "photo '" + slot.photo_id + "' not in library");
  if (state.phase == Phase::Narration) return build_narration_prompt(*photo);
  const auto& art = state.current_artifacts;
  auto prompt = build_question_prompt(*photo, art.rois, art.focus.value_or(0.0), state.round, config_.prompts);
  if (art.heatmap_path) {
    Attachment overlay;
    overlay.path = *art.heatmap_path;
    overlay.media_type = "image/png";
    std::error_code ec;
    overlay.present = std::filesystem::is_regular_file(overlay.path, ec);
    prompt.heatmap_overlay = overlay;
  }
  return prompt;
}

std::vector<SessionEvent> SessionDriver::apply(SessionState& state, const SessionEvent& event) {
  std::vector<SessionEvent> applied{event};
  SessionState next = step(state, event);
  while (agent_turn(next)) {
    auto req = make_request(next_prompt(next), next.transcript,
                            next.session_id + ":" + std::to_string(next.next_seq()), config_.history_turns);
    const auto reply = agent_.complete(req);
    SessionEvent agent_event;
    agent_event.kind = EventKind::AgentReplied;
    agent_event.text = reply.text;
    // Stamped with the triggering event time so replays are byte-identical.
    agent_event.t_us = event.t_us;
    next = step(next, agent_event);
    applied.push_back(std::move(agent_event));
  }
  state = std::move(next);
  return applied;
}

std::string scripted_reply(const SessionState& state) {
  static constexpr const char* kReplies[] = {
      "We had one just like that at home, my father bought it when I was small.",
      "I remember the whole family gathering around it in the evenings.",
      "It reminds me of the street where I grew up, everyone knew each other.",
      "My mother used to take us there during the festival.",
      "Those were hard times, but we were happy together.",
  };
  const auto h = fnv1a(state.current_photo().photo_id, state.rng_seed + static_cast<std::uint64_t>(state.round));
  return kReplies[h % std::size(kReplies)];
}

SimulatedSession simulate_session(const PhotoLibrary& library, AgentGateway& agent, std::uint64_t seed,
                                  const std::function<ViewingArtifacts(const PhotoSlot&)>& viewing,
                                  const UserScript& user, const DriverConfig& config) {
  SimulatedSession sim;
  sim.state = start_session(library.photos, seed, "sim-" + std::to_string(seed));
  SessionDriver driver(library, agent, config);
  std::int64_t clock = 1'000'000;
  auto push = [&](SessionEvent e) {
    e.t_us = clock;
    clock += 1'000'000;
    auto applied = driver.apply(sim.state, e);
    sim.events.insert(sim.events.end(), applied.begin(), applied.end());
  };
  push({EventKind::CalibrationDone, {}, 0, {}});
  while (sim.state.phase != Phase::Completed) {
    if (sim.state.phase == Phase::Viewing) {
      SessionEvent e{EventKind::ViewingDone, {}, 0, viewing(sim.state.current_photo())};
      push(std::move(e));
    } else if (sim.state.phase == Phase::QuestionRound && sim.state.awaiting == Speaker::User) {
      push({EventKind::UserReplied, user(sim.state), 0, {}});
    } else {
      throw Error(ErrorCode::IllegalTransition, "simulation stalled in phase " + std::string(to_string(sim.state.phase)));
    }
  }
  return sim;
}

}  // namespace e2r
