// Pure view-model reducer. Server events are the only source of truth for
// world state; replaying the same stream always reproduces the same model.

import type {
  MissionInfo,
  ServerEvent,
  TranscriptLine,
  ViewModel,
} from "./types.js";

// Verbatim wording of the end-of-session rating question.
export const RATING_PROMPT = "How would you rate your interaction with the robot?";

export function initialViewModel(mission: MissionInfo): ViewModel {
  return {
    briefing: mission.user_briefing,
    title: mission.title,
    subgoals: mission.subgoals.map((sg) => ({
      description: sg.description,
      done: false,
    })),
    transcript: [],
    frame: null,
    lastTick: -1,
    droppedStaleFrames: 0,
    micOpen: false,
    missionComplete: false,
    sessionEnded: false,
    ratingOpen: false,
    ratingSubmitted: false,
    highlight: null,
    turnsEnded: 0,
  };
}

export function applyEvent(vm: ViewModel, event: ServerEvent): ViewModel {
  // any event other than mic_open means the robot is still busy
  const next: ViewModel = { ...vm, micOpen: false };
  switch (event.event) {
    case "frame": {
      if (event.observation.tick < vm.lastTick) {
        return { ...next, droppedStaleFrames: vm.droppedStaleFrames + 1 };
      }
      return {
        ...next,
        frame: event.observation,
        lastTick: event.observation.tick,
      };
    }
    case "robot_dialog":
      return {
        ...next,
        transcript: [...vm.transcript, { speaker: "robot", text: event.text }],
      };
    case "highlight": {
      if (event.instance === null) return next;
      const sequence = (vm.highlight?.sequence ?? 0) + 1;
      return {
        ...next,
        highlight: {
          instance: event.instance,
          durationMs: event.duration_ms,
          sequence,
        },
      };
    }
    case "subgoal_complete": {
      const subgoals = vm.subgoals.map((sg, i) =>
        i === event.index ? { ...sg, done: true } : sg,
      );
      return { ...next, subgoals };
    }
    case "mission_complete":
      return { ...next, missionComplete: true, ratingOpen: true };
    case "turn_ended":
      return { ...next, turnsEnded: vm.turnsEnded + 1 };
    case "mic_open":
      return { ...next, micOpen: true };
    default:
      return next;
  }
}

export function applyStream(vm: ViewModel, events: ServerEvent[]): ViewModel {
  return events.reduce(applyEvent, vm);
}

// local transitions driven by the operator, not the server ------------------

export function localUtterance(vm: ViewModel, text: string): ViewModel {
  const line: TranscriptLine = { speaker: "user", text };
  return { ...vm, transcript: [...vm.transcript, line], micOpen: false };
}

export function userEndedSession(vm: ViewModel): ViewModel {
  return { ...vm, sessionEnded: true, ratingOpen: true, micOpen: false };
}

export function ratingSubmitted(vm: ViewModel): ViewModel {
  return { ...vm, ratingOpen: false, ratingSubmitted: true };
}

// the instruction box is usable exactly when the mic is open
export function inputEnabled(vm: ViewModel): boolean {
  return vm.micOpen && !vm.missionComplete && !vm.sessionEnded;
}
