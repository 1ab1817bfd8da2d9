// Wire shapes received from the orchestrator. The console renders only what
// the server pushes; it never talks to the inference service.

export interface VisibleEntry {
  id: string;
  class: string;
  cells: number;
  bbox: [number, number, number, number];
  depth: number;
}

export interface FrameObservation {
  width: number;
  height: number;
  tick: number;
  pose: { room: string; viewpoint: string; heading: string; pitch: string };
  visible: VisibleEntry[];
  raster_rle: [number, number][];
}

export type ServerEvent =
  | { event: "frame"; observation: FrameObservation; snapshot?: boolean }
  | { event: "robot_dialog"; text: string }
  | { event: "highlight"; instance: string | null; duration_ms: number }
  | { event: "subgoal_complete"; index: number }
  | { event: "mission_complete"; tick: number }
  | { event: "turn_ended"; turn_index: number }
  | { event: "mic_open" };

export interface MissionInfo {
  mission_id: string;
  title: string;
  user_briefing: string;
  subgoals: { description: string }[];
  tags: string[];
}

export interface TranscriptLine {
  speaker: "user" | "robot";
  text: string;
}

export interface HighlightState {
  instance: string;
  durationMs: number;
  sequence: number; // bumps per highlight so repeated targets re-pulse
}

export interface ViewModel {
  briefing: string | null;
  title: string | null;
  subgoals: { description: string; done: boolean }[];
  transcript: TranscriptLine[];
  frame: FrameObservation | null;
  lastTick: number;
  droppedStaleFrames: number;
  micOpen: boolean;
  missionComplete: boolean;
  sessionEnded: boolean;
  ratingOpen: boolean;
  ratingSubmitted: boolean;
  highlight: HighlightState | null;
  turnsEnded: number;
}
