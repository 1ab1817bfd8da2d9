// Wires the view model, renderer, and API together for the play console.

import { OrchestratorApi } from "./api.js";
import { FrameRenderer } from "./renderer.js";
import type { MissionInfo, ServerEvent, ViewModel } from "./types.js";
import {
  RATING_PROMPT,
  applyEvent,
  initialViewModel,
  inputEnabled,
  localUtterance,
  ratingSubmitted,
  userEndedSession,
} from "./viewModel.js";

const api = new OrchestratorApi("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

let vm: ViewModel | null = null;
let sessionId: string | null = null;
let renderer: FrameRenderer | null = null;

function render() {
  if (!vm) return;
  el("briefing-title").textContent = vm.title ?? "";
  el("briefing-text").textContent = vm.briefing ?? "";
  const list = el("subgoals");
  list.replaceChildren();
  vm.subgoals.forEach((sg) => {
    const item = document.createElement("li");
    item.textContent = sg.description;
    item.className = sg.done ? "subgoal done" : "subgoal";
    list.append(item);
  });

  const transcript = el("transcript");
  transcript.replaceChildren();
  vm.transcript.forEach((line) => {
    const row = document.createElement("div");
    row.className = `line ${line.speaker}`;
    row.textContent = `${line.speaker === "user" ? "you" : "robot"}: ${line.text}`;
    transcript.append(row);
  });
  transcript.scrollTop = transcript.scrollHeight;

  const input = el<HTMLInputElement>("utterance");
  const send = el<HTMLButtonElement>("send");
  const enabled = inputEnabled(vm);
  input.disabled = !enabled;
  send.disabled = !enabled;
  el("status").textContent = vm.missionComplete
    ? "mission complete!"
    : vm.sessionEnded
      ? "session ended"
      : enabled
        ? "your move"
        : "robot is working…";

  const rating = el("rating-dialog");
  rating.style.display = vm.ratingOpen && !vm.ratingSubmitted ? "block" : "none";
  el("rating-banner").style.display = vm.ratingSubmitted ? "block" : "none";

  if (renderer && vm.frame) renderer.setFrame(vm.frame);
  if (renderer && vm.highlight) renderer.flash(vm.highlight);
}

function handleEvent(event: ServerEvent) {
  if (!vm) return;
  vm = applyEvent(vm, event);
  render();
}

async function startMission(mission: MissionInfo) {
  vm = initialViewModel(mission);
  renderer = renderer ?? new FrameRenderer(
    el<HTMLCanvasElement>("frame"), el("legend"));
  render();
  const created = await api.createSession(mission.mission_id);
  sessionId = created.session_id;
  el("picker").style.display = "none";
  el("console").style.display = "grid";
  void api.streamEvents(sessionId, handleEvent).catch((err) => {
    el("status").textContent = `stream closed: ${err.message}`;
  });
}

async function boot() {
  el("rating-prompt").textContent = RATING_PROMPT;
  const missions = await api.missions();
  const picker = el("mission-list");
  missions.forEach((mission) => {
    const button = document.createElement("button");
    button.textContent = `${mission.title} [${mission.tags.join(",")}]`;
    button.onclick = () => void startMission(mission);
    picker.append(button);
  });

  el<HTMLButtonElement>("send").onclick = () => void sendUtterance();
  el<HTMLInputElement>("utterance").addEventListener("keydown", (ev) => {
    if (ev.key === "Enter" && vm && inputEnabled(vm)) void sendUtterance();
  });
  el<HTMLButtonElement>("end-session").onclick = async () => {
    if (!sessionId || !vm) return;
    await api.endSession(sessionId);
    vm = userEndedSession(vm);
    render();
  };
  el<HTMLButtonElement>("rating-submit").onclick = async () => {
    if (!sessionId || !vm) return;
    const score = Number(
      (document.querySelector("input[name=score]:checked") as HTMLInputElement)
        ?.value ?? 0,
    );
    if (!(score >= 1 && score <= 5)) return;
    const comment = el<HTMLTextAreaElement>("rating-comment").value || null;
    try {
      await api.submitRating(sessionId, score, comment);
      vm = ratingSubmitted(vm);
      render();
    } catch (err) {
      el("rating-error").textContent = String(err);
    }
  };
  // the mic button is a stub: typed text stands in for speech
  el<HTMLButtonElement>("mic").onclick = () => {
    el("status").textContent = "voice input is not wired up; please type";
  };
}

async function sendUtterance() {
  if (!sessionId || !vm || !inputEnabled(vm)) return;
  const input = el<HTMLInputElement>("utterance");
  const text = input.value.trim();
  if (!text) return;
  input.value = "";
  vm = localUtterance(vm, text);
  render();
  try {
    await api.sendUtterance(sessionId, text);
  } catch (err) {
    el("status").textContent = `error: ${String(err)}`;
  }
}

void boot();
