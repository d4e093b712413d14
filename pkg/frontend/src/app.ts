// Single-page chat client: role selection, goal card or KB panel, transcript,
// constrained act composer, and success/failure feedback. One tab, one
// session; all state beyond the session id lives on the server.

import * as api from "./api.js";
import { composeAct, composeBooking, composerOptions, validateAct } from "./composer.js";
import { renderAct } from "./templates.js";
import { KbRow, Schema, SessionView } from "./types.js";

let schema: Schema;
let session: SessionView | null = null;
let pollTimer: number | undefined;

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function setText(id: string, text: string) {
  el(id).textContent = text;
}

function option(value: string): HTMLOptionElement {
  const o = document.createElement("option");
  o.value = value;
  o.textContent = value;
  return o;
}

function renderTranscript(view: SessionView) {
  const list = el<HTMLUListElement>("transcript");
  list.innerHTML = "";
  for (const entry of view.transcript) {
    const li = document.createElement("li");
    li.className = entry.act.speaker;
    li.textContent = `${entry.act.speaker}: ${entry.text || renderAct(entry.act)}`;
    list.appendChild(li);
  }
  list.scrollTop = list.scrollHeight;
}

function renderGoalCard(view: SessionView) {
  const card = el("goal-card");
  if (!view.goal) {
    card.hidden = true;
    return;
  }
  card.hidden = false;
  const lines = Object.entries(view.goal.constraints)
    .map(([slot, value]) => `${slot}: ${value}`);
  lines.push(`requests: ${view.goal.requests.join(", ")}`);
  el("goal-body").textContent = lines.join("\n");
}

function renderKbPanel(view: SessionView) {
  const panel = el("kb-panel");
  const rows = view.kb_results ?? [];
  if (view.role !== "human_agent") {
    panel.hidden = true;
    return;
  }
  panel.hidden = false;
  const table = el<HTMLTableElement>("kb-table");
  table.innerHTML = "";
  const columns = ["moviename", "theater", "city", "date", "starttime", "price",
    "numberofpeople", "video_format"];
  const head = table.insertRow();
  for (const c of columns) {
    const th = document.createElement("th");
    th.textContent = c;
    head.appendChild(th);
  }
  for (const row of rows.slice(0, 12)) {
    const tr = table.insertRow();
    tr.addEventListener("click", () => bookRow(row));
    for (const c of columns) {
      tr.insertCell().textContent = row[c] ?? "";
    }
  }
}

function refreshComposer(view: SessionView) {
  const options = composerOptions(view.role, schema, view.goal, view.kb_results);
  const intentSel = el<HTMLSelectElement>("intent");
  const slotSel = el<HTMLSelectElement>("slot");
  const valueSel = el<HTMLSelectElement>("value");
  const previous = intentSel.value;
  intentSel.innerHTML = "";
  options.intents.forEach((i) => intentSel.appendChild(option(i)));
  if (options.intents.includes(previous)) intentSel.value = previous;

  const refreshSlots = () => {
    const intent = intentSel.value;
    slotSel.innerHTML = "";
    valueSel.innerHTML = "";
    const slots = intent === "request" ? options.requestSlots : options.informSlots;
    const needsSlot = intent === "request" || intent === "inform" || intent === "deny";
    slotSel.disabled = !needsSlot;
    valueSel.disabled = intent === "request" || !needsSlot;
    if (needsSlot) {
      slots.forEach((s) => slotSel.appendChild(option(s)));
      if (intent !== "request") {
        options.valuesFor(slotSel.value).forEach((v) => valueSel.appendChild(option(v)));
      }
    }
  };
  intentSel.onchange = refreshSlots;
  slotSel.onchange = () => {
    valueSel.innerHTML = "";
    if (intentSel.value !== "request") {
      options.valuesFor(slotSel.value).forEach((v) => valueSel.appendChild(option(v)));
    }
  };
  refreshSlots();
  el<HTMLButtonElement>("book").hidden = !options.canBook;
}

function applyView(view: SessionView) {
  session = view;
  setText("status", `session ${view.id.slice(0, 8)} | role ${view.role} | turn ${view.turn} | ${view.status}`);
  renderTranscript(view);
  renderGoalCard(view);
  renderKbPanel(view);
  refreshComposer(view);
  const closed = view.status !== "open";
  el<HTMLButtonElement>("send").disabled = closed;
  el("feedback").hidden = !closed || view.feedback !== undefined;
  if (view.outcome) {
    setText("banner", view.outcome.success
      ? `Success in ${view.outcome.turns} turns (reward ${view.outcome.cumulative_reward})`
      : `Failed after ${view.outcome.turns} turns (reward ${view.outcome.cumulative_reward})`);
  } else {
    setText("banner", closed ? "Dialogue closed." : "");
  }
}

async function poll() {
  if (!session) return;
  try {
    applyView(await api.getSession(session.id));
  } catch (err) {
    setText("banner", String(err));
  }
}

async function start(role: "human_user" | "human_agent") {
  schema = schema ?? (await api.getSchema());
  applyView(await api.createSession(role));
  el("setup").hidden = true;
  el("chat").hidden = false;
  window.clearInterval(pollTimer);
  pollTimer = window.setInterval(poll, 1000);
}

async function send() {
  if (!session) return;
  const intent = el<HTMLSelectElement>("intent").value;
  const slot = el<HTMLSelectElement>("slot").disabled ? null : el<HTMLSelectElement>("slot").value;
  const value = el<HTMLSelectElement>("value").disabled ? null : el<HTMLSelectElement>("value").value;
  const act = composeAct(session.role, intent, slot, value);
  const problems = validateAct(act, schema);
  if (problems.length) {
    setText("banner", problems.join("; "));
    return;
  }
  try {
    await api.postAct(session.id, act);
    await poll();
  } catch (err) {
    setText("banner", String(err));
  }
}

async function bookRow(row: KbRow) {
  if (!session || session.role !== "human_agent") return;
  try {
    await api.postAct(session.id, composeBooking(row));
    await poll();
  } catch (err) {
    setText("banner", String(err));
  }
}

async function feedback(success: boolean) {
  if (!session) return;
  await api.postFeedback(session.id, success);
  await poll();
}

export function wire() {
  el("start-user").addEventListener("click", () => start("human_user"));
  el("start-agent").addEventListener("click", () => start("human_agent"));
  el("send").addEventListener("click", send);
  el("fb-success").addEventListener("click", () => feedback(true));
  el("fb-failure").addEventListener("click", () => feedback(false));
}

if (typeof document !== "undefined" && document.getElementById("setup")) {
  wire();
}
