// Constrained act composer: pickers only ever offer schema-valid choices, so
// every emitted act passes server-side validation by construction.

import { DialogueAct, KbRow, NO_MATCH, Schema, Speaker, UserGoal } from "./types.js";

export interface ComposerOptions {
  intents: string[];
  informSlots: string[];
  requestSlots: string[];
  valuesFor(slot: string): string[];
  canBook: boolean;
}

const USER_INTENTS = ["inform", "request", "deny", "thanks", "not_sure", "closing"];
const AGENT_INTENTS = ["request", "inform", "greeting", "confirm_question",
  "confirm_answer", "multiple_choice", "not_sure", "deny", "thanks", "closing"];

export function composerOptions(
  role: "human_user" | "human_agent",
  schema: Schema,
  goal: UserGoal | undefined,
  kbResults: KbRow[] | undefined,
): ComposerOptions {
  if (role === "human_user") {
    const constraintSlots = Object.keys(goal?.constraints ?? {}).sort();
    return {
      intents: USER_INTENTS.filter((i) => schema.intents.includes(i)),
      informSlots: constraintSlots,
      requestSlots: [...(goal?.requests ?? [])].sort(),
      valuesFor: (slot) => (goal && slot in goal.constraints ? [goal.constraints[slot]] : []),
      canBook: false,
    };
  }
  const rows = kbResults ?? [];
  return {
    intents: AGENT_INTENTS.filter((i) => schema.intents.includes(i)),
    informSlots: [...schema.requestable_slots],
    requestSlots: [...schema.informable_slots],
    valuesFor: (slot) => {
      const values = [...new Set(rows.map((r) => r[slot]).filter(Boolean))];
      return values.length ? values : [NO_MATCH];
    },
    canBook: true,
  };
}

export function composeAct(
  role: "human_user" | "human_agent",
  intent: string,
  slot: string | null,
  value: string | null,
): DialogueAct {
  const speaker: Speaker = role === "human_user" ? "user" : "agent";
  if (intent === "request" && slot) {
    return { speaker, intent, inform_slots: {}, request_slots: [slot] };
  }
  if ((intent === "inform" || intent === "deny") && slot && value !== null) {
    return { speaker, intent, inform_slots: { [slot]: value }, request_slots: [] };
  }
  return { speaker, intent, inform_slots: {}, request_slots: [] };
}

export function composeBooking(row: KbRow | null): DialogueAct {
  if (row === null) {
    return {
      speaker: "agent",
      intent: "inform",
      inform_slots: { taskcomplete: NO_MATCH, ticket: NO_MATCH },
      request_slots: [],
    };
  }
  return {
    speaker: "agent",
    intent: "inform",
    inform_slots: { ...row, taskcomplete: "booked", ticket: "booked" },
    request_slots: [],
  };
}

export function validateAct(act: DialogueAct, schema: Schema): string[] {
  const problems: string[] = [];
  if (!schema.intents.includes(act.intent)) {
    problems.push(`unknown intent ${act.intent}`);
  }
  for (const slot of Object.keys(act.inform_slots)) {
    if (!schema.slots.includes(slot)) problems.push(`unknown slot ${slot}`);
  }
  for (const slot of act.request_slots) {
    if (!schema.slots.includes(slot)) problems.push(`unknown slot ${slot}`);
  }
  if (act.intent === "request" && act.request_slots.length === 0) {
    problems.push("request needs a slot");
  }
  if (act.intent === "inform" && Object.keys(act.inform_slots).length === 0) {
    problems.push("inform needs a slot and value");
  }
  return problems;
}
