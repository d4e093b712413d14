// Deterministic act-to-text templates, mirroring the server-side renderer so
// transcripts read identically wherever they are displayed.

import { DialogueAct, NO_MATCH } from "./types.js";

const AGENT_REQUESTS: Record<string, string> = {
  theater: "Which theater would you like?",
  city: "Which city would you like?",
  date: "What date would you like to watch it?",
  starttime: "What time would you like to see it?",
  moviename: "Which movie would you like to watch?",
  numberofpeople: "How many tickets do you need?",
  video_format: "Do you want a standard, 3d or imax showing?",
  price: "What price range are you looking for?",
};

const USER_INFORMS: Record<string, string> = {
  date: "I want to set it up {value}.",
  city: "I want to watch at {value}.",
  numberofpeople: "I want {value} tickets please!",
  moviename: "I want to watch {value}.",
  starttime: "I would like to see it at {value}.",
  theater: "I want to watch it at {value}.",
};

const USER_REQUESTS: Record<string, string> = {
  theater: "Which theater is available?",
  starttime: "What time is it playing?",
  price: "How much does it cost?",
  ticket: "Could you help me to book the tickets?",
};

const PLAIN: Record<string, string> = {
  greeting: "Hello!",
  closing: "Bye.",
  thanks: "Thank you.",
  not_sure: "I am not sure about that.",
  confirm_question: "Can I confirm that?",
  confirm_answer: "Yes, that is right.",
  multiple_choice: "There are several options.",
  welcome: "You are welcome.",
};

function bookingConfirmation(slots: Record<string, string>): string {
  if (slots["taskcomplete"] === NO_MATCH) {
    return "Sorry, I could not find a ticket matching your constraints.";
  }
  const parts = [`Great - I was able to purchase ${slots["numberofpeople"] ?? "the"} tickets for you`];
  if (slots["moviename"]) parts.push(`to see ${slots["moviename"]}`);
  if (slots["date"]) parts.push(slots["date"]);
  if (slots["theater"]) parts.push(`at ${slots["theater"]} theater`);
  if (slots["city"]) parts.push(`in ${slots["city"]}`);
  if (slots["starttime"]) parts.push(`at ${slots["starttime"]}`);
  return parts.join(" ") + ".";
}

export function renderAct(act: DialogueAct): string {
  const informs = act.inform_slots ?? {};
  const requests = [...(act.request_slots ?? [])].sort();
  const informKeys = Object.keys(informs).sort();

  if (act.intent === "request" && act.speaker === "agent" && requests.length) {
    const slot = requests[0];
    return AGENT_REQUESTS[slot] ?? `Which ${slot} would you like?`;
  }

  if (act.intent === "request" && act.speaker === "user") {
    const pieces = informKeys.map((slot) =>
      (USER_INFORMS[slot] ?? `${slot} is {value}.`).replace("{value}", informs[slot]));
    for (const slot of requests) {
      pieces.push(USER_REQUESTS[slot] ?? `What about the ${slot}?`);
    }
    if (pieces.length) return pieces.join(" ");
  }

  if (act.intent === "inform" && "taskcomplete" in informs && act.speaker === "agent") {
    return bookingConfirmation(informs);
  }

  if (act.intent === "inform" && informKeys.length) {
    const slot = informKeys[0];
    const value = informs[slot];
    if (act.speaker === "agent") {
      return value === NO_MATCH
        ? `Sorry, no ${slot} matches your constraints.`
        : `${value} is available.`;
    }
    return (USER_INFORMS[slot] ?? `${slot} is {value}.`).replace("{value}", value);
  }

  if (act.intent === "deny") {
    if (informKeys.length) {
      const slot = informKeys[0];
      return `No, I want the ${slot} to be ${informs[slot]}.`;
    }
    return "No, that is not right.";
  }

  if (act.intent in PLAIN) return PLAIN[act.intent];

  const kv = informKeys.map((k) => `${k}=${informs[k]}`).join(", ");
  const req = requests.join(", ");
  return `${act.intent}(${kv}${kv && req ? ";" : ""}${req})`;
}
