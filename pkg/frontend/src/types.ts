// Wire types matching the session service's JSON shapes.

export type Speaker = "agent" | "user";

export interface DialogueAct {
  speaker: Speaker;
  intent: string;
  inform_slots: Record<string, string>;
  request_slots: string[];
}

export interface UserGoal {
  constraints: Record<string, string>;
  requests: string[];
}

export interface Schema {
  intents: string[];
  slots: string[];
  informable_slots: string[];
  requestable_slots: string[];
}

export type KbRow = Record<string, string>;

export interface TranscriptEntry {
  act: DialogueAct;
  text: string;
}

export interface SessionView {
  id: string;
  role: "human_user" | "human_agent";
  status: "open" | "success" | "failure";
  turn: number;
  transcript: TranscriptEntry[];
  goal?: UserGoal;
  kb_results?: KbRow[];
  outcome?: { success: boolean; turns: number; cumulative_reward: number };
  feedback?: boolean;
}

export interface TurnReply {
  counterpart_act: TranscriptEntry | null;
  terminal: boolean;
  turn: number;
  outcome?: { success: boolean; turns: number; cumulative_reward: number };
}

export const NO_MATCH = "no match available";
export const BOOKED = "booked";
