"""Template renderer turning dialogue acts into transcript text.

One deterministic template per (speaker, intent, slot) combination with a
readable key-value fallback; output is for transcripts and the chat UI only
and is never parsed back into acts.
"""

from __future__ import annotations

from .domain import AGENT, USER, NO_MATCH, DialogueAct

AGENT_REQUEST_TEMPLATES = {
    "theater": "Which theater would you like?",
    "city": "Which city would you like?",
    "date": "What date would you like to watch it?",
    "starttime": "What time would you like to see it?",
    "moviename": "Which movie would you like to watch?",
    "numberofpeople": "How many tickets do you need?",
    "video_format": "Do you want a standard, 3d or imax showing?",
    "price": "What price range are you looking for?",
}

USER_INFORM_TEMPLATES = {
    "date": "I want to set it up {value}.",
    "city": "I want to watch at {value}.",
    "numberofpeople": "I want {value} tickets please!",
    "moviename": "I want to watch {value}.",
    "starttime": "I would like to see it at {value}.",
    "theater": "I want to watch it at {value}.",
}

USER_REQUEST_TEMPLATES = {
    "theater": "Which theater is available?",
    "starttime": "What time is it playing?",
    "price": "How much does it cost?",
    "ticket": "Could you help me to book the tickets?",
}


def _booking_confirmation(slots: dict) -> str:
    if slots.get("taskcomplete") == NO_MATCH:
        return "Sorry, I could not find a ticket matching your constraints."
    parts = ["Great - I was able to purchase {} tickets for you".format(slots.get("numberofpeople", "the"))]
    if "moviename" in slots:
        parts.append("to see {}".format(slots["moviename"]))
    if "date" in slots:
        parts.append(slots["date"])
    if "theater" in slots:
        parts.append("at {} theater".format(slots["theater"]))
    if "city" in slots:
        parts.append("in {}".format(slots["city"]))
    if "starttime" in slots:
        parts.append("at {}".format(slots["starttime"]))
    return " ".join(parts) + "."


def render_act(act: DialogueAct) -> str:
    """Render one act to a display string; unknown shapes degrade readably."""
    informs = dict(act.inform_slots)
    requests = sorted(act.request_slots)

    if act.intent == "request" and act.speaker == AGENT and requests:
        slot = requests[0]
        return AGENT_REQUEST_TEMPLATES.get(slot, f"Which {slot} would you like?")

    if act.intent == "request" and act.speaker == USER:
        # Opening acts mix informs with the first request.
        pieces = [USER_INFORM_TEMPLATES.get(s, "{slot} is {value}.").format(slot=s, value=v)
                  for s, v in sorted(informs.items())]
        for slot in requests:
            pieces.append(USER_REQUEST_TEMPLATES.get(slot, f"What about the {slot}?"))
        if pieces:
            return " ".join(pieces)

    if act.intent == "inform" and "taskcomplete" in informs and act.speaker == AGENT:
        return _booking_confirmation(informs)

    if act.intent == "inform" and informs:
        slot, value = sorted(informs.items())[0]
        if act.speaker == AGENT:
            if value == NO_MATCH:
                return f"Sorry, no {slot} matches your constraints."
            return f"{value} is available."
        return USER_INFORM_TEMPLATES.get(slot, "{slot} is {value}.").format(slot=slot, value=value)

    if act.intent == "deny":
        if informs:
            slot, value = sorted(informs.items())[0]
            return f"No, I want the {slot} to be {value}."
        return "No, that is not right."

    plain = {
        "greeting": "Hello!",
        "closing": "Bye.",
        "thanks": "Thank you.",
        "not_sure": "I am not sure about that.",
        "confirm_question": "Can I confirm that?",
        "confirm_answer": "Yes, that is right.",
        "multiple_choice": "There are several options.",
        "welcome": "You are welcome.",
    }
    if act.intent in plain:
        return plain[act.intent]

    kv = ", ".join(f"{k}={v}" for k, v in sorted(informs.items()))
    req = ", ".join(requests)
    return f"{act.intent}({kv}{';' if kv and req else ''}{req})"
