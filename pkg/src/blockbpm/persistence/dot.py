"""Graphviz export for debugging: one digraph for the interaction view and
one per subject behavior, with deterministic node ordering."""

from __future__ import annotations

from ..model import Action, Normal, ProcessModel, Receive, Send, Timeout

__all__ = ["export_dot"]


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(model: ProcessModel) -> str:
    lines = ["digraph interaction {"]
    for s in model.subjects:
        shape = {"standard": "box", "multi": "box3d", "external": "component"}[s.kind.value]
        lines.append(f"  {_q(s.id)} [shape={shape} label={_q(s.name or s.id)}];")
    for c in model.channels:
        label = ",".join(sorted(c.message_ids))
        lines.append(f"  {_q(c.from_subject)} -> {_q(c.to_subject)} [label={_q(label)}];")
    lines.append("}")

    for s in model.subjects:
        if s.behavior is None:
            continue
        lines.append(f"digraph behavior_{s.id.replace('-', '_').replace(' ', '_')} {{")
        for st in s.behavior.states:
            if isinstance(st.kind, Send):
                desc = f"send {st.kind.message} to {st.kind.to_subject}"
            elif isinstance(st.kind, Receive):
                desc = "receive " + "|".join(b.label for b in st.kind.branches)
            else:
                desc = "do " + "|".join(st.kind.outcomes)
            marks = ("^" if st.is_start else "") + ("$" if st.is_end else "")
            lines.append(f"  {_q(st.id)} [shape=box label={_q(f'{marks}{st.label or st.id}: {desc}')}];")
        for t in s.behavior.transitions:
            if isinstance(t.kind, Timeout):
                label = f"timeout {t.kind.duration}"
                style = " style=dashed"
            else:
                label = t.kind.guard or ""
                style = ""
            lines.append(f"  {_q(t.from_state)} -> {_q(t.to_state)} [label={_q(label)}{style}];")
        lines.append("}")

    return "\n".join(lines) + "\n"
