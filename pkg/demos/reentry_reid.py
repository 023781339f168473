"""
Re-identifying a walker who leaves and comes back
=================================================

A track whose predicted box leaves the frame is handed to the feature
repository. When the same appearance shows up again it gets its old id back.
Without embeddings the tracker has no way to tell, and issues a new id.
"""

from maptrack import synth
from maptrack.scenarios import ids_for_agent, track_preset

seq = synth.generate(synth.preset("exit-reenter"))
visible = sorted(f for f, i, _ in seq.gt if i == 1)
gaps = [f for a, b in zip(visible, visible[1:]) if b - a > 1 for f in (a, b)]
print("agent 0 leaves after frame %d and returns at frame %d" % tuple(gaps))

for label, use_embeddings in [("with embeddings", True), ("motion only", False)]:
    results, _ = track_preset(seq, embeddings=use_embeddings)
    spans = {}
    for frame, hid in ids_for_agent(seq, results, agent=0):
        first, last = spans.get(hid, (frame, frame))
        spans[hid] = (min(first, frame), max(last, frame))
    print(f"{label:16s}", {hid: f"frames {a}-{b}" for hid, (a, b) in spans.items()})
