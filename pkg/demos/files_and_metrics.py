"""
From MOT files to metrics
=========================

Write a synthetic sequence in MOT format, track it from the files alone as the
command-line tool would, and score the result.
"""

import tempfile
from pathlib import Path

from maptrack import metrics, synth
from maptrack.io_formats import read_embeddings, read_mot_detections, read_raw_counts, read_seqinfo, write_mot_results
from maptrack.pipeline import flatten_results, run_sequence

out = Path(tempfile.mkdtemp())
paths = synth.generate(synth.preset("static-crowd")).write(out)
print("wrote", ", ".join(p.name for p in paths.values()))

meta = read_seqinfo(paths["seqinfo"])
embeddings = read_embeddings(paths["emb"], read_raw_counts(paths["det"]))
frames = read_mot_detections(paths["det"], min_confidence=0.25, embeddings=embeddings)
results = run_sequence(frames, meta.frame_size, frame_count=meta.frame_count)
write_mot_results(out / "res.txt", flatten_results(results))

print((out / "res.txt").read_text().splitlines()[0])
print(metrics.format_report(metrics.evaluate(paths["gt"], out / "res.txt")))
