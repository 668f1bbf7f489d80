"""Three-priority retrieval: name match, dense embedding, expanded sources.

The generated fixture plants instruction embeddings at known cosines, so
each query below exercises exactly one priority tier.
"""

import tempfile
from pathlib import Path

from graspkit import Instruction, build, gen_priority_kb, hybrid_retrieve, load_tensor

with tempfile.TemporaryDirectory() as scratch:
    info = gen_priority_kb(Path(scratch) / "kb")
    kb = build([info["manifest"]])

    def show(tag, instruction, embedding_path=None):
        embedding = load_tensor(embedding_path) if embedding_path else None
        candidates, trace = hybrid_retrieve(kb, Instruction(instruction, embedding=embedding))
        print(f"{tag}: '{instruction}'")
        print(f"  priority: {trace.priority_used}")
        for example_id, score, kind in trace.scored[:3]:
            print(f"  {kind:>6} {score:8.4f} {example_id}")
        print(f"  candidates: {candidates}")

    # P1: the instruction names an object in the KB, BM25 over instructions.
    show("P1", info["queries"]["p1"]["instruction"])
    # P2: no name match, best simulation cosine 0.91 clears the 0.75 threshold.
    show("P2", info["queries"]["p2"]["instruction"], info["queries"]["p2"]["embedding"])
    # P3: best simulation cosine 0.40 falls short, all sources compete.
    show("P3", info["queries"]["p3"]["instruction"], info["queries"]["p3"]["embedding"])
