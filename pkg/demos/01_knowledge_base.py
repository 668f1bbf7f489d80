"""Build a knowledge base from manifests and validate every referenced tensor.

Generates a small synthetic example set first, then walks the public KB
surface: build, summary queries, lazy tensor access, full validation.
"""

import tempfile
from pathlib import Path

from graspkit import build, gen_self_consistency, validate

with tempfile.TemporaryDirectory() as scratch:
    info = gen_self_consistency(Path(scratch) / "kb")

    kb = build([info["manifest"]])
    print(f"records: {len(kb)}")
    print(f"ids: {kb.ids()}")
    for source, ids in sorted(kb.by_source.items()):
        print(f"  {source}: {len(ids)}")

    # Tensors load lazily and are cached after the first touch.
    example = kb.get_example("sim_drawer")
    print(f"sim_drawer features: {example.contact_features().values.shape}")
    print(f"sim_drawer pose: {example.pose()}")

    report = validate(kb)
    print(f"validation: {len(report.entries)} records, {len(report.failures)} failures")
