"""Rotation-candidate refinement: recover a planted observation rotation.

The fixture renders one reference splat set under each rotation candidate;
refine() re-renders the candidates and picks the one the observation
actually came from.
"""

import tempfile
from pathlib import Path

from graspkit import build, gen_planted_rotation, load_observation, make_rotation_candidates, refine

with tempfile.TemporaryDirectory() as scratch:
    info = gen_planted_rotation(Path(scratch) / "kb")
    kb = build([info["manifest"]])
    example = kb.get_example(info["reference_id"])
    cam = example.camera()
    candidates = make_rotation_candidates()
    print(f"candidates: {[c.label for c in candidates]}")

    for entry in info["observations"][:3]:
        obs = load_observation(entry["obs_dir"], normalize_features=kb.normalize_features)
        result = refine(example, obs.features, obs.mask, cam, candidates,
                        normalize=kb.normalize_features)
        best = result.best
        print(
            f"planted k={entry['k']} ({entry['label']}): "
            f"recovered k={best.candidate.index} ({best.candidate.label}), "
            f"imd={best.imd_k.imd_normalized:.6f}"
        )
        print(f"  refined pose contact: {best.pose.contact_2d}")
