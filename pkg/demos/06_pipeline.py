"""Full query pipeline: retrieve, filter, match, gate, emit.

Runs the accept path (observation identical to a stored example) and
prints the structured result plus the generator prompt payload.
"""

import tempfile
from pathlib import Path

from graspkit import Instruction, build, gen_self_consistency, load_observation, run_query

with tempfile.TemporaryDirectory() as scratch:
    info = gen_self_consistency(Path(scratch) / "kb")
    kb = build([info["manifest"]])
    obs = load_observation(info["obs_dir"], normalize_features=kb.normalize_features)
    instr = Instruction(info["instruction"], embedding=obs.instruction_embedding)

    result = run_query(kb, instr, obs)
    print(f"retrieval priority: {result.trace.priority_used}")
    print(f"visual top: {result.visual_top}")
    print(f"matched: {result.matched_id}  imd={result.matched_imd.imd}  gate={result.gate}")
    print(f"output pose: {result.output_pose}")
    print()
    print("prompt payload:")
    print(result.prompt_payload)
