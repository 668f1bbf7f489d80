"""Training-side evaluators: pose regression loss and masked-digit modeling."""

import math
import random

from graspkit import mask_pose_parameters, mlm_cross_entropy, pose_loss, unmask
from graspkit.fixtures import random_pose_text
from graspkit.metrics import PoseLossConfig

pose = {"contact_2d": [0.3, 0.7], "dir_up": [0.0, 0.0, 1.0], "dir_forward": [1.0, 0.0, 0.0]}
tilted = {"contact_2d": [0.35, 0.65], "dir_up": [0.0, 0.6, 0.8], "dir_forward": [1.0, 0.0, 0.0]}

print(f"loss(pose, pose)   = {pose_loss(pose, pose)}")
print(f"loss(pose, tilted) = {pose_loss(pose, tilted):.6f}")
print(f"  direction term doubled: {pose_loss(pose, tilted, PoseLossConfig(lambda2=2.0)):.6f}")

# Digit masking hides numeric pose content behind a sentinel token.
text = random_pose_text(random.Random(5))
masked = mask_pose_parameters(text, mask_fraction=0.5, seed=11)
print()
print(f"original: {text.splitlines()[0]}")
print(f"masked:   {masked.masked_text.splitlines()[0]}")
print(f"roundtrip ok: {unmask(masked) == text}")

# A uniform guess over the ten digits costs exactly ln 10 per masked digit.
uniform = [{str(d): 0.1 for d in range(10)} for _ in masked.targets]
ce = mlm_cross_entropy(masked.targets, uniform)
print(f"uniform cross-entropy: {ce:.6f} = {len(masked.targets)} * ln 10"
      f" (ln 10 = {math.log(10):.6f})")
