"""
Following an implicit curve and collecting the zeros of a side function.

The unit circle is traced from (1, 0) counter-clockwise. Along the way the
tracker watches w(x, y) = Re((x + iy)^4), which changes sign eight times on
the circle, and reports every crossing as a refined point on the curve.
The run ends when the curve closes on itself.
"""

import math

import numpy as np

from gradcont.tracker import ImplicitCurve, TrackerConfig, follow


def w(z):
    x, y = z
    return x**4 - 6 * x * x * y * y + y**4


circle = ImplicitCurve(lambda z: [z[0] ** 2 + z[1] ** 2 - 1.0],
                       lambda z: [[2 * z[0], 2 * z[1]]], w)

res = follow(circle, 0, [1.0, 0.0], 1, cfg=TrackerConfig(ell_max=20), record_trace=True)

print(f"termination: {res.termination.kind} after arclength {res.termination.arclen:.6f} "
      f"(2 pi = {2 * math.pi:.6f})")
steps = [r for r in res.trace if r[4] == "step"]
print(f"{len(steps)} accepted steps, largest step {max(r[1] for r in steps):.3f}")

print("\nzeros of w in the order they were met:")
for ev in res.zeros:
    angle = math.degrees(math.atan2(ev.z[1], ev.z[0])) % 360
    print(f"  angle {angle:7.3f} deg   |w| = {abs(ev.w):.1e}")

# every crossing sits at an odd multiple of 22.5 degrees
angles = np.array([math.atan2(ev.z[1], ev.z[0]) % (2 * math.pi) for ev in res.zeros])
print("\nmax distance to the exact angles:",
      f"{np.abs(np.sort(angles) - np.pi / 8 * (2 * np.arange(8) + 1)).max():.1e}")
