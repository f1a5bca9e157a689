"""Quantitative refutation of the constant-interface ansatz.

If the interface between bunching and customization were the straight
anti-diagonal segment t = const, the customized-region solve would have to
carry a vertical gradient jump of 9/10 while integrating u_x2x2 <= 3 over
the remaining height allows at most 3(1 - sqrt(2/3)) < 3/5.  The solver
locates where the construction actually breaks: directional convexity
fails strictly inside the region.
"""

import json

import numpy as np

from screenopt import ModelParams, refute_rc

print(f"analytic bound: 3(1 - sqrt(2/3)) = {3 * (1 - np.sqrt(2 / 3)):.6f} < 3/5")
print(f"required vertical gradient jump: 9/10")
print()

for a in (0.5, 1.0, 2.0):
    params = ModelParams(a=a, n=128)
    report = refute_rc(params)
    print(
        f"a={a:<4} verdict: {report.verdict:>20}  "
        f"min u_x1x1 = {report.min_uxx:8.3f} (tolerance -{report.convexity_tol:.3f})  "
        f"u_x2 near x' = {report.ux2_at_xprime:.4f}"
    )

report = refute_rc(ModelParams(a=1.0, n=128))
print()
print("full a=1 report:")
print(json.dumps(report.to_json_dict(), indent=2))
