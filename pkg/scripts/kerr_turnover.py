"""Numeric CFI versus squeezing for several Kerr strengths, printed as a table.

Truncation-limited points are marked with the relative change of the rates
between the last two truncations.
"""

import numpy as np

from fcsreadout import NumericProvider, cfi_gaussian
from fcsreadout.params import ModelParams

provider = NumericProvider(strict=False)
rs = np.linspace(0.0, 2.0, 9)
print("r      " + "".join(f"{'u2=' + format(u, 'g'):>18}" for u in (0.0, 1e-4, 1e-3)))
for r in rs:
    cells = []
    for u2 in (0.0, 1e-4, 1e-3):
        res = cfi_gaussian(provider, ModelParams(r=float(r), u2=u2), detail=True)
        flag = "" if res.diagnostics.get("converged", True) else f"~{res.diagnostics['truncation_change']:.0e}"
        cells.append(f"{res.value:11.2f}{flag:>7}")
    print(f"{r:<6.2f} " + "".join(cells))
