"""
Orderings on the UCI occupancy detection data
==============================================

Set NMIARMAX_OCCUPANCY_DIR to the folder holding datatraining.txt,
datatest.txt and datatest2.txt, then run this script.  It checks four
orderings: which input ranks first, single-input fits, three versus two
inputs, and ARMAX against its regularized and ARX relatives.
"""

import sys
import time

from nmiarmax import occupancy
from nmiarmax.errors import DataError

t0 = time.perf_counter()
try:
    checks = occupancy.reproduce()
except DataError as exc:
    print(exc)
    sys.exit(2)

# %%
for c in checks:
    print(f"({c.name}) {'holds' if c.passed else 'fails'}: {c.detail}")
print(f"{time.perf_counter() - t0:.1f} s")
