"""
Comparing model families on the same split
===========================================

ARMAX, ARX of several orders, ridge-regularized ARMAX and state-space models
are fitted on identical training rows and scored by free-run fit on the same
test sets.  Entries that cannot be fitted appear with an error note instead of
stopping the run.
"""

import os
from dataclasses import replace

from nmiarmax.pipeline import compare_models, load_config

HERE = os.path.dirname(os.path.abspath(__file__))
config = load_config(os.path.join(HERE, os.pardir, "fixtures", "office", "config.json"))

# %%
# Inputs chosen by the dependency ranking (light alone for this log).
print(compare_models(config).format_text())

# %%
# The same zoo with three explicit inputs.
three = replace(config, inputs=("Light", "CO2", "Occupancy"))
table = compare_models(three)
print(table.format_text())

# %%
# Wall time per entry, in configured order.
for row in table.rows:
    print(f"{row.label:<10}{row.wall_time * 1000:8.1f} ms")
